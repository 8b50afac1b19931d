"""Dense real vectors, inner products, and p-norms with their duals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EUCLIDEAN",
    "NormSpec",
    "as_vector",
    "check_exponent",
    "dual_exponent",
    "inner",
    "p_norm",
]


def as_vector(x) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float64 array of length >= 1."""
    w = np.asarray(x, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ValueError(f"expected a 1-d vector of length >= 1, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("vector entries must be finite")
    return w


def check_exponent(p: float) -> float:
    p = float(p)
    # p = 1 and p = inf are rejected: the squared p-norm potential loses
    # strong convexity there and every dual-exponent formula degenerates.
    if not (1.0 < p < np.inf):
        raise ValueError(f"norm exponent must lie in (1, inf), got {p}")
    return p


def inner(w, v) -> float:
    """Euclidean pairing sum_j w(j) v(j)."""
    w, v = as_vector(w), as_vector(v)
    if w.shape != v.shape:
        raise ValueError(f"dimension mismatch: {w.shape[0]} vs {v.shape[0]}")
    return float(w @ v)


def p_norm(w, p: float) -> float:
    """(sum_j |w(j)|^p)^(1/p) for 1 < p < inf."""
    w = as_vector(w)
    p = check_exponent(p)
    return float(np.linalg.norm(w, ord=p))


def dual_exponent(p: float) -> float:
    """The exponent q with 1/p + 1/q = 1."""
    p = check_exponent(p)
    return p / (p - 1.0)


@dataclass(frozen=True)
class NormSpec:
    """A p-norm on R^d, together with its dual."""

    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "p", check_exponent(self.p))

    @property
    def dual(self) -> "NormSpec":
        return NormSpec(dual_exponent(self.p))

    def __call__(self, w) -> float:
        return p_norm(w, self.p)


EUCLIDEAN = NormSpec(2.0)
