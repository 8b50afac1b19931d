"""Scalar losses phi(a, y), their derivatives and curvature constants, and the
regularized per-sample objective f(w, z) = phi(<w, x>, y) + lam ||w||_2^2.

Derivative Lipschitz constants for the margin losses assume labels in
[-1, 1]; sample sources enforce that range for classification data.  All
value/derivative formulas accept scalars or numpy arrays in the first
argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "Loss",
    "LeastSquares",
    "Logistic",
    "Sigmoid",
    "SquaredHinge",
    "Huber",
    "LossModel",
    "LOSSES",
]


class Loss:
    convex: bool = True

    def value(self, a, y):
        raise NotImplementedError

    def derivative(self, a, y):
        """Partial derivative of value(a, y) in a."""
        raise NotImplementedError

    def lipschitz(self) -> float:
        """Lipschitz constant of derivative(., y) over the admissible labels."""
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class LeastSquares(Loss):
    def value(self, a, y):
        d = a - y
        return 0.5 * d * d

    def derivative(self, a, y):
        return a - y

    def lipschitz(self) -> float:
        return 1.0


class Logistic(Loss):
    """log(1 + exp(-a y)); curvature y^2/4 peaks at a y = 0."""

    def value(self, a, y):
        return np.logaddexp(0.0, -a * y)

    def derivative(self, a, y):
        return -y * expit(-a * y)

    def lipschitz(self) -> float:
        return 0.25


class Sigmoid(Loss):
    """1/(1 + exp(a y)); bounded but non-convex, so no convergence theorem applies."""

    convex = False

    # max |d^2/da^2 expit(-a y)| over a and |y| <= 1; equals sqrt(3)/18,
    # cross-checked by dense sampling of difference quotients.
    CURVATURE = 0.09622504486493762

    def value(self, a, y):
        return expit(-a * y)

    def derivative(self, a, y):
        s = expit(-a * y)
        return -y * s * (1.0 - s)

    def lipschitz(self) -> float:
        return self.CURVATURE


class SquaredHinge(Loss):
    """max(0, 1 - a y)^2 with labels in [-1, 1]."""

    def value(self, a, y):
        m = np.maximum(0.0, 1.0 - a * y)
        return m * m

    def derivative(self, a, y):
        return -2.0 * y * np.maximum(0.0, 1.0 - a * y)

    def lipschitz(self) -> float:
        return 2.0


class Huber(Loss):
    """Quadratic in |a - y| below 1, linear beyond; the derivative is a clipped residual."""

    def value(self, a, y):
        u = np.abs(a - y)
        return np.where(u < 1.0, 0.5 * u * u, u - 0.5)

    def derivative(self, a, y):
        return np.clip(a - y, -1.0, 1.0)

    def lipschitz(self) -> float:
        return 1.0


LOSSES = {
    "least_squares": LeastSquares,
    "logistic": Logistic,
    "sigmoid": Sigmoid,
    "squared_hinge": SquaredHinge,
    "huber": Huber,
}


@dataclass(frozen=True)
class LossModel:
    """A loss plus the l2 regularizer weight lam >= 0."""

    loss: Loss
    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"regularizer weight must be nonnegative, got {self.lam}")

    def f_value(self, w, x, y: float) -> float:
        w = np.asarray(w, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        a = float(x @ w)
        val = float(self.loss.value(a, y))
        if self.lam:
            val += self.lam * float(w @ w)
        return val

    def gradient(self, w, x, y: float) -> np.ndarray:
        """phi'(<w, x>, y) x + 2 lam w."""
        w = np.asarray(w, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if w.shape != x.shape:
            raise ValueError(f"dimension mismatch: {w.shape} vs {x.shape}")
        a = float(x @ w)
        g = float(self.loss.derivative(a, y)) * x
        if self.lam:
            g = g + (2.0 * self.lam) * w
        return g

    def smoothness_bound(self, radius: float) -> float:
        """2 (l_phi R^2 + lam) for sup ||x||_* <= R; valid for every sample."""
        if radius < 0.0:
            raise ValueError(f"radius must be nonnegative, got {radius}")
        return 2.0 * (self.loss.lipschitz() * radius * radius + self.lam)

    def sharp_smoothness_bound(self, radius: float) -> float:
        """The preferred per-sample modulus: R^2 + 2 lam for least squares
        (its Hessian is x x^T + 2 lam I), the generic bound otherwise."""
        if radius < 0.0:
            raise ValueError(f"radius must be nonnegative, got {radius}")
        if isinstance(self.loss, LeastSquares):
            return radius * radius + 2.0 * self.lam
        return self.smoothness_bound(radius)
