"""Theorem-level verifiers: rate fitting, bound evaluation, identity
residuals, the non-strong-smoothness witness, and pass/fail verdicts.

Verdicts on Monte Carlo curves use 2x standard-error margins: a claim that
only holds (or only fails) inside the error band is reported Inconclusive
rather than Fail, since the underlying statements concern exact
expectations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import EUCLIDEAN, NormSpec, as_vector, dual_exponent, p_norm
from .losses import LossModel
from .mirror_maps import MirrorMap, pnorm_bregman, pnorm_gradient
from .sources import DiscreteFiniteSource, Sample, minimizer, population_gradient
from .engine import (
    ExpectationCurve,
    MonteCarloResult,
    ResolvedConstants,
    StepSchedule,
    omd_step,
)

__all__ = [
    "RateFit",
    "fit_rate",
    "fit_decay_rate",
    "BoundBracket",
    "linear_rate_bracket",
    "nonconvergence_floor",
    "key_identity_residual",
    "duality_residual",
    "nonsmoothness_witness",
    "cocoercivity_margin",
    "Verdict",
    "VerdictReport",
    "ExperimentResult",
    "theorem_verdict",
]


# -- rate fitting -----------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    t_min: int
    t_max: int
    n_points: int


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), r2


def _curve_window(curve: ExpectationCurve, t_min: int, t_max: int):
    sel = (curve.checkpoints >= t_min) & (curve.checkpoints <= t_max)
    t = curve.checkpoints[sel].astype(np.float64)
    m = curve.mean[sel]
    if t.size < 4:
        raise ValueError(f"need at least 4 checkpoints in [{t_min}, {t_max}], found {t.size}")
    if not (m > 0.0).all():
        raise ValueError("rate fits need strictly positive means in the window")
    return t, m


def fit_rate(curve: ExpectationCurve, t_min: int, t_max: int) -> RateFit:
    """Least-squares line through (log t, log mean): a power-law exponent."""
    t, m = _curve_window(curve, t_min, t_max)
    slope, intercept, r2 = _fit_line(np.log(t), np.log(m))
    return RateFit(slope, intercept, r2, int(t_min), int(t_max), t.size)


def fit_decay_rate(curve: ExpectationCurve, t_min: int, t_max: int) -> RateFit:
    """Least-squares line through (t, log mean): a per-iteration geometric rate."""
    t, m = _curve_window(curve, t_min, t_max)
    slope, intercept, r2 = _fit_line(t, np.log(m))
    return RateFit(slope, intercept, r2, int(t_min), int(t_max), t.size)


# -- theoretical bounds -------------------------------------------------------------

@dataclass(frozen=True)
class BoundBracket:
    """Geometric lower/upper envelopes for the zero-variance constant-step regime.

    ``steps`` counts update steps, so an iterate with index t corresponds to
    steps = t - 1.
    """

    steps: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma_psi: float
    smooth_L: float
    sigma_f: float
    eta1: float
    d1: float


def linear_rate_bracket(
    sigma_psi: float,
    smooth_L: float,
    sigma_f: float,
    eta1: float,
    d1: float,
    steps,
) -> BoundBracket:
    if not eta1 > 0.0:
        raise ValueError("eta1 must be positive")
    if not eta1 < sigma_psi / (2.0 * smooth_L):
        raise ValueError("bracket needs eta1 < sigma_psi / (2 L)")
    if not sigma_f * eta1 < 2.0:
        raise ValueError("bracket needs sigma_f * eta1 < 2")
    if d1 < 0.0:
        raise ValueError("d1 must be nonnegative")
    steps = np.asarray(steps, dtype=np.int64)
    if (steps < 0).any():
        raise ValueError("step counts must be nonnegative")
    lo_factor = 1.0 - 2.0 * smooth_L * eta1 / sigma_psi
    hi_factor = 1.0 - 0.5 * sigma_f * eta1
    lower = lo_factor ** steps * d1
    upper = hi_factor ** steps * d1
    if (lower > upper + 1e-15 * max(d1, 1.0)).any():
        raise ValueError("inconsistent constants: lower envelope exceeds upper")
    return BoundBracket(steps, lower, upper, sigma_psi, smooth_L, sigma_f, eta1, d1)


def nonconvergence_floor(
    a: float,
    schedule: StepSchedule,
    d_ref: float,
    t0: int,
    T: int,
) -> float:
    """exp(-2a sum_{t=t0+1}^T eta_t) * d_ref — a certified floor under a
    summable schedule, valid while eta_t <= 1/(3a) from t0 on."""
    if not a > 0.0:
        raise ValueError("a must be positive")
    if d_ref < 0.0:
        raise ValueError("d_ref must be nonnegative")
    t0, T = int(t0), int(T)
    if t0 < 1 or T < t0:
        raise ValueError("need 1 <= t0 <= T")
    bound = 1.0 / (3.0 * a)
    etas = np.array([schedule(t) for t in range(t0, T + 1)])
    if (etas > bound + 1e-12).any():
        raise ValueError(f"floor bound needs eta_t <= 1/(3a) = {bound!r} for t >= t0")
    total = float(etas[1:].sum())  # t = t0 + 1 .. T
    return math.exp(-2.0 * a * total) * d_ref


# -- identity residuals ---------------------------------------------------------------

def key_identity_residual(
    mirror: MirrorMap,
    model: LossModel,
    source: DiscreteFiniteSource,
    w_t,
    eta: float,
    w_star=None,
) -> float:
    """|E_z[D(w*, w+)] - D(w*, w) - eta <w* - w, grad F(w)> - E_z[D(w, w+)]|,
    both sides as exact weighted sums over the support."""
    if not isinstance(source, DiscreteFiniteSource):
        raise ValueError("the exact one-step identity needs a discrete source")
    w_t = as_vector(w_t)
    w_star = minimizer(source, model) if w_star is None else as_vector(w_star)
    e_next = 0.0
    e_move = 0.0
    for prob, x, y in zip(source.probs, source.X, source.y):
        w_next = omd_step(mirror, model, w_t, x, float(y), eta)
        e_next += prob * mirror.bregman(w_star, w_next)
        e_move += prob * mirror.bregman(w_t, w_next)
    lhs = e_next - mirror.bregman(w_star, w_t)
    grad_f = population_gradient(source, model, w_t)
    rhs = eta * float((w_star - w_t) @ grad_f) + e_move
    return float(abs(lhs - rhs))


def duality_residual(p: float, w, w_tilde) -> float:
    """|D_p(w, wt) - D_q(grad_p(wt), grad_p(w))| with q the dual exponent of p."""
    p = float(p)
    if not (1.0 < p <= 2.0):
        raise ValueError(f"duality check requires p in (1, 2], got {p}")
    w, w_tilde = as_vector(w), as_vector(w_tilde)
    primal = pnorm_bregman(w, w_tilde, p)
    q = dual_exponent(p)
    dual = pnorm_bregman(pnorm_gradient(w_tilde, p), pnorm_gradient(w, p), q)
    return abs(primal - dual)


def nonsmoothness_witness(p: float, d: int, a: float) -> float:
    """Implied smoothness modulus 2 D_p(wt, w) / ||wt - w||_p^2 for a witness
    family that degenerates as a grows.

    The base point is the first coordinate vector, whose zero coordinates are
    exactly where the squared-p-norm Hessian blows up for p < 2; the probe
    perturbs them by alternating-sign increments of size 1/a (d - 1 of them,
    which distinguishes the even- and odd-d patterns).  For p = 2 the ratio
    is identically 1; for p < 2 it grows like a^(2-p), so no finite modulus
    works in dimension > 1.
    """
    p = float(p)
    if not (1.0 < p <= 2.0):
        raise ValueError(f"witness requires p in (1, 2], got {p}")
    d = int(d)
    if d < 2:
        raise ValueError("the witness needs dimension d >= 2")
    if not a >= 1.0:
        raise ValueError("the witness scale must satisfy a >= 1")
    w = np.zeros(d)
    w[0] = 1.0
    signs = np.array([(-1.0) ** j for j in range(d - 1)])
    w_tilde = w.copy()
    w_tilde[1:] = signs / a
    return 2.0 * pnorm_bregman(w_tilde, w, p) / p_norm(w_tilde - w, p) ** 2


def cocoercivity_margin(
    model: LossModel,
    z: Sample,
    w,
    w_tilde,
    L: float,
    dual_norm: NormSpec = EUCLIDEAN,
) -> float:
    """<w - wt, grad f(w,z) - grad f(wt,z)> - ||grad diff||_*^2 / L (>= 0 for
    convex losses that are L-strongly smooth)."""
    if not model.loss.convex:
        raise ValueError(f"co-coercivity needs a convex loss, got {model.loss!r}")
    if not L > 0.0:
        raise ValueError("L must be positive")
    w, w_tilde = as_vector(w), as_vector(w_tilde)
    dg = model.gradient(w, z.x, z.y) - model.gradient(w_tilde, z.x, z.y)
    dual_sq = float((np.abs(dg) ** dual_norm.p).sum() ** (2.0 / dual_norm.p))
    return float((w - w_tilde) @ dg) - dual_sq / L


# -- verdicts -----------------------------------------------------------------------

class Verdict(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class VerdictReport:
    tag: str
    verdict: Verdict
    details: dict


@dataclass
class ExperimentResult:
    """Everything a verdict rule may consult after a Monte Carlo experiment."""

    mc: MonteCarloResult
    constants: ResolvedConstants
    schedule: StepSchedule
    T: int
    d1: float
    kappa: float = 1.0

    @property
    def curve(self) -> ExpectationCurve:
        return self.mc.curve


def _margin_verdict(strict_pass: bool, strict_fail: bool) -> Verdict:
    if strict_pass:
        return Verdict.PASS
    if strict_fail:
        return Verdict.FAIL
    return Verdict.INCONCLUSIVE


def _at(curve: ExpectationCurve, t: int) -> tuple[float, float]:
    idx = np.nonzero(curve.checkpoints == t)[0]
    if idx.size != 1:
        raise ValueError(f"checkpoint t={t} not recorded")
    i = int(idx[0])
    return float(curve.mean[i]), float(curve.std_err[i])


def _first_checkpoint_at_least(curve: ExpectationCurve, t: int) -> int:
    idx = np.nonzero(curve.checkpoints >= t)[0]
    if idx.size == 0:
        raise ValueError(f"no checkpoint at or after t={t}")
    return int(curve.checkpoints[int(idx[0])])


def _verdict_linear_rate(res: ExperimentResult) -> VerdictReport:
    c = res.constants
    if c.sigma_f is None:
        raise ValueError("linear-rate verdict needs a resolvable sigma_f")
    eta1 = res.schedule(1)
    lo_log = math.log(1.0 - 2.0 * c.smooth_L * eta1 / c.sigma_psi)
    hi_log = math.log(1.0 - 0.5 * c.sigma_f * eta1)
    fit = fit_decay_rate(res.curve, 8, res.T)
    slope_ok = (lo_log - 0.02) <= fit.slope <= (hi_log + 0.02)
    sel = res.curve.checkpoints >= 8
    ts = res.curve.checkpoints[sel]
    bracket = linear_rate_bracket(c.sigma_psi, c.smooth_L, c.sigma_f, eta1, res.d1, ts - 1)
    mean = res.curve.mean[sel]
    se = res.curve.std_err[sel]
    inside = (mean >= bracket.lower - 2.0 * se) & (mean <= bracket.upper + 2.0 * se)
    verdict = Verdict.PASS if (slope_ok and inside.all()) else Verdict.FAIL
    return VerdictReport(
        "Thm3-linear-rate",
        verdict,
        {
            "slope": fit.slope,
            "slope_low": lo_log,
            "slope_high": hi_log,
            "bracket_contained": bool(inside.all()),
        },
    )


def _verdict_one_over_t(res: ExperimentResult) -> VerdictReport:
    t_min = max(32, res.T // 16)
    fit = fit_rate(res.curve, t_min, res.T)
    ok = (-1.25 <= fit.slope <= -0.75) and fit.r_squared >= 0.95
    return VerdictReport(
        "Thm2b-rate",
        Verdict.PASS if ok else Verdict.FAIL,
        {"slope": fit.slope, "r_squared": fit.r_squared, "t_min": t_min},
    )


def _verdict_lower_rate(res: ExperimentResult) -> VerdictReport:
    grid_start = _first_checkpoint_at_least(res.curve, max(1, res.T // 8))
    sel = res.curve.checkpoints >= grid_start
    ts = res.curve.checkpoints[sel].astype(np.float64)
    mean = res.curve.mean[sel]
    se = res.curve.std_err[sel]
    scaled = ts * mean
    ref = scaled[0]
    strict_pass = float((ts * (mean - 2.0 * se)).min()) >= 0.5 * float(ts[0] * (mean[0] + 2.0 * se[0]))
    strict_fail = float((ts * (mean + 2.0 * se)).min()) < 0.5 * float(ts[0] * (mean[0] - 2.0 * se[0]))
    point_pass = float(scaled.min()) >= 0.5 * float(ref)
    verdict = _margin_verdict(strict_pass, strict_fail)
    if verdict is Verdict.INCONCLUSIVE and point_pass:
        verdict = Verdict.PASS
    return VerdictReport(
        "Thm2a-lower",
        verdict,
        {"min_scaled": float(scaled.min()), "ref_scaled": float(ref), "grid_start": grid_start},
    )


def _verdict_convergence(res: ExperimentResult, tag: str, factor: float) -> VerdictReport:
    t_ref = _first_checkpoint_at_least(res.curve, 8)
    ref, ref_se = _at(res.curve, t_ref)
    final, final_se = _at(res.curve, int(res.curve.checkpoints[-1]))
    strict_pass = final + 2.0 * final_se <= factor * max(ref - 2.0 * ref_se, 0.0)
    strict_fail = final - 2.0 * final_se > factor * (ref + 2.0 * ref_se)
    return VerdictReport(
        tag,
        _margin_verdict(strict_pass, strict_fail),
        {"reference_t": t_ref, "reference": ref, "final": final, "factor": factor},
    )


def _verdict_necessity_sum(res: ExperimentResult) -> VerdictReport:
    t0 = 1
    d_ref, _ = _at(res.curve, t0 + 1)
    floor = nonconvergence_floor(res.constants.growth_a, res.schedule, d_ref, t0, res.T)
    final, final_se = _at(res.curve, res.T)
    ok = final >= 0.9 * floor - 2.0 * final_se
    return VerdictReport(
        "Thm2-necessity-sum",
        Verdict.PASS if ok else Verdict.FAIL,
        {"floor": floor, "final": final, "d_ref": d_ref},
    )


def _verdict_necessity_limit(res: ExperimentResult) -> VerdictReport:
    t_ref = _first_checkpoint_at_least(res.curve, 8)
    ref, ref_se = _at(res.curve, t_ref)
    sel = res.curve.checkpoints >= max(1, res.T // 8)
    mean = res.curve.mean[sel]
    se = res.curve.std_err[sel]
    thr = 0.25 * ref
    strict_pass = float((mean - 2.0 * se).min()) >= 0.25 * (ref + 2.0 * ref_se)
    strict_fail = float((mean + 2.0 * se).min()) < 0.25 * max(ref - 2.0 * ref_se, 0.0)
    return VerdictReport(
        "Thm2-necessity-limit",
        _margin_verdict(strict_pass, strict_fail),
        {"plateau_min": float(mean.min()), "threshold": thr, "reference_t": t_ref},
    )


def _verdict_almost_sure(res: ExperimentResult) -> VerdictReport:
    curve = res.curve
    values = res.mc.values
    t_ref = _first_checkpoint_at_least(curve, 16)
    i_ref = int(np.nonzero(curve.checkpoints == t_ref)[0][0])
    i_final = len(curve.checkpoints) - 1
    i_mid = int(np.nonzero(curve.checkpoints >= max(1, res.T // 4))[0][0])
    ref_vals = values[:, i_ref]
    final_vals = values[:, i_final]
    frac = float((final_vals <= 0.05 * ref_vals).mean())
    max_decreases = float(values[:, i_mid].max()) > float(final_vals.max())
    ok = frac >= 0.95 and max_decreases
    return VerdictReport(
        "Thm4-as",
        Verdict.PASS if ok else Verdict.FAIL,
        {"per_run_fraction": frac, "max_run_decreases": max_decreases, "reference_t": t_ref},
    )


_VERDICT_RULES = {
    "Thm3-linear-rate": _verdict_linear_rate,
    "Thm2b-rate": _verdict_one_over_t,
    "Thm2a-lower": _verdict_lower_rate,
    "Thm2-sufficiency": lambda res: _verdict_convergence(res, "Thm2-sufficiency", 0.1),
    "Thm1a-pnorm": lambda res: _verdict_convergence(res, "Thm1a-pnorm", 0.1),
    "Thm2-necessity-sum": _verdict_necessity_sum,
    "Thm2-necessity-probe": _verdict_necessity_sum,
    "Thm2-necessity-limit": _verdict_necessity_limit,
    "Thm4-as": _verdict_almost_sure,
}


def theorem_verdict(result: ExperimentResult, tag: str) -> VerdictReport:
    try:
        rule = _VERDICT_RULES[tag]
    except KeyError:
        raise ValueError(f"unknown theorem tag {tag!r}") from None
    report = rule(result)
    report.tag = tag
    return report
