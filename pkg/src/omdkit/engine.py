"""The online mirror-descent iteration, step-size schedules, and a
deterministic Monte Carlo estimator of expected Bregman-distance curves.

Each Monte Carlo run owns a counter-based random stream keyed by
``base_seed + run_index``, so results are bit-identical regardless of how
runs are scheduled, and extending ``n_runs`` reproduces the existing runs
exactly.  Divergence (iterate norm beyond 1e12) freezes a run at its last
state and flags it instead of raising; such runs stay in the averages
unless explicitly excluded.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_vector
from .losses import LeastSquares, LossModel
from .mirror_maps import MirrorMap
from .sources import SampleSource, VarianceRegime, draw_arrays

__all__ = [
    "ConstantStep",
    "PolynomialDecay",
    "TheoremRate",
    "StepSchedule",
    "omd_step",
    "kaczmarz_step",
    "geometric_checkpoints",
    "Trajectory",
    "run_trajectory",
    "ExpectationCurve",
    "MonteCarloResult",
    "AllRunsDiverged",
    "monte_carlo_curve",
    "ResolvedConstants",
    "resolve_constants",
    "RegimeError",
    "assert_step_regime",
    "PROBE_TAGS",
    "KNOWN_TAGS",
]

DIVERGENCE_LIMIT = 1e12


def _check_iteration(t: int) -> int:
    t = int(t)
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    return t


@dataclass(frozen=True)
class ConstantStep:
    eta: float

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError("step size must be positive")

    def __call__(self, t: int) -> float:
        _check_iteration(t)
        return self.eta

    @property
    def limit_zero(self) -> bool:
        return False

    @property
    def sum_infinite(self) -> bool:
        return True

    @property
    def sum_squares_finite(self) -> bool:
        return False

    @property
    def max_step(self) -> float:
        return self.eta


@dataclass(frozen=True)
class PolynomialDecay:
    """eta_t = c * t^(-theta)."""

    c: float
    theta: float

    def __post_init__(self):
        if not self.c > 0.0:
            raise ValueError("decay coefficient must be positive")
        if self.theta < 0.0:
            raise ValueError("decay exponent must be nonnegative")

    def __call__(self, t: int) -> float:
        return self.c * float(_check_iteration(t)) ** (-self.theta)

    @property
    def limit_zero(self) -> bool:
        return self.theta > 0.0

    @property
    def sum_infinite(self) -> bool:
        return self.theta <= 1.0

    @property
    def sum_squares_finite(self) -> bool:
        return self.theta > 0.5

    @property
    def max_step(self) -> float:
        return self.c


@dataclass(frozen=True)
class TheoremRate:
    """eta_t = 4 / ((t + 1) sigma_f), the rate-optimal schedule under a linear control."""

    sigma_f: float

    def __post_init__(self):
        if not self.sigma_f > 0.0:
            raise ValueError("sigma_f must be positive")

    def __call__(self, t: int) -> float:
        return 4.0 / ((_check_iteration(t) + 1) * self.sigma_f)

    @property
    def limit_zero(self) -> bool:
        return True

    @property
    def sum_infinite(self) -> bool:
        return True

    @property
    def sum_squares_finite(self) -> bool:
        return True

    @property
    def max_step(self) -> float:
        return 2.0 / self.sigma_f


StepSchedule = ConstantStep | PolynomialDecay | TheoremRate


# -- single steps ---------------------------------------------------------------

def omd_step(mirror: MirrorMap, model: LossModel, w, x, y: float, eta: float) -> np.ndarray:
    """One dual-space step: grad_inv(grad(w) - eta * grad f(w, z))."""
    if not eta > 0.0:
        raise ValueError("step size must be positive")
    w = np.asarray(w, dtype=np.float64)
    return mirror.grad_inv(mirror.grad(w) - eta * model.gradient(w, x, y))


def kaczmarz_step(w, x, y: float, eta: float) -> np.ndarray:
    """The direct residual update w - eta (<w, x> - y) x."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return w - eta * ((float(w @ x) - y) * x)


# -- trajectories ---------------------------------------------------------------

def geometric_checkpoints(T: int) -> list[int]:
    """{1, 2, 4, ...} up to T, always including T."""
    T = int(T)
    if T < 1:
        raise ValueError("horizon must be >= 1")
    out = []
    k = 1
    while k <= T:
        out.append(k)
        k *= 2
    if out[-1] != T:
        out.append(T)
    return out


@dataclass
class Trajectory:
    checkpoints: np.ndarray
    bregman_to_optimum: np.ndarray
    iterate_norm: np.ndarray
    seed: int
    final_iterate: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _checked_checkpoints(checkpoints, T: int) -> list[int]:
    cps = [int(t) for t in checkpoints]
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing and nonempty")
    if cps[0] < 1 or cps[-1] > T:
        raise ValueError("checkpoints must lie in [1, T]")
    return cps


def run_trajectory(
    mirror: MirrorMap,
    model: LossModel,
    source: SampleSource,
    schedule: StepSchedule,
    w1,
    T: int,
    checkpoints,
    seed: int,
    w_star,
) -> Trajectory:
    """Iterate the dual update for T iterates (T - 1 samples), recording
    the Bregman distance to w_star and the iterate norm at each checkpoint."""
    T = int(T)
    if T < 1:
        raise ValueError("horizon must be >= 1")
    cps = _checked_checkpoints(checkpoints, T)
    w_star = as_vector(w_star)
    w = as_vector(w1).copy()
    rng = _rng(seed)
    if T > 1:
        X, Y = draw_arrays(source, rng, T - 1)
        etas = [float(schedule(t)) for t in range(1, T)]
    bregs = np.empty(len(cps))
    norms = np.empty(len(cps))
    norm_p = mirror.norm.p
    dual = mirror.grad(w)
    diverged = False
    diverged_at: int | None = None
    ci = 0
    gradient = model.gradient
    grad_inv = mirror.grad_inv
    for t in range(1, T + 1):
        if ci < len(cps) and cps[ci] == t:
            bregs[ci] = mirror.bregman(w_star, w)
            norms[ci] = float(np.linalg.norm(w, ord=norm_p))
            ci += 1
        if t == T or diverged:
            continue
        g = gradient(w, X[t - 1], float(Y[t - 1]))
        dual = dual - etas[t - 1] * g
        w = grad_inv(dual)
        peak = float(np.abs(w).max())
        if not peak <= DIVERGENCE_LIMIT:  # catches NaN as well
            diverged = True
            diverged_at = t + 1
    return Trajectory(
        checkpoints=np.asarray(cps, dtype=np.int64),
        bregman_to_optimum=bregs,
        iterate_norm=norms,
        seed=int(seed),
        final_iterate=w,
        diverged=diverged,
        diverged_at=diverged_at,
    )


# -- Monte Carlo curves -----------------------------------------------------------

@dataclass
class ExpectationCurve:
    checkpoints: np.ndarray
    mean: np.ndarray
    std_err: np.ndarray
    run_count: int


@dataclass
class MonteCarloResult:
    curve: ExpectationCurve
    values: np.ndarray  # (n_runs, n_checkpoints) per-run Bregman distances
    diverged_runs: list[int] = field(default_factory=list)

    @property
    def n_runs(self) -> int:
        return self.values.shape[0]


class AllRunsDiverged(RuntimeError):
    pass


def _one_run(args) -> tuple[np.ndarray, bool]:
    mirror, model, source, schedule, w1, T, cps, seed, w_star = args
    traj = run_trajectory(mirror, model, source, schedule, w1, T, cps, seed, w_star)
    return traj.bregman_to_optimum, traj.diverged


def default_workers() -> int:
    env = os.environ.get("OMDKIT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def monte_carlo_curve(
    mirror: MirrorMap,
    model: LossModel,
    source: SampleSource,
    schedule: StepSchedule,
    w1,
    T: int,
    checkpoints,
    n_runs: int,
    base_seed: int,
    w_star,
    workers: int | None = None,
    exclude_diverged: bool = False,
) -> MonteCarloResult:
    """Aggregate n_runs independent trajectories; run i is seeded base_seed + i.

    Aggregation is a fold in run-index order, so the result is independent of
    how runs are scheduled across workers.
    """
    n_runs = int(n_runs)
    if n_runs < 2:
        raise ValueError("need at least 2 runs for a standard error")
    cps = _checked_checkpoints(checkpoints, int(T))
    jobs = [
        (mirror, model, source, schedule, w1, int(T), cps, base_seed + i, w_star)
        for i in range(n_runs)
    ]
    workers = default_workers() if workers is None else max(1, int(workers))
    values = np.empty((n_runs, len(cps)))
    diverged: list[int] = []
    if workers == 1:
        results = map(_one_run, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_one_run, jobs, chunksize=max(1, n_runs // (4 * workers)))
    for i, (vals, div) in enumerate(results):
        values[i] = vals
        if div:
            diverged.append(i)
    if workers > 1:
        pool.shutdown()
    if len(diverged) == n_runs:
        raise AllRunsDiverged(f"all {n_runs} runs exceeded the divergence guard")
    keep = np.ones(n_runs, dtype=bool)
    if exclude_diverged and diverged:
        keep[diverged] = False
    kept = values[keep]
    mean = kept.mean(axis=0)
    std_err = kept.std(axis=0, ddof=1) / np.sqrt(kept.shape[0])
    curve = ExpectationCurve(
        checkpoints=np.asarray(cps, dtype=np.int64),
        mean=mean,
        std_err=std_err,
        run_count=int(kept.shape[0]),
    )
    return MonteCarloResult(curve=curve, values=values, diverged_runs=diverged)


# -- constants and schedule regimes ------------------------------------------------

@dataclass(frozen=True)
class ResolvedConstants:
    """Geometry/loss constants an experiment resolves before running.

    ``sigma_f`` is the Bregman-sense strong-convexity constant of the risk
    (only defined when the mirror map is strongly smooth); ``growth_a`` is
    the contraction constant 2 L_F / sigma_psi used by non-convergence
    floors.
    """

    sigma_psi: float
    smooth_L: float
    smooth_L_generic: float
    risk_L: float
    sigma_f_norm: float
    sigma_f: float | None
    lambda_min: float | None
    radius: float
    growth_a: float
    map_smoothness: float | None


def resolve_constants(mirror: MirrorMap, model: LossModel, source: SampleSource) -> ResolvedConstants:
    R = source.radius(mirror.norm.dual)
    sigma_psi = mirror.strong_convexity()
    L = model.sharp_smoothness_bound(R)
    L_gen = model.smoothness_bound(R)
    lambda_min: float | None = None
    if isinstance(model.loss, LeastSquares):
        eigs = np.linalg.eigvalsh(source.covariance())
        lambda_min = float(eigs[0])
        sigma_f_norm = lambda_min + 2.0 * model.lam
        # D_F <= (lam_max/2) ||.||_2^2 <= (lam_max/2) ||.||_p^2 for p <= 2.
        risk_L = float(eigs[-1]) + 2.0 * model.lam
    else:
        sigma_f_norm = 2.0 * model.lam
        risk_L = L
    L_psi = mirror.smoothness()
    sigma_f = 2.0 * sigma_f_norm / L_psi if (L_psi is not None and sigma_f_norm > 0.0) else None
    return ResolvedConstants(
        sigma_psi=sigma_psi,
        smooth_L=L,
        smooth_L_generic=L_gen,
        risk_L=risk_L,
        sigma_f_norm=sigma_f_norm,
        sigma_f=sigma_f,
        lambda_min=lambda_min,
        radius=R,
        growth_a=2.0 * risk_L / sigma_psi,
        map_smoothness=L_psi,
    )


class RegimeError(RuntimeError):
    """A theorem-tagged experiment was configured outside the theorem's regime."""


PROBE_TAGS = {"Thm2-necessity-sum", "Thm2-necessity-probe", "Thm2-necessity-limit"}
KNOWN_TAGS = PROBE_TAGS | {
    "Thm3-linear-rate",
    "Thm2b-rate",
    "Thm2a-lower",
    "Thm2-sufficiency",
    "Thm1a-pnorm",
    "Thm4-as",
}


def assert_step_regime(
    tag: str,
    schedule: StepSchedule,
    constants: ResolvedConstants,
    kappa: float = 1.0,
    violation_probe: bool = False,
    variance: VarianceRegime | None = None,
) -> None:
    """Refuse schedules outside the regime the tagged theorem requires.

    Probe tags intentionally run non-convergent schedules and therefore
    *require* the violation_probe flag; for the other tags the flag disables
    the assertions instead.
    """
    if tag not in KNOWN_TAGS:
        raise RegimeError(f"unknown theorem tag {tag!r}")
    if tag in PROBE_TAGS:
        if not violation_probe:
            raise RegimeError(f"{tag} runs a non-convergent schedule; set violation_probe")
        if tag in ("Thm2-necessity-sum", "Thm2-necessity-probe"):
            if schedule.sum_infinite:
                raise RegimeError(f"{tag} needs a summable schedule (sum eta_t < inf)")
            bound = 1.0 / (3.0 * constants.growth_a)
            if schedule.max_step > bound + 1e-12:
                raise RegimeError(
                    f"{tag} needs eta_t <= 1/(3a) = {bound!r} for the floor bound, "
                    f"got max step {schedule.max_step!r}"
                )
        else:  # Thm2-necessity-limit
            if schedule.limit_zero:
                raise RegimeError(f"{tag} needs a schedule with lim eta_t != 0")
        return
    if violation_probe:
        return
    if tag == "Thm3-linear-rate":
        if not isinstance(schedule, ConstantStep):
            raise RegimeError("Thm3-linear-rate needs a constant schedule")
        limit = constants.sigma_psi / (2.0 * constants.smooth_L)
        if not schedule.eta < limit:
            raise RegimeError(f"Thm3-linear-rate needs eta < sigma_psi/(2L) = {limit!r}")
        cap = constants.sigma_psi / ((2.0 + kappa) * constants.smooth_L)
        if schedule.eta > cap + 1e-12:
            raise RegimeError(f"Thm3-linear-rate needs eta <= sigma_psi/((2+kappa)L) = {cap!r}")
        if variance is not None and variance is not VarianceRegime.ZERO:
            raise RegimeError("Thm3-linear-rate needs a zero-variance source")
    elif tag == "Thm2b-rate":
        if not isinstance(schedule, TheoremRate):
            raise RegimeError("Thm2b-rate needs the 4/((t+1) sigma_f) schedule")
        if constants.sigma_f is None:
            raise RegimeError("Thm2b-rate needs a strongly smooth map with a resolvable sigma_f")
        if schedule.sigma_f > constants.sigma_f * (1.0 + 1e-9):
            raise RegimeError(
                f"schedule sigma_f {schedule.sigma_f!r} exceeds the resolved value "
                f"{constants.sigma_f!r}"
            )
    elif tag == "Thm2a-lower":
        if not schedule.limit_zero:
            raise RegimeError("Thm2a-lower needs lim eta_t = 0")
        if constants.map_smoothness is None:
            raise RegimeError("Thm2a-lower needs a strongly smooth map")
    elif tag in ("Thm2-sufficiency", "Thm1a-pnorm"):
        if not (schedule.limit_zero and schedule.sum_infinite):
            raise RegimeError(f"{tag} needs lim eta_t = 0 and sum eta_t = inf")
    elif tag == "Thm4-as":
        if not (schedule.sum_infinite and schedule.sum_squares_finite):
            raise RegimeError("Thm4-as needs sum eta_t = inf and sum eta_t^2 < inf")
    if tag in ("Thm2b-rate", "Thm2a-lower") and variance is not None:
        if variance is not VarianceRegime.POSITIVE:
            raise RegimeError(f"{tag} needs a positive-variance source")
