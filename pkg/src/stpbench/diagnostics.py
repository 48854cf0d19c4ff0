"""Monte Carlo inequality checks, rate fits, and theorem constants.

Everything here is a pure function of its inputs: expectations are
approximated by cross-seed means with 3-standard-error slack, per-step
inequalities are replayed with the diagnostic gradient channel, and all
"non-increasing within slack" statements are decided by the fitted
trend over the stated window (end/start multiplier of a least-squares
fit), which keeps the verdict stable against the discrete jumps a
single random trajectory exhibits while still flagging genuine growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directions import DistributionConstants
from .errors import (
    DegenerateStartError,
    InsufficientDataError,
    UnsupportedObjectiveError,
)
from .objectives import HuberChainConvex, Objective, SphereQuadratic
from .solvers import StepTrace, Trajectory

# rows per chunk for batched Monte Carlo (about 32 MB at d = 500)
_CHUNK_BUDGET = 1 << 22


@dataclass(frozen=True)
class Lemma1Check:
    """Expected three-point decrease vs. its analytic upper bound."""

    lhs_estimate: float
    stderr: float
    rhs_bound: float
    holds: bool


def check_lemma1(obj: Objective, theta: np.ndarray, alpha: float, sampler,
                 n_samples: int, rng: np.random.Generator,
                 mu_d: float | None = None) -> Lemma1Check:
    """Estimate E[min(f, f+, f-)] and compare with f - mu_D a ||g|| + L a^2 / 2.

    ``mu_d`` defaults to the sampler's stored analytic constant; passing
    the exact constant (e.g. 1 in dimension 1) reproduces equality cases.
    holds = (lhs - 3 stderr <= rhs), with a 1e-12-scale guard so exact
    equalities survive rounding.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    theta = np.asarray(theta, dtype=float)
    if mu_d is None:
        mu_d = sampler.constants(obj.dim).mu_d
    f0 = obj.diagnostic_value(theta)
    gnorm = float(np.linalg.norm(obj.gradient(theta)))
    rhs = f0 - mu_d * alpha * gnorm + 0.5 * obj.smoothness * alpha * alpha

    chunk = max(1, _CHUNK_BUDGET // obj.dim)
    total = 0.0
    total_sq = 0.0
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        dirs = sampler.sample_batch(m, obj.dim, rng)
        f_plus = obj.value_batch(theta + alpha * dirs)
        f_minus = obj.value_batch(theta - alpha * dirs)
        best = np.minimum(f0, np.minimum(f_plus, f_minus))
        total += float(best.sum())
        total_sq += float(best @ best)
        left -= m
    lhs = total / n_samples
    if n_samples > 1:
        var = max(0.0, (total_sq - n_samples * lhs * lhs) / (n_samples - 1))
        stderr = math.sqrt(var / n_samples)
    else:
        stderr = 0.0
    guard = 1e-12 * max(1.0, abs(f0))
    return Lemma1Check(float(lhs), float(stderr), float(rhs),
                       bool(lhs - 3.0 * stderr <= rhs + guard))


def check_lemma5_step(obj: Objective, theta_before: np.ndarray,
                      theta_after: np.ndarray, s_t: np.ndarray,
                      t: int, h: float) -> bool:
    """Per-step decrease bound of the directional-schedule analysis.

    f(next) <= f(cur) - <grad, s>^2 / (2L) + (L/8) h^(-2t), checked with
    additive tolerance 1e-12 * max(1, |f(cur)|).
    """
    f_before = obj.diagnostic_value(theta_before)
    f_after = obj.diagnostic_value(theta_after)
    inner = float(obj.gradient(theta_before) @ np.asarray(s_t, dtype=float))
    rhs = (f_before - inner * inner / (2.0 * obj.smoothness)
           + obj.smoothness / 8.0 * h ** (-2 * t))
    return f_after <= rhs + 1e-12 * max(1.0, abs(f_before))


def check_lemma5_run(obj: Objective, steps: list[StepTrace], h: float) -> tuple[int, int]:
    """Replay a traced directional run; returns (passing steps, total)."""
    passed = 0
    for rec in steps:
        if check_lemma5_step(obj, rec.theta_before, rec.theta_after,
                             rec.direction, rec.t, h):
            passed += 1
    return passed, len(steps)


def estimate_sublevel_radius(obj: Objective, theta_init: np.ndarray,
                             n_probe: int = 0,
                             rng: np.random.Generator | None = None) -> float:
    """Upper bound on sup ||theta - theta*|| over {f <= f(theta_init)}.

    Closed form per supported objective (both have minimizer 0):
    the sphere quadratic gives sqrt(2 c) exactly; the Huber chain bounds
    each coordinate by sqrt((1 + c)^2 - 1) and sums in quadrature.
    With ``n_probe`` > 0, rejection-sampled sublevel points are verified
    not to violate the bound.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    if obj.f_star is None:
        raise UnsupportedObjectiveError(
            f"{obj.name} has no known optimum; cannot bound the sublevel radius"
        )
    level = obj.diagnostic_value(theta_init) - obj.f_star
    if level <= 0.0:
        return 0.0

    if isinstance(obj, SphereQuadratic):
        box = radius = math.sqrt(2.0 * level)
    elif isinstance(obj, HuberChainConvex):
        box = math.sqrt((1.0 + level) ** 2 - 1.0)
        radius = math.sqrt(obj.dim) * box
    else:
        raise UnsupportedObjectiveError(
            f"no sublevel-radius formula for objective {obj.name!r}"
        )

    if n_probe > 0:
        if rng is None:
            raise ValueError("probe validation requires an rng")
        pts = rng.uniform(-box, box, size=(n_probe, obj.dim))
        inside = obj.value_batch(pts) - obj.f_star <= level
        norms = np.linalg.norm(pts[inside], axis=1)
        if norms.size and norms.max() > radius * (1.0 + 1e-12):
            raise AssertionError(
                f"sublevel point at distance {norms.max()} exceeds bound {radius}"
            )
    return radius


@dataclass(frozen=True)
class Thm4Constants:
    """Constants of the harmonic-schedule convex rate bound a / T."""

    radius: float
    alpha: float
    a: float


def thm4_constants(obj: Objective, theta_init: np.ndarray, mu_d: float,
                   alpha: float | None = None,
                   radius: float | None = None) -> Thm4Constants:
    """Compute (R, alpha, a) with alpha defaulting to 2 R / mu_D.

    a = max(3 alpha mu_D / R * (f(theta^1) - f*),
            L alpha^2 / (2 (alpha mu_D / R - 1))), requiring
    alpha > R / mu_D.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    if radius is None:
        radius = estimate_sublevel_radius(obj, theta_init)
    if radius <= 0.0:
        raise DegenerateStartError("initial point is already optimal (R = 0)")
    if alpha is None:
        alpha = 2.0 * radius / mu_d
    ratio = alpha * mu_d / radius
    if ratio <= 1.0:
        raise ValueError(f"alpha must exceed R / mu_D = {radius / mu_d}")
    gap1 = obj.diagnostic_value(theta_init) - obj.f_star
    a = max(3.0 * ratio * gap1,
            obj.smoothness * alpha * alpha / (2.0 * (ratio - 1.0)))
    return Thm4Constants(radius=radius, alpha=alpha, a=a)


@dataclass(frozen=True)
class RateFit:
    """Log-log least squares over the tail of a series."""

    exponent_estimate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


def rate_fit(t: np.ndarray, values: np.ndarray,
             window_fraction: float = 0.5) -> RateFit:
    """Fit log(value) ~ exponent * log(t) over the last window_fraction.

    Non-positive values inside the window are dropped; fewer than 10
    survivors raise InsufficientDataError.
    """
    if not (0.0 < window_fraction <= 1.0):
        raise ValueError("window_fraction must lie in (0, 1]")
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape or t.ndim != 1:
        raise ValueError("t and values must be 1-d arrays of equal length")
    start = len(t) - max(1, int(math.ceil(window_fraction * len(t))))
    tw, vw = t[start:], values[start:]
    keep = vw > 0.0
    tw, vw = tw[keep], vw[keep]
    if len(tw) < 10:
        raise InsufficientDataError(
            f"only {len(tw)} positive points in the fit window (need 10)"
        )
    slope, intercept, r2 = _linear_fit(np.log(tw), np.log(vw))
    return RateFit(exponent_estimate=slope, intercept=intercept, r_squared=r2,
                   window=(float(tw[0]), float(tw[-1])))


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def fitted_rise(t: np.ndarray, values: np.ndarray) -> float:
    """End/start multiplier of the log-log trend of ``values`` over ``t``.

    Values <= 0 are dropped; with fewer than 2 usable points the series
    is treated as flat (multiplier 1).
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0.0
    t, values = t[keep], values[keep]
    if len(t) < 2 or t[0] == t[-1]:
        return 1.0
    slope, _, _ = _linear_fit(np.log(t), np.log(values))
    return math.exp(slope * (math.log(t[-1]) - math.log(t[0])))


@dataclass(frozen=True)
class BoundedRateResult:
    max_tail_value: float
    is_nonincreasing_tail: bool
    per_trajectory: list


def bounded_rate_check(trajectories: list[Trajectory], exponent: float,
                       tail_fraction: float = 0.5,
                       slack: float = 0.05) -> BoundedRateResult:
    """Tail behavior of u(T) = T^exponent * min grad norm per trajectory.

    The tail (last ``tail_fraction`` of the shared recording grid) counts
    as non-increasing when its fitted end/start multiplier stays within
    ``1 + slack``; the overall flag is the conjunction over trajectories.
    Also reports the largest final u value across trajectories.
    """
    grid = _common_grid(trajectories)
    lo = len(grid) - max(2, int(math.ceil(tail_fraction * len(grid))))
    per = []
    max_tail = -math.inf
    all_ok = True
    for traj in trajectories:
        u = grid.astype(float) ** exponent * traj.min_grad_norm
        rise = fitted_rise(grid[lo:], u[lo:])
        ok = rise <= 1.0 + slack
        all_ok &= ok
        max_tail = max(max_tail, float(u[-1]))
        per.append({"run_index": traj.run_index, "final_u": float(u[-1]),
                    "tail_rise": rise, "ok": ok})
    return BoundedRateResult(max_tail, all_ok, per)


def geometric_rate_fit(t: np.ndarray, gap: np.ndarray,
                       gap_floor: float = 1e-12) -> float:
    """Per-step contraction rho from log(gap) ~ slope * t above the floor."""
    t = np.asarray(t, dtype=float)
    gap = np.asarray(gap, dtype=float)
    keep = gap > gap_floor
    tw, gw = t[keep], gap[keep]
    if len(tw) < 10:
        raise InsufficientDataError(
            f"only {len(tw)} points above the gap floor (need 10)"
        )
    slope, _, _ = _linear_fit(tw, np.log(gw))
    return math.exp(slope)


def expectation_curve(trajectories: list[Trajectory], field: str,
                      f_star: float | None = None):
    """Pointwise cross-trajectory mean and standard error on the grid.

    ``field`` is one of f_gap, grad_norm, min_grad_norm; f_gap needs the
    optimum, taken from the argument or the trajectories' metadata.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least 2 trajectories")
    grid = _common_grid(trajectories)
    if field == "grad_norm":
        mat = np.stack([traj.grad_norm for traj in trajectories])
    elif field == "min_grad_norm":
        mat = np.stack([traj.min_grad_norm for traj in trajectories])
    elif field == "f_gap":
        if f_star is None:
            f_star = trajectories[0].meta.get("f_star")
        if f_star is None:
            raise ValueError("f_gap requires a known optimal value")
        mat = np.stack([traj.f_gap(f_star) for traj in trajectories])
    else:
        raise ValueError(f"unknown field {field!r}")
    mean = mat.mean(axis=0)
    stderr = mat.std(axis=0, ddof=1) / math.sqrt(mat.shape[0])
    return grid, mean, stderr


def thm7_rhs(t_index: int, gap_initial: float, mu_d: float, mu: float,
             smoothness: float, h: float) -> float:
    """Geometric-rate upper bound on the expected gap at iterate t.

    (1 - mu_D^2 mu / L)^(t-1) * [gap_1 + (L/8) / (h^2 (1 - q) - 1)].
    """
    q = mu_d * mu_d * mu / smoothness
    denom = h * h * (1.0 - q) - 1.0
    if denom <= 0.0:
        raise ValueError("h is below the admissible interval for this bound")
    return (1.0 - q) ** (t_index - 1) * (gap_initial + smoothness / 8.0 / denom)


def thm6_trajectory_check(traj: Trajectory, f_star: float, mu_d: float,
                          mu: float, smoothness: float, s: float = 0.9,
                          tail_fraction: float = 0.25, slack: float = 0.05,
                          gap_floor: float = 1e-12) -> bool:
    """Almost-sure geometric rate, tested per seed.

    w(t) = (1 - s q)^(-t) (f(theta^t) - f*) must be non-increasing (same
    fitted-trend criterion) over the final ``tail_fraction`` of records,
    ignoring entries once the gap falls to ``gap_floor``.
    """
    q = mu_d * mu_d * mu / smoothness
    base = 1.0 - s * q
    gap = traj.f_gap(f_star)
    lo = len(traj.t) - max(2, int(math.ceil(tail_fraction * len(traj.t))))
    tt = traj.t[lo:].astype(float)
    gg = gap[lo:]
    keep = gg > gap_floor
    tt, gg = tt[keep], gg[keep]
    if len(tt) < 2:
        return True  # gap already at the floor; nothing left to verify
    logw = -np.log(base) * tt + np.log(gg)
    slope, _, _ = _linear_fit(tt, logw)
    return math.exp(slope * (tt[-1] - tt[0])) <= 1.0 + slack


def median_decay_ratio(values: np.ndarray, fraction: float = 0.1) -> float:
    """median(last fraction) / median(first fraction) of a series."""
    values = np.asarray(values, dtype=float)
    k = max(1, int(math.ceil(fraction * len(values))))
    return float(np.median(values[-k:]) / np.median(values[:k]))


def _common_grid(trajectories: list[Trajectory]) -> np.ndarray:
    if not trajectories:
        raise ValueError("no trajectories given")
    grid = trajectories[0].t
    for traj in trajectories[1:]:
        if not np.array_equal(traj.t, grid):
            raise ValueError("trajectories do not share a recording grid")
    return grid


def mu_constants_for(sampler, dim: int) -> DistributionConstants:
    return sampler.constants(dim)
