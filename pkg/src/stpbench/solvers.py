"""Three-point search, random gradient-free, and gradientless descent.

Each solver is a single-step state machine over :class:`SolverState`
plus :func:`run_trajectory`, which executes a fixed number of steps and
records a thinned time series.  Records are indexed by the iterate:
row ``t`` describes the iterate reached after ``t - 1`` steps, so row 1
is the initial point and a run of ``T`` steps ends at row ``T + 1``.
The running minimum of the gradient norm is maintained at every step
regardless of the recording grid.

Oracle accounting (including the cached initial evaluation):

* three-point search, power/harmonic step sizes: ``1 + 2T``
* three-point search, directional step sizes:    ``1 + 3T``
* random gradient-free (with the f refresh):     ``1 + 2T``
* gradientless descent with K+1 radii:           ``1 + (K+1)T``
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .directions import UnitSphere, make_rng
from .errors import ScheduleExhausted
from .objectives import Objective
from .schedules import DirectionalProbe, DirectionalSchedule


@dataclass
class SolverState:
    theta: np.ndarray
    f_current: float
    t: int
    rng: np.random.Generator
    evals: int = 0
    last_alpha: float | None = None
    terminal_reason: str | None = None


@dataclass(frozen=True)
class STP:
    """Pick the best of {theta, theta + a s, theta - a s} each step."""

    sampler: object
    schedule: object


@dataclass(frozen=True)
class RGF:
    """Finite-difference gradient estimate along a random unit direction."""

    mu_fd: float
    h_step: float

    def __post_init__(self):
        if self.mu_fd <= 0.0:
            raise ValueError("mu_fd must be positive")
        if self.h_step <= 0.0:
            raise ValueError("h_step must be positive")


@dataclass(frozen=True)
class GLD:
    """Best candidate over geometrically spaced search radii."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")


SolverKind = STP | RGF | GLD


@dataclass
class StepTrace:
    """Per-step detail retained when tracing is enabled."""

    t: int
    direction: np.ndarray
    alpha: float
    offset: float | None
    theta_before: np.ndarray
    f_before: float
    theta_after: np.ndarray
    f_after: float


@dataclass
class Trajectory:
    """Recorded time series of one seeded run."""

    t: np.ndarray
    f_value: np.ndarray
    grad_norm: np.ndarray
    min_grad_norm: np.ndarray
    alpha: np.ndarray  # NaN where no step size is defined
    evals: np.ndarray
    elapsed_ns: np.ndarray
    seed: int
    run_index: int = 0
    terminal_reason: str | None = None
    meta: dict = field(default_factory=dict)
    steps: list[StepTrace] | None = None

    def __len__(self) -> int:
        return len(self.t)

    def validate(self) -> None:
        if len(self.t) == 0:
            raise ValueError("trajectory has no records")
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("record indices must be strictly increasing")
        if not np.all(np.diff(self.min_grad_norm) <= 0):
            raise ValueError("running min of the gradient norm must be non-increasing")
        if not np.all(np.diff(self.evals) > 0):
            raise ValueError("evaluation counts must be strictly increasing")

    def f_gap(self, f_star: float) -> np.ndarray:
        return self.f_value - f_star


def stp_step(state: SolverState, sampler, schedule, obj: Objective,
             sink: list | None = None) -> SolverState:
    """One three-point step: move only on strict improvement.

    Ties keep the current point; between the two moved points the
    positive direction wins.  With a directional schedule the probe is
    evaluated first (one extra oracle call); schedule exhaustion leaves
    the state unchanged apart from the terminal flag.
    """
    t = state.t
    directional = isinstance(schedule, DirectionalSchedule)
    if directional:
        try:
            offset = schedule.offset(t)
        except ScheduleExhausted as exc:
            state.terminal_reason = f"schedule_exhausted: {exc}"
            return state
    s = sampler.sample(obj.dim, state.rng)
    theta = state.theta
    f_cur = state.f_current
    if directional:
        f_probe = obj.evaluate(theta + offset * s)
        alpha = schedule.step_size(t, DirectionalProbe(offset, f_probe, f_cur))
    else:
        offset = None
        alpha = schedule.step_size(t)

    step = alpha * s
    cand_plus = theta + step
    cand_minus = theta - step
    f_plus = obj.evaluate(cand_plus)
    f_minus = obj.evaluate(cand_minus)

    new_theta, new_f = theta, f_cur
    if f_plus < new_f:
        new_theta, new_f = cand_plus, f_plus
    if f_minus < new_f:
        new_theta, new_f = cand_minus, f_minus

    if sink is not None:
        sink.append(StepTrace(t, s, alpha, offset, theta, f_cur, new_theta, new_f))

    state.theta = new_theta
    state.f_current = new_f
    state.t = t + 1
    state.evals = obj.evals
    state.last_alpha = alpha
    return state


def rgf_step(state: SolverState, mu_fd: float, h_step: float,
             obj: Objective, sink: list | None = None) -> SolverState:
    """Finite-difference step theta - h g u; not monotone in f.

    Spends one oracle call on the probe and one to refresh the cached
    f value at the new point, keeping recorded trajectories exact.
    """
    t = state.t
    u = _unit_direction(obj.dim, state.rng)
    theta = state.theta
    g = (obj.evaluate(theta + mu_fd * u) - state.f_current) / mu_fd
    new_theta = theta - (h_step * g) * u
    new_f = obj.evaluate(new_theta)

    if sink is not None:
        sink.append(StepTrace(t, u, h_step * g, None, theta, state.f_current,
                              new_theta, new_f))

    state.theta = new_theta
    state.f_current = new_f
    state.t = t + 1
    state.evals = obj.evals
    state.last_alpha = None
    return state


def gld_radii(r_min: float, r_max: float) -> np.ndarray:
    """Radii r_max * 2^-k for k = 0..K with K = ceil(log2(r_max / r_min))."""
    if not (0.0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    levels = math.ceil(math.log2(r_max / r_min))
    return r_max * 2.0 ** -np.arange(levels + 1)


def gld_step(state: SolverState, r_min: float, r_max: float,
             obj: Objective, sink: list | None = None) -> SolverState:
    """Evaluate one candidate per radius level and keep the best point.

    The current point stays unless a candidate is strictly better;
    among equal candidates the smallest radius index wins.  Monotone in
    f by construction.
    """
    t = state.t
    theta = state.theta
    radii = gld_radii(r_min, r_max)
    new_theta, new_f = theta, state.f_current
    best_dir, best_radius = None, None
    for r in radii:
        u = _unit_direction(obj.dim, state.rng)
        cand = theta + r * u
        f_cand = obj.evaluate(cand)
        if f_cand < new_f:
            new_theta, new_f = cand, f_cand
            best_dir, best_radius = u, r

    if sink is not None:
        sink.append(StepTrace(t, best_dir if best_dir is not None else np.zeros(obj.dim),
                              best_radius if best_radius is not None else 0.0,
                              None, theta, state.f_current, new_theta, new_f))

    state.theta = new_theta
    state.f_current = new_f
    state.t = t + 1
    state.evals = obj.evals
    state.last_alpha = None
    return state


_SPHERE = UnitSphere()


def _unit_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    return _SPHERE.sample(dim, rng)


def run_trajectory(kind: SolverKind, obj: Objective, theta_init: np.ndarray,
                   iterations: int, seed: int, record_every: int = 1,
                   trace: bool = False, run_index: int = 0,
                   meta: dict | None = None) -> Trajectory:
    """Run ``iterations`` steps (or until a terminal flag) and record.

    Rows are emitted for iterate indices 1, every multiple of
    ``record_every``, and the final iterate.  Deterministic given
    (kind, obj, theta_init, iterations, seed) except for elapsed_ns.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    rng = make_rng(seed)
    theta = np.array(theta_init, dtype=float, copy=True)
    f0 = obj.evaluate(theta)
    state = SolverState(theta=theta, f_current=f0, t=1, rng=rng, evals=obj.evals)
    sink: list[StepTrace] | None = [] if trace else None

    if isinstance(kind, STP):
        def advance():
            return stp_step(state, kind.sampler, kind.schedule, obj, sink)
    elif isinstance(kind, RGF):
        def advance():
            return rgf_step(state, kind.mu_fd, kind.h_step, obj, sink)
    elif isinstance(kind, GLD):
        def advance():
            return gld_step(state, kind.r_min, kind.r_max, obj, sink)
    else:
        raise TypeError(f"unknown solver kind: {kind!r}")

    cols_t, cols_f, cols_g, cols_m, cols_a, cols_e, cols_ns = [], [], [], [], [], [], []

    def emit(idx, f_val, g_val, m_val, alpha, evals):
        cols_t.append(idx)
        cols_f.append(f_val)
        cols_g.append(g_val)
        cols_m.append(m_val)
        cols_a.append(math.nan if alpha is None else alpha)
        cols_e.append(evals)
        cols_ns.append(time.perf_counter_ns() - origin)

    origin = time.perf_counter_ns()
    grad_n = float(np.linalg.norm(obj.gradient(state.theta)))
    min_grad = grad_n
    terminal = None

    for t in range(1, iterations + 1):
        f_arr = state.f_current
        g_arr = grad_n
        m_arr = min_grad
        e_arr = state.evals
        advance()
        if state.terminal_reason is not None:
            terminal = state.terminal_reason
            emit(t, f_arr, g_arr, m_arr, None, e_arr)
            break
        if t == 1 or t % record_every == 0:
            emit(t, f_arr, g_arr, m_arr, state.last_alpha, e_arr)
        grad_n = float(np.linalg.norm(obj.gradient(state.theta)))
        if grad_n < min_grad:
            min_grad = grad_n
    else:
        emit(iterations + 1, state.f_current, grad_n, min_grad, None, state.evals)

    return Trajectory(
        t=np.array(cols_t, dtype=np.int64),
        f_value=np.array(cols_f, dtype=float),
        grad_norm=np.array(cols_g, dtype=float),
        min_grad_norm=np.array(cols_m, dtype=float),
        alpha=np.array(cols_a, dtype=float),
        evals=np.array(cols_e, dtype=np.int64),
        elapsed_ns=np.array(cols_ns, dtype=np.int64),
        seed=seed,
        run_index=run_index,
        terminal_reason=terminal,
        meta=dict(meta or {}),
        steps=sink,
    )
