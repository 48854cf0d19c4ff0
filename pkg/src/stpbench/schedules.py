"""Step-size rules for the three analyzed regimes.

* ``power``       alpha_t = alpha / t^p with p in (0, 1]
* ``harmonic``    alpha_t = alpha / t
* ``directional`` alpha_t = |f(theta_t + h^-t s_t) - f(theta_t)| / (L h^-t),
                  a zeroth-order proxy for |<grad f, s_t>| / L with a
                  geometrically vanishing probe offset.

The directional offset h^-t is only informative while the probed
function difference resolves above floating-point cancellation noise.
The schedule therefore exhausts itself once h^-t drops below
``offset_floor`` (default 1e-8, about sqrt(machine epsilon)); past that
point the computed step would be dominated by rounding error in f.
Exhaustion raises :class:`~stpbench.errors.ScheduleExhausted`, which the
solver turns into a terminal trajectory flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ScheduleExhausted

DEFAULT_OFFSET_FLOOR = 1e-8


@dataclass(frozen=True)
class DirectionalProbe:
    """One probe evaluation feeding the directional step size."""

    offset: float
    f_probe: float
    f_current: float


@dataclass(frozen=True)
class PowerSchedule:
    name = "power"
    alpha: float
    exponent: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if not (0.0 < self.exponent <= 1.0):
            raise ValueError("exponent must lie in (0, 1]")

    def step_size(self, t: int, probe: DirectionalProbe | None = None) -> float:
        _check_t(t)
        if probe is not None:
            raise ValueError("power schedule takes no probe")
        return self.alpha / t**self.exponent

    @property
    def needs_probe(self) -> bool:
        return False


@dataclass(frozen=True)
class HarmonicSchedule:
    name = "harmonic"
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")

    def step_size(self, t: int, probe: DirectionalProbe | None = None) -> float:
        _check_t(t)
        if probe is not None:
            raise ValueError("harmonic schedule takes no probe")
        return self.alpha / t

    @property
    def needs_probe(self) -> bool:
        return False


@dataclass(frozen=True)
class DirectionalSchedule:
    name = "directional"
    smoothness: float
    h: float
    offset_floor: float = DEFAULT_OFFSET_FLOOR

    def __post_init__(self):
        if self.smoothness <= 0.0:
            raise ValueError("smoothness constant must be positive")
        if self.h <= 1.0:
            raise ValueError("h must exceed 1")
        if self.offset_floor <= 0.0:
            raise ValueError("offset_floor must be positive")

    def offset(self, t: int) -> float:
        """Probe offset h^-t; raises ScheduleExhausted below the floor."""
        _check_t(t)
        off = self.h ** (-t)
        if off < self.offset_floor:
            raise ScheduleExhausted(t, off, self.offset_floor)
        return off

    def step_size(self, t: int, probe: DirectionalProbe | None = None) -> float:
        _check_t(t)
        if probe is None:
            raise ValueError("directional schedule requires a probe")
        expected = self.offset(t)
        # the probe must have been taken at this iteration's offset
        if not math.isclose(probe.offset, expected, rel_tol=8 * 2.0**-52):
            raise ValueError(
                f"probe offset {probe.offset!r} does not match h^-t = {expected!r}"
            )
        return abs(probe.f_probe - probe.f_current) / (self.smoothness * probe.offset)

    @property
    def needs_probe(self) -> bool:
        return True


StepSchedule = PowerSchedule | HarmonicSchedule | DirectionalSchedule


def _check_t(t: int) -> None:
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")


def step_size(schedule, t: int, probe: DirectionalProbe | None = None) -> float:
    """Step size alpha_t of the given schedule at iteration t."""
    return schedule.step_size(t, probe)


def satisfies_robbins_monro(schedule) -> bool:
    """Whether sum(alpha_t^2) < inf and sum(alpha_t) = inf provably hold.

    Power schedules qualify for exponents in (1/2, 1]; harmonic always;
    directional step sizes are data dependent and never classified.
    """
    if isinstance(schedule, PowerSchedule):
        return 0.5 < schedule.exponent <= 1.0
    if isinstance(schedule, HarmonicSchedule):
        return True
    return False


def thm7_h(mu_d: float, mu: float, smoothness: float) -> float:
    """The geometric-rate probe base 2 / sqrt(1 - mu_d^2 mu / L).

    Lies inside the admissible interval (1/sqrt(1 - mu_d^2 mu / L), inf)
    whenever mu_d^2 mu < L.
    """
    if not (0.0 < mu <= smoothness):
        raise ValueError("need 0 < mu <= L")
    if not (0.0 < mu_d < 1.0):
        raise ValueError("need mu_d in (0, 1)")
    q = mu_d * mu_d * mu / smoothness
    if q >= 1.0:
        raise ValueError("mu_d^2 * mu must be smaller than L")
    return 2.0 / math.sqrt(1.0 - q)
