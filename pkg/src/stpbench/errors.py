"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Experiment configuration does not resolve to runnable components."""


class InsufficientDataError(ValueError):
    """Too few usable points for a statistical fit."""


class UnsupportedObjectiveError(ValueError):
    """Operation needs objective knowledge (minimizer, f*) that is missing."""


class DegenerateStartError(ValueError):
    """Initial point already optimal; derived constants are undefined."""


class ScheduleExhausted(Exception):
    """Directional probe offset fell below the informative floor.

    Raised once per run; the solver records a terminal flag and the
    runner stops the trajectory.
    """

    def __init__(self, t: int, offset: float, floor: float):
        super().__init__(f"probe offset {offset:g} below floor {floor:g} at t={t}")
        self.t = t
        self.offset = offset
        self.floor = floor


class EmptyPlotError(ValueError):
    """No data series available to draw."""
