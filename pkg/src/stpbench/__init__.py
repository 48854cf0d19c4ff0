"""Stochastic three-point search with baselines and a verification harness.

The library side exposes direction samplers, step-size schedules, the
benchmark objectives, the three solvers, and the diagnostic toolkit;
the ``stpbench`` command drives experiment batches, checks, and plots.
"""

from .directions import (
    DistributionConstants,
    ScaledGaussian,
    UnitSphere,
    analytic_constants,
    make_rng,
    make_sampler,
    monte_carlo_mu,
    sample_direction,
    trajectory_seed,
)
from .experiment import ExperimentConfig, run_experiment
from .objectives import (
    HuberChainConvex,
    NesterovChain,
    Objective,
    SphereQuadratic,
    make_objective,
)
from .schedules import (
    DirectionalProbe,
    DirectionalSchedule,
    HarmonicSchedule,
    PowerSchedule,
    satisfies_robbins_monro,
    step_size,
    thm7_h,
)
from .solvers import (
    GLD,
    RGF,
    STP,
    SolverState,
    Trajectory,
    gld_radii,
    gld_step,
    rgf_step,
    run_trajectory,
    stp_step,
)

__version__ = "0.1.0"

__all__ = [
    "DistributionConstants", "ScaledGaussian", "UnitSphere",
    "analytic_constants", "make_rng", "make_sampler", "monte_carlo_mu",
    "sample_direction", "trajectory_seed",
    "ExperimentConfig", "run_experiment",
    "HuberChainConvex", "NesterovChain", "Objective", "SphereQuadratic",
    "make_objective",
    "DirectionalProbe", "DirectionalSchedule", "HarmonicSchedule",
    "PowerSchedule", "satisfies_robbins_monro", "step_size", "thm7_h",
    "GLD", "RGF", "STP", "SolverState", "Trajectory", "gld_radii",
    "gld_step", "rgf_step", "run_trajectory", "stp_step",
    "__version__",
]
