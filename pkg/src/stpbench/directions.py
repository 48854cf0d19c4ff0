"""Random search directions and their distribution constants.

Two direction laws are supported:

* ``unit_sphere`` -- uniform on the unit sphere of R^d (norm exactly 1),
* ``scaled_gaussian`` -- N(0, I_d / d), so E||s||^2 = 1.

Each sampler also reports the analytic constants (mu_D, gamma_D) used by
the step-size formulas and the diagnostic bounds.  For the unit sphere
only the large-d asymptotic mu_D = 1/sqrt(2*pi*d) is recorded; it is a
valid lower bound for every d (the exact constant is larger), which the
Monte Carlo estimator below lets tests confirm per dimension.

All randomness flows through counter-based Philox generators so that a
(seed, draw-index) pair gives the same output regardless of how many
trajectories run in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# rows per chunk sized so batch buffers stay around 32 MB at float64
_CHUNK_BUDGET = 1 << 22


def splitmix64(x: int) -> int:
    """Deterministic 64-bit integer hash (SplitMix64 finalizer)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trajectory_seed(base_seed: int, index: int) -> int:
    """Seed for trajectory ``index``: base_seed XOR hash(index)."""
    return (base_seed ^ splitmix64(index)) & _MASK64


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


@dataclass(frozen=True)
class DistributionConstants:
    """Analytic constants of a direction law at a fixed dimension."""

    mu_d: float
    gamma_d: float
    dim: int

    def __post_init__(self):
        if not (0.0 < self.mu_d < 1.0):
            raise ValueError(f"mu_d must lie in (0, 1), got {self.mu_d}")
        if not (0.0 < self.gamma_d <= 1.0):
            raise ValueError(f"gamma_d must lie in (0, 1], got {self.gamma_d}")


def _check_dim(dim: int) -> None:
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")


class UnitSphere:
    """Uniform distribution on the unit sphere, ||s||_2 = 1 exactly."""

    name = "unit_sphere"

    def sample(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        _check_dim(dim)
        while True:
            g = rng.standard_normal(dim)
            norm = np.linalg.norm(g)
            if norm > 0.0:  # zero draw has probability 0; resample anyway
                return g / norm

    def sample_batch(self, n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        _check_dim(dim)
        g = rng.standard_normal((n, dim))
        norms = np.linalg.norm(g, axis=1)
        bad = norms == 0.0
        while bad.any():
            g[bad] = rng.standard_normal((int(bad.sum()), dim))
            norms[bad] = np.linalg.norm(g[bad], axis=1)
            bad = norms == 0.0
        return g / norms[:, None]

    def constants(self, dim: int) -> DistributionConstants:
        _check_dim(dim)
        return DistributionConstants(
            mu_d=1.0 / math.sqrt(2.0 * math.pi * dim), gamma_d=1.0, dim=dim
        )


class ScaledGaussian:
    """N(0, I_d/d); satisfies the unit-norm bound only approximately."""

    name = "scaled_gaussian"

    def sample(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        _check_dim(dim)
        return rng.standard_normal(dim) / math.sqrt(dim)

    def sample_batch(self, n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        _check_dim(dim)
        return rng.standard_normal((n, dim)) / math.sqrt(dim)

    def constants(self, dim: int) -> DistributionConstants:
        _check_dim(dim)
        return DistributionConstants(
            mu_d=math.sqrt(2.0 / (math.pi * dim)), gamma_d=1.0, dim=dim
        )


_SAMPLERS = {
    UnitSphere.name: UnitSphere,
    ScaledGaussian.name: ScaledGaussian,
}


def make_sampler(name: str):
    try:
        return _SAMPLERS[name]()
    except KeyError:
        raise ValueError(
            f"unknown distribution {name!r}; expected one of {sorted(_SAMPLERS)}"
        ) from None


def _resolve(kind):
    return make_sampler(kind) if isinstance(kind, str) else kind


def sample_direction(kind, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one search direction from the given law."""
    return _resolve(kind).sample(dim, rng)


def analytic_constants(kind, dim: int) -> DistributionConstants:
    return _resolve(kind).constants(dim)


def monte_carlo_mu_stats(
    kind, dim: int, probe: np.ndarray, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo estimate of E|<probe, s>| / ||probe||_2 with its stderr.

    Chunked so that a million samples at d=500 never materializes the
    full sample matrix.
    """
    sampler = _resolve(kind)
    probe = np.asarray(probe, dtype=float)
    if probe.ndim != 1 or probe.shape[0] != dim:
        raise ValueError(f"probe must be a vector of length {dim}")
    pnorm = np.linalg.norm(probe)
    if pnorm == 0.0:
        raise ValueError("probe vector must be nonzero")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")

    unit = probe / pnorm
    chunk = max(1, _CHUNK_BUDGET // dim)
    total = 0.0
    total_sq = 0.0
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        vals = np.abs(sampler.sample_batch(m, dim, rng) @ unit)
        total += float(vals.sum())
        total_sq += float(vals @ vals)
        left -= m
    mean = total / n_samples
    if n_samples == 1:
        return mean, 0.0
    var = max(0.0, (total_sq - n_samples * mean * mean) / (n_samples - 1))
    return mean, math.sqrt(var / n_samples)


def monte_carlo_mu(
    kind, dim: int, probe: np.ndarray, n_samples: int, rng: np.random.Generator
) -> float:
    """Monte Carlo estimate of E|<probe, s>| / ||probe||_2."""
    return monte_carlo_mu_stats(kind, dim, probe, n_samples, rng)[0]
