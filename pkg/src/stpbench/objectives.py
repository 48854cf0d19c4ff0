"""Benchmark objectives exposed as counted black-box oracles.

Solvers only ever call :meth:`Objective.evaluate`, which charges the
evaluation counter.  The analytic gradient is a diagnostic side channel
(convergence measurement, inequality replay) and never drives a solver;
it does not touch the counter.

Objectives are cheap descriptors.  Every trajectory builds its own
instance (``spawn``) so counters never race across workers.
"""

from __future__ import annotations

import numpy as np


class Objective:
    """Base oracle: dimension, smoothness L, optional mu / f*, counter."""

    name = "objective"

    def __init__(self, dim: int, smoothness: float, mu: float = 0.0,
                 f_star: float | None = None):
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self.smoothness = smoothness
        self.mu = mu
        self.f_star = f_star
        self.evals = 0

    def _check_point(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(
                f"{self.name}: expected shape ({self.dim},), got {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"{self.name}: input contains non-finite coordinates")
        return theta

    def evaluate(self, theta: np.ndarray) -> float:
        """Oracle call f(theta); increments the evaluation counter."""
        theta = self._check_point(theta)
        self.evals += 1
        return self._value(theta)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        """Analytic gradient, diagnostics only; not counted."""
        theta = self._check_point(theta)
        return self._grad(theta)

    def diagnostic_value(self, theta: np.ndarray) -> float:
        """Uncounted f(theta) for inequality replay and constants."""
        return self._value(self._check_point(theta))

    def value_batch(self, thetas: np.ndarray) -> np.ndarray:
        """Uncounted vectorized values for Monte Carlo diagnostics."""
        thetas = np.asarray(thetas, dtype=float)
        if thetas.ndim != 2 or thetas.shape[1] != self.dim:
            raise ValueError(f"{self.name}: expected (n, {self.dim}) batch")
        return self._value_batch(thetas)

    def spawn(self) -> "Objective":
        """Fresh instance of the same objective with a zeroed counter."""
        return type(self)(self.dim)

    # subclass hooks
    def _value(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def _grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _value_batch(self, thetas: np.ndarray) -> np.ndarray:
        return np.array([self._value(row) for row in thetas])


class NesterovChain(Objective):
    """Worst-case chain quadratic, the d=500 benchmark instance.

    f(x) = x_1^2/2 + sum_i (x_{i+1} - x_i)^2 / 2 + x_d^2/2 - x_1.
    The gradient is A x - e_1 with A tridiagonal (2 on the diagonal,
    -1 off it), so ||A||_2 <= 4 and we declare L = 4.  Treated as merely
    smooth (mu = 0); f* is not used.
    """

    name = "nesterov_chain"

    def __init__(self, dim: int):
        super().__init__(dim, smoothness=4.0, mu=0.0, f_star=None)

    def _value(self, x: np.ndarray) -> float:
        dif = np.diff(x)
        return float(0.5 * x[0] * x[0] + 0.5 * (dif @ dif) + 0.5 * x[-1] * x[-1] - x[0])

    def _grad(self, x: np.ndarray) -> np.ndarray:
        g = 2.0 * x
        g[:-1] -= x[1:]
        g[1:] -= x[:-1]
        g[0] -= 1.0
        return g

    def _value_batch(self, xs: np.ndarray) -> np.ndarray:
        dif = np.diff(xs, axis=1)
        return (0.5 * xs[:, 0] ** 2 + 0.5 * np.einsum("ij,ij->i", dif, dif)
                + 0.5 * xs[:, -1] ** 2 - xs[:, 0])


class SphereQuadratic(Objective):
    """f(x) = ||x||^2 / 2: the canonical 1-strongly-convex instance."""

    name = "sphere_quadratic"

    def __init__(self, dim: int):
        super().__init__(dim, smoothness=1.0, mu=1.0, f_star=0.0)

    def _value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ x)

    def _grad(self, x: np.ndarray) -> np.ndarray:
        return x.copy()

    def _value_batch(self, xs: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("ij,ij->i", xs, xs)


class HuberChainConvex(Objective):
    """f(x) = sum_i (sqrt(1 + x_i^2) - 1): convex, 1-smooth, f* = 0.

    Every sublevel set is bounded coordinate-wise: f(x) <= c forces
    |x_i| <= sqrt((1 + c)^2 - 1), which makes the sublevel radius
    computable in closed form (see diagnostics).
    """

    name = "huber_chain"

    def __init__(self, dim: int):
        super().__init__(dim, smoothness=1.0, mu=0.0, f_star=0.0)

    def _value(self, x: np.ndarray) -> float:
        return float(np.sum(np.sqrt(1.0 + x * x) - 1.0))

    def _grad(self, x: np.ndarray) -> np.ndarray:
        return x / np.sqrt(1.0 + x * x)

    def _value_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.sum(np.sqrt(1.0 + xs * xs) - 1.0, axis=1)


_OBJECTIVES = {
    NesterovChain.name: NesterovChain,
    SphereQuadratic.name: SphereQuadratic,
    HuberChainConvex.name: HuberChainConvex,
}


def make_objective(name: str, dim: int) -> Objective:
    try:
        cls = _OBJECTIVES[name]
    except KeyError:
        raise ValueError(
            f"unknown objective {name!r}; expected one of {sorted(_OBJECTIVES)}"
        ) from None
    return cls(dim)


def evaluate(obj: Objective, theta: np.ndarray) -> float:
    return obj.evaluate(theta)


def gradient(obj: Objective, theta: np.ndarray) -> np.ndarray:
    return obj.gradient(theta)


def finite_difference_gradient(obj: Objective, theta: np.ndarray,
                               step: float | None = None) -> np.ndarray:
    """Central-difference gradient used as the consistency oracle.

    Uses uncounted values; the step defaults to 1e-6 * max(1, ||theta||).
    """
    theta = np.asarray(theta, dtype=float)
    if step is None:
        step = 1e-6 * max(1.0, float(np.linalg.norm(theta)))
    g = np.empty_like(theta)
    for i in range(theta.shape[0]):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += step
        lo[i] -= step
        g[i] = (obj._value(hi) - obj._value(lo)) / (2.0 * step)
    return g
