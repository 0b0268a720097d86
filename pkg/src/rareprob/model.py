"""Limit-state models in standard normal space.

A limit-state function g maps a point theta of independent standard normal
variables to a scalar; g(theta) <= 0 is the failure event.  Every model here
returns the value and the analytic gradient from a single evaluation, and
keeps a thread-safe count of evaluations, which is the cost unit for all
method comparisons.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, InvalidInputError


class _CallCounter:
    """Monotone evaluation counter, safe to share between chains."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n=1):
        with self._lock:
            self._count += n

    @property
    def value(self):
        return self._count


class LimitStateModel:
    """A d-dimensional limit-state oracle g(theta), grad g(theta).

    Parameters
    ----------
    name : str
        Identifier used in reports.
    dim : int
        Dimension of the standard normal input space.
    func : callable
        Maps a length-d array to ``(g, grad)`` with ``grad`` a length-d array.
        Must be deterministic.
    batch_value : callable, optional
        Vectorized value-only evaluator mapping an (n, d) array to a length-n
        array of g values.  Used by Monte Carlo style consumers; each row
        counts as one model call.  Falls back to a row loop over ``func``.
    """

    def __init__(self, name, dim, func, batch_value=None):
        if dim < 1:
            raise ConfigurationError(f"dimension must be positive, got {dim}")
        self.name = name
        self.dim = int(dim)
        self._func = func
        self._batch_value = batch_value
        self._counter = _CallCounter()

    @property
    def call_count(self):
        return self._counter.value

    def reset_call_count(self):
        """Explicitly reset the counter (never done implicitly)."""
        self._counter = _CallCounter()

    def evaluate(self, theta):
        """Evaluate (g, grad g) at theta.  Counts exactly one model call."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise DimensionError(
                f"{self.name}: expected shape ({self.dim},), got {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise InvalidInputError(f"{self.name}: non-finite component in theta")
        g, grad = self._func(theta)
        self._counter.add(1)
        return float(g), np.asarray(grad, dtype=float)

    def evaluate_batch(self, thetas):
        """Values of g for an (n, d) array of points; counts n model calls."""
        thetas = np.asarray(thetas, dtype=float)
        if thetas.ndim != 2 or thetas.shape[1] != self.dim:
            raise DimensionError(
                f"{self.name}: expected shape (n, {self.dim}), got {thetas.shape}"
            )
        if not np.all(np.isfinite(thetas)):
            raise InvalidInputError(f"{self.name}: non-finite component in batch")
        if self._batch_value is not None:
            g = np.asarray(self._batch_value(thetas), dtype=float)
        else:
            g = np.array([self._func(row)[0] for row in thetas], dtype=float)
        self._counter.add(thetas.shape[0])
        return g


@dataclass(frozen=True)
class BenchmarkSpec:
    """A benchmark identity plus its scalar parameters and reference value."""

    benchmark_id: str
    params: dict = field(default_factory=dict)
    p_f_ref: float | None = None
    ref_source: str = "none"  # "tabulated" | "analytic" | "none"
    astpa_defaults: dict = field(default_factory=dict)
    sus_defaults: dict = field(default_factory=dict)


@dataclass(frozen=True)
class McEstimate:
    """Crude Monte Carlo estimate of a failure probability."""

    p_hat: float
    n_samples: int
    cov: float
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")


def crude_monte_carlo(model, n, seed, force=False, chunk=262_144):
    """Brute-force reference estimate: fraction of failing standard normal draws.

    Refuses sample sizes that cannot resolve the benchmark's reference
    probability (p_ref * n < 10) unless ``force`` is set, because such runs
    return noise.  Deterministic given the seed.
    """
    n = int(n)
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    p_ref = getattr(model, "p_f_ref", None)
    if not force and p_ref is not None and p_ref * n < 10:
        raise ConfigurationError(
            f"n={n} cannot resolve p~{p_ref:.3g} (need p*n >= 10); pass force=True"
        )
    rng = np.random.default_rng(seed)
    n_fail = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        g = model.evaluate_batch(rng.standard_normal((m, model.dim)))
        n_fail += int(np.count_nonzero(g <= 0.0))
        done += m
    p_hat = n_fail / n
    cov = math.sqrt((1.0 - p_hat) / (n * p_hat)) if p_hat > 0 else math.inf
    return McEstimate(p_hat=p_hat, n_samples=n, cov=cov, seed=int(seed))


def finite_difference_gradient(model, theta, step=1e-5):
    """Central finite differences of g, for gradient verification only.

    Does not touch the model-call counter: it goes through the raw evaluator,
    so tests can check counting and gradients independently.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (model._func(hi)[0] - model._func(lo)[0]) / (2.0 * step)
    return grad
