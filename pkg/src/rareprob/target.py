"""The smoothed sampling target.

The non-normalized target density is the standard normal prior weighted by a
one-dimensional likelihood of the limit-state value: a logistic CDF in
-g(theta)/g_c with location mu_g and dispersion sigma, scaled by the weight
Omega that matches the logistic PDF and CDF at g = 0.  Burn-in anneals sigma
from 1 down to its final value and mu_g from ~0 up to the percentile target,
so early iterations see a wide, nearly-prior target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError

# logistic scale for dispersion sigma: c = (sqrt(3)/pi) * sigma
SCALE_RATIO = math.sqrt(3.0) / math.pi
_EXP_CLAMP = 700.0


def softplus(u):
    """Overflow-safe log(1 + e^u)."""
    u = np.asarray(u, dtype=float)
    out = np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
    return float(out) if out.ndim == 0 else out


def sigmoid(u):
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-min(u, _EXP_CLAMP)))
    eu = math.exp(max(u, -_EXP_CLAMP))
    return eu / (1.0 + eu)


def compute_g_c(g_at_origin):
    """Normalizing constant for g: keeps g(theta)/g_c on a common scale.

    Returns g(0) when g(0) > 8 or 0 < g(0) < 1, else 1.  A non-positive
    g(0) (origin already failed) falls to the default branch.
    """
    if not math.isfinite(g_at_origin):
        raise InvalidInputError("g(0) must be finite")
    if g_at_origin > 8.0 or 0.0 < g_at_origin < 1.0:
        return float(g_at_origin)
    return 1.0


def mu_from_percentile(p, sigma):
    """Location placing the p-th logistic percentile on the g = 0 surface."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"percentile must be in (0, 1), got {p}")
    if sigma <= 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    return -SCALE_RATIO * sigma * math.log(p / (1.0 - p))


def log_weight_omega(mu_g, sigma):
    """ln Omega with the exponential evaluated in softplus form."""
    c = SCALE_RATIO * sigma
    return softplus(mu_g / c) - math.log(4.0 * c)


def weight_omega(mu_g, sigma):
    """Weight matching the logistic PDF and CDF at g = 0 (finite by clamping)."""
    if sigma <= 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    return math.exp(min(log_weight_omega(mu_g, sigma), _EXP_CLAMP))


@dataclass(frozen=True)
class LikelihoodParams:
    """Frozen likelihood parameters of the smoothed target."""

    sigma: float
    mu_g: float
    p: float
    g_c: float

    @property
    def c(self):
        return SCALE_RATIO * self.sigma

    @property
    def log_omega(self):
        return log_weight_omega(self.mu_g, self.sigma)

    @property
    def omega(self):
        return weight_omega(self.mu_g, self.sigma)


@dataclass
class AnnealSchedule:
    """Exponential burn-in schedules for sigma (decay) and mu_g (growth).

    Constructed so sigma equals 1 at iteration 1 and sigma_final at
    iteration n_burnin; mu equals mu_offset + mu_p50 at iteration 1 and
    mu_p10 + 2*mu_p50 at iteration n_burnin (mu_p50 = 0 for the symmetric
    percentile, so in practice the endpoint is the final location itself).
    Past n_burnin both return their final constants.
    """

    sigma_final: float
    mu_final: float           # percentile location under the final sigma
    n_burnin: int
    sigma0: float = 1.0
    mu_p50: float = 0.0
    mu_offset: float = 1e-4

    def __post_init__(self):
        if self.n_burnin < 2:
            raise ConfigurationError("annealing needs at least 2 burn-in iterations")
        if not 0.0 < self.sigma_final <= self.sigma0:
            raise ConfigurationError(
                f"sigma_final must be in (0, {self.sigma0}], got {self.sigma_final}"
            )
        span = self.n_burnin - 1
        if self.sigma_final < self.sigma0:
            self._a2 = span / math.log(self.sigma0 / self.sigma_final)
            self._a1 = self.sigma0 / math.exp(-1.0 / self._a2)
        else:
            self._a2 = None  # constant schedule
        mu_t = self.mu_final + self.mu_p50
        if mu_t > 0 and mu_t != self.mu_offset:
            self._b2 = span / math.log(self.mu_offset / mu_t)
            self._b1 = self.mu_offset / math.exp(-1.0 / self._b2)
        else:
            self._b2 = None

    def at(self, iteration):
        """(sigma_iter, mu_iter) for a 1-based iteration index."""
        if iteration < 1:
            raise InvalidInputError("iteration counter starts at 1")
        it = min(int(iteration), self.n_burnin)
        if self._a2 is None:
            sigma = self.sigma_final
        else:
            sigma = self._a1 * math.exp(-it / self._a2)
        if self._b2 is None:
            mu = self.mu_final
        else:
            mu = self._b1 * math.exp(-it / self._b2) + self.mu_p50
        return sigma, mu


def annealed_params(schedule, iteration, p, g_c):
    """LikelihoodParams under the schedule at the given iteration."""
    sigma, mu = schedule.at(iteration)
    return LikelihoodParams(sigma=sigma, mu_g=mu, p=p, g_c=g_c)


class SmoothedTarget:
    """Log-density and gradient of the non-normalized smoothed target.

    One model call yields (g, grad g); everything downstream of that pair is
    a cheap transform, so annealed parameter changes never re-evaluate the
    model.  ``log_target``/``grad_log_target`` share a single model call
    through the returned cache.
    """

    def __init__(self, model, sigma, p=0.1, n_burnin=None, g_c=None,
                 origin_eval=None):
        self.model = model
        self.d = model.dim
        self.sigma = float(sigma)
        self.p = float(p)
        if origin_eval is None and g_c is None:
            origin_eval = model.evaluate(np.zeros(self.d))
        self.origin_eval = origin_eval
        self.g_c = compute_g_c(origin_eval[0]) if g_c is None else float(g_c)
        self.g_c_degenerate = origin_eval is not None and origin_eval[0] <= 0.0
        self.mu_final = mu_from_percentile(p, sigma)
        self.final_params = LikelihoodParams(sigma=self.sigma, mu_g=self.mu_final,
                                             p=p, g_c=self.g_c)
        self.schedule = None
        if n_burnin is not None and n_burnin >= 2:
            self.schedule = AnnealSchedule(sigma_final=self.sigma,
                                           mu_final=self.mu_final,
                                           n_burnin=int(n_burnin))
        self._log_norm = 0.5 * self.d * math.log(2.0 * math.pi)

    def params_at(self, iteration):
        """Annealed parameters for a burn-in iteration; final ones past it."""
        if self.schedule is None:
            return self.final_params
        return annealed_params(self.schedule, iteration, self.p, self.g_c)

    # -- pure transforms of a cached (g, grad) pair --------------------------

    def log_likelihood(self, g, params=None):
        """ln ell = ln Omega - softplus(u), u = (g/g_c + mu)/c."""
        params = params or self.final_params
        u = (g / params.g_c + params.mu_g) / params.c
        return params.log_omega - softplus(u)

    def view(self, theta, g, grad_g, params=None):
        """(log density, gradient, log ell) at theta given its model response."""
        params = params or self.final_params
        u = (g / params.g_c + params.mu_g) / params.c
        log_ell = params.log_omega - softplus(u)
        logp = log_ell - self._log_norm - 0.5 * float(theta @ theta)
        grad = -theta - (sigmoid(u) / (params.g_c * params.c)) * grad_g
        return logp, grad, log_ell

    # -- model-calling entry points ------------------------------------------

    def log_target(self, theta, params=None):
        """Log density at theta; one model call.  Returns (L, cache)."""
        theta = np.asarray(theta, dtype=float)
        g, grad_g = self.model.evaluate(theta)
        logp, grad, log_ell = self.view(theta, g, grad_g, params)
        cache = {"g": g, "grad_g": grad_g, "log_ell": log_ell,
                 "ell": math.exp(max(log_ell, -_EXP_CLAMP)), "grad_logp": grad}
        return logp, cache

    def grad_log_target(self, theta, cache=None, params=None):
        """Gradient of the log density; reuses a cache from log_target if given."""
        theta = np.asarray(theta, dtype=float)
        if cache is not None:
            _, grad, _ = self.view(theta, cache["g"], cache["grad_g"], params)
            return grad
        _, cache = self.log_target(theta, params)
        return cache["grad_logp"]

    def logp_grad(self, theta, params=None):
        """(logp, grad, (g, grad_g)) with exactly one model call."""
        theta = np.asarray(theta, dtype=float)
        g, grad_g = self.model.evaluate(theta)
        logp, grad, log_ell = self.view(theta, g, grad_g, params)
        return logp, grad, (g, grad_g, log_ell)
