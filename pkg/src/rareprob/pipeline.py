"""End-to-end estimation runs: burn-in, main sampling, post-processing.

One call to :func:`run_astpa` performs a complete single-replication
estimate on a limit-state model: annealed burn-in with step-size adaptation
(and curvature accumulation for the preconditioned variant), a frozen main
phase driven by a model-call budget, then the inverse importance sampling
adjustment, which by construction performs no further model calls.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import iis
from .errors import ConfigurationError, EstimationError
from .hmc import (ChainState, DualAveraging, find_reasonable_epsilon,
                  hmc_iteration)
from .qnp import BfgsState, MassState, finalize_mass, qnp_burnin_iteration, \
    qnp_main_iteration
from .target import LikelihoodParams, SmoothedTarget

METHODS = ("hmcmc", "qnp-hmcmc")


@dataclass
class AstpaConfig:
    """Settings of one estimation run (defaults follow the generic guidance:
    percentile 0.1, trajectory length 0.7, 65% target acceptance, burn-in
    near 10% of the model-call budget)."""

    sigma: float
    p: float = 0.1
    tau: float = 0.7
    epsilon: float | None = None
    target_accept: float = 0.65
    n_burnin: int | None = None
    budget: int | None = None
    n_iter: int | None = None
    jitter: tuple = (0.9, 1.1)
    max_delta_h: float = 1000.0
    max_leapfrog_steps: int = 30   # cost guard while adaptation is in flux
    thinning_lag: int | None = None
    k_max: int = 5
    gmm_dim_limit: int = iis.GMM_DIM_LIMIT
    defensive_weight: float = 0.02
    spd_extra_cap: int = 50
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if self.budget is None and self.n_iter is None:
            raise ConfigurationError("either budget or n_iter must be set")
        if not 0.0 < self.sigma <= 1.0:
            raise ConfigurationError(f"sigma must be in (0, 1], got {self.sigma}")
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"percentile must be in (0, 1), got {self.p}")


@dataclass
class RunArtifacts:
    """Everything a run produced beyond the report (for tests and demos)."""

    burnin: iis.SampleSet | None
    main: iis.SampleSet
    importance_density: object
    mass: MassState | None
    epsilon: float
    target: SmoothedTarget
    diverged: int
    burnin_accept_rate: float = math.nan


def _calibration_window(n_burnin):
    return max(10, min(50, n_burnin // 5))


def _resolve_n_burnin(config, eps0):
    if config.n_burnin is not None:
        return int(config.n_burnin)
    if config.budget is not None:
        steps = max(1, round(config.tau / eps0))
        return max(2, int(round(0.10 * config.budget / steps)))
    return max(2, int(round(0.10 * config.n_iter)))


def run_astpa(model, config, seed, method="qnp-hmcmc"):
    """Run one full estimation; returns (EstimateReport, RunArtifacts)."""
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; one of {METHODS}")
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    d = model.dim
    notes = []

    ev0 = model.evaluate(np.zeros(d))
    theta0 = np.zeros(d) if config.theta0 is None else np.asarray(config.theta0, float)
    if config.theta0 is not None:
        ev0_start = model.evaluate(theta0)
    else:
        ev0_start = ev0

    # step-size search runs against the first annealed target (sigma = 1)
    probe_target = SmoothedTarget(model, sigma=config.sigma, p=config.p,
                                  origin_eval=ev0)
    if probe_target.g_c_degenerate:
        notes.append("g(0) <= 0: origin lies in the failure domain")
    params1 = LikelihoodParams(sigma=1.0, mu_g=1e-4, p=config.p,
                               g_c=probe_target.g_c)
    logp0, grad0, log_ell0 = probe_target.view(theta0, ev0_start[0],
                                               ev0_start[1], params1)
    state = ChainState(theta=theta0, logp=logp0, grad=grad0,
                       aux=(ev0_start[0], ev0_start[1], log_ell0))

    if config.epsilon is not None:
        eps0 = float(config.epsilon)
    else:
        eps0 = find_reasonable_epsilon(
            state, lambda th: probe_target.logp_grad(th, params1), rng)
    n_burnin = _resolve_n_burnin(config, eps0)

    target = SmoothedTarget(model, sigma=config.sigma, p=config.p,
                            n_burnin=n_burnin if n_burnin >= 2 else None,
                            origin_eval=ev0)
    bfgs = BfgsState(d) if method == "qnp-hmcmc" else None
    da = DualAveraging(eps0, target_accept=config.target_accept)
    eps = da.current_eps if config.epsilon is None else config.epsilon

    burn_theta, burn_g, burn_accepts = [], [], []

    def record_burnin(st, info):
        burn_theta.append(st.theta.copy())
        burn_g.append(st.aux[0])
        burn_accepts.append(info["accepted"])

    jitter = tuple(config.jitter)
    for m in range(1, n_burnin + 1):
        params_m = target.params_at(m)
        logp, grad, log_ell = target.view(state.theta, state.aux[0],
                                          state.aux[1], params_m)
        state = replace(state, logp=logp, grad=grad,
                        aux=(state.aux[0], state.aux[1], log_ell))
        logp_grad_m = lambda th, pp=params_m: target.logp_grad(th, pp)
        if bfgs is not None:
            state, info = qnp_burnin_iteration(
                state, logp_grad_m, eps, config.tau, rng, bfgs,
                jitter=jitter, max_delta_h=config.max_delta_h,
                max_steps=config.max_leapfrog_steps)
        else:
            state, info = hmc_iteration(
                state, logp_grad_m, eps, config.tau, rng,
                jitter=jitter, max_delta_h=config.max_delta_h,
                max_steps=config.max_leapfrog_steps)
        if config.epsilon is None:
            eps = da.update(info["alpha"])
        record_burnin(state, info)

    eps_main = da.frozen_eps if (config.epsilon is None and n_burnin > 0) else eps
    logp_grad_f = lambda th: target.logp_grad(th, None)
    logp, grad, log_ell = target.view(state.theta, state.aux[0], state.aux[1])
    state = replace(state, logp=logp, grad=grad,
                    aux=(state.aux[0], state.aux[1], log_ell))

    mass = None
    if bfgs is not None:
        mass, state = finalize_mass(bfgs, state, logp_grad_f, eps_main,
                                    config.tau, rng,
                                    extra_cap=config.spd_extra_cap,
                                    jitter=jitter, record=record_burnin)
        if config.epsilon is None:
            # The preconditioned kinetics rescale the dynamics, so the
            # burn-in step size does not carry over.  Re-anchor with the
            # same search heuristic under the new mass, then settle it with
            # a short adaptive window before freezing; these iterations are
            # still part of the adaptive phase and excluded from estimation.
            eps_cal = find_reasonable_epsilon(state, logp_grad_f, rng,
                                              mass=mass)
            da_cal = DualAveraging(eps_cal, target_accept=config.target_accept)
            eps_main = da_cal.current_eps
            for _ in range(_calibration_window(n_burnin)):
                state, info = qnp_main_iteration(
                    state, logp_grad_f, eps_main, config.tau, rng, mass,
                    jitter=jitter, max_delta_h=config.max_delta_h,
                    max_steps=config.max_leapfrog_steps)
                eps_main = da_cal.update(info["alpha"])
                record_burnin(state, info)
            eps_main = da_cal.frozen_eps

    main_theta, main_g = [], []
    n_accept = 0
    n_diverged = 0
    n_main = 0
    while True:
        if config.budget is not None:
            if model.call_count >= config.budget:
                break
        elif n_main >= config.n_iter:
            break
        if bfgs is not None:
            state, info = qnp_main_iteration(
                state, logp_grad_f, eps_main, config.tau, rng, mass,
                jitter=jitter, max_delta_h=config.max_delta_h,
                max_steps=config.max_leapfrog_steps)
        else:
            state, info = hmc_iteration(
                state, logp_grad_f, eps_main, config.tau, rng,
                jitter=jitter, max_delta_h=config.max_delta_h,
                max_steps=config.max_leapfrog_steps)
        main_theta.append(state.theta.copy())
        main_g.append(state.aux[0])
        n_accept += info["accepted"]
        n_diverged += info["diverged"]
        n_main += 1

    if n_main == 0:
        raise EstimationError(
            f"budget {config.budget} exhausted before the main phase "
            f"(burn-in used {model.call_count} calls)")

    burnin_set = _build_sample_set(target, burn_theta, burn_g, "burn-in")
    main_set = _build_sample_set(target, main_theta, main_g, "main")

    # ---- post-processing: no model calls from here on ----------------------
    calls_before = model.call_count
    gmm_seed = int(rng.integers(2 ** 63))
    q = _fit_q(main_set, config, gmm_seed)
    c_h = iis.normalizing_constant(main_set, q)
    p_hat = iis.estimate_pf(main_set, c_h)
    if p_hat == 0.0:
        notes.append("no failure samples in the main phase")
    if config.thinning_lag is not None:
        lag = config.thinning_lag
    else:
        # measured autocorrelation of the estimator terms, capped by the
        # blanket dimension rule
        terms = np.where(main_set.is_failure,
                         np.exp(np.minimum(-main_set.log_ell, 700.0)), 0.0)
        lag = iis.estimate_thinning_lag(terms, iis.choose_thinning(d))
    variance, cov = iis.cov_analytic(main_set, c_h, p_hat, lag)
    assert model.call_count == calls_before, "post-processing must not call the model"

    report = iis.EstimateReport(
        p_hat=p_hat, c_h=c_h, variance=variance, cov_analytic=cov,
        n_used=main_set.n, thinning_lag=lag, model_calls=model.call_count,
        accept_rate=n_accept / n_main, seed=_seed_as_int(seed),
        wall_time=time.perf_counter() - t_start, method=method,
        warnings=tuple(notes))
    artifacts = RunArtifacts(
        burnin=burnin_set, main=main_set, importance_density=q, mass=mass,
        epsilon=eps_main, target=target, diverged=n_diverged,
        burnin_accept_rate=(float(np.mean(burn_accepts)) if burn_accepts
                            else math.nan))
    return report, artifacts


def _build_sample_set(target, thetas, gs, phase):
    if not thetas:
        return None
    theta = np.asarray(thetas, dtype=float)
    g = np.asarray(gs, dtype=float)
    log_ell = target.log_likelihood(g)
    log_h = log_ell - 0.5 * target.d * math.log(2.0 * math.pi) \
        - 0.5 * (theta ** 2).sum(axis=1)
    return iis.SampleSet(theta=theta, g=g, log_ell=log_ell, log_h=log_h,
                         phase=phase)


def _fit_q(main_set, config, seed):
    if main_set.d <= config.gmm_dim_limit and main_set.n >= 10 * main_set.d:
        q = iis.fit_gmm(main_set, k_max=config.k_max, seed=seed)
        if config.defensive_weight > 0.0:
            q = iis.add_defensive_component(q, main_set,
                                            weight=config.defensive_weight)
        return q
    if main_set.n >= main_set.d + 2:
        return iis.fit_subspace_density(
            main_set, seed=seed, defensive_weight=config.defensive_weight)
    raise EstimationError(
        f"{main_set.n} main samples cannot support a {main_set.d}-dim fit")


def _seed_as_int(seed):
    try:
        return int(seed)
    except (TypeError, ValueError):
        return -1
