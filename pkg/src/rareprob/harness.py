"""Replicated experiments: configuration, deterministic seeding, aggregation
and report emission.

A run configuration names a benchmark (or registered user problem), a
method, and method parameters; every replication gets an independent seed
derived by a counter-based split of the master seed, so results do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .benchmarks import make_benchmark, resolve_spec
from .errors import ConfigurationError, RareprobError
from .model import crude_monte_carlo
from .pipeline import AstpaConfig, run_astpa
from .sus import SusConfig, subset_simulation

METHODS = ("hmcmc", "qnp-hmcmc", "sus-uniform", "sus-normal", "crude-mc")

_TOP_KEYS = {"problem", "method", "replications", "master_seed", "n_jobs"}
_ASTPA_KEYS = {"sigma", "p", "tau", "epsilon", "target_accept", "n_burnin",
               "budget", "n_iter", "thinning_lag", "k_max", "gmm_dim_limit",
               "max_delta_h", "max_leapfrog_steps", "spd_extra_cap"}
_SUS_KEYS = {"n_s", "p0", "max_levels"}
_MC_KEYS = {"n", "force"}
_OUTPUT_KEYS = {"csv", "json", "plot"}


@dataclass
class RunConfig:
    problem: str
    method: str
    problem_params: dict = field(default_factory=dict)
    method_params: dict = field(default_factory=dict)
    replications: int = 100
    master_seed: int = 0
    outputs: dict = field(default_factory=dict)
    n_jobs: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; one of {METHODS}")
        if self.replications < 0:
            raise ConfigurationError("replications must be >= 0")
        allowed = _method_keys(self.method)
        for key in self.method_params:
            if key not in allowed:
                raise ConfigurationError(
                    f"unknown method key {key!r} for {self.method}")
        for key in self.outputs:
            if key not in _OUTPUT_KEYS:
                raise ConfigurationError(f"unknown output key {key!r}")
        # validates the problem id and its parameter names
        resolve_spec(self.problem, **self.problem_params)

    def to_dict(self):
        flat = {"problem": self.problem, "method": self.method,
                "replications": self.replications,
                "master_seed": self.master_seed, "n_jobs": self.n_jobs}
        flat.update({f"problem.{k}": v for k, v in self.problem_params.items()})
        flat.update({f"method.{k}": v for k, v in self.method_params.items()})
        flat.update({f"output.{k}": v for k, v in self.outputs.items()})
        return flat


def _method_keys(method):
    if method in ("hmcmc", "qnp-hmcmc"):
        return _ASTPA_KEYS
    if method in ("sus-uniform", "sus-normal"):
        return _SUS_KEYS
    return _MC_KEYS


def parse_config(flat):
    """Build a RunConfig from a flat mapping with dotted section keys.

    Unknown keys are rejected outright so typos cannot silently fall back
    to defaults.
    """
    problem_params, method_params, outputs, top = {}, {}, {}, {}
    for key, value in flat.items():
        if key in _TOP_KEYS:
            top[key] = value
        elif key.startswith("problem."):
            problem_params[key[len("problem."):]] = value
        elif key.startswith("method."):
            method_params[key[len("method."):]] = value
        elif key.startswith("output."):
            outputs[key[len("output."):]] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    if "problem" not in top or "method" not in top:
        raise ConfigurationError("config requires 'problem' and 'method'")
    return RunConfig(
        problem=top["problem"], method=top["method"],
        problem_params=problem_params, method_params=method_params,
        replications=int(top.get("replications", 100)),
        master_seed=int(top.get("master_seed", 0)),
        outputs=outputs, n_jobs=int(top.get("n_jobs", 1)))


def load_config(path):
    with open(path) as fh:
        return parse_config(json.load(fh))


def replication_seed(master_seed, rep):
    """Counter-based split: a 63-bit seed that is a pure function of
    (master_seed, replication index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(rep,))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


@dataclass
class AggregateReport:
    """Replication rows plus derived summary statistics."""

    config: RunConfig
    rows: list
    failures: list = field(default_factory=list)
    p_f_ref: float | None = None

    @property
    def n_success(self):
        return len(self.rows)

    @property
    def mean_pf(self):
        if not self.rows:
            return None
        return float(np.mean([r["pf_hat"] for r in self.rows]))

    @property
    def empirical_cov(self):
        """Spread of the replication estimates: std / mean."""
        if len(self.rows) < 2:
            return 0.0 if self.rows else None
        vals = np.array([r["pf_hat"] for r in self.rows])
        mean = vals.mean()
        if mean == 0:
            return None
        return float(vals.std(ddof=1) / mean)

    @property
    def mean_model_calls(self):
        if not self.rows:
            return None
        return float(np.mean([r["model_calls"] for r in self.rows]))

    @property
    def mean_analytic_cov(self):
        vals = [r["cov_analytic"] for r in self.rows
                if r.get("cov_analytic") is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def eff(self):
        """Unit coefficient of variation: cov * sqrt(mean model calls)."""
        cov = self.empirical_cov
        calls = self.mean_model_calls
        if cov is None or calls is None:
            return None
        return cov * math.sqrt(calls)

    def summary(self):
        return {
            "mean_pf": self.mean_pf,
            "empirical_cov": self.empirical_cov,
            "mean_model_calls": self.mean_model_calls,
            "mean_analytic_cov": self.mean_analytic_cov,
            "eff": self.eff,
            "n_replications": self.n_success,
            "n_failures": len(self.failures),
            "p_f_ref": self.p_f_ref,
        }


def run_replication(config, rep):
    """One fully independent estimation; returns a report row."""
    seed = replication_seed(config.master_seed, rep)
    spec = resolve_spec(config.problem, **config.problem_params)
    model = make_benchmark(spec)
    t0 = time.perf_counter()

    if config.method in ("hmcmc", "qnp-hmcmc"):
        merged = dict(spec.astpa_defaults)
        merged.update(config.method_params)
        if "n_iter" in config.method_params and "budget" not in config.method_params:
            merged.pop("budget", None)
        sigma = merged.pop("sigma", 0.4)
        astpa = AstpaConfig(sigma=sigma, **merged)
        report, _ = run_astpa(model, astpa, seed, method=config.method)
        row = {"rep": rep, "seed": seed, "pf_hat": report.p_hat,
               "model_calls": report.model_calls,
               "cov_analytic": report.cov_analytic,
               "accept_rate": report.accept_rate}
    elif config.method in ("sus-uniform", "sus-normal"):
        defaults = dict(spec.sus_defaults)
        defaults.update(config.method_params)
        sus_cfg = SusConfig(proposal=config.method.split("-", 1)[1],
                            seed=seed, **defaults)
        result = subset_simulation(model, sus_cfg)
        row = {"rep": rep, "seed": seed, "pf_hat": result.p_hat,
               "model_calls": result.model_calls,
               "cov_analytic": None, "accept_rate": None}
    else:  # crude-mc
        n = int(config.method_params.get("n", 10 ** 6))
        force = bool(config.method_params.get("force", False))
        est = crude_monte_carlo(model, n, seed, force=force)
        row = {"rep": rep, "seed": seed, "pf_hat": est.p_hat,
               "model_calls": n, "cov_analytic": est.cov,
               "accept_rate": None}
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _replication_worker(args):
    config, rep = args
    try:
        return rep, run_replication(config, rep), None
    except (RareprobError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return rep, None, f"{type(exc).__name__}: {exc}"


def run_experiment(config):
    """Run all replications and aggregate; deterministic given the config."""
    jobs = [(config, rep) for rep in range(config.replications)]
    if config.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(_replication_worker, jobs, chunksize=1))
    else:
        results = [_replication_worker(job) for job in jobs]
    results.sort(key=lambda item: item[0])

    rows, failures = [], []
    for rep, row, error in results:
        if error is None:
            rows.append(row)
        else:
            failures.append({"rep": rep, "error": error})
    spec = resolve_spec(config.problem, **config.problem_params)
    report = AggregateReport(config=config, rows=rows, failures=failures,
                             p_f_ref=spec.p_f_ref)
    emit_reports(report, config.outputs)
    return report


CSV_HEADER = ["rep", "seed", "pf_hat", "model_calls", "cov_analytic",
              "accept_rate", "wall_ms"]


def emit_reports(report, paths):
    """Write the per-replication CSV and the aggregate JSON."""
    if not paths:
        return
    csv_path = paths.get("csv")
    if csv_path:
        try:
            with open(csv_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_HEADER)
                for row in report.rows:
                    writer.writerow([_csv_cell(row[k]) for k in CSV_HEADER])
        except OSError as exc:
            raise ConfigurationError(f"cannot write CSV {csv_path!r}: {exc}") from exc
    json_path = paths.get("json")
    if json_path:
        payload = {
            "aggregate": report.summary(),
            "config": report.config.to_dict(),
            "failures": report.failures,
            "version": __version__,
        }
        try:
            with open(json_path, "w") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise ConfigurationError(f"cannot write JSON {json_path!r}: {exc}") from exc


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def sweep(config, param, values, plot_path=None):
    """One experiment per grid value of a problem or method parameter.

    ``param`` uses the dotted config form (e.g. ``problem.beta``).  A failing
    grid point is recorded and the sweep continues.
    """
    if not values:
        raise ConfigurationError("sweep grid is empty")
    reports = []
    errors = []
    for value in values:
        flat = config.to_dict()
        flat.pop("output.csv", None)
        flat.pop("output.json", None)
        flat.pop("output.plot", None)
        flat[param] = value
        try:
            point = parse_config(flat)
            reports.append((value, run_experiment(point)))
        except RareprobError as exc:
            errors.append({"value": value, "error": f"{type(exc).__name__}: {exc}"})
    if plot_path:
        with open(plot_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([param, "mean_pf", "empirical_cov",
                             "mean_model_calls", "eff"])
            for value, rep in reports:
                writer.writerow([value, _csv_cell(rep.mean_pf),
                                 _csv_cell(rep.empirical_cov),
                                 _csv_cell(rep.mean_model_calls),
                                 _csv_cell(rep.eff)])
    return reports, errors
