"""Run configuration, seeded ensemble execution, estimator reduction.

One RunConfig holds everything a verification run needs: the problem, the
jump measure, ensemble sizes, the master seed, tolerances.  Config files are
flat key=value text ('#' starts a comment); unknown keys are rejected so
typos fail loudly.  Ensembles derive a per-index seed (master, index) and
collect results in index order, which makes the reduction independent of the
worker count byte for byte.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .integrals import ito_integral
from .kernels import heat_kernel, wave_kernel
from .noise import (LevyMeasure, SpaceTimeWindow, gaussian_measure,
                    sample_prm, two_point_measure)
from .reporting import EstimatorSummary, studentize
from .solver import ProblemSpec, evaluate_solution, named_map, solve_forward


class ConfigError(ValueError):
    pass


class EnsembleError(RuntimeError):
    """A realization failed; carries the index and derived seed."""

    def __init__(self, index: int, seed, cause: BaseException):
        super().__init__(
            f"realization {index} (seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed
        self.cause = cause


_NOISE_KINDS = ("rademacher", "two_point", "gaussian")
_KERNEL_KINDS = ("wave", "heat")


@dataclass(frozen=True)
class RunConfig:
    """Desk-scale defaults: unit horizon, R = 2, jump rate 5, 64x64 grid,
    10^4 samples for statistical checks and 10^2 for solver diagnostics."""

    kernel: str = "wave"
    sigma: str = "affine"
    sigma_a: float = 0.5
    sigma_b: float = 1.0
    ic: str = "cosine"
    ic_value: float = 1.0
    T: float = 1.0
    R: float = 2.0
    noise: str = "rademacher"
    jump: float = 1.0
    mass: float = 5.0
    noise_mean: float = 0.0
    noise_std: float = 1.0
    n_t: int = 64
    n_x: int = 64
    n_samples: int = 10_000
    n_diagnostic: int = 100
    n_iter: int = 8
    seed: int = 0
    workers: int = 1
    outdir: str = "."
    slack_sigmas: float = 4.0
    tol_identity: float = 1e-10
    tol_exact: float = 1e-12
    tol_cross: float = 1e-8
    tol_gronwall: float = 1e-4

    def __post_init__(self):
        if self.kernel not in _KERNEL_KINDS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.noise not in _NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise!r}")
        if self.n_samples < 1 or self.n_diagnostic < 1:
            raise ConfigError("ensemble sizes must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.n_iter < 0:
            raise ConfigError("n_iter must be non-negative")
        if not (self.T > 0.0 and self.R > 0.0):
            raise ConfigError("window must have positive extent")
        for name in ("slack_sigmas", "tol_identity", "tol_exact",
                     "tol_cross", "tol_gronwall"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_file(path) -> dict:
    """Flat key=value file -> raw string dict. Unknown keys are errors."""
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(name: str, value):
    if not isinstance(value, str):
        return value
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"config key {name!r}: {exc}") from exc
    return value


def build_config(file_values: dict | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Defaults < config file < overrides (CLI flags / env), None skipped."""
    data = {}
    for source in (file_values, overrides):
        if source:
            data.update({k: v for k, v in source.items() if v is not None})
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})


def build_window(config: RunConfig) -> SpaceTimeWindow:
    return SpaceTimeWindow(config.T, config.R)


def build_measure(config: RunConfig) -> LevyMeasure:
    if config.noise == "rademacher":
        return two_point_measure(1.0, config.mass)
    if config.noise == "two_point":
        return two_point_measure(config.jump, config.mass)
    return gaussian_measure(config.mass, config.noise_mean, config.noise_std)


def build_problem(config: RunConfig) -> ProblemSpec:
    kernel = wave_kernel() if config.kernel == "wave" else heat_kernel()
    sigma = named_map(config.sigma, config.sigma_a, config.sigma_b)
    return ProblemSpec(kernel=kernel, sigma=sigma, ic_kind=config.ic,
                       window=build_window(config), ic_value=config.ic_value,
                       n_t=config.n_t, n_x=config.n_x)


def run_ensemble(config: RunConfig, task, n: int | None = None) -> np.ndarray:
    """Evaluate task((config.seed, i)) for i = 0..n-1 and stack the results.

    Results are gathered in index order, so any associative reduction of the
    returned array is identical for every worker count.  With workers > 1
    the task must be picklable (module-level function or partial of one).
    A failing realization aborts the run with its index and seed attached.
    """
    n = config.n_samples if n is None else n
    if n < 1:
        raise ConfigError("ensemble size must be at least 1")
    seeds = [(config.seed, i) for i in range(n)]
    rows = []
    if config.workers <= 1 or n == 1:
        for i, s in enumerate(seeds):
            try:
                rows.append(task(s))
            except Exception as exc:
                raise EnsembleError(i, s, exc) from exc
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(task, s) for s in seeds]
            for i, fut in enumerate(futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    raise EnsembleError(i, seeds[i], exc) from exc
    return np.asarray(rows, dtype=float)


def summarize(name: str, values, target: float | None = None,
              slack_sigmas: float | None = None) -> EstimatorSummary:
    """Mean / standard-error reduction of per-realization values.

    With a target, the studentized discrepancy is attached; with
    slack_sigmas as well, the pass flag requires |studentized| within it.
    """
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    stud = None if target is None else studentize(est, target, se)
    passed = None
    if target is not None and slack_sigmas is not None:
        passed = bool(abs(stud) <= slack_sigmas)
    return EstimatorSummary(name=name, n=n, estimate=est, target=target,
                            stderr=se, studentized=stud, passed=passed)


# Module-level per-realization tasks (picklable for multi-worker runs).

def ito_value_task(measure, window, h, seed) -> float:
    return ito_integral(sample_prm(measure, window, seed), h, measure)


def ito_square_task(measure, window, h, seed) -> float:
    return ito_value_task(measure, window, h, seed) ** 2


def ito_product_task(measure, window, h, g, seed) -> float:
    cfg = sample_prm(measure, window, seed)
    return ito_integral(cfg, h, measure) * ito_integral(cfg, g, measure)


def solution_square_task(problem, measure, eval_points, seed):
    """u(t,x)^2 at each evaluation point for one exact forward solve."""
    cfg = sample_prm(measure, problem.window, seed)
    path = solve_forward(cfg, problem, with_grid=False)
    return [evaluate_solution(path, t, x) ** 2 for t, x in eval_points]
