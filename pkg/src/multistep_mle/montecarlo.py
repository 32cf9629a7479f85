"""Replicate experiments and the statistics used to check the asymptotic claims.

Replicate ``i`` of an experiment with seed ``s`` uses the Philox stream keyed
by ``s ^ i``; paths are simulated in lockstep batches and every aggregate is
an index-ordered reduction, so results do not depend on batch size, worker
count or execution order.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import estimate as est
from .errors import (
    ConfigError,
    DegenerateInformationError,
    DegeneratePreliminaryError,
    ExperimentFailedError,
    InsufficientDataError,
    NumericalError,
    SimulationDivergedError,
)
from .models import get_model
from .simulate import simulate_paths
from .stationary import FisherMatrix, build_density, fisher_quadrature

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05
MC_METHODS = ("one_step", "two_step", "second_preliminary", "reference_mle", "preliminary")
_REPLICATE_FAILURES = (
    SimulationDivergedError,
    DegeneratePreliminaryError,
    DegenerateInformationError,
    InsufficientDataError,
    NumericalError,
)


@dataclass
class ExperimentConfig:
    """Full description of one Monte Carlo experiment.

    ``tau_grid`` is either ``None`` (the default 100-point grid) or an explicit
    increasing list.  ``path_source(config, index) -> SamplePath`` replaces
    simulation when set (used to inject fixed paths in tests).
    """

    model_id: str
    theta_true: Sequence[float]
    T: float
    h: float
    delta: float
    method: str = "one_step"
    tau_grid: Optional[Sequence[float]] = None
    replicates: int = 100
    seed: int = 0
    fisher_mode: str = "quadrature"
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None
    init: str = "stationary"
    init_range: Optional[Sequence[float]] = None
    standardize: str = "true"
    batch_size: int = 64
    workers: int = 1
    grid_points: int = 41
    path_source: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.theta_true = [float(v) for v in np.atleast_1d(self.theta_true)]
        if self.tau_grid is not None:
            self.tau_grid = [float(v) for v in self.tau_grid]
        self.validate()

    def validate(self) -> None:
        if self.method not in MC_METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {MC_METHODS}")
        if not self.T >= 10:
            raise ConfigError(f"T must be at least 10, got {self.T}")
        if not 0 < self.h <= 0.1:
            raise ConfigError(f"h must lie in (0, 0.1], got {self.h}")
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.method == "one_step" and not 0.5 < self.delta < 1:
            raise ConfigError("one_step needs delta in (1/2, 1)")
        if self.method in ("two_step", "second_preliminary") and not 0.25 < self.delta <= 0.5:
            raise ConfigError(f"{self.method} needs delta in (1/4, 1/2]")
        if self.fisher_mode not in ("quadrature", "empirical"):
            raise ConfigError(f"unknown fisher_mode {self.fisher_mode!r}")
        if self.standardize not in ("true", "estimate"):
            raise ConfigError(f"unknown standardize mode {self.standardize!r}")
        if self.init not in ("stationary", "burn_in"):
            raise ConfigError(f"unknown init mode {self.init!r}")
        if self.tau_grid is not None and len(self.tau_grid) == 0:
            raise ConfigError("tau grid is empty")
        model = self.model()
        if len(self.theta_true) != model.dim_param:
            raise ConfigError(
                f"theta_true has {len(self.theta_true)} entries, model needs {model.dim_param}"
            )
        if not model.theta_space.contains(self.theta_true):
            raise ConfigError(f"theta_true {self.theta_true} lies outside the parameter box")

    def model(self):
        return get_model(self.model_id, self.lower, self.upper)

    def resolved_tau_grid(self) -> np.ndarray:
        if self.method == "preliminary":
            return np.array([est.tau_delta(self.T, self.delta)])
        if self.tau_grid is None:
            return est.default_tau_grid(self.T, self.delta)
        return np.asarray(self.tau_grid, dtype=float)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("path_source")
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(eq=False)
class ReplicateStats:
    """Aggregates over the successful replicates.

    ``errors[i, k]`` is the standardized error ``sqrt(tau_k T) I^{1/2} (theta - theta0)``
    of replicate ``indices[i]``; ``scaled_errors`` omits the ``I^{1/2}`` factor.
    """

    config: ExperimentConfig
    tau_grid: np.ndarray
    indices: np.ndarray
    estimates: np.ndarray
    errors: np.ndarray
    scaled_errors: np.ndarray
    fisher_true: FisherMatrix
    clamped: np.ndarray
    failures: list
    seconds: np.ndarray

    @property
    def n_ok(self) -> int:
        return len(self.indices)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def cov(self) -> np.ndarray:
        return _cov(self.errors)

    @property
    def variance_ratio(self) -> np.ndarray:
        """Diagonal of the standardized covariance (target 1)."""
        return np.diagonal(self.cov, axis1=1, axis2=2)

    @property
    def scaled_cov(self) -> np.ndarray:
        return _cov(self.scaled_errors)

    @property
    def clamp_rate(self) -> float:
        return float(self.clamped.mean()) if self.n_ok else 0.0

    def tau_index(self, tau: float) -> int:
        k = int(np.argmin(np.abs(self.tau_grid - tau)))
        if abs(self.tau_grid[k] - tau) > 1e-9:
            raise ConfigError(f"tau={tau} is not on the experiment grid")
        return k

    def increment_correlations(self, tau_pairs) -> np.ndarray:
        return wiener_increment_check(self, tau_pairs)["correlation"]

    def sup_error(self, tau_min: float = 0.0) -> np.ndarray:
        """Per-replicate ``max_{tau >= tau_min} |theta(tau) - theta0|`` (max over components)."""
        keep = self.tau_grid >= tau_min - 1e-12
        dev = np.abs(self.estimates[:, keep, :] - np.asarray(self.config.theta_true))
        return dev.max(axis=(1, 2))

    def to_dict(self, include_timing: bool = True, include_replicates: bool = False) -> dict:
        out = {
            "config": self.config.to_dict(),
            "tau": self.tau_grid.tolist(),
            "replicates": self.config.replicates,
            "succeeded": self.n_ok,
            "failed": self.n_failed,
            "failures": self.failures,
            "clamp_rate": self.clamp_rate,
            "fisher_true": self.fisher_true.mat.tolist(),
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "variance_ratio": self.variance_ratio.tolist(),
            "scaled_cov": self.scaled_cov.tolist(),
        }
        if include_timing:
            out["seconds_per_replicate"] = float(self.seconds.mean()) if self.n_ok else None
        if include_replicates:
            out["indices"] = self.indices.tolist()
            out["estimates"] = self.estimates.tolist()
        return out

    def summary_line(self) -> str:
        k = len(self.tau_grid) - 1
        vr = ", ".join(f"{v:.3f}" for v in self.variance_ratio[k])
        mn = ", ".join(f"{v:+.3f}" for v in self.mean[k])
        return (
            f"{self.config.model_id} {self.config.method} delta={self.config.delta:g} "
            f"T={self.config.T:g} M={self.n_ok}/{self.config.replicates}: "
            f"tau={self.tau_grid[k]:.3g} var_ratio=[{vr}] mean=[{mn}] clamp={self.clamp_rate:.3f}"
        )


def _cov(z):
    """Per-tau sample covariance of ``z`` with shape ``(M, n_tau, d)``."""
    m = z.shape[0]
    if m < 2:
        return np.zeros((z.shape[1], z.shape[2], z.shape[2]))
    c = z - z.mean(axis=0)
    cov = np.einsum("mki,mkj->kij", c, c) / (m - 1)
    return 0.5 * (cov + np.swapaxes(cov, 1, 2))


# --- replicate execution --------------------------------------------------


def _trajectory(config, model, path, tau_grid):
    if config.method == "preliminary":
        return est.preliminary_process(model, path, config.delta)
    if config.method == "reference_mle":
        return est.reference_mle_process(
            model, path, config.delta, tau_grid, grid_points=config.grid_points
        )
    return est.estimate_trajectory(
        model, path, config.method, config.delta, tau_grid, config.fisher_mode
    )


def _run_block(config: ExperimentConfig, indices: Sequence[int]):
    """Simulate and estimate one block; returns per-replicate records in order."""
    model = config.model()
    tau_grid = config.resolved_tau_grid()
    theta0 = np.asarray(config.theta_true)
    records = []
    t_sim = time.perf_counter()
    if config.path_source is None:
        table = build_density(model, theta0) if config.init == "stationary" else None
        batch = simulate_paths(
            model, theta0, config.T, config.h, config.seed, indices,
            init=config.init, init_range=config.init_range, table=table,
        )
    sim_share = (time.perf_counter() - t_sim) / max(len(indices), 1)
    for row, i in enumerate(indices):
        t0 = time.perf_counter()
        try:
            if config.path_source is not None:
                path = config.path_source(config, int(i))
            else:
                path = batch.path(row)
            traj = _trajectory(config, model, path, tau_grid)
        except _REPLICATE_FAILURES as exc:
            records.append((int(i), None, f"{type(exc).__name__}: {exc}", 0.0))
            continue
        seconds = time.perf_counter() - t0 + sim_share
        records.append((int(i), traj, None, seconds))
    return records


def run_experiment(config: ExperimentConfig) -> ReplicateStats:
    """Run all replicates of ``config`` and aggregate standardized errors.

    Raises
    ------
    ExperimentFailedError
        When more than 5% of replicates fail; the partial statistics are
        attached as ``exc.stats``.
    """
    config.validate()
    model = config.model()
    theta0 = np.asarray(config.theta_true)
    fisher_true = fisher_quadrature(model, theta0)
    tau_grid = config.resolved_tau_grid()
    if config.method != "preliminary":
        est._check_tau(tau_grid, config.T, config.delta)

    indices = np.arange(int(config.replicates))
    size = max(1, int(config.batch_size))
    blocks = [indices[i : i + size] for i in range(0, len(indices), size)]
    if config.workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=int(config.workers)) as pool:
            results = list(pool.map(_run_block, [config] * len(blocks), blocks))
    else:
        results = [_run_block(config, b) for b in blocks]
    records = sorted((r for block in results for r in block), key=lambda r: r[0])

    ok = [r for r in records if r[1] is not None]
    failures = [{"replicate": r[0], "reason": r[2]} for r in records if r[1] is None]
    for f in failures:
        log.warning("replicate %d excluded: %s", f["replicate"], f["reason"])

    d = model.dim_param
    n_tau = len(tau_grid)
    estimates = np.array([r[1].estimates for r in ok]).reshape(len(ok), n_tau, d)
    scale = np.sqrt(tau_grid * config.T)[None, :, None]
    scaled = scale * (estimates - theta0)
    if config.standardize == "true":
        errors = scaled @ fisher_true.sqrt.T
    else:
        errors = np.empty_like(scaled)
        cache = est._FisherCache(model, None, config.delta, "quadrature")
        for i, r in enumerate(ok):
            root = cache(r[1].estimates[-1]).sqrt
            errors[i] = scaled[i] @ root.T
    stats = ReplicateStats(
        config=config,
        tau_grid=tau_grid,
        indices=np.array([r[0] for r in ok], dtype=np.int64),
        estimates=estimates,
        errors=errors,
        scaled_errors=scaled,
        fisher_true=fisher_true,
        clamped=np.array([bool(r[1].clamped) for r in ok]),
        failures=failures,
        seconds=np.array([r[3] for r in ok]),
    )
    if len(failures) > MAX_FAILURE_RATE * config.replicates:
        raise ExperimentFailedError(
            f"{len(failures)} of {config.replicates} replicates failed "
            f"(limit {MAX_FAILURE_RATE:.0%})",
            stats=stats,
        )
    return stats


# --- derived checks --------------------------------------------------------

WIENER_CORR_MAX = 0.15
WIENER_VAR_RANGE = (0.7, 1.3)


def wiener_increment_check(stats: ReplicateStats, tau_pairs, component: int = 0) -> dict:
    """Independent-increment and variance checks for ``eta_tau = sqrt(tau) * z_tau``.

    ``z_tau`` is the standardized error, so ``eta_tau = tau sqrt(T) I^{1/2} (theta - theta0)``.
    ``tau_pairs`` is a sequence of ``(tau_a, tau_b)`` intervals; correlations are
    reported for every pair of intervals.
    """
    pairs = [(float(a), float(b)) for a, b in tau_pairs]
    if stats.n_ok < 100:
        raise ConfigError(f"increment check needs at least 100 replicates, have {stats.n_ok}")
    for a, b in pairs:
        if not a < b:
            raise ConfigError(f"degenerate or reversed interval ({a}, {b})")
    ordered = sorted(pairs)
    for (a1, b1), (a2, b2) in zip(ordered, ordered[1:]):
        if a2 < b1:
            raise ConfigError(f"intervals ({a1}, {b1}) and ({a2}, {b2}) overlap")
    eta = np.sqrt(stats.tau_grid)[None, :] * stats.errors[:, :, component]
    incs = np.array([eta[:, stats.tau_index(b)] - eta[:, stats.tau_index(a)] for a, b in pairs])
    widths = np.array([b - a for a, b in pairs])
    var_ratio = incs.var(axis=1, ddof=1) / widths
    corr = np.corrcoef(incs) if len(pairs) > 1 else np.ones((1, 1))
    off = corr[~np.eye(len(pairs), dtype=bool)]
    corr_ok = bool(np.all(np.abs(off) < WIENER_CORR_MAX))
    var_ok = bool(np.all((var_ratio >= WIENER_VAR_RANGE[0]) & (var_ratio <= WIENER_VAR_RANGE[1])))
    return {
        "pairs": pairs,
        "correlation": corr,
        "variance_ratio": var_ratio,
        "correlation_ok": corr_ok,
        "variance_ok": var_ok,
        "passed": corr_ok and var_ok,
    }


def efficiency_report(configs: Sequence[ExperimentConfig], stats: Optional[Sequence[ReplicateStats]] = None) -> dict:
    """Compare methods on a shared (model, theta0, T, h) basis.

    For every method: second moment of the standardized error on the tau grid
    (the ``p = 2`` moment that an efficient estimator matches to ``E zeta^2``)
    and mean wall-clock per replicate.  When both ``one_step`` and
    ``reference_mle`` are present, ``cost_ratio`` is their time ratio.
    """
    configs = list(configs)
    if len(configs) < 2:
        raise ConfigError("efficiency report needs at least two configs")
    base = {(c.model_id, tuple(c.theta_true), c.T, c.h) for c in configs}
    if len(base) != 1:
        raise ConfigError("configs must share model, theta_true, T and h")
    if stats is None:
        stats = [run_experiment(c) for c in configs]
    rows = []
    for c, s in zip(configs, stats):
        second = np.mean(s.errors * s.errors, axis=0)
        rows.append({
            "method": c.method,
            "delta": c.delta,
            "tau": s.tau_grid.tolist(),
            "second_moment": second.tolist(),
            "second_moment_final": second[-1].tolist(),
            "seconds_per_replicate": float(s.seconds.mean()),
        })
    report = {"rows": rows}
    by_method = {r["method"]: r for r in rows}
    if "one_step" in by_method and "reference_mle" in by_method:
        report["cost_ratio"] = (
            by_method["one_step"]["seconds_per_replicate"]
            / by_method["reference_mle"]["seconds_per_replicate"]
        )
    return report


def trajectory_cost_ratio(model, path, delta, tau_grid, grid_points: int = 41, repeats: int = 3) -> dict:
    """Time one one-step trajectory against per-tau reference MLE on the same grid.

    The one-step time includes the Fisher quadrature and the preliminary
    estimator; the best of ``repeats`` runs is kept for each.
    """
    def best(fn):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    one = best(lambda: est.one_step_process(model, path, delta, tau_grid))
    ref = best(lambda: est.reference_mle_process(model, path, delta, tau_grid, grid_points=grid_points))
    return {"one_step_seconds": one, "reference_seconds": ref, "ratio": one / ref}
