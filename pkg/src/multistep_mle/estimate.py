"""Preliminary estimators, score processes and the multi-step MLE-processes.

Notation used throughout: the path is observed on ``[0, T]``; the learning
window is ``[0, T**delta]`` and ``tau_delta = T**(delta - 1)``.  Stochastic
integrals are left-point (Ito) sums with increments taken from the path,
``int g(X) dX ~ sum_j g(X_j) (X_{j+1} - X_j)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (
    ConfigError,
    DegeneratePreliminaryError,
    InsufficientDataError,
    WindowError,
)
from .models import DiffusionModel
from .quadrature import adaptive_simpson
from .simulate import SamplePath
from .stationary import FisherMatrix, empirical_fisher, fisher_quadrature

MIN_LEARNING_STEPS = 10
FISHER_LATTICE = 1e-4

ONE_STEP_RANGE = (0.5, 1.0)  # open interval
TWO_STEP_RANGE = (0.25, 0.5)  # (0.25, 0.5]

METHODS = ("preliminary", "one_step", "two_step", "second_preliminary", "reference_mle")


class BoundarySolutionWarning(UserWarning):
    """The likelihood maximiser sits on the boundary of the parameter box."""


@dataclass(frozen=True)
class ScoreSample:
    tau: float
    value: np.ndarray
    normalization: float


@dataclass(eq=False)
class EstimatorTrajectory:
    """Estimator-process values on a tau grid plus provenance."""

    tau_grid: np.ndarray
    estimates: np.ndarray
    method: str
    delta: float
    T: float
    preliminary: np.ndarray
    clamped: bool = False
    h: Optional[float] = None
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_grid = np.asarray(self.tau_grid, dtype=float)
        self.estimates = np.atleast_2d(np.asarray(self.estimates, dtype=float))
        if self.estimates.shape[0] != self.tau_grid.size and self.estimates.shape[1] == self.tau_grid.size:
            self.estimates = self.estimates.T
        self.preliminary = np.asarray(self.preliminary, dtype=float).reshape(-1)

    @property
    def dim(self) -> int:
        return self.estimates.shape[1]

    def at(self, tau: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.tau_grid - tau)))
        if abs(self.tau_grid[k] - tau) > 1e-9:
            raise KeyError(f"tau={tau} is not on the trajectory grid")
        return self.estimates[k]

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "T": self.T,
            "h": self.h,
            "seed": self.seed,
            "preliminary": self.preliminary.tolist(),
            "clamped": bool(self.clamped),
            **self.extra,
        }

    def to_csv(self) -> str:
        names = ["tau"] + [f"theta_{i + 1}" for i in range(self.dim)]
        lines = [",".join(names)]
        for tau, row in zip(self.tau_grid, self.estimates):
            lines.append(",".join(f"{v:.17g}" for v in (tau, *row)))
        return "\n".join(lines) + "\n"

    def to_json(self, **extra) -> str:
        payload = {
            **self.metadata(),
            "tau": self.tau_grid.tolist(),
            "estimates": self.estimates.tolist(),
            **extra,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_csv(cls, text: str, **meta) -> "EstimatorTrajectory":
        rows = [r.split(",") for r in text.strip().splitlines() if not r.startswith("#")]
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(
            tau_grid=data[:, 0],
            estimates=data[:, 1:],
            method=meta.get("method", "unknown"),
            delta=meta.get("delta", float("nan")),
            T=meta.get("T", float("nan")),
            preliminary=meta.get("preliminary", data[0, 1:]),
        )


# --- windows ---------------------------------------------------------------


def tau_delta(T: float, delta: float) -> float:
    return T ** (delta - 1.0)


def learning_index(path: SamplePath, delta: float) -> int:
    """Grid index of the end of the learning window ``T**delta``."""
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    n = path.index_at(path.T ** delta)
    if n < MIN_LEARNING_STEPS:
        raise InsufficientDataError(
            f"learning window [0, {path.T ** delta:.4g}] holds {n} grid steps "
            f"(< {MIN_LEARNING_STEPS})"
        )
    return n


def default_tau_grid(T: float, delta: float, n: int = 100) -> np.ndarray:
    """Geometric spacing from ``tau_delta`` to 0.1, uniform from 0.1 to 1."""
    t0 = tau_delta(T, delta)
    if t0 >= 0.1:
        return np.linspace(t0, 1.0, n)
    n_geo = int(round(0.4 * n))
    geo = np.geomspace(t0, 0.1, n_geo, endpoint=False)
    return np.concatenate([geo, np.linspace(0.1, 1.0, n - n_geo)])


def _check_tau(tau, T, delta):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.size == 0:
        raise ConfigError("tau grid is empty")
    lo = tau_delta(T, delta)
    if np.any(tau < lo - 1e-12) or np.any(tau > 1.0 + 1e-12):
        raise WindowError(f"tau must lie in [{lo:.6g}, 1]")
    if np.any(np.diff(tau) <= 0):
        raise ConfigError("tau grid must be strictly increasing")
    return tau


def _check_delta(delta, method):
    if method == "one_step" and not ONE_STEP_RANGE[0] < delta < ONE_STEP_RANGE[1]:
        raise ConfigError(f"one-step MLE-process needs delta in (1/2, 1), got {delta}")
    if method in ("two_step", "second_preliminary") and not (
        TWO_STEP_RANGE[0] < delta <= TWO_STEP_RANGE[1]
    ):
        raise ConfigError(f"two-step MLE-process needs delta in (1/4, 1/2], got {delta}")


# --- preliminary estimators ----------------------------------------------


def _learning_values(path, delta):
    return path.values[: learning_index(path, delta)]


def preliminary_quartic(path: SamplePath, delta: float, theta_space=None) -> np.ndarray:
    """Empirical mean of the path over ``[0, T**delta]``."""
    est = np.array([_learning_values(path, delta).mean()])
    return est if theta_space is None else theta_space.clamp(est)[0]


_QUARTIC2D_CONST = (gamma_fn(0.75) / gamma_fn(0.25)) ** 2


def preliminary_quartic2d(path: SamplePath, delta: float, theta_space=None) -> np.ndarray:
    """Moment estimator of ``(alpha, beta)``.

    ``alpha`` is the time average; ``beta`` inverts the stationary second
    moment ``E (X - alpha)^2 = (2/beta)^{1/2} Gamma(3/4) / Gamma(1/4)``.
    """
    x = _learning_values(path, delta)
    alpha = x.mean()
    m2 = np.mean((x - alpha) ** 2)
    if np.ptp(x) == 0 or not m2 > 0:
        raise DegeneratePreliminaryError("second moment on the learning window is zero")
    beta = 2.0 * _QUARTIC2D_CONST / (m2 * m2)
    est = np.array([alpha, beta])
    return est if theta_space is None else theta_space.clamp(est)[0]


def preliminary_ou(path: SamplePath, delta: float, theta_space=None) -> np.ndarray:
    """Closed-form OU MLE on the learning window, ``-sum X dX / sum X^2 h``."""
    n = learning_index(path, delta)
    x = path.values[: n + 1]
    denom = np.sum(x[:-1] * x[:-1]) * path.h
    if not denom > 0:
        raise DegeneratePreliminaryError("path is identically zero on the learning window")
    est = np.array([-np.sum(x[:-1] * np.diff(x)) / denom])
    return est if theta_space is None else theta_space.clamp(est)[0]


def preliminary_ou_moments(path: SamplePath, delta: float, theta_space=None) -> np.ndarray:
    """Method of moments for OU: ``1 / (2 mean X^2)``."""
    x = _learning_values(path, delta)
    m2 = np.mean(x * x)
    if not m2 > 0:
        raise DegeneratePreliminaryError("path is identically zero on the learning window")
    est = np.array([0.5 / m2])
    return est if theta_space is None else theta_space.clamp(est)[0]


def _run_preliminary(model, path, delta, preliminary):
    if preliminary is None:
        if model.preliminary is None:
            raise ConfigError(f"model {model.name!r} has no registered preliminary estimator")
        preliminary = model.preliminary(path, delta)
    return model.clamp(preliminary)


# --- score processes ---------------------------------------------------------


def _score_terms(model, theta_w, theta_d, x, h):
    """Per-step contributions ``S_theta(theta_w, X_j) / sigma^2 (dX_j - S(theta_d, X_j) h)``."""
    xs = x[:-1]
    dx = np.diff(x)
    s = model.sigma(xs)
    w = model.drift_grad(theta_w, xs) / (s * s)[:, None]
    return w * (dx - model.drift(theta_d, xs) * h)[:, None]


def _window(path, delta, tau):
    T = path.T
    _check_tau(tau, T, delta)
    n0 = learning_index(path, delta)
    k = path.index_at(tau * T)
    return n0, max(k, n0), np.sqrt(tau * T)


def score_delta(model: DiffusionModel, theta, path: SamplePath, delta: float, tau: float) -> ScoreSample:
    """``(tau T)^{-1/2} int_{T^delta}^{tau T} S_theta / sigma^2 [dX - S dt]``."""
    return score_delta_mixed(model, theta, theta, path, delta, tau)


def score_delta_mixed(model, theta_weight, theta_drift, path, delta, tau) -> ScoreSample:
    """Score with the gradient at ``theta_weight`` and the drift at ``theta_drift``.

    Reduces to :func:`score_delta` when both arguments coincide.
    """
    theta_w = np.asarray(theta_weight, dtype=float).reshape(-1)
    theta_d = np.asarray(theta_drift, dtype=float).reshape(-1)
    n0, k, norm = _window(path, delta, float(tau))
    x = path.values[n0 : k + 1]
    if k == n0:
        return ScoreSample(float(tau), np.zeros(model.dim_param), norm)
    total = _score_terms(model, theta_w, theta_d, x, path.h).sum(axis=0)
    return ScoreSample(float(tau), total / norm, norm)


def _antiderivative_increment(model, theta, a, b):
    if model.grad_antiderivative is not None:
        return model.grad_antiderivative(theta, np.array(b)) - model.grad_antiderivative(theta, np.array(a))

    def integrand(y):
        s = model.sigma(y)
        return model.drift_grad(theta, y) / (s * s)[:, None]

    return np.atleast_1d(adaptive_simpson(integrand, a, b, rtol=1e-12, atol=1e-14))


def score_delta_pathwise(model: DiffusionModel, theta, path: SamplePath, delta: float, tau: float) -> ScoreSample:
    """Score written without a stochastic integral.

    ``[G(X_{tau T}) - G(X_{T^delta})
       - 1/2 int S_theta' dt
       + int (S_theta sigma sigma' - S_theta S) / sigma^2 dt] / sqrt(tau T)``

    with ``G`` an antiderivative in ``x`` of ``S_theta / sigma^2``.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n0, k, norm = _window(path, delta, float(tau))
    if k == n0:
        return ScoreSample(float(tau), np.zeros(model.dim_param), norm)
    x = path.values[n0:k]
    h = path.h
    end_term = _antiderivative_increment(model, theta, path.values[n0], path.values[k])
    grad = model.drift_grad(theta, x)
    s = model.sigma(x)
    ito = -0.5 * model.drift_grad_dx(theta, x).sum(axis=0) * h
    drift_part = grad * ((s * model.sigma_dx(x) - model.drift(theta, x)) / (s * s))[:, None]
    total = end_term + ito + drift_part.sum(axis=0) * h
    return ScoreSample(float(tau), total / norm, norm)


# --- Fisher selection --------------------------------------------------------


def _fisher(model, theta, path, delta, fisher_mode):
    if fisher_mode == "quadrature":
        return fisher_quadrature(model, theta)
    if fisher_mode == "empirical":
        return empirical_fisher(model, theta, path, 0.0, path.index_at(path.T ** delta) * path.h)
    raise ConfigError(f"unknown fisher mode {fisher_mode!r}")


def _cumulative_scores(model, theta_w, theta_d, path, n0, ks):
    """Running score integrals ``sum_{n0 <= j < k}`` for every ``k`` in ``ks``."""
    kmax = int(max(ks))
    if kmax == n0:
        return np.zeros((len(ks), model.dim_param))
    terms = _score_terms(model, theta_w, theta_d, path.values[n0 : kmax + 1], path.h)
    cum = np.cumsum(terms, axis=0)
    m = np.asarray(ks) - n0
    return np.where((m > 0)[:, None], cum[np.maximum(m - 1, 0)], 0.0)


def _tau_indices(path, tau_grid, n0):
    # vectorised SamplePath.index_at
    j = np.floor(np.asarray(tau_grid) * path.T / path.h + 1e-7).astype(np.int64)
    return np.clip(j, n0, path.n_steps)


# --- one-step ---------------------------------------------------------------


def one_step_process(
    model: DiffusionModel,
    path: SamplePath,
    delta: float,
    tau_grid: Optional[Sequence[float]] = None,
    fisher_mode: str = "quadrature",
    preliminary=None,
    fisher: Optional[FisherMatrix] = None,
) -> EstimatorTrajectory:
    """One-step MLE-process ``theta_bar + I(theta_bar)^{-1} Delta_tau / sqrt(tau T)``.

    The score integral is accumulated in a single pass, so the whole
    trajectory costs O(N).  ``preliminary`` and ``fisher`` may be supplied to
    bypass the registered preliminary estimator and the quadrature.
    """
    _check_delta(delta, "one_step")
    T = path.T
    tau_grid = _check_tau(default_tau_grid(T, delta) if tau_grid is None else tau_grid, T, delta)
    theta_bar, clamped = _run_preliminary(model, path, delta, preliminary)
    info = fisher if fisher is not None else _fisher(model, theta_bar, path, delta, fisher_mode)
    n0 = learning_index(path, delta)
    ks = _tau_indices(path, tau_grid, n0)
    sums = _cumulative_scores(model, theta_bar, theta_bar, path, n0, ks)
    raw = theta_bar + (sums @ info.inv.T) / (tau_grid * T)[:, None]
    est, clamp_rows = _clamp_rows(model, raw)
    return EstimatorTrajectory(
        tau_grid, est, "one_step", delta, T, theta_bar,
        clamped=clamped or clamp_rows, h=path.h, seed=path.seed,
    )


def _clamp_rows(model, raw):
    lo = np.asarray(model.theta_space.lower)
    hi = np.asarray(model.theta_space.upper)
    bad = ~np.all((raw > lo) & (raw < hi), axis=1)
    if not bad.any():
        return raw, False
    out = raw.copy()
    for i in np.nonzero(bad)[0]:
        out[i] = model.clamp(raw[i])[0]
    return out, True


# --- two-step ---------------------------------------------------------------


def second_preliminary(
    model: DiffusionModel,
    prelim,
    path: SamplePath,
    delta: float,
    tau: float,
    fisher: Optional[FisherMatrix] = None,
    fisher_mode: str = "quadrature",
) -> np.ndarray:
    """``theta_tilde + (tau T)^{-1/2} I(theta_tilde)^{-1} Delta_{tau T}(theta_tilde)``."""
    _check_delta(delta, "second_preliminary")
    theta_tilde = np.asarray(prelim, dtype=float).reshape(-1)
    info = fisher if fisher is not None else _fisher(model, theta_tilde, path, delta, fisher_mode)
    score = score_delta(model, theta_tilde, path, delta, tau)
    return theta_tilde + info.inv @ score.value / score.normalization


def _second_preliminary_grid(model, theta_tilde, path, delta, tau_grid, info, n0, ks):
    sums = _cumulative_scores(model, theta_tilde, theta_tilde, path, n0, ks)
    return theta_tilde + (sums @ info.inv.T) / (tau_grid * path.T)[:, None]


class _FisherCache:
    """Quadrature Fisher matrices keyed by ``theta`` rounded to a lattice."""

    def __init__(self, model, path, delta, fisher_mode, step=FISHER_LATTICE):
        self.model, self.path, self.delta, self.mode, self.step = model, path, delta, fisher_mode, step
        self._store = {}

    def __call__(self, theta):
        key = tuple(np.round(np.asarray(theta) / self.step).astype(np.int64))
        if key not in self._store:
            centre = np.array(key, dtype=float) * self.step
            centre, _ = self.model.clamp(centre)
            self._store[key] = _fisher(self.model, centre, self.path, self.delta, self.mode)
        return self._store[key]

    def __len__(self):
        return len(self._store)


def two_step_process(
    model: DiffusionModel,
    path: SamplePath,
    delta: float,
    tau_grid: Optional[Sequence[float]] = None,
    fisher_mode: str = "quadrature",
    preliminary=None,
) -> EstimatorTrajectory:
    """Two-step MLE-process.

    For each ``tau``: the second preliminary ``theta_bar_tau`` (one-step
    correction of the learning-window estimate ``theta_tilde``), then
    ``theta_bar_tau + I(theta_bar_tau)^{-1} Delta_hat(theta_tilde, theta_bar_tau) / sqrt(tau T)``
    where ``Delta_hat`` takes its weight at ``theta_tilde`` and its drift at
    ``theta_bar_tau``.
    """
    _check_delta(delta, "two_step")
    T = path.T
    tau_grid = _check_tau(default_tau_grid(T, delta) if tau_grid is None else tau_grid, T, delta)
    theta_tilde, clamped = _run_preliminary(model, path, delta, preliminary)
    n0 = learning_index(path, delta)
    ks = _tau_indices(path, tau_grid, n0)
    info_tilde = _fisher(model, theta_tilde, path, delta, fisher_mode)
    second_raw = _second_preliminary_grid(model, theta_tilde, path, delta, tau_grid, info_tilde, n0, ks)
    second, clamp_second = _clamp_rows(model, second_raw)

    cache = _FisherCache(model, path, delta, fisher_mode)
    kmax = int(ks.max())
    x = path.values[n0 : kmax + 1]
    xs = x[:-1]
    s = model.sigma(xs)
    weight = model.drift_grad(theta_tilde, xs) / (s * s)[:, None]
    weighted_dx = np.vstack([np.zeros((1, model.dim_param)), np.cumsum(weight * np.diff(x)[:, None], axis=0)])

    raw = np.empty_like(second)
    for i, (tau, k) in enumerate(zip(tau_grid, ks)):
        m = k - n0
        drift_part = weight[:m].T @ model.drift(second[i], xs[:m]) * path.h
        hat = weighted_dx[m] - drift_part
        raw[i] = second[i] + cache(second[i]).inv @ hat / (tau * T)
    est, clamp_rows = _clamp_rows(model, raw)
    return EstimatorTrajectory(
        tau_grid, est, "two_step", delta, T, theta_tilde,
        clamped=clamped or clamp_second or clamp_rows, h=path.h, seed=path.seed,
        extra={"fisher_evaluations": len(cache) + 1},
    )


def second_preliminary_process(
    model, path, delta, tau_grid=None, fisher_mode="quadrature", preliminary=None
) -> EstimatorTrajectory:
    """Trajectory of the second preliminary estimator over ``tau_grid``."""
    _check_delta(delta, "second_preliminary")
    T = path.T
    tau_grid = _check_tau(default_tau_grid(T, delta) if tau_grid is None else tau_grid, T, delta)
    theta_tilde, clamped = _run_preliminary(model, path, delta, preliminary)
    n0 = learning_index(path, delta)
    ks = _tau_indices(path, tau_grid, n0)
    info = _fisher(model, theta_tilde, path, delta, fisher_mode)
    raw = _second_preliminary_grid(model, theta_tilde, path, delta, tau_grid, info, n0, ks)
    est, c = _clamp_rows(model, raw)
    return EstimatorTrajectory(
        tau_grid, est, "second_preliminary", delta, T, theta_tilde,
        clamped=clamped or c, h=path.h, seed=path.seed,
    )


def preliminary_process(model, path, delta, preliminary=None) -> EstimatorTrajectory:
    """The preliminary estimate as a one-point trajectory at ``tau_delta``."""
    theta_bar, clamped = _run_preliminary(model, path, delta, preliminary)
    t0 = path.index_at(path.T ** delta) * path.h / path.T
    return EstimatorTrajectory(
        [t0], theta_bar[None, :], "preliminary", delta, path.T, theta_bar,
        clamped=clamped, h=path.h, seed=path.seed,
    )


# --- reference MLE ------------------------------------------------------------


def log_likelihood(model, theta, x, h):
    """Discretised ``int S/sigma^2 dX - 1/2 int S^2/sigma^2 dt``."""
    xs = x[:-1]
    s2 = model.sigma(xs) ** 2
    drift = model.drift(theta, xs)
    return float(np.sum(drift / s2 * np.diff(x)) - 0.5 * np.sum(drift * drift / s2) * h)


def _score_and_info(model, theta, x, h):
    xs = x[:-1]
    dx = np.diff(x)
    s2 = model.sigma(xs) ** 2
    resid = dx - model.drift(theta, xs) * h
    grad = model.drift_grad(theta, xs)
    score = (grad / s2[:, None] * resid[:, None]).sum(axis=0)
    hess = model.drift_hess(theta, xs)
    observed = (grad / s2[:, None]).T @ grad * h - np.einsum("nij,n->ij", hess, resid / s2)
    expected = (grad / s2[:, None]).T @ grad * h
    return score, observed, expected


def reference_mle(
    model: DiffusionModel,
    path: SamplePath,
    tau: float = 1.0,
    grid_points: int = 41,
    newton_iters: int = 20,
    return_info: bool = False,
):
    """Maximise the discretised log-likelihood on ``[0, tau T]``.

    A tensor grid of ``grid_points`` per axis locates the basin; up to
    ``newton_iters`` Newton steps with the observed information refine it
    (falling back to Fisher scoring and step halving if the observed
    information is not positive definite or the likelihood does not rise).

    Warns
    -----
    BoundarySolutionWarning
        If the maximiser lies on the boundary of the parameter box.
    """
    if not 0.0 < tau <= 1.0 + 1e-12:
        raise WindowError(f"tau must lie in (0, 1], got {tau}")
    k = path.index_at(tau * path.T)
    if k < 2:
        raise InsufficientDataError("need at least two increments for the likelihood")
    x = path.values[: k + 1]
    h = path.h
    space = model.theta_space
    candidates = space.grid(grid_points)
    values = _grid_loglik(model, candidates, x, h)
    theta = candidates[int(np.argmax(values))].copy()
    best = values.max()
    lo = np.asarray(space.lower)
    hi = np.asarray(space.upper)

    iters = 0
    for iters in range(1, newton_iters + 1):
        score, observed, expected = _score_and_info(model, theta, x, h)
        try:
            np.linalg.cholesky(observed)
            step = np.linalg.solve(observed, score)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(expected, score)
        moved = False
        for _ in range(30):
            cand = np.clip(theta + step, lo, hi)
            val = log_likelihood(model, cand, x, h)
            if val >= best - 1e-12 * abs(best):
                moved = True
                break
            step = 0.5 * step
        if not moved:
            break
        delta_theta = cand - theta
        theta, best = cand, max(val, best)
        if np.all(np.abs(delta_theta) <= 1e-13 * (1.0 + np.abs(theta))):
            break
    width = hi - lo
    on_boundary = bool(np.any(theta - lo <= 1e-6 * width) or np.any(hi - theta <= 1e-6 * width))
    if on_boundary:
        warnings.warn(
            f"likelihood maximiser {theta.tolist()} lies on the boundary of the parameter box",
            BoundarySolutionWarning,
            stacklevel=2,
        )
    if return_info:
        return theta, {"iterations": iters, "boundary": on_boundary, "loglik": best}
    return theta


def _grid_loglik(model, candidates, x, h, chunk=8):
    xs = x[:-1]
    dx = np.diff(x)
    s2 = model.sigma(xs) ** 2
    out = np.empty(len(candidates))
    for i, theta in enumerate(candidates):
        drift = model.drift(theta, xs)
        out[i] = np.sum(drift / s2 * dx) - 0.5 * np.sum(drift * drift / s2) * h
    return out


def ou_mle_closed_form(path: SamplePath, tau: float = 1.0) -> float:
    """``-sum X_j (X_{j+1} - X_j) / sum X_j^2 h`` over ``[0, tau T]``."""
    k = path.index_at(tau * path.T)
    x = path.values[: k + 1]
    return float(-np.sum(x[:-1] * np.diff(x)) / (np.sum(x[:-1] * x[:-1]) * path.h))


def reference_mle_process(
    model, path, delta, tau_grid=None, grid_points=41, newton_iters=20
) -> EstimatorTrajectory:
    """MLE recomputed from scratch at every ``tau`` (the expensive baseline)."""
    T = path.T
    tau_grid = _check_tau(default_tau_grid(T, delta) if tau_grid is None else tau_grid, T, delta)
    rows = []
    boundary = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundarySolutionWarning)
        for tau in tau_grid:
            rows.append(reference_mle(model, path, tau, grid_points, newton_iters))
        boundary = any(issubclass(w.category, BoundarySolutionWarning) for w in caught)
    return EstimatorTrajectory(
        tau_grid, np.array(rows), "reference_mle", delta, T, rows[0],
        clamped=boundary, h=path.h, seed=path.seed,
    )


def estimate_trajectory(model, path, method, delta, tau_grid=None, fisher_mode="quadrature", **kw):
    """Dispatch on ``method``."""
    if method == "one_step":
        return one_step_process(model, path, delta, tau_grid, fisher_mode)
    if method == "two_step":
        return two_step_process(model, path, delta, tau_grid, fisher_mode)
    if method == "second_preliminary":
        return second_preliminary_process(model, path, delta, tau_grid, fisher_mode)
    if method == "preliminary":
        return preliminary_process(model, path, delta)
    if method == "reference_mle":
        return reference_mle_process(model, path, delta, tau_grid, **kw)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
