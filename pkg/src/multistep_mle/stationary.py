"""Invariant density, its moments and the Fisher information.

The unnormalised log-density

    log q(x) = 2 int_0^x S(theta, y) / sigma(y)^2 dy - 2 log sigma(x)

is accumulated once on a node grid over the truncated support and reused for
the density, the CDF and every moment.  All work stays in log space until the
final exponentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInformationError, ErgodicityError
from .models import DiffusionModel
from .quadrature import (
    adaptive_simpson,
    cell_integrals,
    composite_simpson,
    gauss_legendre_points,
)

QUAD_RTOL = 1e-10
TAIL_TOL = 1e-16
MAX_SUPPORT = 1e3
EIG_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class DensityTable:
    """Tabulated invariant density ``f(theta, .)`` on a truncated support."""

    theta: np.ndarray
    grid: np.ndarray
    log_unnorm: np.ndarray
    log_G: float
    cdf: np.ndarray
    model: DiffusionModel = field(repr=False)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def pdf_nodes(self) -> np.ndarray:
        return np.exp(self.log_unnorm - self.log_G)

    def log_pdf(self, x):
        """Log-density at arbitrary points inside the support."""
        return _log_unnorm_at(self, np.asarray(x, dtype=float)) - self.log_G

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        out = np.zeros_like(x)
        inside = (x >= lo) & (x <= hi)
        out[inside] = np.exp(self.log_pdf(x[inside]))
        return out

    def quantile(self, u):
        """Inverse CDF by interpolation on the tabulated cumulative."""
        cdf = self.cdf / self.cdf[-1]
        return np.interp(u, cdf, self.grid)

    def expect(self, g, rtol=QUAD_RTOL, atol=0.0):
        """``int g(x) f(theta, x) dx`` by adaptive Simpson over the support."""
        lo, hi = self.support

        def integrand(x):
            vals = np.asarray(g(x), dtype=float)
            p = np.exp(self.log_pdf(x))
            return vals * p.reshape((-1,) + (1,) * (vals.ndim - 1))

        return adaptive_simpson(integrand, lo, hi, rtol=rtol, atol=atol)


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Symmetric positive-definite information matrix with cached factors."""

    mat: np.ndarray
    inv: np.ndarray
    inv_sqrt: np.ndarray
    sqrt: np.ndarray
    eigenvalues: np.ndarray
    theta: np.ndarray
    source: str

    @classmethod
    def from_matrix(cls, mat, theta, source) -> "FisherMatrix":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        mat = 0.5 * (mat + mat.T)
        lam, vec = np.linalg.eigh(mat)
        if not np.all(np.isfinite(lam)) or lam.min() < EIG_FLOOR:
            raise DegenerateInformationError(
                f"Fisher information at theta={np.asarray(theta).tolist()} has "
                f"smallest eigenvalue {lam.min():.3e} < {EIG_FLOOR:g}"
            )
        inv = (vec / lam) @ vec.T
        inv_sqrt = (vec / np.sqrt(lam)) @ vec.T
        sqrt = (vec * np.sqrt(lam)) @ vec.T
        return cls(
            mat=mat,
            inv=0.5 * (inv + inv.T),
            inv_sqrt=0.5 * (inv_sqrt + inv_sqrt.T),
            sqrt=0.5 * (sqrt + sqrt.T),
            eigenvalues=lam,
            theta=np.asarray(theta, dtype=float).reshape(-1),
            source=source,
        )

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "source": self.source,
            "fisher": self.mat.tolist(),
            "inverse": self.inv.tolist(),
            "inverse_sqrt": self.inv_sqrt.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def _exponent_integrand(model, theta):
    def g(y):
        s = model.sigma(y)
        return 2.0 * model.drift(theta, y) / (s * s)

    return g


def _log_unnorm_on(model, theta, grid):
    """Accumulate ``log q`` on ``grid`` starting from the anchor at 0."""
    g = _exponent_integrand(model, theta)
    start = grid[0]
    n_anchor = max(8, int(np.ceil(abs(start))) * 4)
    anchor = np.linspace(0.0, start, n_anchor + 1)
    offset = cell_integrals(g, anchor).sum()
    cum = np.empty(len(grid))
    cum[0] = offset
    cum[1:] = offset + np.cumsum(cell_integrals(g, grid))
    return cum - 2.0 * np.log(model.sigma(grid))


def _log_unnorm_at(table: DensityTable, x):
    """Evaluate ``log q`` off-grid: node value plus a Gauss-Legendre tail."""
    shape = x.shape
    x = x.reshape(-1)
    grid = table.grid
    idx = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, len(grid) - 2)
    node = grid[idx]
    exponent = table.log_unnorm[idx] + 2.0 * np.log(table.model.sigma(node))
    g = _exponent_integrand(table.model, table.theta)
    pts, w = gauss_legendre_points(node, x)
    exponent = exponent + (g(pts.reshape(-1)).reshape(pts.shape) * w).sum(axis=1)
    return (exponent - 2.0 * np.log(table.model.sigma(x))).reshape(shape)


def _find_support(model, theta, tail_tol):
    log_tol = np.log(tail_tol)
    half = 2.0
    while half <= MAX_SUPPORT:
        coarse = np.linspace(-half, half, 801)
        lq = _log_unnorm_on(model, theta, coarse)
        peak = lq.max()
        above = np.nonzero(lq >= peak + log_tol)[0]
        if above[0] > 0 and above[-1] < len(coarse) - 1:
            lo = coarse[max(above[0] - 1, 0)]
            hi = coarse[min(above[-1] + 1, len(coarse) - 1)]
            return lo, hi
        half *= 2.0
    raise ErgodicityError(
        f"invariant density of {model.name} at theta={np.asarray(theta).tolist()} "
        f"does not decay below {tail_tol:g} of its peak within |x| <= {MAX_SUPPORT:g}"
    )


def build_density(
    model: DiffusionModel, theta, tail_tol: float = TAIL_TOL, n_nodes: int = 2049
) -> DensityTable:
    """Tabulate the invariant density of ``model`` at ``theta``.

    The support is cut where the unnormalised density drops below
    ``tail_tol`` times its maximum.  The normalising constant comes from
    adaptive Simpson with relative tolerance ``1e-10``.

    Raises
    ------
    ErgodicityError
        If no truncation is found within ``|x| <= 1e3`` or the drift does not
        point inwards at the truncation points.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    lo, hi = _find_support(model, theta, tail_tol)
    diag = model.ergodicity_diagnostic(theta, np.array([lo, hi]))
    if not np.all(diag < 0):
        raise ErgodicityError(
            f"condition A0 fails at the truncation points ({lo:.3g}, {hi:.3g}) "
            f"for {model.name} at theta={theta.tolist()}"
        )
    if n_nodes % 2 == 0:
        n_nodes += 1
    grid = np.linspace(lo, hi, n_nodes)
    log_unnorm = _log_unnorm_on(model, theta, grid)
    peak = log_unnorm.max()

    partial = DensityTable(theta, grid, log_unnorm, peak, np.zeros(n_nodes), model)
    mass = adaptive_simpson(lambda x: np.exp(partial.log_pdf(x)), lo, hi, rtol=QUAD_RTOL)
    log_G = peak + np.log(mass)

    provisional = DensityTable(theta, grid, log_unnorm, log_G, np.zeros(n_nodes), model)
    cells = cell_integrals(lambda x: np.exp(provisional.log_pdf(x)), grid)
    cdf = np.concatenate([[0.0], np.cumsum(cells)])
    return DensityTable(theta, grid, log_unnorm, float(log_G), cdf, model)


def density_moment(table: DensityTable, k: int, center: float = 0.0) -> float:
    """``int (x - center)^k f(theta, x) dx``."""
    if k < 0:
        raise ValueError("moment order must be non-negative")

    def g(x):
        y = x - center
        out = np.ones_like(y)
        for _ in range(k):
            out = out * y
        return out

    return float(table.expect(g, atol=1e-14))


def fisher_quadrature(model: DiffusionModel, theta, table: DensityTable | None = None) -> FisherMatrix:
    """``I(theta) = int S_theta S_theta^T / sigma^2 f(theta, x) dx`` by quadrature."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if table is None:
        table = build_density(model, theta)
    d = model.dim_param

    def integrand(x):
        grad = model.drift_grad(theta, x)
        s = model.sigma(x)
        outer = grad[:, :, None] * grad[:, None, :] / (s * s)[:, None, None]
        return outer.reshape(len(x), d * d)

    mat = np.asarray(table.expect(integrand, atol=1e-14)).reshape(d, d)
    return FisherMatrix.from_matrix(mat, theta, "quadrature")


def empirical_fisher(model: DiffusionModel, theta, path, t_start: float, t_end: float) -> FisherMatrix:
    """Time average of ``S_theta S_theta^T / sigma^2`` along ``path`` over ``[t_start, t_end]``.

    Left-point Riemann sum divided by ``t_end - t_start``.
    """
    if not 0.0 <= t_start < t_end <= path.T * (1 + 1e-12):
        raise ValueError(
            f"need 0 <= t_start < t_end <= {path.T}, got [{t_start}, {t_end}]"
        )
    theta = np.asarray(theta, dtype=float).reshape(-1)
    j0 = path.index_at(t_start)
    j1 = path.index_at(t_end)
    x = path.values[j0:j1]
    grad = model.drift_grad(theta, x)
    s = model.sigma(x)
    weighted = grad / (s * s)[:, None]
    mat = weighted.T @ grad * path.h / (t_end - t_start)
    return FisherMatrix.from_matrix(mat, theta, "empirical")


def mde_inner_ratio(table: DensityTable, x, center: float | None = None):
    """``int_{-inf}^x (y - c) f(y) dy / f(x)``, evaluated stably in both tails.

    For ``x > c`` the equivalent right-tail form ``-int_x^inf (y - c) f dy``
    is used (exact when ``c`` is the mean), so neither tail loses relative
    precision to cancellation.
    """
    c = _mean_center(table) if center is None else center
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = table.support
    reach = 0.5 * (hi - lo)
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        ref = table.log_pdf(np.array([xi]))[0]
        # integrand divided by f(xi) up front, so it stays O(1) in both tails
        g = lambda y: (y - c) * np.exp(table.log_pdf(y) - ref)
        if xi <= c:
            out[i] = adaptive_simpson(g, min(lo, xi - reach), xi, rtol=1e-11, atol=1e-300)
        else:
            out[i] = -adaptive_simpson(g, xi, max(hi, xi + reach), rtol=1e-11, atol=1e-300)
    return out if out.size > 1 else float(out[0])


def _mean_center(table):
    return density_moment(table, 1, 0.0)


def mde_limit_variance(table: DensityTable, center: float | None = None) -> float:
    """Limit variance of ``t**-0.5 int_0^t (X_s - c) ds``.

    ``D^2 = 4 int (int_{-inf}^x (y - c) f dy)^2 / (sigma(x)^2 f(x)) dx``.
    """
    c = _mean_center(table) if center is None else center
    grid = table.grid
    log_f = table.log_unnorm - table.log_G
    g = lambda y: (y - c) * np.exp(table.log_pdf(y))
    cells = cell_integrals(g, grid)
    left = np.concatenate([[0.0], np.cumsum(cells)])
    right = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    inner = np.where(grid <= c, left, -right)
    with np.errstate(divide="ignore"):
        log_sq = 2.0 * np.log(np.abs(inner)) - log_f - 2.0 * np.log(table.model.sigma(grid))
    vals = np.where(inner == 0.0, 0.0, np.exp(log_sq))
    return float(4.0 * composite_simpson(vals, grid))


def mde_limit_variance_quartic(table: DensityTable) -> float:
    """``D^2`` of the empirical-mean preliminary estimator in the quartic model."""
    if table.model.name != "quartic":
        raise ValueError("mde_limit_variance_quartic expects a quartic density table")
    return mde_limit_variance(table, center=float(table.theta[0]))
