"""Quadrature primitives: level-wise adaptive Simpson and composite Gauss-Legendre."""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def adaptive_simpson(f, a, b, rtol=1e-10, atol=0.0, initial_panels=64, max_levels=40):
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson bisection.

    ``f`` takes a 1-D array of abscissae and returns either an array of the
    same length or an ``(n, m)`` array (vector-valued integrand).  All panels
    that still need refinement are bisected together, so ``f`` is called once
    per level.

    A panel of width ``w`` is accepted when the Richardson difference
    ``|S_left + S_right - S_whole|`` is below ``15 * tol * w / (b - a)`` with
    ``tol = max(rtol * J, atol)`` and ``J`` an estimate of ``int |f|`` (so that
    integrals that cancel to zero still terminate).

    Returns
    -------
    float or ndarray
        The integral, with the Richardson correction applied.
    """
    a = float(a)
    b = float(b)
    if b == a:
        out = np.asarray(f(np.array([a])), dtype=float)[0]
        return np.zeros_like(out) if out.ndim else 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, rtol, atol, initial_panels, max_levels)

    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    xs = np.concatenate([edges, mid])
    vals = _as2d(f(xs))
    f_edges, f_mid = vals[: initial_panels + 1], vals[initial_panels + 1 :]
    fl, fr = f_edges[:-1], f_edges[1:]
    whole = (hi - lo)[:, None] / 6.0 * (fl + 4.0 * f_mid + fr)

    scale = np.abs(whole).sum(axis=0).max()
    total = np.zeros(vals.shape[1])
    length = b - a
    for _ in range(max_levels):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        v = _as2d(f(np.concatenate([lm, rm])))
        n = lo.size
        flm, frm = v[:n], v[n:]
        w = (hi - lo)[:, None]
        left = w / 12.0 * (fl + 4.0 * flm + f_mid)
        right = w / 12.0 * (f_mid + 4.0 * frm + fr)
        diff = left + right - whole
        tol = max(rtol * scale, atol)
        # second clause: the panel is already resolved to machine precision
        floor = 64.0 * np.finfo(float).eps * (np.abs(left) + np.abs(right)).max(axis=1)
        err = np.abs(diff).max(axis=1)
        ok = (err <= 15.0 * tol * (hi - lo) / length) | (err <= floor)
        good = left[ok] + right[ok] + diff[ok] / 15.0
        total += good.sum(axis=0)
        if ok.all():
            return _squeeze(total)
        keep = ~ok
        # Children of unresolved panels: left halves then right halves.
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        fl, fr, fm_old = fl[keep], fr[keep], f_mid[keep]
        f_mid = np.concatenate([flm[keep], frm[keep]])
        fl = np.concatenate([fl, fm_old])
        fr = np.concatenate([fm_old, fr])
        mid = 0.5 * (lo + hi)
        # recomputed from the children's own widths, which differ from half
        # the parent width by rounding
        whole = (hi - lo)[:, None] / 6.0 * (fl + 4.0 * f_mid + fr)
    raise QuadratureError(
        f"adaptive Simpson did not converge on [{a}, {b}] within {max_levels} levels"
    )


def _as2d(v):
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v.reshape(v.shape[0], -1)


def _squeeze(total):
    return float(total[0]) if total.size == 1 else total


def gauss_legendre_points(lo, hi):
    """Eight-point Gauss-Legendre nodes and weights on each ``[lo[i], hi[i]]``.

    Returns arrays of shape ``(n, 8)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    centre = 0.5 * (hi + lo)
    x = centre[..., None] + half[..., None] * _GL_NODES
    w = half[..., None] * _GL_WEIGHTS
    return x, w


def cell_integrals(f, grid):
    """Integral of ``f`` over every cell of ``grid`` (exact for degree <= 15)."""
    grid = np.asarray(grid, dtype=float)
    x, w = gauss_legendre_points(grid[:-1], grid[1:])
    vals = np.asarray(f(x.reshape(-1)), dtype=float)
    vals = vals.reshape(x.shape + vals.shape[1:])
    w = w.reshape(w.shape + (1,) * (vals.ndim - 2))
    return (vals * w).sum(axis=1)


def cumulative_integral(f, grid):
    """``F[i] = int_{grid[0]}^{grid[i]} f``, with ``F[0] = 0``."""
    cells = cell_integrals(f, grid)
    out = np.zeros((len(grid),) + cells.shape[1:])
    out[1:] = np.cumsum(cells, axis=0)
    return out


def composite_simpson(values, grid):
    """Simpson's rule on a uniform grid with an odd number of nodes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n % 2 == 0 or n < 3:
        raise ValueError("composite Simpson needs an odd number (>= 3) of nodes")
    dx = (grid[-1] - grid[0]) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return dx / 3.0 * np.tensordot(w, values, axes=(0, 0))
