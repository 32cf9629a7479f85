"""Scalar diffusion models dX = S(theta, X) dt + sigma(X) dW.

Every model carries closed-form derivatives of the drift in theta (and the
mixed x-derivative of the theta-gradient), because the score process, the
Fisher information and the pathwise score all consume them directly.

Callbacks are vectorised over ``x``: for ``x`` of shape ``s`` they return

* ``drift``          -> ``s``
* ``drift_grad``     -> ``s + (d,)``
* ``drift_hess``     -> ``s + (d, d)``
* ``drift_grad_dx``  -> ``s + (d,)``
* ``sigma``, ``sigma_dx`` -> ``s``

Powers are written as products so that results are bit-identical whatever the
array length (vectorised ``pow`` kernels may round differently).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

CLAMP_MARGIN = 1e-6


@dataclass(frozen=True)
class ParameterSpace:
    """Open box ``prod_i (lower[i], upper[i])``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ConfigError("bounds must be non-empty vectors of equal length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ConfigError(f"need lower < upper componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return bool(np.all(theta > self.lower) and np.all(theta < self.upper))

    def clamp(self, theta) -> tuple[np.ndarray, bool]:
        """Project ``theta`` into the box shrunk by ``1e-6 * width``.

        Points already inside the open box are returned unchanged.

        Returns
        -------
        theta : ndarray
        clamped : bool
            True when a projection happened.
        """
        theta = np.array(theta, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise ConfigError(f"theta has dimension {theta.size}, expected {self.dim}")
        if self.contains(theta) and np.all(np.isfinite(theta)):
            return theta, False
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        margin = CLAMP_MARGIN * (hi - lo)
        if not np.all(np.isfinite(theta)):
            theta = np.where(np.isfinite(theta), theta, 0.5 * (lo + hi))
        return np.clip(theta, lo + margin, hi - margin), True

    def grid(self, n: int) -> np.ndarray:
        """Tensor grid of ``n`` interior points per axis, shape ``(n**d, d)``."""
        axes = [
            np.linspace(a, b, n + 2)[1:-1] for a, b in zip(self.lower, self.upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """Diffusion model with analytic derivatives.

    ``preliminary(path, delta)`` returns the raw (unclamped) preliminary
    estimate on the learning window ``[0, T**delta]``.
    """

    name: str
    dim_param: int
    drift: Callable
    drift_grad: Callable
    drift_hess: Callable
    drift_grad_dx: Callable
    sigma: Callable
    sigma_dx: Callable
    theta_space: ParameterSpace
    grad_antiderivative: Optional[Callable] = None
    preliminary: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim_param < 1 or self.theta_space.dim != self.dim_param:
            raise ConfigError(
                f"parameter space dimension {self.theta_space.dim} does not match "
                f"model dimension {self.dim_param}"
            )

    def clamp(self, theta):
        return self.theta_space.clamp(theta)

    def ergodicity_diagnostic(self, theta, x):
        """``sgn(x) S(theta, x) / sigma(x)**2``; negative far out under condition A0."""
        x = np.asarray(x, dtype=float)
        s = self.sigma(x)
        return np.sign(x) * self.drift(_theta(theta), x) / (s * s)


def _theta(theta) -> np.ndarray:
    return np.asarray(theta, dtype=float).reshape(-1)


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


# --- quartic: dX = -(X - theta)^3 dt + dW -----------------------------------


def _quartic_drift(theta, x):
    y = np.asarray(x, dtype=float) - _theta(theta)[0]
    return -(y * y * y)


def _quartic_grad(theta, x):
    y = np.asarray(x, dtype=float) - _theta(theta)[0]
    return (3.0 * y * y)[..., None]


def _quartic_hess(theta, x):
    y = np.asarray(x, dtype=float) - _theta(theta)[0]
    return (-6.0 * y)[..., None, None]


def _quartic_grad_dx(theta, x):
    y = np.asarray(x, dtype=float) - _theta(theta)[0]
    return (6.0 * y)[..., None]


def _quartic_antiderivative(theta, x):
    y = np.asarray(x, dtype=float) - _theta(theta)[0]
    return (y * y * y)[..., None]


def quartic_model(a: float, b: float) -> DiffusionModel:
    """``dX = -(X - theta)^3 dt + dW`` with ``theta`` in ``(a, b)``."""
    if not a < b:
        raise ConfigError(f"quartic model needs a < b, got ({a}, {b})")
    from .estimate import preliminary_quartic

    return DiffusionModel(
        name="quartic",
        dim_param=1,
        drift=_quartic_drift,
        drift_grad=_quartic_grad,
        drift_hess=_quartic_hess,
        drift_grad_dx=_quartic_grad_dx,
        sigma=_ones,
        sigma_dx=_zeros,
        theta_space=ParameterSpace((a,), (b,)),
        grad_antiderivative=_quartic_antiderivative,
        preliminary=preliminary_quartic,
    )


# --- two-parameter quartic: dX = -beta (X - alpha)^3 dt + dW -----------------


def _q2_drift(theta, x):
    alpha, beta = _theta(theta)
    y = np.asarray(x, dtype=float) - alpha
    return -beta * (y * y * y)


def _q2_grad(theta, x):
    alpha, beta = _theta(theta)
    y = np.asarray(x, dtype=float) - alpha
    return np.stack([3.0 * beta * y * y, -(y * y * y)], axis=-1)


def _q2_hess(theta, x):
    alpha, beta = _theta(theta)
    y = np.asarray(x, dtype=float) - alpha
    out = np.empty(y.shape + (2, 2))
    out[..., 0, 0] = -6.0 * beta * y
    out[..., 0, 1] = out[..., 1, 0] = 3.0 * y * y
    out[..., 1, 1] = 0.0
    return out


def _q2_grad_dx(theta, x):
    alpha, beta = _theta(theta)
    y = np.asarray(x, dtype=float) - alpha
    return np.stack([6.0 * beta * y, -3.0 * y * y], axis=-1)


def _q2_antiderivative(theta, x):
    alpha, beta = _theta(theta)
    y = np.asarray(x, dtype=float) - alpha
    y2 = y * y
    return np.stack([beta * y2 * y, -0.25 * y2 * y2], axis=-1)


def quartic2d_model(bounds: ParameterSpace) -> DiffusionModel:
    """``dX = -beta (X - alpha)^3 dt + dW`` with ``theta = (alpha, beta)``, ``beta > 0``."""
    if bounds.dim != 2:
        raise ConfigError("quartic2d needs a 2-dimensional parameter space")
    if bounds.lower[1] <= 0:
        raise ConfigError("quartic2d needs the beta lower bound to be positive")
    from .estimate import preliminary_quartic2d

    return DiffusionModel(
        name="quartic2d",
        dim_param=2,
        drift=_q2_drift,
        drift_grad=_q2_grad,
        drift_hess=_q2_hess,
        drift_grad_dx=_q2_grad_dx,
        sigma=_ones,
        sigma_dx=_zeros,
        theta_space=bounds,
        grad_antiderivative=_q2_antiderivative,
        preliminary=preliminary_quartic2d,
    )


# --- Ornstein-Uhlenbeck: dX = -theta X dt + dW ------------------------------


def _ou_drift(theta, x):
    return -_theta(theta)[0] * np.asarray(x, dtype=float)


def _ou_grad(theta, x):
    return (-np.asarray(x, dtype=float))[..., None]


def _ou_hess(theta, x):
    return np.zeros(np.shape(x) + (1, 1))


def _ou_grad_dx(theta, x):
    return -np.ones(np.shape(x) + (1,))


def _ou_antiderivative(theta, x):
    x = np.asarray(x, dtype=float)
    return (-0.5 * x * x)[..., None]


def ou_model(theta_space: ParameterSpace) -> DiffusionModel:
    """``dX = -theta X dt + dW`` with ``theta > 0``; stationary law ``N(0, 1/(2 theta))``."""
    if theta_space.dim != 1:
        raise ConfigError("ou model needs a 1-dimensional parameter space")
    if theta_space.lower[0] <= 0:
        raise ConfigError("ou model needs a positive theta range")
    from .estimate import preliminary_ou

    return DiffusionModel(
        name="ou",
        dim_param=1,
        drift=_ou_drift,
        drift_grad=_ou_grad,
        drift_hess=_ou_hess,
        drift_grad_dx=_ou_grad_dx,
        sigma=_ones,
        sigma_dx=_zeros,
        theta_space=theta_space,
        grad_antiderivative=_ou_antiderivative,
        preliminary=preliminary_ou,
    )


DEFAULT_BOUNDS = {
    "quartic": ((0.0,), (2.0,)),
    "quartic2d": ((-1.0, 0.2), (1.0, 3.0)),
    "ou": ((0.1,), (3.0,)),
}


def get_model(model_id: str, lower=None, upper=None) -> DiffusionModel:
    """Build a built-in model from its string id and bounds.

    Missing bounds fall back to ``DEFAULT_BOUNDS``.
    """
    if model_id not in DEFAULT_BOUNDS:
        raise ConfigError(
            f"unknown model {model_id!r}; choose from {sorted(DEFAULT_BOUNDS)}"
        )
    dlo, dhi = DEFAULT_BOUNDS[model_id]
    space = ParameterSpace(dlo if lower is None else lower, dhi if upper is None else upper)
    if model_id == "quartic":
        if space.dim != 1:
            raise ConfigError("quartic needs a 1-dimensional parameter space")
        return quartic_model(space.lower[0], space.upper[0])
    if model_id == "quartic2d":
        return quartic2d_model(space)
    return ou_model(space)


MODEL_IDS = tuple(sorted(DEFAULT_BOUNDS))
