"""Invariant density and Fisher information of the built-in models.

Prints the quadrature Fisher information next to closed forms: 4.5 for the
quartic model (9 E y^4 with E y^4 = 1/2), 1/(2 theta) for Ornstein-Uhlenbeck,
and the quartic density at its centre, 8^(1/4) / Gamma(1/4).
"""

import numpy as np
from scipy.special import gamma

from multistep_mle.models import get_model
from multistep_mle.stationary import (
    build_density,
    density_moment,
    fisher_quadrature,
    mde_limit_variance_quartic,
)

quartic = get_model("quartic", [-1.0], [3.0])
for theta in (0.0, 1.0, 2.5):
    info = fisher_quadrature(quartic, [theta]).mat[0, 0]
    print(f"quartic theta={theta:4.1f}: I = {info:.10f}  (closed form 4.5)")

table = build_density(quartic, [0.0])
print(f"quartic f(0)        = {float(table.pdf(np.array([0.0]))[0]):.7f}  "
      f"(closed form {8 ** 0.25 / gamma(0.25):.7f})")
print(f"quartic E y^4       = {density_moment(table, 4):.10f}  (closed form 0.5)")
print(f"preliminary limit variance D2 = {mde_limit_variance_quartic(table):.10f}")

ou = get_model("ou")
for theta in (0.5, 1.0, 2.0):
    info = fisher_quadrature(ou, [theta]).mat[0, 0]
    print(f"OU theta={theta}: I = {info:.10f}  (closed form {1 / (2 * theta):.10f})")

q2 = get_model("quartic2d")
print("quartic2d (alpha=0, beta=1) information matrix:")
print(fisher_quadrature(q2, [0.0, 1.0]).mat)
