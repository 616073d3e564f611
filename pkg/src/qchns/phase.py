"""Constitutive laws: potential, density, viscosity, stress, chemical potential."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import grid as gc
from .errors import DomainError, ViscosityNonpositive

DENSITY_FLOOR = 0.1
PHI_LIMIT = 1.2
NU_RANGE = (0.2, 5.0)

# (dx ux, dy ux, dx uy, dy uy) -> stress pairing, per unit viscosity
_STRESS_FORM = np.array([
    [4 / 3, 0.0, 0.0, -2 / 3],
    [0.0, 1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0, 0.0],
    [-2 / 3, 0.0, 0.0, 4 / 3],
])


def alpha_from_eps(eps: float) -> float:
    """Density contrast ratio ``alpha = -eps / (2 + eps)``."""
    if not -1.0 < eps < 0.0:
        raise DomainError(f"eps must lie in (-1, 0), got {eps}")
    return -eps / (2.0 + eps)


@dataclass(frozen=True)
class PhysParams:
    """Model constants; every dimensionless group is fixed to one.

    ``a0`` is the constant wall friction.  ``gravity_on`` switches the body
    force ``-rho k`` with ``k`` pointing along +y.
    """

    eps: float = -0.5
    nu: float = 1.0
    a0: float = 1.0
    gravity_on: bool = False

    def __post_init__(self):
        alpha_from_eps(self.eps)
        if not NU_RANGE[0] <= self.nu <= NU_RANGE[1]:
            raise DomainError(f"viscosity ratio nu must lie in {NU_RANGE}, got {self.nu}")
        if not self.a0 > 0:
            raise DomainError("wall friction a0 must be positive")

    @property
    def alpha(self) -> float:
        return alpha_from_eps(self.eps)

    @classmethod
    def from_alpha(cls, alpha: float, **kw) -> "PhysParams":
        return cls(eps=-2.0 * alpha / (1.0 + alpha), **kw)


def double_well(phi):
    """Return ``(F, f)`` with ``F = (1 - phi^2)^2 / 4`` and ``f = F'``."""
    phi = np.asarray(phi, dtype=float)
    return 0.25 * (1.0 - phi ** 2) ** 2, phi ** 3 - phi


def density(phi, p: PhysParams):
    return 0.5 * p.eps * np.asarray(phi, dtype=float) + 1.0 + 0.5 * p.eps


def viscosity(phi, p: PhysParams):
    phi = np.clip(np.asarray(phi, dtype=float), -1.1, 1.1)
    eta = 0.5 * (p.nu - 1.0) * phi + 0.5 * (p.nu + 1.0)
    if np.any(eta <= 0):
        raise ViscosityNonpositive("viscosity became nonpositive")
    return eta


def friction(phi, p: PhysParams):
    return np.full(np.shape(phi), p.a0, dtype=float)


def wall_factors(grid: gc.Grid, phi, p: PhysParams) -> gc.WallFactors:
    return gc.robin_factors(grid, viscosity(phi, p), p.a0)


def stress_from_gradient(grad_u, eta):
    """Cellwise ``S = 2 eta D(u) - 2/3 eta div(u) I`` from ``(4, nx, ny)`` gradients.

    Returns an array of shape ``(2, 2, nx, ny)``.
    """
    a, b, c, d = grad_u
    div = a + d
    S = np.empty((2, 2) + a.shape)
    S[0, 0] = eta * (2 * a - 2 / 3 * div)
    S[1, 1] = eta * (2 * d - 2 / 3 * div)
    S[0, 1] = S[1, 0] = eta * (b + c)
    return S


def velocity_gradient(grid: gc.Grid, u, phi, p: PhysParams) -> np.ndarray:
    G = gc.velocity_gradient_matrix(grid, wall_factors(grid, phi, p))
    return (G @ np.concatenate([u[0].ravel(), u[1].ravel()])).reshape((4,) + grid.shape)


def stress(grid: gc.Grid, phi, u, p: PhysParams) -> np.ndarray:
    """Newtonian stress with the Navier-slip ghost closure for ``u``."""
    gc.check_finite(phi, u)
    return stress_from_gradient(velocity_gradient(grid, u, phi, p), viscosity(phi, p))


def viscous_matrix(grid: gc.Grid, phi, p: PhysParams, weight=1.0) -> sp.csr_matrix:
    """Symmetric ``K`` with ``-K u`` approximating ``div(weight S(phi, Du))``.

    ``K = G^T M G + B``: ``G`` is the ghost-closed velocity gradient, ``M``
    the cellwise stress pairing scaled by ``weight * eta`` and ``B`` the
    wall friction ``weight * a``.  By construction
    ``<K u, u> = int weight eta (2 D:D - 2/3 div^2) + oint weight a |u_t|^2``.
    """
    walls = wall_factors(grid, phi, p)
    G = gc.velocity_gradient_matrix(grid, walls)
    ew = (viscosity(phi, p) * np.asarray(weight, dtype=float) * np.ones(grid.shape)).ravel()
    M = sp.kron(sp.csr_matrix(_STRESS_FORM), sp.diags(ew), format="csr")
    B = gc.friction_matrix(grid, walls, p.a0, weight)
    return (G.T @ M @ G + B).tocsr()


def chemical_potential(grid: gc.Grid, phi) -> np.ndarray:
    """``mu = f(phi) - laplacian(phi)``."""
    phi = np.asarray(phi, dtype=float)
    return double_well(phi)[1] - gc.laplacian(grid, phi)


def dissipation_density(grad_u, eta):
    """Cellwise ``eta (2 D:D - 2/3 (div u)^2)``; nonnegative up to rounding."""
    a, b, c, d = grad_u
    sym = 0.5 * (b + c)
    dd = a * a + d * d + 2 * sym * sym
    return eta * (2 * dd - 2 / 3 * (a + d) ** 2)
