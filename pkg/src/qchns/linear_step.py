"""Frozen-coefficient linear operator of one backward-Euler step.

Unknowns are stacked as ``[ux; uy; dphi]``, each block a C-ordered copy of
the cell array (``i * ny + j``).  ``dphi`` is the increment of the phase
field over the step.  With ``rho0 = density(phi_ref)`` and
``c0 = (1/alpha - phi_ref) / rho0`` the operator is::

    u/dt   - div(S(phi_ref, Du) / rho0) + grad div(c0 grad dphi)
    dphi/dt - div(u) / alpha

The viscous block is the symmetric matrix of :func:`phase.viscous_matrix`
(Navier slip closure), ``div(c0 grad .)`` is the compact flux form and the
outer gradient and the divergence are the central operators.

The phase row has the diagonal block ``I/dt``, so the solve eliminates
``dphi`` and factorises the velocity Schur complement
``I/dt + K + (dt/alpha) H D``; the residual is still checked against the
full block matrix.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as gc
from .errors import AssemblyNaN, CoefficientSignError, SingularSystem
from .phase import PhysParams, density, viscous_matrix

RESIDUAL_TOL = 1e-9
MAX_REFINE = 3


class LinearStepSystem:
    def __init__(self, grid: gc.Grid, phi_ref, dt: float, params: PhysParams):
        if not dt > 0:
            raise ValueError("dt must be positive")
        phi_ref = np.asarray(phi_ref, dtype=float)
        gc.check_finite(phi_ref)
        alpha = params.alpha
        margin = 1.0 / alpha - phi_ref
        if np.min(margin) <= 0:
            raise CoefficientSignError("1/alpha - phi_ref must stay positive")
        self.grid, self.dt, self.params = grid, float(dt), params
        self.phi_ref = phi_ref.copy()
        self.rho0 = density(phi_ref, params)
        self.c0 = margin / self.rho0

        n = grid.size
        I = sp.identity(n, format="csr")
        self.K = viscous_matrix(grid, phi_ref, params, weight=1.0 / self.rho0)
        self.H = (gc.gradient_operator(grid) @ gc.flux_divergence_matrix(grid, self.c0)).tocsr()
        self.D = gc.divergence_operator(grid)
        self.matrix = sp.bmat([
            [sp.identity(2 * n) / dt + self.K, self.H],
            [-self.D / alpha, I / dt],
        ], format="csr")
        if not np.all(np.isfinite(self.matrix.data)):
            raise AssemblyNaN("non-finite entries in the step matrix")
        self._lu = None

    # -- layout helpers -------------------------------------------------
    def stack(self, u, dphi) -> np.ndarray:
        return np.concatenate([np.asarray(u[0]).ravel(), np.asarray(u[1]).ravel(),
                               np.asarray(dphi).ravel()])

    def unstack(self, x) -> tuple[np.ndarray, np.ndarray]:
        n, shape = self.grid.size, self.grid.shape
        u = np.stack([x[:n].reshape(shape), x[n:2 * n].reshape(shape)])
        return u, x[2 * n:].reshape(shape)

    # -- operator actions -----------------------------------------------
    def apply(self, u, dphi) -> tuple[np.ndarray, np.ndarray]:
        return self.unstack(self.matrix @ self.stack(u, dphi))

    def spatial_momentum(self, u, dphi) -> np.ndarray:
        """Momentum rows without the ``u/dt`` term: ``K u + H dphi``."""
        n = self.grid.size
        x = self.stack(u, dphi)
        r = self.K @ x[:2 * n] + self.H @ x[2 * n:]
        return r.reshape((2,) + self.grid.shape)

    def factorize(self):
        if self._lu is None:
            n2 = 2 * self.grid.size
            schur = (sp.identity(n2) / self.dt + self.K
                     + (self.dt / self.params.alpha) * (self.H @ self.D)).tocsc()
            try:
                self._lu = spla.splu(schur)
            except RuntimeError as exc:  # exactly singular pivot
                raise SingularSystem(str(exc)) from exc
        return self._lu

    def _schur_solve(self, b: np.ndarray) -> np.ndarray:
        n2, dt = 2 * self.grid.size, self.dt
        b_u, b_phi = b[:n2], b[n2:]
        u = self.factorize().solve(b_u - dt * (self.H @ b_phi))
        return np.concatenate([u, dt * (b_phi + (self.D @ u) / self.params.alpha)])

    def solve(self, rhs_u, rhs_phi) -> tuple[np.ndarray, np.ndarray]:
        """Direct solve plus up to ``MAX_REFINE`` refinement sweeps.

        Refinement only matters for very large ``dt``, where the Schur
        complement is dominated by ``(dt/alpha) H D`` and loses the viscous
        block to rounding.
        """
        b = self.stack(rhs_u, rhs_phi)
        if not np.all(np.isfinite(b)):
            raise AssemblyNaN("non-finite right-hand side")
        nb = np.linalg.norm(b)
        x = self._schur_solve(b)
        if nb == 0:
            return self.unstack(x)
        for _ in range(MAX_REFINE + 1):
            r = b - self.matrix @ x
            res = np.linalg.norm(r) / nb
            if res <= RESIDUAL_TOL:
                return self.unstack(x)
            x = x + self._schur_solve(r)
        raise SingularSystem(f"relative residual {res:.2e} above {RESIDUAL_TOL:g}")

def assemble(grid: gc.Grid, phi_ref, dt: float, params: PhysParams) -> LinearStepSystem:
    return LinearStepSystem(grid, phi_ref, dt, params)


def solve(system: LinearStepSystem, rhs_u, rhs_phi) -> tuple[np.ndarray, np.ndarray]:
    return system.solve(rhs_u, rhs_phi)
