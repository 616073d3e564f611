"""Neumann Poisson solves on mean-zero fields and the Helmholtz projection."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as gc
from .errors import CompatibilityViolated, SolverDiverged

COMPAT_TOL = 1e-10
DIRECT_LIMIT = 256 * 256


class NeumannPoissonSolver:
    """Solve ``lap u = f`` with zero normal flux and ``mean(u) = 0``.

    ``kind="compact"`` uses the five-point Laplacian, ``kind="projection"``
    the wide ``divergence(gradient(.))`` operator.  The second one makes the
    discrete Helmholtz projection an exact orthogonal projector.

    The singular operator is bordered with the mean constraint, which keeps
    the system symmetric.  Grids up to 256^2 cells are factorised once;
    larger ones use Jacobi-preconditioned CG on the mean-zero subspace.
    """

    def __init__(self, grid: gc.Grid, kind: str = "compact", rtol: float = 1e-10):
        self.grid = grid
        self.kind = kind
        self.rtol = rtol
        if kind == "compact":
            self.matrix = gc.laplacian_matrix(grid)
        elif kind == "projection":
            self.matrix = (gc.divergence_operator(grid) @ gc.gradient_operator(grid)).tocsr()
        else:
            raise ValueError(f"unknown Laplacian kind {kind!r}")
        n = grid.size
        self.direct = n <= DIRECT_LIMIT
        if self.direct:
            e = sp.csr_matrix(np.ones((n, 1)) / n)
            bordered = sp.bmat([[self.matrix, e], [e.T, None]], format="csc")
            self._lu = spla.splu(bordered)
        else:
            self._diag = -self.matrix.diagonal()

    def check_compatible(self, f: np.ndarray, scale: float | None = None) -> float:
        m = float(np.mean(f))
        ref = float(np.max(np.abs(f), initial=0.0))
        if scale is not None:
            ref = max(ref, scale)
        if abs(m) > COMPAT_TOL * ref:
            raise CompatibilityViolated(
                f"right-hand side mean {m:.3e} exceeds {COMPAT_TOL:g} x {ref:.3e}")
        return m

    def solve(self, f, scale: float | None = None) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        gc.check_finite(f)
        m = self.check_compatible(f, scale)
        b = (f - m).ravel()
        if not b.any():
            return np.zeros(self.grid.shape)
        if self.direct:
            x = self._lu.solve(np.append(b, 0.0))[:-1]
        else:
            x = self._cg(b)
        x -= x.mean()
        res = self.matrix @ x - b
        if np.linalg.norm(res) > 1e-8 * np.linalg.norm(b):
            raise SolverDiverged(f"Poisson residual {np.linalg.norm(res):.3e} too large")
        return x.reshape(self.grid.shape)

    def _cg(self, b):
        A = spla.LinearOperator(self.matrix.shape, matvec=lambda v: -(self.matrix @ v))
        M = spla.LinearOperator(self.matrix.shape, matvec=lambda v: v / self._diag)
        x, info = spla.cg(A, -b, rtol=self.rtol, M=M, maxiter=20 * self.grid.size)
        if info != 0:
            raise SolverDiverged(f"CG did not converge (info={info})")
        return x


@lru_cache(maxsize=16)
def poisson_solver(grid: gc.Grid, kind: str = "compact") -> NeumannPoissonSolver:
    return NeumannPoissonSolver(grid, kind)


def solve_neumann_poisson(grid: gc.Grid, f, scale: float | None = None) -> np.ndarray:
    """Mean-zero ``u`` with ``laplacian(u) = f``; this is ``G = lap_N^{-1}``."""
    return poisson_solver(grid, "compact").solve(f, scale)


def helmholtz_project(grid: gc.Grid, v) -> tuple[np.ndarray, np.ndarray]:
    """Split ``v = w + grad q`` with ``divergence(w) = 0``.

    Returns ``(w, q)``.  ``w`` is the discrete solenoidal, wall-tangent part;
    the projection is idempotent and orthogonal in the cell L2 product.
    """
    v = np.asarray(v, dtype=float)
    d = gc.divergence(grid, v)
    scale = float(np.max(np.abs(v), initial=0.0)) / min(grid.hx, grid.hy)
    q = poisson_solver(grid, "projection").solve(d, scale)
    return v - gc.gradient(grid, q), q


def hminus1_norm_sq(grid: gc.Grid, f) -> float:
    """``<-G f, f>``, the squared dual norm on mean-zero fields."""
    return -gc.inner(grid, solve_neumann_poisson(grid, f), f)
