"""Manufactured-solution refinement studies for the discrete operators."""
from __future__ import annotations

import numpy as np

from . import grid as gc
from .elliptic import helmholtz_project, solve_neumann_poisson
from .linear_step import LinearStepSystem
from .phase import PhysParams


def observed_orders(errors) -> list[float]:
    """``log2(e_k / e_{k+1})`` for errors on grids refined by two."""
    e = np.asarray(errors, dtype=float)
    return [float(v) for v in np.log2(e[:-1] / e[1:])]


def _interior(grid: gc.Grid, margin: float = 0.2) -> np.ndarray:
    """Mask of cells at least ``margin`` (relative) away from every wall."""
    X, Y = grid.mesh()
    return ((X > margin * grid.Lx) & (X < (1 - margin) * grid.Lx)
            & (Y > margin * grid.Ly) & (Y < (1 - margin) * grid.Ly))


def _rms(a, mask=None) -> float:
    a = np.asarray(a)
    if mask is not None:
        a = a[..., mask]
    return float(np.sqrt(np.mean(a ** 2)))


def elliptic_errors(n: int, Lx: float = 1.0, Ly: float = 1.0) -> dict:
    """Errors of gradient, Laplacian and the Neumann solve on ``cos cos``."""
    grid = gc.Grid(n, n, Lx, Ly)
    X, Y = grid.mesh()
    kx, ky = np.pi / Lx, np.pi / Ly
    f = np.cos(kx * X) * np.cos(ky * Y)
    grad = np.stack([-kx * np.sin(kx * X) * np.cos(ky * Y), -ky * np.cos(kx * X) * np.sin(ky * Y)])
    lap = -(kx ** 2 + ky ** 2) * f
    u = solve_neumann_poisson(grid, lap)
    # projection of a gradient plus a wall-tangent solenoidal field
    psi_x = np.sin(kx * X) ** 2 * np.sin(ky * Y) * np.cos(ky * Y) * ky
    psi_y = -np.sin(ky * Y) ** 2 * np.sin(kx * X) * np.cos(kx * X) * kx
    w = helmholtz_project(grid, np.stack([psi_x, psi_y]) + grad)[0]
    return {
        "gradient": _rms(gc.gradient(grid, f) - grad),
        "laplacian": _rms(gc.laplacian(grid, f) - lap),
        "poisson": gc.l2norm(grid, u - (f - f.mean())),
        "projection": _rms(w - np.stack([psi_x, psi_y])),
    }


def linear_operator_self_errors(n: int, params: PhysParams, dt: float = 1e-2) -> float:
    """Difference of the step operator between an ``n`` grid and its 3x refinement.

    Refining by three keeps every coarse cell centre, so smooth fields can be
    compared pointwise in the interior without interpolation.
    """
    out = []
    for m in (n, 3 * n):
        grid = gc.Grid(m, m)
        X, Y = grid.mesh()
        phi0 = 0.3 * np.cos(np.pi * X) * np.cos(np.pi * Y)
        u = np.stack([np.sin(np.pi * Y) * np.sin(2 * np.pi * X) ** 2, np.sin(np.pi * X) * np.cos(np.pi * Y) ** 2])
        phi = 0.2 * np.cos(2 * np.pi * X) * np.cos(np.pi * Y)
        ru, rp = LinearStepSystem(grid, phi0, dt, params).apply(u, phi)
        out.append((grid, np.concatenate([ru, rp[None]])))
    (g1, a), (g3, b) = out
    b = b[:, 1::3, 1::3]
    return _rms(a - b, _interior(g1))


def manufactured_study(n0: int = 16, levels: int = 3, params: PhysParams | None = None) -> dict:
    """Errors and observed orders on ``n0 * 2^k`` grids."""
    params = params or PhysParams()
    sizes = [n0 * 2 ** k for k in range(levels)]
    rows = [elliptic_errors(n) for n in sizes]
    res = {"sizes": sizes}
    for key in rows[0]:
        errs = [r[key] for r in rows]
        res[key] = {"errors": errs, "orders": observed_orders(errs)}
    lin = [linear_operator_self_errors(n, params) for n in sizes[:2]]
    res["linear_step"] = {"errors": lin, "orders": observed_orders(lin)}
    return res
