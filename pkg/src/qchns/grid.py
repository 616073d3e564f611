"""Uniform cell-centred grid on a rectangle and its difference operators.

Fields are plain numpy arrays: scalars have shape ``(nx, ny)`` and vectors
``(2, nx, ny)``, indexed ``[i, j]`` with ``x`` along axis 0.  Flattening is
C order, so cell ``(i, j)`` sits at position ``i * ny + j``.

Boundary conditions are realised with ghost cells that are never stored.
A ghost value is ``r`` times the value of the adjacent interior cell:

* ``r = +1``  mirror ghost, zero normal derivative (Neumann scalars);
* ``r = -1``  antisymmetric ghost, zero wall value (normal velocity);
* ``r = (2 eta - a h) / (2 eta + a h)``  Robin ghost for the tangential
  velocity, the flat-wall form ``eta d_n u_t = -a u_t`` of the Navier
  slip condition.

Corner cells take the condition of each wall along the corresponding axis.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, NonFiniteInput

SNAPSHOT_MAGIC = b"QCHNSFLD"
_HEADER = struct.Struct("<8siidd")


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 8 or int(self.ny) < 8:
            raise DomainError(f"grid needs at least 8 cells per axis, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(X, Y)`` at cell centres."""
        X, Y = self.mesh()
        return np.asarray(func(X, Y), dtype=float) * np.ones(self.shape)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.nx * factor, self.ny * factor, self.Lx, self.Ly)


def check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("field contains non-finite values")


# ---------------------------------------------------------------------------
# quadrature helpers


def integrate(grid: Grid, f) -> float:
    """Midpoint-rule integral over the domain."""
    return float(np.sum(f)) * grid.cell_area


def inner(grid: Grid, a, b) -> float:
    return float(np.sum(np.asarray(a) * np.asarray(b))) * grid.cell_area


def l2norm(grid: Grid, f) -> float:
    return float(np.sqrt(inner(grid, f, f)))


def mean(grid: Grid, f) -> float:
    return float(np.mean(f))


# ---------------------------------------------------------------------------
# sparse building blocks


def _as_wall_array(r, n):
    r = np.asarray(r, dtype=float)
    return np.full(n, float(r)) if r.ndim == 0 else r.reshape(n)


def _central_1d(n: int, h: float) -> sp.csr_matrix:
    off = np.full(n - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], shape=(n, n), format="csr")


def central_x(grid: Grid, r_lo=1.0, r_hi=1.0) -> sp.csr_matrix:
    """Central difference along x with ghost factors on the left/right walls.

    ``r_lo`` and ``r_hi`` are scalars or arrays of length ``ny``.
    """
    nx, ny, h = grid.nx, grid.ny, grid.hx
    D = sp.kron(_central_1d(nx, h), sp.identity(ny), format="lil")
    r_lo = _as_wall_array(r_lo, ny)
    r_hi = _as_wall_array(r_hi, ny)
    d = np.zeros(grid.size)
    d[:ny] = -r_lo / (2 * h)
    d[-ny:] = r_hi / (2 * h)
    return (D.tocsr() + sp.diags(d)).tocsr()


def central_y(grid: Grid, r_lo=1.0, r_hi=1.0) -> sp.csr_matrix:
    """Central difference along y; ``r_lo``/``r_hi`` have length ``nx``."""
    nx, ny, h = grid.nx, grid.ny, grid.hy
    D = sp.kron(sp.identity(nx), _central_1d(ny, h), format="csr")
    r_lo = _as_wall_array(r_lo, nx)
    r_hi = _as_wall_array(r_hi, nx)
    d = np.zeros(grid.shape)
    d[:, 0] = -r_lo / (2 * h)
    d[:, -1] += r_hi / (2 * h)
    return (D + sp.diags(d.ravel())).tocsr()


def _face_1d(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n - 1) / h
    return sp.diags([-e, e], [0, 1], shape=(n - 1, n), format="csr")


@lru_cache(maxsize=32)
def face_difference(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Compact differences on interior faces: ``(Fx, Fy)``.

    Wall faces carry no difference, which is the zero-flux Neumann closure.
    """
    Fx = sp.kron(_face_1d(grid.nx, grid.hx), sp.identity(grid.ny), format="csr")
    Fy = sp.kron(sp.identity(grid.nx), _face_1d(grid.ny, grid.hy), format="csr")
    return Fx, Fy


def face_average(grid: Grid, c) -> tuple[np.ndarray, np.ndarray]:
    c = np.asarray(c, dtype=float) * np.ones(grid.shape)
    cx = 0.5 * (c[1:, :] + c[:-1, :])
    cy = 0.5 * (c[:, 1:] + c[:, :-1])
    return cx.ravel(), cy.ravel()


def flux_divergence_matrix(grid: Grid, c) -> sp.csr_matrix:
    """Compact five-point ``div(c grad .)`` with zero wall flux.

    Face coefficients are arithmetic means of the adjacent cells.  The
    matrix is symmetric negative semidefinite with constants in its kernel.
    """
    Fx, Fy = face_difference(grid)
    cx, cy = face_average(grid, c)
    return -(Fx.T @ sp.diags(cx) @ Fx + Fy.T @ sp.diags(cy) @ Fy).tocsr()


@lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    return flux_divergence_matrix(grid, 1.0)


@lru_cache(maxsize=32)
def gradient_matrices(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Central gradient of a Neumann scalar (mirror ghosts)."""
    return central_x(grid, 1.0, 1.0), central_y(grid, 1.0, 1.0)


@lru_cache(maxsize=32)
def divergence_matrices(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Central divergence of a wall-tangent vector (antisymmetric normal ghosts).

    These are exactly the negated transposes of :func:`gradient_matrices`.
    """
    return central_x(grid, -1.0, -1.0), central_y(grid, -1.0, -1.0)


@lru_cache(maxsize=32)
def gradient_operator(grid: Grid) -> sp.csr_matrix:
    """Stacked gradient ``(2N x N)``."""
    Gx, Gy = gradient_matrices(grid)
    return sp.vstack([Gx, Gy], format="csr")


@lru_cache(maxsize=32)
def divergence_operator(grid: Grid) -> sp.csr_matrix:
    """Stacked divergence ``(N x 2N)``."""
    Dx, Dy = divergence_matrices(grid)
    return sp.hstack([Dx, Dy], format="csr")


# ---------------------------------------------------------------------------
# field-level operators


def gradient(grid: Grid, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    check_finite(f)
    Gx, Gy = gradient_matrices(grid)
    v = f.ravel()
    return np.stack([(Gx @ v).reshape(grid.shape), (Gy @ v).reshape(grid.shape)])


def divergence(grid: Grid, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    check_finite(v)
    Dx, Dy = divergence_matrices(grid)
    return (Dx @ v[0].ravel() + Dy @ v[1].ravel()).reshape(grid.shape)


def laplacian(grid: Grid, f) -> np.ndarray:
    return flux_divergence(grid, 1.0, f)


def flux_divergence(grid: Grid, c, f) -> np.ndarray:
    """``div(c grad f)`` for a Neumann scalar ``f``."""
    f = np.asarray(f, dtype=float)
    check_finite(f)
    # face fluxes first, so constants give exact zeros
    Fx, Fy = face_difference(grid)
    cx, cy = face_average(grid, c)
    v = f.ravel()
    out = -(Fx.T @ (cx * (Fx @ v)) + Fy.T @ (cy * (Fy @ v)))
    return out.reshape(grid.shape)


def dirichlet_form(grid: Grid, f, g=None) -> float:
    """``int grad f . grad g`` from compact face differences.

    Equals ``-inner(laplacian(f), g)`` exactly.
    """
    Fx, Fy = face_difference(grid)
    f = np.asarray(f, dtype=float).ravel()
    g = f if g is None else np.asarray(g, dtype=float).ravel()
    return float((Fx @ f) @ (Fx @ g) + (Fy @ f) @ (Fy @ g)) * grid.cell_area


# ---------------------------------------------------------------------------
# velocity boundary handling


@dataclass(frozen=True)
class WallFactors:
    """Robin ghost factors ``r`` for the tangential velocity on each wall."""

    left: np.ndarray
    right: np.ndarray
    bottom: np.ndarray
    top: np.ndarray

    def trace(self, name: str) -> np.ndarray:
        """Ratio of wall value to adjacent cell value, ``(1 + r) / 2``."""
        return 0.5 * (1.0 + getattr(self, name))


def robin_factors(grid: Grid, eta, a) -> WallFactors:
    """Ghost factors from ``eta d_n u_t = -a u_t`` evaluated at boundary cells."""
    eta = np.asarray(eta, dtype=float) * np.ones(grid.shape)
    a = np.asarray(a, dtype=float) * np.ones(grid.shape)

    def r(e, aa, h):
        return (2 * e - aa * h) / (2 * e + aa * h)

    return WallFactors(
        left=r(eta[0, :], a[0, :], grid.hx),
        right=r(eta[-1, :], a[-1, :], grid.hx),
        bottom=r(eta[:, 0], a[:, 0], grid.hy),
        top=r(eta[:, -1], a[:, -1], grid.hy),
    )


def velocity_gradient_matrix(grid: Grid, walls: WallFactors) -> sp.csr_matrix:
    """``(4N x 2N)`` map from ``(ux, uy)`` to ``(dx ux, dy ux, dx uy, dy uy)``.

    Normal components use antisymmetric ghosts, tangential ones the Robin
    factors in ``walls``.
    """
    Dxn, Dyn = divergence_matrices(grid)
    Dyt = central_y(grid, walls.bottom, walls.top)
    Dxt = central_x(grid, walls.left, walls.right)
    Z = sp.csr_matrix((grid.size, grid.size))
    return sp.bmat([[Dxn, Z], [Dyt, Z], [Z, Dxt], [Z, Dyn]], format="csr")


def friction_matrix(grid: Grid, walls: WallFactors, a, weight=1.0) -> sp.dia_matrix:
    """Diagonal wall-friction form ``oint weight * a |u_t|^2`` per unit cell area.

    The wall value of the tangential velocity is ``(1 + r) / 2`` times the
    adjacent cell value.
    """
    a = np.asarray(a, dtype=float) * np.ones(grid.shape)
    w = np.asarray(weight, dtype=float) * np.ones(grid.shape)
    dx = np.zeros(grid.shape)
    dy = np.zeros(grid.shape)
    # ux is tangential on bottom/top walls, uy on left/right walls
    dx[:, 0] += a[:, 0] * w[:, 0] * walls.trace("bottom") ** 2 / grid.hy
    dx[:, -1] += a[:, -1] * w[:, -1] * walls.trace("top") ** 2 / grid.hy
    dy[0, :] += a[0, :] * w[0, :] * walls.trace("left") ** 2 / grid.hx
    dy[-1, :] += a[-1, :] * w[-1, :] * walls.trace("right") ** 2 / grid.hx
    return sp.diags(np.concatenate([dx.ravel(), dy.ravel()]))


def wall_tangential_trace(grid: Grid, u, walls: WallFactors) -> dict[str, np.ndarray]:
    """Tangential velocity on each wall implied by the ghost closure."""
    return {
        "left": walls.trace("left") * u[1][0, :],
        "right": walls.trace("right") * u[1][-1, :],
        "bottom": walls.trace("bottom") * u[0][:, 0],
        "top": walls.trace("top") * u[0][:, -1],
    }


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(path, grid: Grid, values) -> None:
    """Binary snapshot: 32-byte header then float64 values in C order.

    The header is ``b"QCHNSFLD"``, ``nx`` and ``ny`` as little-endian int32,
    then ``Lx`` and ``Ly`` as float64.  Vector fields are written component
    after component.
    """
    values = np.asarray(values, dtype="<f8")
    if values.shape[-2:] != grid.shape:
        raise DomainError(f"field shape {values.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, grid.nx, grid.ny, grid.Lx, grid.Ly))
        fh.write(np.ascontiguousarray(values).tobytes())


def read_snapshot(path) -> tuple[Grid, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: truncated snapshot header")
    magic, nx, ny, Lx, Ly = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    grid = Grid(nx, ny, Lx, Ly)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    ncomp, rem = divmod(data.size, grid.size)
    if rem or ncomp == 0:
        raise DomainError(f"{path}: payload of {data.size} values does not fit {nx}x{ny}")
    data = data.reshape((ncomp,) + grid.shape).astype(float)
    return grid, (data[0] if ncomp == 1 else data)


def export_csv(path, grid: Grid, values) -> None:
    """Write ``x, y, value`` rows (one value column per component)."""
    values = np.asarray(values, dtype=float)
    comps = [values] if values.ndim == 2 else list(values)
    X, Y = grid.mesh()
    cols = [X.ravel(), Y.ravel()] + [c.ravel() for c in comps]
    names = ["x", "y"] + (["value"] if len(comps) == 1 else [f"value{k}" for k in range(len(comps))])
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")
