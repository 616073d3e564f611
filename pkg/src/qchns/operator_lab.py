"""Dense checks of the operators behind the analytic-semigroup argument.

Everything is assembled from the solver's own sparse operators and then
restricted to the relevant subspaces with dense orthonormal bases:

* scalar fields ``(phi', g)`` live on the mean-zero subspace, paired with the
  ``H^-1`` weight ``W = (-lap_N)^-1``;
* velocities ``w`` live on ``ker(divergence)``, the range of the discrete
  Helmholtz projection.

For ``A = lap_N div(c grad .)`` with ``c = (1/alpha - phi0)/rho0`` and
``B = -lap_N(b .)`` with ``b = 4/3 eta(phi0)/rho0``, the ``W``-weighted
matrices ``W A = -flux_divergence(c)`` and ``W B = diag(b)`` are symmetric,
which is the discrete form of the self-adjointness conditions.  Intended for
grids up to 48^2 cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import grid as gc
from .elliptic import helmholtz_project, solve_neumann_poisson
from .phase import PhysParams, density, viscosity, viscous_matrix

DENSE_LIMIT = 48 * 48
SYM_TOL = 1e-10


def _sym_defect(M: np.ndarray) -> float:
    n = np.linalg.norm(M)
    return float(np.linalg.norm(M - M.T) / n) if n > 0 else 0.0


def _sqrtm_spd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of an SPD matrix."""
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    if lam.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    s = np.sqrt(lam)
    return (V * s) @ V.T, (V / s) @ V.T


def mean_zero_basis(n: int) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of vectors with zero sum."""
    return sla.null_space(np.ones((1, n)))


@dataclass
class DiscreteOperatorBundle:
    grid: gc.Grid
    params: PhysParams
    phi0: np.ndarray
    b_scale: float = 1.0
    c_scale: float = 1.0

    def __post_init__(self):
        if self.grid.size > DENSE_LIMIT:
            raise ValueError(f"dense checks are limited to {DENSE_LIMIT} cells")
        self.phi0 = np.broadcast_to(np.asarray(self.phi0, dtype=float), self.grid.shape).copy()
        gc.check_finite(self.phi0)
        p = self.params
        self.rho0 = density(self.phi0, p)
        self.eta0 = viscosity(self.phi0, p)
        self.c = self.c_scale * (1.0 / p.alpha - self.phi0) / self.rho0
        self.nu0 = 2.0 * self.eta0 / self.rho0
        self.b = self.b_scale * (self.nu0 - 2.0 / 3.0 * self.eta0 / self.rho0)
        self.L = gc.laplacian_matrix(self.grid)
        self.Lc = gc.flux_divergence_matrix(self.grid, self.c)

    # -- mean-zero scalar blocks -----------------------------------------
    @cached_property
    def Q0(self) -> np.ndarray:
        return mean_zero_basis(self.grid.size)

    def _restrict(self, M) -> np.ndarray:
        Q = self.Q0
        return Q.T @ (M @ Q)

    @cached_property
    def lap_bar(self) -> np.ndarray:
        return self._restrict(self.L)

    @cached_property
    def W(self) -> np.ndarray:
        """``(-lap_N)^-1`` on the mean-zero subspace."""
        return np.linalg.inv(-self.lap_bar)

    @cached_property
    def A(self) -> np.ndarray:
        """``lap_N div(c grad .)`` on mean-zero fields."""
        return self._restrict((self.L @ self.Lc).tocsr())

    @cached_property
    def B(self) -> np.ndarray:
        """``-lap_N(b .)`` on mean-zero fields."""
        return self._restrict(-(self.L @ sp.diags(self.b.ravel())).tocsr())

    @property
    def A_alpha(self) -> np.ndarray:
        return self.params.alpha * self.A

    @property
    def B_alpha(self) -> np.ndarray:
        return self.params.alpha * self.B

    # -- velocity blocks --------------------------------------------------
    @cached_property
    def K0(self) -> sp.csr_matrix:
        """Frozen viscous matrix, ``-K0 u ~ div(S(phi0, Du)/rho0)``."""
        return viscous_matrix(self.grid, self.phi0, self.params, weight=1.0 / self.rho0)

    @cached_property
    def Qs(self) -> np.ndarray:
        """Orthonormal basis of discrete divergence-free wall-tangent fields."""
        return sla.null_space(gc.divergence_operator(self.grid).toarray())

    @cached_property
    def A_stokes(self) -> np.ndarray:
        Q = self.Qs
        return Q.T @ (self.K0 @ Q)

    @cached_property
    def H(self) -> sp.csr_matrix:
        """Phase coupling ``grad div(c grad .)`` of the momentum rows."""
        return (gc.gradient_operator(self.grid) @ self.Lc).tocsr()


def build_bundle(grid: gc.Grid, phi0, params: PhysParams, b_scale: float = 1.0,
                 c_scale: float = 1.0) -> DiscreteOperatorBundle:
    return DiscreteOperatorBundle(grid, params, phi0, b_scale, c_scale)


# ---------------------------------------------------------------------------
# H.1 - H.3


def check_H1_H2(bundle: DiscreteOperatorBundle) -> dict:
    """Symmetry defects and smallest eigenvalues of ``A_alpha`` and ``B_alpha`` in the W metric."""
    W = bundle.W
    WA, WB = W @ bundle.A_alpha, W @ bundle.B_alpha
    lam_a = sla.eigh(0.5 * (WA + WA.T), W, eigvals_only=True)
    lam_b = sla.eigh(0.5 * (WB + WB.T), W, eigvals_only=True)
    return {
        "sym_defect_A": _sym_defect(WA),
        "sym_defect_B": _sym_defect(WB),
        "sym_defect_W": _sym_defect(W),
        "min_eig_A": float(lam_a[0]),
        "min_eig_B": float(lam_b[0]),
        "min_WB": float(np.linalg.eigvalsh(0.5 * (WB + WB.T))[0]),
    }


def check_H3(bundle: DiscreteOperatorBundle) -> tuple[float, float]:
    """Extreme constants of ``rho1 A^(1/2) <= B <= rho2 A^(1/2)`` in the W metric."""
    W = bundle.W
    _, w_isqrt = _sqrtm_spd(W)
    Ahat = w_isqrt @ (W @ bundle.A_alpha) @ w_isqrt
    Bhat = w_isqrt @ (W @ bundle.B_alpha) @ w_isqrt
    a_sqrt, _ = _sqrtm_spd(Ahat)
    lam = sla.eigh(0.5 * (Bhat + Bhat.T), a_sqrt, eigvals_only=True)
    return float(lam[0]), float(lam[-1])


# ---------------------------------------------------------------------------
# lower-order couplings


def _hessian_dot(grid: gc.Grid, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``v . grad^2 q`` with component ``j = sum_i v_i d_i d_j q``."""
    gq = gc.gradient(grid, q)
    hx, hy = gc.gradient(grid, gq[0]), gc.gradient(grid, gq[1])
    return np.stack([v[0] * hx[0] + v[1] * hy[0], v[0] * hx[1] + v[1] * hy[1]])


def coupling_field(bundle: DiscreteOperatorBundle, g) -> np.ndarray:
    """``grad(nu) . grad^2 G(g) - grad(nu) g`` before projection."""
    grid = bundle.grid
    g = np.asarray(g, dtype=float).reshape(grid.shape)
    gnu = gc.gradient(grid, bundle.nu0)
    return _hessian_dot(grid, solve_neumann_poisson(grid, g), gnu) - gnu * g


def apply_B1(bundle: DiscreteOperatorBundle, g) -> np.ndarray:
    return helmholtz_project(bundle.grid, coupling_field(bundle, g))[0]


def apply_B2(bundle: DiscreteOperatorBundle, g) -> np.ndarray:
    return -gc.divergence(bundle.grid, coupling_field(bundle, g))


def smooth_random_field(grid: gc.Grid, rng: np.random.Generator, max_mode: int = 4) -> np.ndarray:
    """Mean-zero combination of low Neumann cosine modes (resolution independent)."""
    X, Y = grid.mesh()
    k = np.arange(max_mode + 1)
    coef = rng.standard_normal((max_mode + 1, max_mode + 1))
    coef[0, 0] = 0.0
    cx = np.cos(np.pi * k[:, None, None] * X[None] / grid.Lx)
    cy = np.cos(np.pi * k[:, None, None] * Y[None] / grid.Ly)
    f = np.einsum("ab,aij,bij->ij", coef, cx, cy)
    return f - f.mean()


def half_order_norm(grid: gc.Grid, g) -> float:
    """``||g||^(1/2) ||g||_{H^1}^(1/2)``, the interpolation form of the ``H^(1/2)`` norm."""
    l2 = gc.l2norm(grid, g)
    h1 = np.sqrt(l2 ** 2 + gc.dirichlet_form(grid, g))
    return float(np.sqrt(l2 * h1))


def check_relative_bound_B(bundle: DiscreteOperatorBundle, samples: int = 200, seed: int = 0,
                           max_mode: int = 4) -> dict:
    """Ratios ``||B1 g|| / ||g||_{1/2}`` over seeded smooth ``g`` and a checkerboard.

    Also reports the ``H^-1`` size of ``B2 g`` with the same normalisation.
    """
    grid = bundle.grid
    rng = np.random.default_rng(seed)
    r1, r2 = [], []
    for _ in range(samples):
        g = smooth_random_field(grid, rng, max_mode)
        d = half_order_norm(grid, g)
        r1.append(gc.l2norm(grid, apply_B1(bundle, g)) / d)
        b2 = apply_B2(bundle, g)
        r2.append(np.sqrt(max(-gc.inner(grid, solve_neumann_poisson(grid, b2 - b2.mean()), b2), 0.0)) / d)
    i, j = np.indices(grid.shape)
    cb = np.where((i + j) % 2 == 0, 1.0, -1.0)
    cb -= cb.mean()
    return {
        "max_ratio_B1": float(max(r1)),
        "max_ratio_B2": float(max(r2)),
        "checkerboard_ratio_B1": float(gc.l2norm(grid, apply_B1(bundle, cb)) / half_order_norm(grid, cb)),
    }


# ---------------------------------------------------------------------------
# Stokes operator with Navier slip and Korn's inequality

_SYM_FORM = np.array([[1.0, 0, 0, 0], [0, 0.5, 0.5, 0], [0, 0.5, 0.5, 0], [0, 0, 0, 1.0]])


def _korn_forms(grid: gc.Grid, a0: float, eta):
    walls = gc.robin_factors(grid, eta, a0)
    G = gc.velocity_gradient_matrix(grid, walls)
    n = grid.size
    sym = (G.T @ sp.kron(sp.csr_matrix(_SYM_FORM), sp.identity(n)) @ G).toarray()
    fric = gc.friction_matrix(grid, walls, a0).toarray()
    h1 = (sp.identity(2 * n) + G.T @ G).toarray()
    return sym, fric, h1


def korn_constant(grid: gc.Grid, a0: float, eta=1.0) -> float:
    """Best ``C`` in ``||u||_{H^1}^2 <= C^2 (||D(u)||^2 + oint a0 |u_t|^2)``.

    Wall-tangent fields only; the gradient uses the Navier-slip ghost
    closure with viscosity ``eta``.  The wall term is needed on the
    collocated grid: the central symmetric gradient has an exact
    checkerboard-rotation kernel that only the friction form controls.
    """
    if grid.size > DENSE_LIMIT:
        raise ValueError("grid too large for a dense Korn eigenproblem")
    sym, fric, h1 = _korn_forms(grid, a0, eta)
    lam = sla.eigh(sym + fric, h1, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(1.0 / np.sqrt(lam))


def korn_kernel_eigenvalue(grid: gc.Grid, a0: float = 1.0, eta=1.0) -> float:
    """Smallest ``||D(u)||^2 / ||u||_{H^1}^2`` without the wall term (zero up to rounding)."""
    sym, _, h1 = _korn_forms(grid, a0, eta)
    return float(sla.eigh(sym, h1, eigvals_only=True, subset_by_index=[0, 0])[0])


def rotation_defect(grid: gc.Grid) -> float:
    """Relative change of a rigid rotation under the Helmholtz projection.

    A rotation about the box centre is divergence-free but crosses the walls,
    so it is not admissible and the projection must change it.
    """
    X, Y = grid.mesh()
    u = np.stack([Y - 0.5 * grid.Ly, -(X - 0.5 * grid.Lx)])
    w = helmholtz_project(grid, u)[0]
    return float(np.linalg.norm(w - u) / np.linalg.norm(u))


def check_Aa(bundle: DiscreteOperatorBundle) -> dict:
    """Symmetry, positivity and coercivity of the Stokes-Navier block on ``ker(div)``."""
    A = bundle.A_stokes
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))
    ck = korn_constant(bundle.grid, bundle.params.a0, bundle.eta0)
    # the form is sum (2 eta/rho0)|Du|^2 + (a0/rho0)|u_t|^2 on div-free fields
    bound = float(min(np.min(bundle.nu0), np.min(1.0 / bundle.rho0))) / ck ** 2
    return {
        "sym_defect": _sym_defect(A),
        "min_eig": float(lam[0]),
        "cond": float(lam[-1] / lam[0]) if lam[0] > 0 else np.inf,
        "korn_constant": ck,
        "coercivity_bound": bound,
        "coercive": bool(lam[0] >= bound * (1 - 1e-10)),
    }


# ---------------------------------------------------------------------------
# block operator


def A1_spectrum(bundle: DiscreteOperatorBundle, pinned: bool = True) -> dict:
    """Eigenvalues of ``A1 = [[0, -P0/alpha], [A, B]]``.

    ``pinned`` restricts ``phi'`` to mean-zero fields; otherwise ``phi'`` is
    a full field and the constant mode gives a zero eigenvalue.
    """
    alpha = bundle.params.alpha
    Q = bundle.Q0
    m = Q.shape[1]
    if pinned:
        top = np.hstack([np.zeros((m, m)), -np.eye(m) / alpha])
        bottom = np.hstack([bundle.A, bundle.B])
    else:
        n = bundle.grid.size
        top = np.hstack([np.zeros((n, n)), -Q / alpha])
        bottom = np.hstack([Q.T @ (bundle.L @ bundle.Lc).toarray(), bundle.B])
    lam = sla.eigvals(np.vstack([top, bottom]))
    scale = np.max(np.abs(lam))
    zero = np.abs(lam) <= 1e-10 * scale
    nz = lam[~zero]
    return {
        "min_real": float(nz.real.min()),
        "max_arg": float(np.max(np.abs(np.angle(nz)))),
        "zero_eigs": int(zero.sum()),
        "size": int(lam.size),
    }


def check_triangular(bundle: DiscreteOperatorBundle) -> dict:
    """Relative size of the blocks that vanish in the triangular block operator.

    The divergence-free velocity row receives no phase coupling
    (``P_sigma grad(...) = 0``) and the phase row sees no divergence-free
    velocity (``div w = 0``).
    """
    Q = bundle.Qs
    H = bundle.H.toarray()
    D = gc.divergence_operator(bundle.grid)
    return {
        "w_row_phi_col": float(np.linalg.norm(Q.T @ H) / np.linalg.norm(H)),
        "phi_row_w_col": float(np.linalg.norm(D @ Q) / sp.linalg.norm(D)),
    }


# ---------------------------------------------------------------------------
# full report


@dataclass
class LabItem:
    name: str
    value: float
    passed: bool
    detail: str = ""


@dataclass
class LabReport:
    items: list[LabItem] = field(default_factory=list)

    def add(self, name, value, passed, detail=""):
        self.items.append(LabItem(name, float(value), bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def lines(self) -> list[str]:
        return [f"{'PASS' if i.passed else 'FAIL'}  {i.name} = {i.value:.6g}  {i.detail}".rstrip()
                for i in self.items]


def _drift(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def run_lab(phi0_func, params: PhysParams, n: int = 32, Lx: float = 1.0, Ly: float = 1.0,
            samples: int = 200, seed: int = 0) -> LabReport:
    """Run every check on an ``n x n`` grid and its half-resolution coarsening.

    ``phi0_func(grid)`` returns the frozen phase field on a grid, so the
    same continuous profile is sampled at both resolutions.
    """
    fine = gc.Grid(n, n, Lx, Ly)
    coarse = gc.Grid(n // 2, n // 2, Lx, Ly)
    bf = build_bundle(fine, phi0_func(fine), params)
    bc = build_bundle(coarse, phi0_func(coarse), params)
    rep = LabReport()

    h = check_H1_H2(bf)
    rep.add("H1 symmetry defect", h["sym_defect_A"], h["sym_defect_A"] <= SYM_TOL)
    rep.add("H1 min eigenvalue", h["min_eig_A"], h["min_eig_A"] > 0)
    rep.add("H2 symmetry defect", h["sym_defect_B"], h["sym_defect_B"] <= SYM_TOL)
    rep.add("H2 min eigenvalue", h["min_eig_B"], h["min_eig_B"] > 0)

    r_f, r_c = check_H3(bf), check_H3(bc)
    rep.add("H3 rho1", r_f[0], 0 < r_f[0] <= r_f[1])
    rep.add("H3 rho2", r_f[1], np.isfinite(r_f[1]))
    d = max(_drift(r_f[0], r_c[0]), _drift(r_f[1], r_c[1]))
    rep.add("H3 drift", d, d <= 0.20, f"(coarse rho1={r_c[0]:.6g}, rho2={r_c[1]:.6g})")

    a = check_Aa(bf)
    rep.add("A_a symmetry defect", a["sym_defect"], a["sym_defect"] <= SYM_TOL)
    rep.add("A_a min eigenvalue", a["min_eig"], a["min_eig"] > 0 and np.isfinite(a["cond"]))
    rep.add("A_a coercivity margin", a["min_eig"] / a["coercivity_bound"], a["coercive"])

    k_f, k_c = korn_constant(fine, params.a0), korn_constant(coarse, params.a0)
    rep.add("Korn constant", k_f, np.isfinite(k_f))
    rep.add("Korn drift", _drift(k_f, k_c), _drift(k_f, k_c) <= 0.15, f"(coarse {k_c:.6g})")
    rep.add("symmetric-gradient kernel eigenvalue", korn_kernel_eigenvalue(coarse, params.a0), True,
            "(informational: collocated checkerboard mode)")
    rep.add("rotation projection change", rotation_defect(fine), rotation_defect(fine) > 1e-3)

    b_f = check_relative_bound_B(bf, samples, seed)
    b_c = check_relative_bound_B(bc, samples, seed)
    rep.add("B1 max ratio", b_f["max_ratio_B1"], np.isfinite(b_f["max_ratio_B1"]))
    rep.add("B2 max ratio", b_f["max_ratio_B2"], np.isfinite(b_f["max_ratio_B2"]))
    d = _drift(b_f["max_ratio_B1"], b_c["max_ratio_B1"])
    rep.add("B1 ratio drift", d, d <= 0.30, f"(coarse {b_c['max_ratio_B1']:.6g})")
    cb = b_f["checkerboard_ratio_B1"]
    rep.add("B1 checkerboard ratio", cb, cb <= max(b_f["max_ratio_B1"], 1e-300) or cb == 0.0)

    t = check_triangular(bf)
    rep.add("zero block (w row, phi col)", t["w_row_phi_col"], t["w_row_phi_col"] <= 1e-12)
    rep.add("zero block (phi row, w col)", t["phi_row_w_col"], t["phi_row_w_col"] <= 1e-12)

    sp_p = A1_spectrum(bc, pinned=True)
    sp_u = A1_spectrum(bc, pinned=False)
    rep.add("A1 pinned min Re", sp_p["min_real"], sp_p["min_real"] > 0 and sp_p["zero_eigs"] == 0,
            f"(max |arg| {sp_p['max_arg']:.4f})")
    rep.add("A1 unpinned min Re", sp_u["min_real"], sp_u["min_real"] > 0 and sp_u["zero_eigs"] == 1,
            f"(zero eigenvalues {sp_u['zero_eigs']}, max |arg| {sp_u['max_arg']:.4f})")
    return rep
