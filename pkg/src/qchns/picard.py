"""Nonlinear remainder, per-step Picard iteration and the outer time loop.

One step solves, for ``v = (u, phi)`` at the new time level,

    (u - u_n)/dt   = R(u, phi)
    (phi - phi_n)/dt = div(u)/alpha - div(phi u)

where ``R`` is the full momentum right-hand side divided by the density.
The iteration is preconditioned by the frozen linear operator
``L(phi_ref)`` of :mod:`linear_step`::

    L v_{k+1} = [u_n/dt + F1(v_k); F2(v_k)]
    F1 = R(v_k) + K0 u_k + H dphi_k,    F2 = -div(phi_k u_k)

``K0`` and ``H`` are the velocity and phase blocks of ``L``, so a fixed
point of the iteration solves the step equations above exactly, whatever
``phi_ref`` is.  Freezing only changes how fast the iteration contracts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import grid as gc
from .elliptic import helmholtz_project, solve_neumann_poisson
from .errors import (DensityFloorViolated, QCHNSError, SingularSystem,
                     SolverDiverged, StepFailed)
from .linear_step import LinearStepSystem
from .phase import (DENSITY_FLOOR, PHI_LIMIT, PhysParams, chemical_potential,
                    density, double_well, stress_from_gradient, viscosity,
                    viscous_matrix)

log = logging.getLogger(__name__)


@dataclass
class SimState:
    """Velocity ``u`` (shape ``(2, nx, ny)``) and phase ``phi`` at time ``t``.

    Derived fields are computed on first access and cached; states are
    treated as immutable.
    """

    grid: gc.Grid
    params: PhysParams
    t: float
    u: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape((2,) + self.grid.shape)
        self.phi = np.asarray(self.phi, dtype=float).reshape(self.grid.shape)
        gc.check_finite(self.u, self.phi)

    @cached_property
    def rho(self) -> np.ndarray:
        return density(self.phi, self.params)

    @cached_property
    def eta(self) -> np.ndarray:
        return viscosity(self.phi, self.params)

    @cached_property
    def mu(self) -> np.ndarray:
        return chemical_potential(self.grid, self.phi)

    @cached_property
    def g(self) -> np.ndarray:
        return gc.divergence(self.grid, self.u)

    @cached_property
    def quasi_pressure(self) -> np.ndarray:
        """``G(div u)``: mean-zero ``q`` with ``laplacian(q) = div u``."""
        scale = np.max(np.abs(self.u)) / min(self.grid.hx, self.grid.hy)
        return solve_neumann_poisson(self.grid, self.g, scale=scale)

    @cached_property
    def mu_p(self) -> np.ndarray:
        """``(1/alpha) G(div u)``, so that ``div u = alpha laplacian(mu_p)``."""
        return self.quasi_pressure / self.params.alpha

    @cached_property
    def w(self) -> np.ndarray:
        return helmholtz_project(self.grid, self.u)[0]

    def with_fields(self, t: float, u, phi) -> "SimState":
        return SimState(self.grid, self.params, t, u, phi)


@dataclass(frozen=True)
class PicardConfig:
    tol: float = 1e-8
    max_iters: int = 50
    dt_shrink: float = 0.5
    max_halvings: int = 5
    contraction_window: int = 3
    # steps between re-freezing phi_ref (1 = freeze at phi_n every step)
    refreeze_every: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 2:
            raise ValueError("max_iters must be at least 2")
        if not 0 < self.dt_shrink < 1:
            raise ValueError("dt_shrink must lie in (0, 1)")
        if self.contraction_window < 1 or self.refreeze_every < 1:
            raise ValueError("contraction_window and refreeze_every must be >= 1")


@dataclass
class PicardReport:
    iterations: int
    contraction_factor: float
    increments: list[float]
    dt: float
    halvings: int = 0


# ---------------------------------------------------------------------------
# nonlinear right-hand side


def _check_density(rho):
    if np.min(rho) < DENSITY_FLOOR:
        raise DensityFloorViolated(f"density {np.min(rho):.3g} below {DENSITY_FLOOR}")


def convection(grid: gc.Grid, u, rho) -> np.ndarray:
    """Skew-symmetric momentum convection ``N(u)``, density-weighted.

    ``N = 1/2 rho (u.grad) u + 1/2 div(rho u (x) u) - 1/2 u div(rho u)``
    equals ``rho (u.grad) u`` for smooth fields.  With the discrete pairing
    ``divergence = -gradient^T`` it satisfies
    ``<N(u), u> = -1/2 <|u|^2, div(rho u)>`` exactly, the kinetic energy
    carried by the mass flux.
    """
    Gx, Gy = gc.gradient_matrices(grid)
    shape = grid.shape
    m = rho * u
    div_m = gc.divergence(grid, m)
    out = np.empty_like(u)
    for i in range(2):
        ui = u[i].ravel()
        adv = u[0] * (Gx @ ui).reshape(shape) + u[1] * (Gy @ ui).reshape(shape)
        out[i] = 0.5 * rho * adv + 0.5 * gc.divergence(grid, m * u[i]) - 0.5 * u[i] * div_m
    return out


def height(grid: gc.Grid) -> np.ndarray:
    """Gravitational potential ``z = y`` (``grad z = k``)."""
    return np.broadcast_to(grid.y, grid.shape).copy()


def momentum_terms(state: SimState) -> dict[str, np.ndarray]:
    """Every term of ``R`` (momentum right-hand side over density)."""
    grid, p = state.grid, state.params
    rho, u, phi = state.rho, state.u, state.phi
    _check_density(rho)
    inv_rho = 1.0 / rho
    f = double_well(phi)[1]
    terms = {
        "convection": -inv_rho * convection(grid, u, rho),
        "capillary": -inv_rho * (phi - 1.0 / p.alpha) * gc.gradient(grid, f - gc.laplacian(grid, phi)),
        "quasi_pressure": -inv_rho / p.alpha ** 2 * gc.gradient(grid, state.quasi_pressure),
    }
    K = viscous_matrix(grid, phi, p)
    visc = -(K @ np.concatenate([u[0].ravel(), u[1].ravel()])).reshape(u.shape)
    terms["viscous"] = inv_rho * visc
    if p.gravity_on:
        terms["gravity"] = -gc.gradient(grid, height(grid))
    return terms


def momentum_rhs(state: SimState) -> np.ndarray:
    terms = momentum_terms(state)
    out = np.zeros_like(state.u)
    for key in ("convection", "capillary", "quasi_pressure", "viscous", "gravity"):
        if key in terms:
            out += terms[key]
    return out


def nonlinear_rhs_F1(state_iter: SimState, state_old: SimState, p: PhysParams,
                     system: LinearStepSystem | None = None) -> np.ndarray:
    """Remainder ``F1 = R(v) + K0 u + H (phi - phi_old)``.

    ``K0`` and ``H`` come from ``system`` so that ``L v - F1`` reduces to the
    full momentum equation.  Without ``system`` they are frozen at
    ``state_old.phi`` (neither block depends on the step size).
    """
    if state_iter.params != p:
        raise ValueError("state parameters differ from p")
    if system is None:
        system = LinearStepSystem(state_old.grid, state_old.phi, 1.0, p)
    dphi = state_iter.phi - state_old.phi
    return momentum_rhs(state_iter) + system.spatial_momentum(state_iter.u, dphi)


def nonlinear_rhs_F2(state_iter: SimState) -> np.ndarray:
    """``-div(phi u)`` with the (rounding-level) mean removed."""
    r = -gc.divergence(state_iter.grid, state_iter.phi * state_iter.u)
    return r - r.mean()


def phase_rhs(state: SimState) -> np.ndarray:
    """Right-hand side of the phase equation, ``div(u)/alpha - div(phi u)``."""
    return state.g / state.params.alpha + nonlinear_rhs_F2(state)


def step_residual(new: SimState, old: SimState, dt: float) -> tuple[float, float]:
    """L2 norms of the momentum and phase step-equation residuals."""
    ru = (new.u - old.u) / dt - momentum_rhs(new)
    rp = (new.phi - old.phi) / dt - phase_rhs(new)
    return gc.l2norm(new.grid, ru), gc.l2norm(new.grid, rp)


# -- term-by-term remainder -------------------------------------------------


def nonlinear_rhs_F1_terms(state_iter: SimState, state_old: SimState) -> dict[str, np.ndarray]:
    """The remainder written as the long list of frozen-coefficient corrections.

    Capillary forces are split into the regrouped pieces that cancel the
    third-order coupling of ``L`` and the viscous force into its frozen part
    plus variation terms.  All pieces use the plain central operators, so
    their sum agrees with :func:`nonlinear_rhs_F1` only up to the
    truncation error in the interior.  Returned keys name each term.
    """
    grid, p = state_iter.grid, state_iter.params
    phi, u = state_iter.phi, state_iter.u
    phi_old = state_old.phi
    dphi = phi - phi_old
    rho, rho0 = state_iter.rho, density(phi_old, p)
    _check_density(rho)
    inv_rho, inv_rho0 = 1.0 / rho, 1.0 / rho0
    c = 1.0 / p.alpha - phi
    c_old = 1.0 / p.alpha - phi_old
    grad = lambda f: gc.gradient(grid, f)  # noqa: E731
    div = lambda v: gc.divergence(grid, v)  # noqa: E731
    lap = lambda f: gc.laplacian(grid, f)  # noqa: E731
    dot = lambda a, b: a[0] * b[0] + a[1] * b[1]  # noqa: E731

    S = _stress_central(grid, u, state_iter.eta)
    S0 = _stress_central(grid, u, viscosity(phi_old, p))
    g_inv_rho = grad(inv_rho)
    f = double_well(phi)[1]
    t = {
        "convection": -inv_rho * convection(grid, u, rho),
        "potential": -inv_rho * (phi - 1.0 / p.alpha) * grad(f),
        "quasi_pressure": -inv_rho / p.alpha ** 2 * grad(state_iter.quasi_pressure),
        "cap_grad_dot": inv_rho * grad(dot(grad(c), grad(phi))),
        "cap_grad_lap": inv_rho * grad(c) * lap(phi),
        "incr_grad_inv_rho": grad(dot(g_inv_rho, c * grad(dphi))),
        "incr_inv_rho_div": -g_inv_rho * div((phi - 1.0 / p.alpha) * grad(phi)),
        "lift": grad(inv_rho * div((phi - 1.0 / p.alpha) * grad(phi_old))),
        "incr_density_variation": -grad(div((inv_rho - inv_rho0) * c * grad(dphi))),
        "visc_grad_inv_rho": -_tensor_dot_vector(S, g_inv_rho),
        "visc_density_variation": _div_tensor(grid, (inv_rho - inv_rho0) * S),
        "visc_freeze": _div_tensor(grid, inv_rho0 * (S - S0)),
        "incr_freeze": grad(div(inv_rho0 * (c_old - c) * grad(dphi))),
    }
    if p.gravity_on:
        t["gravity"] = -np.stack([np.zeros(grid.shape), np.ones(grid.shape)])
    return t


def _stress_central(grid, u, eta):
    gu = np.concatenate([gc.gradient(grid, u[0]), gc.gradient(grid, u[1])])
    return stress_from_gradient(gu, eta)


def _tensor_dot_vector(S, v):
    # (grad a) . S  ==  sum_i v_i S_ij
    return np.stack([v[0] * S[0, 0] + v[1] * S[1, 0], v[0] * S[0, 1] + v[1] * S[1, 1]])


def _div_tensor(grid, S):
    return np.stack([gc.divergence(grid, S[0]), gc.divergence(grid, S[1])])


# ---------------------------------------------------------------------------
# Picard loop


class StepOperatorCache:
    """Holds the frozen linear system between steps.

    The system is rebuilt when ``dt`` changes or after ``refreeze_every``
    uses.
    """

    def __init__(self, refreeze_every: int = 1):
        self.refreeze_every = refreeze_every
        self.system: LinearStepSystem | None = None
        self.uses = 0

    def get(self, state: SimState, dt: float) -> LinearStepSystem:
        s = self.system
        if s is None or s.dt != dt or s.params != state.params or self.uses >= self.refreeze_every:
            s = self.system = LinearStepSystem(state.grid, state.phi, dt, state.params)
            self.uses = 0
        self.uses += 1
        return s


def _contraction(increments: list[float], window: int, floor: float = 1e-13) -> float:
    ratios = [b / a for a, b in zip(increments[:-1], increments[1:]) if a > floor and b > floor]
    if not ratios:
        return 0.0
    r = np.array(ratios[-window:])
    return float(np.exp(np.mean(np.log(r))))


def _picard(state: SimState, dt: float, cfg: PicardConfig, system: LinearStepSystem):
    it = state
    increments: list[float] = []
    rhs_u0 = state.u / dt
    for k in range(1, cfg.max_iters + 1):
        F1 = nonlinear_rhs_F1(it, state, state.params, system)
        F2 = nonlinear_rhs_F2(it)
        u, dphi = system.solve(rhs_u0 + F1, F2)
        phi = state.phi + dphi
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(phi))):
            return None, increments
        du = np.sum((u - it.u) ** 2) + np.sum((phi - it.phi) ** 2)
        nv = np.sum(u ** 2) + np.sum(phi ** 2)
        inc = float(np.sqrt(du / nv)) if nv > 0 else float(np.sqrt(du))
        increments.append(inc)
        it = state.with_fields(state.t + dt, u, phi)
        if inc <= cfg.tol:
            return it, increments
        if np.max(np.abs(phi)) > 10 * PHI_LIMIT or (k > 3 and inc > 1e3 * increments[0]):
            return None, increments
    return None, increments


def advance(state: SimState, dt: float, cfg: PicardConfig | None = None,
            p: PhysParams | None = None, cache: StepOperatorCache | None = None):
    """Advance one backward-Euler step with Picard iteration.

    On non-convergence the step size is multiplied by ``cfg.dt_shrink`` and
    retried, at most ``cfg.max_halvings`` times.  Returns
    ``(new_state, PicardReport)``; the report carries the step size used.
    """
    cfg = cfg or PicardConfig()
    if p is not None and p != state.params:
        state = SimState(state.grid, p, state.t, state.u, state.phi)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.max(np.abs(state.phi)) > PHI_LIMIT:
        raise StepFailed(f"|phi| exceeds {PHI_LIMIT} before the step")
    cache = cache or StepOperatorCache(cfg.refreeze_every)
    h = 0
    while True:
        try:
            system = cache.get(state, dt)
            new, incs = _picard(state, dt, cfg, system)
        except (SingularSystem, SolverDiverged, FloatingPointError) as exc:
            log.warning("linear solve failed at dt=%g: %s", dt, exc)
            new, incs = None, []
        if new is not None:
            rate = _contraction(incs, cfg.contraction_window)
            return new, PicardReport(len(incs), rate, incs, dt, h)
        if h >= cfg.max_halvings:
            raise StepFailed(f"Picard iteration failed after {h} step-size reductions")
        h += 1
        dt *= cfg.dt_shrink
        cache.system = None
        log.info("Picard did not converge; retrying with dt=%g", dt)


def run(config, on_record=None):
    """Integrate a :class:`diagnostics.SimConfig` from 0 to ``T``.

    Returns ``(records, final_state)``.  Records and snapshots are written
    to ``config.output_dir`` when it is set; on ``StepFailed`` the partial
    output is flushed before the exception propagates.
    """
    from . import diagnostics as dg

    state = dg.initial_state(config)
    cfg = config.picard
    cache = StepOperatorCache(cfg.refreeze_every)
    writer = dg.RecordWriter(config.output_dir) if config.output_dir else None
    records = []

    def emit(rec, st, step):
        records.append(rec)
        if writer is not None:
            writer.append(rec)
            if config.snapshot_every and step % config.snapshot_every == 0:
                writer.snapshot(st, step)
        if on_record is not None:
            on_record(rec)

    emit(dg.make_record(state), state, 0)
    step = 0
    try:
        while state.t < config.T * (1 - 1e-12):
            dt = min(config.dt, config.T - state.t)
            new, rep = advance(state, dt, cfg, cache=cache)
            if np.max(np.abs(new.phi)) > PHI_LIMIT:
                raise StepFailed(f"|phi| exceeded {PHI_LIMIT} at t={new.t:.6g}")
            step += 1
            state = new
            emit(dg.make_record(state, rep), state, step)
    except QCHNSError:
        if writer is not None:
            writer.close()
        raise
    if writer is not None:
        writer.snapshot(state, step)
        writer.close()
    return records, state
