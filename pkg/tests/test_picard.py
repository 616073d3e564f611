import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_field, wall_tangent_field
from qchns import grid as gc
from qchns import picard as pc
from qchns.convergence import _interior
from qchns.elliptic import helmholtz_project
from qchns.errors import DensityFloorViolated, StepFailed
from qchns.linear_step import LinearStepSystem
from qchns.phase import PhysParams
from reference_rhs import reference_F1, reference_F2

P = PhysParams(eps=-0.5, nu=2.0, a0=1.0)


def _state(grid, u, phi, p=P, t=0.0):
    return pc.SimState(grid, p, t, u, phi)


def _probe(n=32, amp=0.05):
    g = gc.Grid(n, n)
    X, Y = g.mesh()
    return _state(g, np.zeros((2, n, n)), amp * np.cos(np.pi * X) * np.cos(np.pi * Y))


def test_rest_state_remainder_vanishes():
    g = gc.Grid(16, 12)
    s = _state(g, np.zeros((2,) + g.shape), np.full(g.shape, 0.3))
    F1 = pc.nonlinear_rhs_F1(s, s, P, LinearStepSystem(g, s.phi, 1e-3, P))
    assert np.all(F1 == 0.0)
    assert np.all(pc.nonlinear_rhs_F2(s) == 0.0)


def test_rest_state_with_gravity_feels_only_body_force():
    p = PhysParams(eps=-0.5, gravity_on=True)
    g = gc.Grid(16, 12)
    s = _state(g, np.zeros((2,) + g.shape), np.full(g.shape, -0.2), p)
    F1 = pc.nonlinear_rhs_F1(s, s, p, LinearStepSystem(g, s.phi, 1e-3, p))
    np.testing.assert_allclose(F1, -gc.gradient(g, pc.height(g)), atol=1e-14)
    np.testing.assert_allclose(F1[1][:, 1:-1], -1.0, rtol=1e-12)
    assert np.all(F1[0] == 0.0)


@given(seed=st.integers(0, 2 ** 32 - 1), gravity=st.booleans())
def test_remainder_matches_reference(seed, gravity):
    rng = np.random.default_rng(seed)
    nx, ny = rng.integers(8, 20, size=2)
    Lx, Ly = rng.uniform(0.5, 2.0, size=2)
    p = PhysParams(eps=rng.uniform(-0.9, -0.1), nu=rng.uniform(0.5, 4.0), a0=rng.uniform(0.1, 5.0),
                   gravity_on=gravity)
    g = gc.Grid(int(nx), int(ny), Lx, Ly)
    u = rng.standard_normal((2,) + g.shape)
    phi = rng.uniform(-0.8, 0.8, g.shape)
    phi_old = np.clip(phi + 0.1 * rng.standard_normal(g.shape), -0.8, 0.8)
    s, so = _state(g, u, phi, p), _state(g, np.zeros_like(u), phi_old, p)
    a = pc.nonlinear_rhs_F1(s, so, p, LinearStepSystem(g, phi_old, 1e-3, p))
    b = reference_F1(u, phi, phi_old, p.eps, p.nu, p.a0, gravity, Lx, Ly)
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)
    a2, b2 = pc.nonlinear_rhs_F2(s), reference_F2(u, phi, Lx, Ly)
    assert np.linalg.norm(a2 - b2) <= 1e-12 * np.linalg.norm(b2)


def test_expanded_terms_agree_to_second_order():
    p = PhysParams(eps=-0.5, nu=2.0, a0=1.0, gravity_on=True)
    errs = []
    for n in (32, 64):
        g = gc.Grid(n, n)
        X, Y = g.mesh()
        u = np.stack([np.sin(np.pi * X) ** 2 * np.sin(2 * np.pi * Y),
                      -np.sin(2 * np.pi * X) * np.sin(np.pi * Y) ** 2])
        phi = 0.3 * np.cos(np.pi * X) * np.cos(2 * np.pi * Y)
        phi_old = 0.25 * np.cos(np.pi * X) * np.cos(np.pi * Y)
        s, so = _state(g, u, phi, p), _state(g, 0 * u, phi_old, p)
        direct = pc.nonlinear_rhs_F1(s, so, p, LinearStepSystem(g, phi_old, 1e-3, p))
        terms = pc.nonlinear_rhs_F1_terms(s, so)
        m = _interior(g)
        errs.append(np.sqrt(np.mean((direct - sum(terms.values()))[:, m] ** 2)))
    assert errs[0] / errs[1] > 3.5
    assert errs[1] < 1e-3 * 30


def test_phase_remainder_examples(rng):
    g = gc.Grid(16, 16)
    u = wall_tangent_field(g, rng)
    zero = _state(g, np.zeros_like(u), smooth_field(g, rng))
    assert np.all(pc.nonlinear_rhs_F2(zero) == 0.0)
    c = _state(g, u, np.full(g.shape, 0.4))
    expect = -0.4 * gc.divergence(g, u)
    np.testing.assert_allclose(pc.nonlinear_rhs_F2(c), expect - expect.mean(), atol=1e-14)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_phase_flux_balance(seed):
    g = gc.Grid(14, 18)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((2,) + g.shape)
    phi = rng.uniform(-1, 1, g.shape)
    d = gc.divergence(g, phi * u)
    assert abs(d.mean()) <= 1e-12 * np.linalg.norm(phi * u)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_convection_energy_identity(seed):
    g = gc.Grid(12, 10)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((2,) + g.shape)
    rho = 0.5 + rng.uniform(size=g.shape)
    N = pc.convection(g, u, rho)
    flux = -0.5 * np.sum(np.sum(u ** 2, axis=0) * gc.divergence(g, rho * u))
    assert np.sum(N * u) == pytest.approx(flux, abs=1e-12 * np.sum(np.abs(N * u)))
    # constant density and divergence-free u: no net work
    v = helmholtz_project(g, u)[0]
    assert abs(np.sum(pc.convection(g, v, np.ones(g.shape)) * v)) <= 1e-10 * np.sum(v ** 2) / g.hx


def test_density_floor_guard():
    g = gc.Grid(8, 8)
    s = _state(g, np.zeros((2, 8, 8)), np.full(g.shape, 1.0), PhysParams(eps=-0.95))
    with pytest.raises(DensityFloorViolated):
        pc.momentum_rhs(s)


def test_rest_state_is_fixed_point():
    g = gc.Grid(16, 16)
    s = _state(g, np.zeros((2, 16, 16)), np.full(g.shape, 0.25))
    new, rep = pc.advance(s, 1e-3)
    assert rep.iterations == 1 and rep.increments == [0.0]
    assert np.array_equal(new.phi, s.phi) and not new.u.any()


def test_probe_contracts_and_contraction_drops_with_dt():
    s = _probe()
    _, r1 = pc.advance(s, 1e-4)
    _, r2 = pc.advance(s, 2.5e-5)
    assert r1.iterations <= 10 and 0 < r1.contraction_factor < 1
    assert r2.contraction_factor < r1.contraction_factor


def test_converged_step_solves_step_equations():
    s = _probe(n=16, amp=0.3)
    new, _ = pc.advance(s, 1e-3, pc.PicardConfig(tol=1e-12))
    ru, rp = pc.step_residual(new, s, 1e-3)
    scale = gc.l2norm(s.grid, new.phi - s.phi) / 1e-3
    assert ru < 1e-7 * scale and rp < 1e-7 * scale


def test_frozen_reference_does_not_change_solution():
    s = _probe(n=16, amp=0.3)
    cfg = pc.PicardConfig(tol=1e-12)
    a, _ = pc.advance(s, 1e-3, cfg)
    # freeze at a different phase field: same fixed point
    stale = LinearStepSystem(s.grid, 0.5 * s.phi, 1e-3, P)
    cache = pc.StepOperatorCache(refreeze_every=10)
    cache.system, cache.uses = stale, 0
    b, _ = pc.advance(s, 1e-3, cfg, cache=cache)
    assert cache.system is stale
    assert np.abs(a.phi - b.phi).max() < 1e-10 and np.abs(a.u - b.u).max() < 1e-9


def test_step_size_is_halved_on_failure(monkeypatch):
    s = _probe(n=16)
    real = pc._picard
    calls = []

    def flaky(state, dt, cfg, system):
        calls.append(dt)
        if len(calls) == 1:
            return None, [1.0]
        return real(state, dt, cfg, system)

    monkeypatch.setattr(pc, "_picard", flaky)
    new, rep = pc.advance(s, 1e-3)
    assert calls[:2] == [1e-3, 5e-4]
    assert rep.halvings == 1 and rep.dt == 5e-4 and new.t == pytest.approx(5e-4)


def test_step_failed_after_max_halvings():
    s = _probe(n=16, amp=0.3)
    cfg = pc.PicardConfig(tol=1e-300, max_iters=2, max_halvings=2)
    with pytest.raises(StepFailed):
        pc.advance(s, 1e-3, cfg)


def test_rejects_out_of_range_phase():
    g = gc.Grid(8, 8)
    s = _state(g, np.zeros((2, 8, 8)), np.full(g.shape, 1.3), PhysParams(eps=-0.3))
    with pytest.raises(StepFailed):
        pc.advance(s, 1e-3)


def test_contraction_estimate():
    assert pc._contraction([1e-2, 1e-3, 1e-4, 1e-5], 3) == pytest.approx(0.1)
    assert pc._contraction([1.0], 3) == 0.0


def test_picard_config_validation():
    for kw in ({"tol": 0}, {"max_iters": 1}, {"dt_shrink": 1.0}, {"refreeze_every": 0}):
        with pytest.raises(ValueError):
            pc.PicardConfig(**kw)


def test_default_frozen_system(rng):
    g = gc.Grid(10, 10)
    u = rng.standard_normal((2,) + g.shape)
    s = _state(g, u, 0.3 * np.tanh(smooth_field(g, rng)))
    so = _state(g, 0 * u, 0.2 * np.tanh(smooth_field(g, rng)))
    a = pc.nonlinear_rhs_F1(s, so, P)
    b = pc.nonlinear_rhs_F1(s, so, P, LinearStepSystem(g, so.phi, 1e-4, P))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * np.abs(b).max())
    with pytest.raises(ValueError):
        pc.nonlinear_rhs_F1(s, so, PhysParams(eps=-0.3))
