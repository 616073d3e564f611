import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_field, wall_tangent_field
from qchns import grid as gc
from qchns.elliptic import (NeumannPoissonSolver, helmholtz_project, hminus1_norm_sq,
                            solve_neumann_poisson)
from qchns.errors import CompatibilityViolated
from reference_rhs import poisson_dct


def test_zero_rhs():
    g = gc.Grid(16, 16)
    assert np.all(solve_neumann_poisson(g, np.zeros(g.shape)) == 0.0)


def test_eigenfunction_order():
    errs = []
    for n in (16, 32, 64):
        g = gc.Grid(n, n, 1.0, 2.0)
        X, Y = g.mesh()
        u = np.cos(np.pi * X) * np.cos(np.pi * Y / 2)
        f = -(np.pi ** 2 + np.pi ** 2 / 4) * u
        errs.append(gc.l2norm(g, solve_neumann_poisson(g, f - f.mean()) - (u - u.mean())))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) >= 1.9)


def test_residual_and_mean(rng):
    g = gc.Grid(24, 20)
    f = rng.standard_normal(g.shape)
    f -= f.mean()
    u = solve_neumann_poisson(g, f)
    assert np.linalg.norm(gc.laplacian(g, u) - f) <= 1e-8 * np.linalg.norm(f)
    assert abs(u.mean()) < 1e-14 * np.abs(u).max()


def test_matches_cosine_transform(rng):
    g = gc.Grid(20, 12, 1.0, 0.6)
    f = rng.standard_normal(g.shape)
    f -= f.mean()
    np.testing.assert_allclose(solve_neumann_poisson(g, f), poisson_dct(f, g.hx, g.hy),
                               atol=1e-12 * np.abs(poisson_dct(f, g.hx, g.hy)).max())


def test_incompatible_rhs_rejected():
    g = gc.Grid(16, 16)
    with pytest.raises(CompatibilityViolated):
        solve_neumann_poisson(g, np.ones(g.shape))


def test_iterative_path_agrees(rng):
    g = gc.Grid(24, 24)
    f = rng.standard_normal(g.shape)
    f -= f.mean()
    it = NeumannPoissonSolver(g)
    it.direct = False
    it._diag = -it.matrix.diagonal()
    np.testing.assert_allclose(it.solve(f), solve_neumann_poisson(g, f), atol=1e-7)


def test_projection_keeps_divergence_free_field():
    g = gc.Grid(24, 24)
    # discrete curl of a streamfunction vanishing on the walls
    X, Y = g.mesh()
    v0 = np.stack([np.sin(np.pi * X) * np.cos(np.pi * Y), np.zeros(g.shape)])
    w, _ = helmholtz_project(g, v0)
    w2, q2 = helmholtz_project(g, w)
    np.testing.assert_allclose(w2, w, atol=1e-12)
    assert np.abs(q2).max() < 1e-10


def test_projection_annihilates_gradients(rng):
    g = gc.Grid(32, 32)
    v = gc.gradient(g, smooth_field(g, rng))
    w, _ = helmholtz_project(g, v)
    assert np.linalg.norm(w) <= 1e-8 * np.linalg.norm(v)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_projection_idempotent_orthogonal(seed):
    g = gc.Grid(16, 20, 1.0, 1.4)
    rng = np.random.default_rng(seed)
    v = wall_tangent_field(g, rng) + 0.1 * rng.standard_normal((2,) + g.shape)
    w, q = helmholtz_project(g, v)
    assert np.linalg.norm(helmholtz_project(g, w)[0] - w) <= 1e-10 * np.linalg.norm(v)
    assert np.linalg.norm(gc.divergence(g, w)) <= 1e-9 * np.linalg.norm(v) / g.hx
    assert abs(gc.inner(g, w, gc.gradient(g, q))) <= 1e-10 * gc.inner(g, v, v)


def test_projection_divergence_shrinks_with_h():
    norms = []
    for n in (16, 32, 64):
        g = gc.Grid(n, n)
        v = wall_tangent_field(g, np.random.default_rng(3))
        w, _ = helmholtz_project(g, v)
        norms.append(gc.l2norm(g, gc.divergence(g, w)))
    assert max(norms) < 1e-9


def test_hminus1_norm(rng):
    g = gc.Grid(16, 16)
    X, Y = g.mesh()
    f = np.cos(np.pi * X)
    lam = (2 - 2 * np.cos(np.pi / 16)) / g.hx ** 2
    assert hminus1_norm_sq(g, f) == pytest.approx(gc.inner(g, f, f) / lam, rel=1e-10)
