# %% [markdown]
# # Neumann Poisson solves and the Helmholtz projection
#
# `solve_neumann_poisson` inverts the five-point Laplacian on mean-zero
# fields.  A right-hand side with nonzero mean has no solution and is refused.

# %%
import numpy as np

from qchns import grid as gc
from qchns.elliptic import helmholtz_project, solve_neumann_poisson
from qchns.errors import CompatibilityViolated

g = gc.Grid(64, 64)
X, Y = g.mesh()
u = np.cos(np.pi * X) * np.cos(np.pi * Y)
q = solve_neumann_poisson(g, -2 * np.pi ** 2 * u)
print("L2 error against cos*cos:", gc.l2norm(g, q - u))
try:
    solve_neumann_poisson(g, np.ones(g.shape))
except CompatibilityViolated as exc:
    print("refused:", exc)

# %% [markdown]
# The projection splits a field into a discrete divergence-free part and a
# gradient.  It uses the wide `div(grad .)` operator, which makes it an exact
# orthogonal projector.

# %%
rng = np.random.default_rng(1)
v = rng.standard_normal((2,) + g.shape)
w, p = helmholtz_project(g, v)
w2, _ = helmholtz_project(g, w)
print("|div w|            :", gc.l2norm(g, gc.divergence(g, w)))
print("idempotence defect :", np.linalg.norm(w2 - w) / np.linalg.norm(v))
print("<w, grad p>        :", gc.inner(g, w, gc.gradient(g, p)))

# %% [markdown]
# A rigid rotation about the centre is divergence-free but crosses the walls,
# so the projection has to change it.

# %%
rot = np.stack([Y - 0.5, -(X - 0.5)])
print("relative change of a rotation:", np.linalg.norm(helmholtz_project(g, rot)[0] - rot) / np.linalg.norm(rot))
