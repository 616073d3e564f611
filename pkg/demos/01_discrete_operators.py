# %% [markdown]
# # Discrete operators on the cell-centred grid
#
# Scalars live at cell centres with mirror ghosts, velocities with
# antisymmetric ghosts for the normal component.  The central divergence is
# exactly minus the transpose of the central gradient, so summation by parts
# holds to rounding.

# %%
import numpy as np

from qchns import grid as gc
from qchns.convergence import observed_orders

g = gc.Grid(24, 16, 1.5, 1.0)
rng = np.random.default_rng(0)
f = rng.standard_normal(g.shape)
v = rng.standard_normal((2,) + g.shape)
print("<grad f, v> + <f, div v> =", gc.inner(g, gc.gradient(g, f), v) + gc.inner(g, f, gc.divergence(g, v)))
print("max |D + G^T| =", abs(gc.divergence_operator(g) + gc.gradient_operator(g).T).max())

# %% [markdown]
# Affine fields are differentiated exactly away from the walls and the
# five-point Laplacian is exact on quadratics.

# %%
X, Y = g.mesh()
print("d/dx of x (interior):", np.unique(np.round(gc.gradient(g, X)[0][1:-1], 12)))
print("lap of x^2+y^2 (interior):", np.unique(np.round(gc.laplacian(g, X ** 2 + Y ** 2)[1:-1, 1:-1], 9)))

# %% [markdown]
# Second-order accuracy on a Neumann eigenfunction.

# %%
errs_g, errs_l = [], []
for n in (16, 32, 64, 128):
    g = gc.Grid(n, n)
    X, Y = g.mesh()
    f = np.cos(np.pi * X) * np.cos(np.pi * Y)
    ex = np.stack([-np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y), -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)])
    errs_g.append(gc.l2norm(g, gc.gradient(g, f) - ex))
    errs_l.append(gc.l2norm(g, gc.laplacian(g, f) + 2 * np.pi ** 2 * f))
print("gradient orders :", np.round(observed_orders(errs_g), 3))
print("laplacian orders:", np.round(observed_orders(errs_l), 3))
