# %% [markdown]
# # Density, viscosity, potential and chemical potential
#
# The density is affine in the phase field and the density contrast enters
# only through `alpha = -eps / (2 + eps)`.

# %%
import numpy as np

from qchns import grid as gc
from qchns.phase import PhysParams, chemical_potential, density, double_well, viscosity

p = PhysParams(eps=-0.5, nu=2.0)
print("alpha:", p.alpha)
for phi in (-1.0, 0.0, 1.0):
    print(f"phi = {phi:+.0f}: rho = {density(phi, p):.3f}, eta = {viscosity(phi, p):.3f}, "
          f"F = {double_well(phi)[0]:.3f}")

# %% [markdown]
# The planar equilibrium `tanh(x / sqrt 2)` has zero chemical potential; on
# the grid the residue is second order in `h`.

# %%
for n in (64, 128, 256):
    g = gc.Grid(n, 8, 16.0, 1.0)
    X, _ = g.mesh()
    mu = chemical_potential(g, np.tanh((X - 8.0) / np.sqrt(2)))
    print(f"n = {n:3d}: max |mu| away from walls = {np.abs(mu[n // 8:-n // 8]).max():.3e}")
