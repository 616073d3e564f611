# %% [markdown]
# # Energy budget
#
# The diagnostics record kinetic, gravitational and mixing energy and the
# three dissipation rates.  Backward Euler satisfies the energy law up to a
# first-order defect: halving `dt` halves the accumulated residual.

# %%
from qchns import diagnostics as dg
from qchns.picard import run

base = "nx = 32\nny = 32\neps = -0.5\nnu = 1\na0 = 1\nT = 0.01\ninitial = spinodal(0.05, 3)\n"
totals = []
for dt in (2e-4, 1e-4, 5e-5):
    recs, _ = run(dg.parse_config(base + f"dt = {dt}\n"))
    rep = dg.energy_report(recs)
    totals.append(rep["cumulative_residual"])
    print(f"dt = {dt:.0e}: E {recs[0].E_total:.6f} -> {recs[-1].E_total:.6f}, "
          f"cumulative residual {rep['cumulative_residual']:.3e}, monotone {rep['monotone']}")
print("halving ratios:", [round(a / b, 2) for a, b in zip(totals[:-1], totals[1:])])

# %%
last = recs[-1]
print(f"final dissipation: visc {last.D_visc:.3e}, chem {last.D_chem:.3e}, fric {last.D_fric:.3e}")
