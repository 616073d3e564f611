# %% [markdown]
# # Matched-density limit
#
# The velocity divergence is tied to the density contrast:
# `div u = alpha * laplacian(mu_p)`.  Under the same gravity forcing and the
# same initial state, halving `alpha` roughly halves the largest `|div u|`
# seen during the run.

# %%
from qchns import diagnostics as dg
from qchns.picard import run

peaks = []
for alpha in (0.2, 0.1, 0.05):
    eps = -2 * alpha / (1 + alpha)
    cfg = dg.parse_config(f"nx = 32\nny = 32\neps = {eps!r}\nnu = 1\na0 = 1\ndt = 1e-3\nT = 0.2\n"
                          "initial = uniform(0)\ngravity = true\n")
    recs, _ = run(cfg)
    peaks.append(max(r.div_u_norm for r in recs))
    print(f"alpha = {alpha:.2f}: max |div u| = {peaks[-1]:.4e}")
print("ratios per halving:", [round(a / b, 2) for a, b in zip(peaks[:-1], peaks[1:])])
