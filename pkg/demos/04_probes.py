# %% [markdown]
# # Probes: distributions, concentration, synchronisation, bounds

# %%
from pathlib import Path

import numpy as np

from qlyap import make_model
from qlyap.conditioned import (bounds_check, convergence_probe, empirical_qsd,
                               sync_probe)
from qlyap.svg import line_plot

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)

# %% [markdown]
# The law of survivors approaches `nu` from any start.

# %%
bm = make_model("brownian")
qsd = empirical_qsd(bm, [0.3], t=4.0, dt=2e-3, n=20_000, bins=32, seed=0)
print(f"TV distance to nu: {qsd.distance:.4f}")
mid = 0.5 * (qsd.edges[1:] + qsd.edges[:-1])
line_plot(OUT / "qsd.svg", [(mid, qsd.mass, "empirical"), (mid, qsd.reference_mass, "nu")],
          xlabel="x", ylabel="bin mass", zero_line=False)

# %% [markdown]
# Finite-time exponents concentrate at `lambda` as the horizon grows.

# %%
pf = make_model("pitchfork", alpha=1.0, c=1.0)
curve = convergence_probe(pf, [0.0], eps=0.2, t_grid=(1, 2, 4, 8), dt=2e-3, n=4000, seed=0)
for row in curve.rows:
    print(f"t={row.t:4.1f}  P(|lambda_v - lambda| >= 0.2) = {row.value:.4f} "
          f"[{row.lo:.4f}, {row.hi:.4f}]")

# %% [markdown]
# Two paths under the same noise: with negative `lambda` they merge.

# %%
sync = sync_probe(make_model("pitchfork", alpha=1.0, c=2.0), [0.0], t=10.0, dt=2e-3,
                  n_pairs=500, seed=0)
print(f"{sync.fraction:.3f} of {sync.n_surviving} surviving pairs below lambda + 0.1")

# %% [markdown]
# In two dimensions `lambda` sits between the averages of the extreme
# eigenvalues of the symmetrised Jacobian.

# %%
b = bounds_check(make_model("gradient2d"), [0.5, 0.5], t=4.0, dt=2e-3, n=3000, mode="fv")
print(f"{b.lower.value:.4f} <= {b.lam.value:.4f} <= {b.upper.value:.4f}, "
      f"sandwiched={b.sandwiched()}")
