# %% [markdown]
# # Where the conditioned exponent changes sign
#
# Shrinking the interval keeps survivors near the origin, where `f' = alpha`.
# Growing it lets them settle near the stable branches `+-sqrt(alpha)`, where
# `f' = -2 alpha`. Somewhere in between `lambda(c)` crosses zero.

# %%
from pathlib import Path

import numpy as np

from qlyap import make_model, solve
from qlyap.cli import bisect_sign_change
from qlyap.svg import line_plot

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)


def lam(c, alpha=1.0):
    return solve(make_model("pitchfork", alpha=alpha, c=c)).lam


# %%
cs = np.arange(0.05, 2.55, 0.05)
lams = np.array([lam(c) for c in cs])
i = int(np.flatnonzero(np.sign(lams[1:]) != np.sign(lams[:-1]))[0])
lo, hi = bisect_sign_change(lam, cs[i], cs[i + 1], lams[i], tol=1e-3)
print(f"lambda(0.05) = {lams[0]:.4f}, sign change at c in [{lo:.4f}, {hi:.4f}]")

line_plot(OUT / "lambda_vs_c.svg", [(cs, lams, "lambda(c), alpha = 1")],
          xlabel="c", ylabel="lambda", title="conditioned exponent against half-width")

# %% [markdown]
# At fixed `c = 1`, raising `alpha` makes the origin more repelling and
# the exponent increases through zero once.

# %%
alphas = np.linspace(-1, 3, 41)
la = np.array([lam(1.0, a) for a in alphas])
j = int(np.flatnonzero(np.sign(la[1:]) != np.sign(la[:-1]))[0])
print("alpha sign change in", bisect_sign_change(lambda a: lam(1.0, a), alphas[j], alphas[j + 1],
                                                 la[j], tol=1e-3))
line_plot(OUT / "lambda_vs_alpha.svg", [(alphas, la, "lambda(alpha), c = 1")],
          xlabel="alpha", ylabel="lambda")
