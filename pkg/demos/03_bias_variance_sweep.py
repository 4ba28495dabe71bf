# %% [markdown]
# Trading bias for variance with the clipping factor.
# Small X clips hard (large negative bias, little noise); large X lets the
# noise of high-degree nodes leak into later rounds.

# %%
import numpy as np

from ldpkatz import synthetic as sy
from ldpkatz.analysis import sweep
from ldpkatz.exact import true_katz
from ldpkatz.graph import degree_profile, max_eigenvalue
from ldpkatz.protocol import ProtocolConfig

g = sy.chung_lu(800, 12, exponent=2.3, seed=5)
lam = max_eigenvalue(g)
prof = degree_profile(g)
base = ProtocolConfig(alpha=0.85 / lam, X=lam, epsilon=1.0, S=5)
ref = true_katz(g, base.alpha, lam)

# %%
rows = list(sweep(g, base, "X", lam * np.array([0.25, 0.5, 1.0, 2.0, 4.0]), 60, ref, prof,
                  ks=(20,), variants=("clipped",)))
table = {}
for r in rows:
    table.setdefault(r["sweep_value"] / lam, {})[r["metric"]] = r["value"]
print(" X/lam     bias^2     variance      loss   recall@20")
for mult, m in table.items():
    print(f"{mult:5.2f} {m['bias2']:10.4g} {m['variance']:12.4g} {m['loss']:9.4g} {m['recall@20']:8.2f}")
