# %% [markdown]
# One private protocol run, round by round.
# The per-round noise scale follows the largest value broadcast in the
# previous round; clipping keeps that value at most (alpha*X)**i.

# %%
import numpy as np

from ldpkatz import synthetic as sy
from ldpkatz.analysis import topk_recall
from ldpkatz.exact import exact_katz_iterative
from ldpkatz.graph import degree_profile, max_eigenvalue, select_clipping_params
from ldpkatz.privacy import make_ledger
from ldpkatz.protocol import ProtocolConfig, clip_ceiling, run_protocol

g = sy.chung_lu(2000, 10, exponent=2.2, seed=3)
lam = max_eigenvalue(g)
cp = select_clipping_params(degree_profile(g))
print(g, f"lambda_max={lam:.2f}  minimal feasible X={cp.X:.2f} (d={cp.d}, N={cp.N})")

cfg = ProtocolConfig(alpha=0.85 / lam, X=lam, epsilon=2.0, S=3, seed=1)
print(make_ledger(cfg.epsilon, cfg.S))

# %%
run = run_protocol(g, cfg)
for i, (scale, r) in enumerate(zip(run.noise_scales, run.round_vectors), start=1):
    print(f"round {i}: noise scale {scale:8.3f}  max|reported| {np.abs(r).max():.3f}"
          f"  ceiling {clip_ceiling(cfg.alpha, cfg.X, i):.3f}")

# %%
exact = exact_katz_iterative(g, cfg.alpha, cfg.S)
for k in (10, 50, 200):
    print(f"recall@{k}: {topk_recall(exact, run.katz_estimate, k):.2f}")
