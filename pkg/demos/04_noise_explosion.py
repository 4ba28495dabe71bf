# %% [markdown]
# Why clip at all: without it the noise scale compounds.
# On a graph with no edges every reported value is pure noise, so the next
# round's scale is the largest of n Laplace magnitudes, about H_n times the last.

# %%
import numpy as np

from ldpkatz import synthetic as sy
from ldpkatz.analysis import noclip_noise_growth
from ldpkatz.protocol import ProtocolConfig, simulate_batch

n, alpha, S = 100, 0.5, 5
cfg = ProtocolConfig(alpha=alpha, X=1.0, epsilon=1.0, S=S, clipping=False)
trace = simulate_batch(sy.empty(n), cfg, np.arange(5000))
predicted = noclip_noise_growth(n, alpha, S, 1.0)
for i in range(S):
    print(f"round {i + 1}: mean scale {trace.noise_scales[i].mean():12.4g}   recurrence {predicted[i]:12.4g}")

# %%
clipped = simulate_batch(sy.empty(n), cfg.replace(clipping=True, X=2.0), np.arange(5000))
print("with X=2 the last round's scale stays at", f"{clipped.noise_scales[-1].mean():.4g}")
