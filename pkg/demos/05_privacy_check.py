# %% [markdown]
# Empirical check of one round's likelihood ratio.
# Two users whose neighbor lists differ in one bit report through the same
# randomizer; histogram ratios should stay within e**eps_round up to sampling error.

# %%
from ldpkatz.analysis import privacy_ratio_check
from ldpkatz.privacy import make_ledger

ledger = make_ledger(1.0, 5)
eps_round = ledger.per_round_ldp
print(f"per-round budget {eps_round}, composed edge-RDP {ledger.composed_rdp}")

print(privacy_ratio_check(eps_round, 1.0, 10**6, seed=0))
# calibrating with half the noise should be caught
print(privacy_ratio_check(eps_round, 1.0, 10**6, scale=0.5 / eps_round, seed=0))
