# %% [markdown]
# # Constrained versus dense attention
# Dense attention compares every position with every other one, so its cost
# grows with the square of T*H*W.  The constrained window does not.

# %%
from pnsnet.bench import bench_mode, speedup_trend

for mode in ("constrained", "dense"):
    r = bench_mode(mode, T=2, H=8, W=8, C=8, iters=5)
    print(r.csv_row())

# %%
for hw, ratio in speedup_trend():
    print(f"H*W = {hw:3d}: dense is {ratio:5.1f}x slower")
