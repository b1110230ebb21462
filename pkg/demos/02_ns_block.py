# %% [markdown]
# # The normalized self-attention block
# Each query looks at a dilated (2k+1) x (2k+1) window, replicated over all
# frames.  Channel group i uses dilation 2i-1, so wider groups see further.

# %%
import numpy as np

from pnsnet.gradcheck import dense_attention_oracle, random_ns_params
from pnsnet.model import PnsStack, pns_forward
from pnsnet.ns_block import NsParams, ns_forward, ns_forward_cached, sample_neighborhood

rng = np.random.default_rng(0)

# %% Window sampling
F = rng.normal(size=(5, 8, 14, 8))
s = sample_neighborhood(F, k=3, d=1)
print("slots per position:", s.slots)  # 5 * 7 * 7
print("valid slots at the corner:", int(s.valid[0].sum()), "in the middle:", int(s.valid[4 * 14 + 7].sum()))

# %% A fresh block is an identity because its output map starts at zero
p = NsParams.init(32, groups=4, kernel=3, rng=rng, dtype=np.float64)
print("dilations", p.dilations)
X = rng.normal(size=(5, 8, 14, 32))
print("identity at init:", np.array_equal(ns_forward(X, p), X))

# %% With random weights the block mixes information across frames
p = random_ns_params(rng, 32, 4, 3)
Z, cache = ns_forward_cached(X, p)
print("output", Z.shape, "affinity columns per group", cache.groups[0].affinity.shape[1])
print("soft-attention weights in", float(cache.MS.min()), "to", float(cache.MS.max()))

# %% When the window covers the whole frame, the block equals all-pairs attention
p1 = random_ns_params(rng, 8, 1, 4)
X1 = rng.normal(size=(2, 4, 4, 8))
print("max |constrained - dense|:", float(np.abs(ns_forward(X1, p1) - dense_attention_oracle(X1, p1)).max()))

# %% Stacking blocks keeps an outer residual, so untrained stacks return 2X
stack = PnsStack([NsParams.init(32, 4, 3, rng, np.float64) for _ in range(2)])
print("stack(X) == 2X:", np.array_equal(pns_forward(X, stack), 2 * X))
