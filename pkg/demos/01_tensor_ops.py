# %% [markdown]
# # Building blocks
# The NS block is assembled from a handful of small tensor operations.
# Tensors are plain numpy arrays laid out as [T, H, W, C].

# %%
import numpy as np

from pnsnet.tensor import (
    LinearWeights,
    channel_split,
    concat_channels,
    layer_norm_temporal,
    linear_embed,
    rowwise_max,
    softmax_rows,
)

rng = np.random.default_rng(0)
X = rng.normal(size=(5, 8, 14, 32))

# %% A 1x1x1 convolution is a per-position linear map
w = LinearWeights.uniform(32, 32, rng)
Q = linear_embed(X, w)
print("embedded", Q.shape)

# %% Channel groups, and their exact inverse
groups = channel_split(Q, 4)
print("group widths", [g.shape[-1] for g in groups])
assert np.array_equal(concat_channels(groups), Q)

# %% Temporal normalization: every (h, w, c) is standardized over the T frames
Qn = layer_norm_temporal(Q)
print("mean over T", float(np.abs(Qn.mean(axis=0)).max()))
print("var over T ", float(Qn.var(axis=0).mean()))

# %% Masked softmax keeps masked slots at exactly zero
logits = np.array([[1000.0, 1000.0, 1000.0], [0.0, 2.0, -1.0]])
mask = np.array([[True, True, True], [True, False, True]])
A = softmax_rows(logits, mask)
print(A)
print("row max", rowwise_max(A).ravel())
