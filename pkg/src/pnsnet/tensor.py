"""Dense tensor primitives shared by every layer of the network.

Tensors are plain row-major :class:`numpy.ndarray` objects in float32 or
float64.  Every operation here is pure: inputs are never modified and the
result is a fresh array in the input's precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "SplitError",
    "DegenerateRowError",
    "LinearWeights",
    "as_tensor",
    "linear_embed",
    "linear_embed_backward",
    "channel_split",
    "concat_channels",
    "layer_norm_temporal",
    "layer_norm_temporal_backward",
    "softmax_rows",
    "softmax_rows_backward",
    "rowwise_max",
]

LN_EPS = 1e-5
FLOAT_TYPES = (np.float32, np.float64)


class DimensionError(ValueError):
    """Raised when tensor extents are incompatible."""


class SplitError(ValueError):
    """Raised when a channel split is not exact."""


class DegenerateRowError(ValueError):
    """Raised when a softmax row has no unmasked entry."""


def as_tensor(x, dtype=None) -> np.ndarray:
    """Return ``x`` as a contiguous float tensor of rank 1..5."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 0:
        raise DimensionError("tensor rank must be between 1 and 5, got a scalar")
    arr = np.ascontiguousarray(arr)
    if arr.dtype.type not in FLOAT_TYPES:
        arr = arr.astype(np.float64)
    if not 1 <= arr.ndim <= 5:
        raise DimensionError(f"tensor rank must be between 1 and 5, got shape {arr.shape}")
    if 0 in arr.shape:
        raise DimensionError(f"tensor extents must be >= 1, got shape {arr.shape}")
    return arr


@dataclass
class LinearWeights:
    """Per-position linear map: ``weight`` is [C_in, C_out], ``bias`` is [C_out]."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise DimensionError(
                f"linear weights need rank-2 weight and rank-1 bias, got "
                f"{self.weight.shape} and {self.bias.shape}"
            )
        if self.bias.shape[0] != self.weight.shape[1]:
            raise DimensionError(
                f"bias extent {self.bias.shape} does not match weight {self.weight.shape}"
            )

    @property
    def c_in(self) -> int:
        return self.weight.shape[0]

    @property
    def c_out(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def zeros(cls, c_in: int, c_out: int, dtype=np.float64) -> "LinearWeights":
        return cls(np.zeros((c_in, c_out), dtype=dtype), np.zeros(c_out, dtype=dtype))

    @classmethod
    def uniform(cls, c_in: int, c_out: int, rng: np.random.Generator, dtype=np.float64) -> "LinearWeights":
        """Fan-in scaled uniform weights in +-1/sqrt(c_in); zero bias."""
        bound = 1.0 / np.sqrt(c_in)
        w = rng.uniform(-bound, bound, size=(c_in, c_out)).astype(dtype)
        return cls(w, np.zeros(c_out, dtype=dtype))

    def astype(self, dtype) -> "LinearWeights":
        return LinearWeights(self.weight.astype(dtype), self.bias.astype(dtype))


def linear_embed(X: np.ndarray, w: LinearWeights) -> np.ndarray:
    """Apply a 1x1x1 convolution: ``X[..., :] @ weight + bias`` at every position."""
    if X.ndim != 4:
        raise DimensionError(f"linear_embed expects a [T,H,W,C] input, got shape {X.shape}")
    if X.shape[-1] != w.c_in:
        raise DimensionError(
            f"input shape {X.shape} does not match weight shape {w.weight.shape}"
        )
    return X @ w.weight + w.bias


def linear_embed_backward(X: np.ndarray, w: LinearWeights, grad_out: np.ndarray):
    """Return ``(grad_X, grad_weights)`` for :func:`linear_embed`."""
    flat_x = X.reshape(-1, X.shape[-1])
    flat_g = grad_out.reshape(-1, grad_out.shape[-1])
    grad_w = LinearWeights(flat_x.T @ flat_g, flat_g.sum(axis=0))
    return grad_out @ w.weight.T, grad_w


def channel_split(X: np.ndarray, n: int) -> list[np.ndarray]:
    """Split the last axis into ``n`` contiguous equal groups."""
    c = X.shape[-1]
    if n < 1 or c % n:
        raise SplitError(f"cannot split {c} channels into {n} groups")
    width = c // n
    return [np.ascontiguousarray(X[..., i * width:(i + 1) * width]) for i in range(n)]


def concat_channels(parts: list[np.ndarray]) -> np.ndarray:
    if not parts:
        raise DimensionError("concat_channels needs at least one part")
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise DimensionError(
                f"leading shapes differ: {parts[0].shape} vs {p.shape}"
            )
    return np.concatenate(parts, axis=-1)


def layer_norm_temporal(Q: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    """Normalize every (h, w, c) series over the leading frame axis.

    Uses the biased variance and carries no affine parameters.
    """
    mean = Q.mean(axis=0, keepdims=True)
    centered = Q - mean
    var = (centered * centered).mean(axis=0, keepdims=True)
    return centered / np.sqrt(var + eps)


def layer_norm_temporal_backward(Q: np.ndarray, grad_out: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    mean = Q.mean(axis=0, keepdims=True)
    centered = Q - mean
    var = (centered * centered).mean(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    g_mean = grad_out.mean(axis=0, keepdims=True)
    gx_mean = (grad_out * x_hat).mean(axis=0, keepdims=True)
    return inv_std * (grad_out - g_mean - x_hat * gx_mean)


def softmax_rows(M: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax over the last axis; ``mask`` marks entries that take part.

    Masked-out entries come back as exact zeros.  Works on any leading
    shape, the rows being the last axis.
    """
    if mask is None:
        shifted = M - M.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    mask = np.broadcast_to(mask, M.shape)
    if not mask.any(axis=-1).all():
        raise DegenerateRowError("softmax row has every entry masked")
    neg_inf = np.array(-np.inf, dtype=M.dtype)
    logits = np.where(mask, M, neg_inf)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(A: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the logits given the softmax output ``A``.

    Masked slots have ``A == 0`` and therefore receive zero gradient.
    """
    inner = (grad_out * A).sum(axis=-1, keepdims=True)
    return A * (grad_out - inner)


def rowwise_max(M: np.ndarray) -> np.ndarray:
    if M.ndim != 2:
        raise DimensionError(f"rowwise_max expects a [rows, cols] matrix, got shape {M.shape}")
    return M.max(axis=1, keepdims=True)
