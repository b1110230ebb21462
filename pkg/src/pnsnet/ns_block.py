"""Normalized self-attention (NS) block with its exact backward pass.

Queries attend to a constrained neighborhood: a ``(2k+1) x (2k+1)`` window
with per-group dilation ``2i - 1`` around the query's spatial position,
replicated over all ``T`` frames of the clip.  Query and slot enumeration
are both frame-major, then row-major over space.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .io import read_tensor, write_tensor
from .tensor import (
    LN_EPS,
    DimensionError,
    LinearWeights,
    SplitError,
    channel_split,
    concat_channels,
    layer_norm_temporal,
    layer_norm_temporal_backward,
    linear_embed,
    linear_embed_backward,
    rowwise_max,
    softmax_rows,
    softmax_rows_backward,
)

__all__ = [
    "NsParams",
    "NeighborhoodSample",
    "AffinityGroup",
    "dilations",
    "sample_neighborhood",
    "scatter_neighborhood",
    "relevance",
    "aggregate",
    "soft_attention_map",
    "ns_forward",
    "ns_forward_cached",
    "ns_backward",
    "ns_backward_cached",
    "save_ns_params",
    "load_ns_params",
]

WEIGHT_NAMES = ("theta", "phi", "g", "w_t")


def dilations(n_groups: int) -> list[int]:
    return [2 * i - 1 for i in range(1, n_groups + 1)]


@dataclass
class NsParams:
    theta: LinearWeights
    phi: LinearWeights
    g: LinearWeights
    w_t: LinearWeights
    groups: int
    kernel: int
    soft_attention: bool = True

    def __post_init__(self):
        c = self.theta.c_in
        for name in WEIGHT_NAMES:
            w = getattr(self, name)
            if w.c_in != c or w.c_out != c:
                raise DimensionError(
                    f"{name} must be {c}x{c}, got {w.weight.shape}"
                )
        if self.groups < 1 or c % self.groups:
            raise SplitError(f"cannot split {c} channels into {self.groups} groups")
        if self.kernel < 1:
            raise ValueError(f"kernel must be >= 1, got {self.kernel}")

    @property
    def channels(self) -> int:
        return self.theta.c_in

    @property
    def dilations(self) -> list[int]:
        return dilations(self.groups)

    @classmethod
    def init(cls, channels: int, groups: int, kernel: int, rng: np.random.Generator,
             dtype=np.float32, soft_attention: bool = True) -> "NsParams":
        """Uniform fan-in embeddings, zero ``w_t`` so the block starts as an identity."""
        theta = LinearWeights.uniform(channels, channels, rng, dtype)
        phi = LinearWeights.uniform(channels, channels, rng, dtype)
        g = LinearWeights.uniform(channels, channels, rng, dtype)
        w_t = LinearWeights.zeros(channels, channels, dtype)
        return cls(theta, phi, g, w_t, groups, kernel, soft_attention)

    def astype(self, dtype) -> "NsParams":
        return NsParams(*(getattr(self, n).astype(dtype) for n in WEIGHT_NAMES),
                        self.groups, self.kernel, self.soft_attention)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for n in WEIGHT_NAMES:
            w = getattr(self, n)
            out[f"{n}.weight"] = w.weight
            out[f"{n}.bias"] = w.bias
        return out

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], groups: int, kernel: int,
                    soft_attention: bool = True) -> "NsParams":
        ws = [LinearWeights(arrays[f"{n}.weight"], arrays[f"{n}.bias"]) for n in WEIGHT_NAMES]
        return cls(*ws, groups, kernel, soft_attention)


@dataclass
class NeighborhoodSample:
    """Gathered windows: ``values`` is [H*W, S, Cg], ``valid`` is [H*W, S]."""

    values: np.ndarray
    valid: np.ndarray
    frames: int
    kernel: int
    dilation: int

    @property
    def slots(self) -> int:
        return self.values.shape[1]


@dataclass
class AffinityGroup:
    affinity: np.ndarray  # [T*H*W, S]
    aggregated: np.ndarray  # [T*H*W, Cg]


@lru_cache(maxsize=64)
def _valid_mask(T: int, H: int, W: int, k: int, d: int) -> np.ndarray:
    offs = np.arange(-k, k + 1) * d
    ys = np.arange(H)[:, None] + offs[None, :]  # [H, n]
    xs = np.arange(W)[:, None] + offs[None, :]  # [W, n]
    ok_y = (ys >= 0) & (ys < H)
    ok_x = (xs >= 0) & (xs < W)
    # [H, W, n_y, n_x] -> [H*W, n*n], then tiled over frames (t-major)
    ok = ok_y[:, None, :, None] & ok_x[None, :, None, :]
    ok = ok.reshape(H * W, -1)
    mask = np.tile(ok, (1, T))
    mask.setflags(write=False)
    return mask


def sample_neighborhood(F: np.ndarray, k: int, d: int) -> NeighborhoodSample:
    """Gather the ``T*(2k+1)^2`` dilated window around every spatial position.

    The window depends only on (y, x) and covers every frame; slots that
    fall outside the frame carry zeros and ``valid == False``.
    """
    if k < 1 or d < 1:
        raise ValueError(f"kernel and dilation must be >= 1, got k={k}, d={d}")
    T, H, W, C = F.shape
    n = 2 * k + 1
    r = k * d
    padded = np.zeros((T, H + 2 * r, W + 2 * r, C), dtype=F.dtype)
    padded[:, r:r + H, r:r + W] = F
    out = np.empty((H, W, T, n, n, C), dtype=F.dtype)
    for a in range(n):
        oy = a * d
        for b in range(n):
            ox = b * d
            out[:, :, :, a, b] = padded[:, oy:oy + H, ox:ox + W].transpose(1, 2, 0, 3)
    values = out.reshape(H * W, T * n * n, C)
    return NeighborhoodSample(values, _valid_mask(T, H, W, k, d), T, k, d)


def scatter_neighborhood(grad_values: np.ndarray, shape: tuple, k: int, d: int) -> np.ndarray:
    """Adjoint of :func:`sample_neighborhood`: accumulate slot gradients onto ``F``."""
    T, H, W, C = shape
    n = 2 * k + 1
    r = k * d
    g = grad_values.reshape(H, W, T, n, n, C)
    padded = np.zeros((T, H + 2 * r, W + 2 * r, C), dtype=grad_values.dtype)
    for a in range(n):
        oy = a * d
        for b in range(n):
            ox = b * d
            padded[:, oy:oy + H, ox:ox + W] += g[:, :, :, a, b].transpose(2, 0, 1, 3)
    return padded[:, r:r + H, r:r + W].copy()


def _logits(Q_hat: np.ndarray, keys: NeighborhoodSample, width: int) -> np.ndarray:
    T, H, W, C = Q_hat.shape
    q = Q_hat.reshape(T, H * W, C).transpose(1, 0, 2)  # [P, T, C]
    scale = np.sqrt(np.asarray(width, dtype=Q_hat.dtype))
    return (q @ keys.values.transpose(0, 2, 1)) / scale  # [P, T, S]


def relevance(Q_hat: np.ndarray, keys: NeighborhoodSample, width: int) -> np.ndarray:
    """Masked softmax of scaled query-key products, rows ordered (t, y, x)."""
    T, H, W, _ = Q_hat.shape
    if keys.values.shape[0] != H * W:
        raise DimensionError(
            f"keys cover {keys.values.shape[0]} positions, queries {H * W}"
        )
    logits = _logits(Q_hat, keys, width)
    A = softmax_rows(logits, keys.valid[:, None, :])
    return np.ascontiguousarray(A.transpose(1, 0, 2)).reshape(T * H * W, -1)


def aggregate(affinity: np.ndarray, values: NeighborhoodSample) -> np.ndarray:
    """Affinity-weighted sum of the gathered value vectors, one row per query."""
    P, S, C = values.values.shape
    rows, cols = affinity.shape
    if cols != S or rows % P:
        raise DimensionError(
            f"affinity shape {affinity.shape} does not fit values shape {values.values.shape}"
        )
    T = rows // P
    a = affinity.reshape(T, P, S).transpose(1, 0, 2)  # [P, T, S]
    out = a @ values.values  # [P, T, C]
    return np.ascontiguousarray(out.transpose(1, 0, 2)).reshape(rows, C)


def soft_attention_map(groups: list[np.ndarray]) -> np.ndarray:
    """Row-wise maximum over the column-concatenated affinity matrices."""
    if not groups:
        raise ValueError("soft_attention_map needs at least one affinity group")
    return rowwise_max(concat_channels(list(groups)))


@dataclass
class _Cache:
    X: np.ndarray
    Q: list = field(default_factory=list)
    Q_hat: list = field(default_factory=list)
    keys: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    groups: list = field(default_factory=list)
    MT: np.ndarray | None = None
    MS: np.ndarray | None = None
    argmax: np.ndarray | None = None
    P: np.ndarray | None = None


def ns_forward_cached(X: np.ndarray, p: NsParams):
    """Forward pass returning ``(Z, cache)`` for :func:`ns_backward_cached`."""
    if X.ndim != 4:
        raise DimensionError(f"NS block expects [T,H,W,C] input, got shape {X.shape}")
    T, H, W, C = X.shape
    if C != p.channels:
        raise DimensionError(f"input shape {X.shape} does not match block width {p.channels}")
    width = C // p.groups
    Qs = channel_split(linear_embed(X, p.theta), p.groups)
    Ks = channel_split(linear_embed(X, p.phi), p.groups)
    Vs = channel_split(linear_embed(X, p.g), p.groups)
    cache = _Cache(X)
    affinities, aggregated = [], []
    for i, d in enumerate(p.dilations):
        q_hat = layer_norm_temporal(Qs[i], LN_EPS)
        keys = sample_neighborhood(Ks[i], p.kernel, d)
        vals = sample_neighborhood(Vs[i], p.kernel, d)
        A = relevance(q_hat, keys, width)
        affinities.append(A)
        aggregated.append(aggregate(A, vals))
        cache.Q.append(Qs[i])
        cache.Q_hat.append(q_hat)
        cache.keys.append(keys)
        cache.vals.append(vals)
    cache.groups = [AffinityGroup(a, m) for a, m in zip(affinities, aggregated)]
    MT = concat_channels(aggregated)
    if p.soft_attention:
        stacked = concat_channels(affinities)
        cache.argmax = stacked.argmax(axis=1)
        MS = stacked[np.arange(stacked.shape[0]), cache.argmax][:, None]
    else:
        MS = np.ones((MT.shape[0], 1), dtype=X.dtype)
    P = MT @ p.w_t.weight + p.w_t.bias
    Y = P * MS
    cache.MT, cache.MS, cache.P = MT, MS, P
    return X + Y.reshape(T, H, W, C), cache


def ns_forward(X: np.ndarray, p: NsParams) -> np.ndarray:
    return ns_forward_cached(X, p)[0]


def ns_backward_cached(cache: _Cache, p: NsParams, grad_out: np.ndarray):
    X = cache.X
    if grad_out.shape != X.shape:
        raise DimensionError(f"grad shape {grad_out.shape} does not match input {X.shape}")
    T, H, W, C = X.shape
    rows = T * H * W
    width = C // p.groups
    scale = np.sqrt(np.asarray(width, dtype=X.dtype))
    g = grad_out.reshape(rows, C)

    # Y = (MT @ Wt + b) * MS
    dP = g * cache.MS
    grad_wt = LinearWeights(cache.MT.T @ dP, dP.sum(axis=0))
    dMT = dP @ p.w_t.weight.T
    dMS = (g * cache.P).sum(axis=1)
    S = cache.groups[0].affinity.shape[1]

    dQ, dK, dV = [], [], []
    dMT_groups = channel_split(dMT, p.groups)
    for i, d in enumerate(p.dilations):
        A = cache.groups[i].affinity
        keys, vals = cache.keys[i], cache.vals[i]
        P_ = H * W
        a3 = A.reshape(T, P_, S).transpose(1, 0, 2)  # [P, T, S]
        dm = dMT_groups[i].reshape(T, P_, width).transpose(1, 0, 2)  # [P, T, Cg]
        dA = dm @ vals.values.transpose(0, 2, 1)  # [P, T, S]
        d_vals = a3.transpose(0, 2, 1) @ dm  # [P, S, Cg]
        if p.soft_attention:
            hit = (cache.argmax // S) == i
            r = np.nonzero(hit)[0]
            j = cache.argmax[r] % S
            t_idx, p_idx = np.divmod(r, P_)
            np.add.at(dA, (p_idx, t_idx, j), dMS[r])
        dlog = softmax_rows_backward(a3, dA) / scale  # [P, T, S]
        q_hat = cache.Q_hat[i].reshape(T, P_, width).transpose(1, 0, 2)  # [P, T, Cg]
        dq_hat = dlog @ keys.values  # [P, T, Cg]
        d_keys = dlog.transpose(0, 2, 1) @ q_hat  # [P, S, Cg]
        dq_hat = dq_hat.transpose(1, 0, 2).reshape(T, H, W, width)
        dQ.append(layer_norm_temporal_backward(cache.Q[i], dq_hat, LN_EPS))
        dK.append(scatter_neighborhood(d_keys, (T, H, W, width), p.kernel, d))
        dV.append(scatter_neighborhood(d_vals, (T, H, W, width), p.kernel, d))

    dx_q, grad_theta = linear_embed_backward(X, p.theta, concat_channels(dQ))
    dx_k, grad_phi = linear_embed_backward(X, p.phi, concat_channels(dK))
    dx_v, grad_g = linear_embed_backward(X, p.g, concat_channels(dV))
    grad_X = grad_out + dx_q + dx_k + dx_v
    grads = NsParams(grad_theta, grad_phi, grad_g, grad_wt, p.groups, p.kernel, p.soft_attention)
    return grad_X, grads


def ns_backward(X: np.ndarray, p: NsParams, grad_out: np.ndarray):
    """Return ``(grad_X, grad_params)`` for ``L = <grad_out, ns_forward(X, p)>``.

    The row-max of the soft-attention map routes its gradient to the first
    maximal slot in group-major, then slot order.
    """
    _, cache = ns_forward_cached(X, p)
    return ns_backward_cached(cache, p, grad_out)


def save_ns_params(directory, p: NsParams) -> None:
    os.makedirs(directory, exist_ok=True)
    for name, arr in p.arrays().items():
        write_tensor(os.path.join(directory, f"{name}.pnst"), arr)
    with open(os.path.join(directory, "ns_params.txt"), "w", encoding="ascii") as fh:
        fh.write(f"C={p.channels}\nN={p.groups}\nk={p.kernel}\n")


def load_ns_params(directory) -> NsParams:
    meta = {}
    with open(os.path.join(directory, "ns_params.txt"), encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                meta[key] = int(value)
    arrays = {}
    for n in WEIGHT_NAMES:
        for part in ("weight", "bias"):
            arrays[f"{n}.{part}"] = read_tensor(os.path.join(directory, f"{n}.{part}.pnst"))
    p = NsParams.from_arrays(arrays, meta["N"], meta["k"])
    if p.channels != meta["C"]:
        raise DimensionError(f"manifest C={meta['C']} but weights are {p.channels} wide")
    return p
