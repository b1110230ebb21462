"""Convolution, rectifier and nearest-neighbour upsampling with backward passes.

All layers take channels-last batches ``[B, H, W, C]``; the frame axis of a
clip doubles as the batch axis.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import DimensionError


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """Same-padded 2-D convolution; ``w`` is [kh, kw, C_in, C_out].

    Returns ``(out, cols)`` where ``cols`` is the im2col matrix needed by
    :func:`conv2d_backward`.
    """
    kh, kw, cin, cout = w.shape
    if x.ndim != 4 or x.shape[-1] != cin:
        raise DimensionError(f"conv input {x.shape} does not match kernel {w.shape}")
    B, H, W, _ = x.shape
    ph, pw = kh // 2, kw // 2
    if kh == 1 and kw == 1:
        xs = x[:, ::stride, ::stride]
        cols = xs.reshape(-1, cin)
        out = cols @ w.reshape(cin, cout) + b
        return out.reshape(*xs.shape[:3], cout), cols
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    Ho, Wo = win.shape[1], win.shape[2]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(B * Ho * Wo, kh * kw * cin)
    out = cols @ w.reshape(kh * kw * cin, cout) + b
    return out.reshape(B, Ho, Wo, cout), cols


def conv2d_backward(x_shape, cols: np.ndarray, w: np.ndarray, stride: int, grad_out: np.ndarray):
    """Return ``(grad_x, grad_w, grad_b)`` for :func:`conv2d`."""
    kh, kw, cin, cout = w.shape
    B, H, W, _ = x_shape
    _, Ho, Wo, _ = grad_out.shape
    g = grad_out.reshape(-1, cout)
    grad_w = (cols.T @ g).reshape(w.shape)
    grad_b = g.sum(axis=0)
    dcols = g @ w.reshape(-1, cout).T
    if kh == 1 and kw == 1:
        if stride == 1:
            return dcols.reshape(x_shape), grad_w, grad_b
        grad_x = np.zeros(x_shape, dtype=grad_out.dtype)
        grad_x[:, ::stride, ::stride] = dcols.reshape(B, Ho, Wo, cin)
        return grad_x, grad_w, grad_b
    ph, pw = kh // 2, kw // 2
    dcols = dcols.reshape(B, Ho, Wo, kh, kw, cin)
    dxp = np.zeros((B, H + 2 * ph, W + 2 * pw, cin), dtype=grad_out.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, :, i, j]
    return dxp[:, ph:ph + H, pw:pw + W], grad_w, grad_b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return np.where(x > 0, grad_out, 0)


def upsample(x: np.ndarray, factor: int) -> np.ndarray:
    return x.repeat(factor, axis=1).repeat(factor, axis=2)


def upsample_backward(grad_out: np.ndarray, factor: int) -> np.ndarray:
    B, H, W, C = grad_out.shape
    g = grad_out.reshape(B, H // factor, factor, W // factor, factor, C)
    return g.sum(axis=(2, 4))
