"""Finite-difference gradient checks and the brute-force dense attention oracle.

The dense oracle and its backward pass are written as plain Python loops
over every spatio-temporal position.  They share no code with the
vectorized constrained block, which is what makes them useful as a check.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import ClipBatch
from .model import (
    ModelConfig,
    bce_loss,
    _forward,
    branch_signature,
    decoder_backward,
    decoder_forward,
    init_model,
    model_loss,
    model_loss_and_grads,
)
from .ns_block import (
    NsParams,
    aggregate,
    ns_backward,
    ns_forward,
    relevance,
    sample_neighborhood,
    scatter_neighborhood,
    soft_attention_map,
)
from .tensor import (
    LinearWeights,
    layer_norm_temporal,
    layer_norm_temporal_backward,
    linear_embed,
    linear_embed_backward,
    softmax_rows,
    softmax_rows_backward,
)

__all__ = [
    "GradReport",
    "OracleSizeError",
    "ORACLE_CAP",
    "finite_diff_grad",
    "relative_error",
    "dense_attention_oracle",
    "dense_attention_oracle_backward",
    "gradcheck_suite",
    "write_reports_csv",
]

ORACLE_CAP = 2 ** 20
MIN_QUERY_RATIO = 1 / 3
REL_FLOOR = 1e-6


class OracleSizeError(ValueError):
    """The dense oracle refuses inputs above its brute-force size cap."""


@dataclass
class GradReport:
    op_name: str
    max_rel_error: float
    max_abs_error: float
    num_params_checked: int
    passed: bool


def fd_step(x: np.ndarray) -> np.ndarray:
    return 1e-3 * np.maximum(1.0, np.abs(x))


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h=None,
                     index=None, signature: Callable[[np.ndarray], bytes] | None = None) -> np.ndarray:
    """Central differences ``(f(x + h e) - f(x - h e)) / 2h`` per element.

    ``h`` defaults to ``1e-3 * max(1, |x|)`` elementwise.  ``index`` limits
    the check to some flat positions (others stay zero).  When
    ``signature`` is given and the two probes land on different branches
    of a piecewise function, the step is shrunk tenfold (up to four times)
    so the stencil does not straddle the kink.
    """
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    steps = fd_step(flat) if h is None else np.broadcast_to(np.asarray(h, np.float64), flat.shape)
    grad = np.zeros_like(flat)
    positions = range(flat.size) if index is None else np.asarray(index).reshape(-1)
    for i in positions:
        old = flat[i]
        step = float(steps[i])
        for _ in range(5):
            flat[i] = old + step
            fp = f(x)
            sp = signature(x) if signature is not None else None
            flat[i] = old - step
            fm = f(x)
            sm = signature(x) if signature is not None else None
            flat[i] = old
            if sp == sm:
                break
            step /= 10
        grad[i] = (fp - fm) / (2 * step)
    return grad.reshape(x.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, index=None,
                   floor: float = REL_FLOOR) -> tuple[float, float]:
    """Max absolute error, and that error over the larger gradient magnitude.

    Magnitudes below ``floor`` are floored, so structurally zero gradients
    compare on absolute terms.
    """
    a = np.asarray(analytic, np.float64).reshape(-1)
    n = np.asarray(numeric, np.float64).reshape(-1)
    if index is not None:
        a, n = a[index], n[index]
    abs_err = float(np.max(np.abs(a - n))) if a.size else 0.0
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(n), initial=0.0)), floor)
    return abs_err / scale, abs_err


# -- dense oracle ---------------------------------------------------------------

def _check_oracle(X: np.ndarray, p: NsParams) -> None:
    if p.groups != 1:
        raise ValueError(f"dense oracle needs a single attention group, got N={p.groups}")
    if X.ndim != 4 or X.shape[-1] != p.channels:
        raise ValueError(f"oracle input {X.shape} does not match block width {p.channels}")
    size = int(np.prod(X.shape))
    if size >= ORACLE_CAP:
        raise OracleSizeError(f"oracle refuses T*H*W*C = {size} >= {ORACLE_CAP}")


def _embed(rows, weight, bias):
    C_in, C_out = len(weight), len(weight[0])
    out = []
    for x in rows:
        out.append([bias[b] + sum(x[a] * weight[a][b] for a in range(C_in)) for b in range(C_out)])
    return out


def _oracle_pass(X: np.ndarray, p: NsParams):
    T, H, W, C = X.shape
    n = T * H * W
    rows = X.reshape(n, C).tolist()
    Q = _embed(rows, p.theta.weight.tolist(), p.theta.bias.tolist())
    K = _embed(rows, p.phi.weight.tolist(), p.phi.bias.tolist())
    V = _embed(rows, p.g.weight.tolist(), p.g.bias.tolist())
    # temporal layer norm: rows sharing (h, w) are hw, hw + HW, ...
    HW = H * W
    Qh = [[0.0] * C for _ in range(n)]
    inv_std = [[0.0] * C for _ in range(HW)]
    for s in range(HW):
        for c in range(C):
            series = [Q[t * HW + s][c] for t in range(T)]
            mean = sum(series) / T
            var = sum((v - mean) ** 2 for v in series) / T
            inv = 1.0 / math.sqrt(var + 1e-5)
            inv_std[s][c] = inv
            for t in range(T):
                Qh[t * HW + s][c] = (series[t] - mean) * inv
    scale = math.sqrt(C)
    A = []
    for q in range(n):
        logits = [sum(Qh[q][c] * K[j][c] for c in range(C)) / scale for j in range(n)]
        top = max(logits)
        e = [math.exp(v - top) for v in logits]
        z = sum(e)
        A.append([v / z for v in e])
    MT = [[sum(A[q][j] * V[j][c] for j in range(n)) for c in range(C)] for q in range(n)]
    arg, MS = [], []
    for q in range(n):
        if p.soft_attention:
            best = 0
            for j in range(1, n):
                if A[q][j] > A[q][best]:
                    best = j
            arg.append(best)
            MS.append(A[q][best])
        else:
            arg.append(-1)
            MS.append(1.0)
    Wt, bt = p.w_t.weight.tolist(), p.w_t.bias.tolist()
    P = [[bt[b] + sum(MT[q][a] * Wt[a][b] for a in range(C)) for b in range(C)] for q in range(n)]
    Z = [[rows[q][c] + P[q][c] * MS[q] for c in range(C)] for q in range(n)]
    return dict(rows=rows, Q=Q, K=K, V=V, Qh=Qh, inv_std=inv_std, A=A, MT=MT, arg=arg, MS=MS, P=P, Z=Z)


def dense_attention_oracle(X: np.ndarray, p: NsParams) -> np.ndarray:
    """Unconstrained all-pairs version of the NS block (single group).

    Every query attends to every spatio-temporal position; everything else
    (temporal query normalization, soft-attention row max, output map,
    residual) matches the constrained block.
    """
    _check_oracle(X, p)
    out = _oracle_pass(X, p)["Z"]
    return np.array(out, dtype=np.float64).reshape(X.shape)


def dense_attention_oracle_backward(X: np.ndarray, p: NsParams, grad_out: np.ndarray):
    """Loop-level reverse pass of :func:`dense_attention_oracle`.

    Returns ``(grad_X, grad_params)`` with the same conventions as
    :func:`pnsnet.ns_block.ns_backward`.
    """
    _check_oracle(X, p)
    T, H, W, C = X.shape
    n, HW = T * H * W, H * W
    f = _oracle_pass(X, p)
    G = np.asarray(grad_out, np.float64).reshape(n, C).tolist()
    A, V, K, Qh, MT, MS, P = f["A"], f["V"], f["K"], f["Qh"], f["MT"], f["MS"], f["P"]
    Wt = p.w_t.weight.tolist()

    dP = [[G[q][c] * MS[q] for c in range(C)] for q in range(n)]
    dWt = [[sum(MT[q][a] * dP[q][b] for q in range(n)) for b in range(C)] for a in range(C)]
    dbt = [sum(dP[q][b] for q in range(n)) for b in range(C)]
    dMT = [[sum(dP[q][b] * Wt[a][b] for b in range(C)) for a in range(C)] for q in range(n)]
    dMS = [sum(G[q][c] * P[q][c] for c in range(C)) for q in range(n)]

    dV = [[sum(A[q][j] * dMT[q][c] for q in range(n)) for c in range(C)] for j in range(n)]
    dQh = [[0.0] * C for _ in range(n)]
    dK = [[0.0] * C for _ in range(n)]
    scale = math.sqrt(C)
    for q in range(n):
        dA = [sum(dMT[q][c] * V[j][c] for c in range(C)) for j in range(n)]
        if p.soft_attention:
            dA[f["arg"][q]] += dMS[q]
        inner = sum(A[q][j] * dA[j] for j in range(n))
        for j in range(n):
            dl = A[q][j] * (dA[j] - inner) / scale
            for c in range(C):
                dQh[q][c] += dl * K[j][c]
                dK[j][c] += dl * Qh[q][c]

    dQ = [[0.0] * C for _ in range(n)]
    for s in range(HW):
        for c in range(C):
            ts = [t * HW + s for t in range(T)]
            g = [dQh[i][c] for i in ts]
            xh = [Qh[i][c] for i in ts]
            gm = sum(g) / T
            gxm = sum(a * b for a, b in zip(g, xh)) / T
            for i, gi, xi in zip(ts, g, xh):
                dQ[i][c] = f["inv_std"][s][c] * (gi - gm - xi * gxm)

    rows = f["rows"]
    grad_X = [list(G[q]) for q in range(n)]
    grads = {}
    for name, dE in (("theta", dQ), ("phi", dK), ("g", dV)):
        w = getattr(p, name).weight.tolist()
        for q in range(n):
            for a in range(C):
                grad_X[q][a] += sum(dE[q][b] * w[a][b] for b in range(C))
        gw = [[sum(rows[q][a] * dE[q][b] for q in range(n)) for b in range(C)] for a in range(C)]
        gb = [sum(dE[q][b] for q in range(n)) for b in range(C)]
        grads[name] = LinearWeights(np.array(gw), np.array(gb))
    grads["w_t"] = LinearWeights(np.array(dWt), np.array(dbt))
    gp = NsParams(grads["theta"], grads["phi"], grads["g"], grads["w_t"], 1, p.kernel, p.soft_attention)
    return np.array(grad_X).reshape(X.shape), gp


# -- the suite ------------------------------------------------------------------

def _report(name: str, pairs, tol: float) -> GradReport:
    """Fold per-tensor errors into one report.

    The floor scales with the op's largest gradient: a gradient that is
    structurally zero next to O(10) ones only sees rounding noise.
    """
    rel, ab, count = 0.0, 0.0, 0
    op_scale = max(float(np.max(np.abs(np.asarray(a).reshape(-1)[i] if i is not None else a), initial=0.0))
                   for a, _, i in pairs)
    floor = REL_FLOOR * max(1.0, op_scale)
    for analytic, numeric, index in pairs:
        r, a = relative_error(analytic, numeric, index, floor)
        rel, ab = max(rel, r), max(ab, a)
        count += np.asarray(analytic).size if index is None else len(index)
    return GradReport(name, rel, ab, count, bool(rel <= tol))


def random_ns_params(rng: np.random.Generator, channels: int, groups: int, kernel: int) -> NsParams:
    """Double-precision block with every weight (``w_t`` and biases included) random."""
    def lw():
        return LinearWeights(rng.normal(0, 1 / np.sqrt(channels), (channels, channels)),
                             rng.normal(0, 0.1, channels))
    return NsParams(lw(), lw(), lw(), lw(), groups, kernel)


def _check_tensor_fn(f, x, analytic, index=None, signature=None):
    return analytic, finite_diff_grad(f, x, index=index, signature=signature), index


def _ns_pairs(rng, X, p, R):
    gX, gp = ns_backward(X, p, R)
    pairs = [_check_tensor_fn(lambda x: float(np.sum(R * ns_forward(x, p))), X, gX,
                              signature=lambda x: ns_argmax(x, p))]
    grad_arrays = gp.arrays()
    for key, arr in p.arrays().items():
        def f(v, key=key):
            arrays = dict(p.arrays())
            arrays[key] = v
            q = NsParams.from_arrays(arrays, p.groups, p.kernel, p.soft_attention)
            return float(np.sum(R * ns_forward(X, q)))

        def sig(v, key=key):
            arrays = dict(p.arrays())
            arrays[key] = v
            return ns_argmax(X, NsParams.from_arrays(arrays, p.groups, p.kernel, p.soft_attention))
        pairs.append(_check_tensor_fn(f, arr, grad_arrays[key], signature=sig))
    return pairs


def separated_frames(rng: np.random.Generator, p: NsParams, shape) -> np.ndarray:
    """Random input whose query channels differ by at least 0.5 between frames.

    With two frames, temporal normalization of a channel that barely changes
    is dominated by its epsilon and is too curved for central differences.
    ``p.theta.weight`` is replaced in place by a scaled orthogonal matrix so
    that solving for the frame offsets stays well conditioned.
    Frame 0 is Gaussian; frame ``t`` adds ``D @ inv(theta)`` where every
    entry of ``D`` at a position has the same magnitude, at least 0.5.
    """
    C = shape[-1]
    q, _ = np.linalg.qr(rng.normal(size=(C, C)))
    p.theta.weight[...] = q
    X = rng.normal(size=shape)
    for t in range(1, shape[0]):
        D = rng.choice([-1.0, 1.0], size=shape[1:]) * rng.uniform(0.5, 1.5, size=shape[1:-1] + (1,))
        X[t] = X[t - 1] + D @ q.T
    return X


def conditioned_theta(rng: np.random.Generator, X: np.ndarray, ratio: float = MIN_QUERY_RATIO,
                      tries: int = 100_000) -> np.ndarray:
    """Unit-norm query columns that keep every frame difference visible.

    For two frames, each column ``v`` satisfies
    ``|dx . v| >= ratio * |dx|`` at every position, where ``dx`` is the
    frame-to-frame change of ``X``.  Temporal normalization then stays well
    away from its epsilon-dominated regime along every query channel.
    """
    dx = (X[1] - X[0]).reshape(-1, X.shape[-1])
    norms = np.linalg.norm(dx, axis=1)
    if np.any(norms == 0):
        raise ValueError("input has a position that does not change between frames")
    cols = []
    for _ in range(X.shape[-1]):
        for _ in range(tries):
            v = rng.normal(size=X.shape[-1])
            v /= np.linalg.norm(v)
            if np.all(np.abs(dx @ v) >= ratio * norms):
                cols.append(v)
                break
        else:
            raise ValueError("could not condition the query weights")
    return np.stack(cols, axis=1)


def ns_argmax(X: np.ndarray, p: NsParams) -> bytes:
    from .ns_block import ns_forward_cached

    cache = ns_forward_cached(X, p)[1]
    return b"" if cache.argmax is None else cache.argmax.tobytes()


def tiny_model_check(seed: int, tol: float, per_tensor: int = 6) -> GradReport:
    """End-to-end loss gradient of a [2,16,16,3] clip through a C_h=8 model."""
    rng = np.random.default_rng(seed + 101)
    cfg = ModelConfig(c_stem=4, c_low=6, c_high=8, c_dec=4, groups=2, kernel=1, depth=1, frames=2,
                      input_gain=1.0)
    model = init_model(cfg, seed, np.float64)
    for name in model.params:
        if "w_t" in name or name.startswith("head") or name.endswith("bias"):
            model.params[name] = rng.normal(0, 0.3, model.params[name].shape)
    clip = ClipBatch(rng.uniform(0, 1, (2, 16, 16, 3)),
                     (rng.uniform(0, 1, (2, 16, 16, 1)) > 0.5).astype(np.float64))
    X = _forward(clip.frames, model, keep=True)[1]["ns"][0].X
    model.params["pns.0.theta.weight"] = conditioned_theta(rng, X)
    _, grads = model_loss_and_grads(clip, model)
    pairs = []
    for name, arr in list(model.params.items()):
        index = np.sort(rng.choice(arr.size, min(per_tensor, arr.size), replace=False))

        def f(v, name=name, arr=arr):
            model.params[name] = v
            try:
                return model_loss(clip, model)
            finally:
                model.params[name] = arr

        def sig(v, name=name, arr=arr):
            model.params[name] = v
            try:
                return branch_signature(clip.frames, model)
            finally:
                model.params[name] = arr
        pairs.append(_check_tensor_fn(f, arr, grads[name], index=index, signature=sig))
    return _report("tiny_model_loss", pairs, tol)


def gradcheck_suite(seed: int = 0, tol: float = 1e-4) -> list[GradReport]:
    """Finite-difference checks of every backward pass, in double precision."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    rng = np.random.default_rng(seed)
    reports = []
    shape = (2, 4, 4, 8)

    # linear_embed
    X = rng.normal(size=shape)
    w = LinearWeights(rng.normal(size=(8, 6)), rng.normal(size=6))
    R = rng.normal(size=shape[:3] + (6,))
    gX, gw = linear_embed_backward(X, w, R)
    reports.append(_report("linear_embed", [
        _check_tensor_fn(lambda x: float(np.sum(R * linear_embed(x, w))), X, gX),
        _check_tensor_fn(lambda v: float(np.sum(R * linear_embed(X, LinearWeights(v, w.bias)))), w.weight, gw.weight),
        _check_tensor_fn(lambda v: float(np.sum(R * linear_embed(X, LinearWeights(w.weight, v)))), w.bias, gw.bias),
    ], tol))

    # layer_norm_temporal
    Q = rng.normal(size=(3, 4, 4, 4))
    Q = Q.mean(axis=0) + (Q - Q.mean(axis=0)) / Q.std(axis=0) * rng.uniform(0.5, 1.5, size=Q.shape[1:])
    R = rng.normal(size=Q.shape)
    reports.append(_report("layer_norm_temporal", [
        _check_tensor_fn(lambda x: float(np.sum(R * layer_norm_temporal(x))), Q,
                         layer_norm_temporal_backward(Q, R)),
    ], tol))

    # softmax_rows with a mask
    M = rng.normal(size=(6, 7))
    mask = rng.uniform(size=M.shape) > 0.3
    mask[:, 0] = True
    R = rng.normal(size=M.shape)
    A = softmax_rows(M, mask)
    reports.append(_report("softmax_rows", [
        _check_tensor_fn(lambda x: float(np.sum(R * softmax_rows(x, mask))), M, softmax_rows_backward(A, R)),
    ], tol))

    # relevance: w.r.t. normalized queries and the key map (through sampling)
    for k, d in ((1, 1), (2, 3)):
        Qh = rng.normal(size=shape[:3] + (4,))
        Kmap = rng.normal(size=Qh.shape)
        keys = sample_neighborhood(Kmap, k, d)
        A = relevance(Qh, keys, 4)
        R = rng.normal(size=A.shape)
        T, H, W, C = Qh.shape
        P = H * W
        S = A.shape[1]
        dlog = softmax_rows_backward(A.reshape(T, P, S), R.reshape(T, P, S)).transpose(1, 0, 2) / 2.0
        dq = (dlog @ keys.values).transpose(1, 0, 2).reshape(Qh.shape)
        q3 = Qh.reshape(T, P, C).transpose(1, 0, 2)
        dk = scatter_neighborhood(dlog.transpose(0, 2, 1) @ q3, Qh.shape, k, d)
        reports.append(_report(f"relevance_k{k}_d{d}", [
            _check_tensor_fn(lambda x: float(np.sum(R * relevance(x, keys, 4))), Qh, dq),
            _check_tensor_fn(lambda x: float(np.sum(R * relevance(Qh, sample_neighborhood(x, k, d), 4))), Kmap, dk),
        ], tol))

    # aggregate: w.r.t. affinity and the value map (through sampling)
    Vmap = rng.normal(size=shape[:3] + (4,))
    vals = sample_neighborhood(Vmap, 1, 1)
    logits = rng.normal(size=(2 * 16, vals.slots))
    aff = softmax_rows(logits, np.tile(vals.valid, (2, 1)))
    R = rng.normal(size=(aff.shape[0], 4))
    P = 16
    a3 = aff.reshape(2, P, -1).transpose(1, 0, 2)
    r3 = R.reshape(2, P, 4).transpose(1, 0, 2)
    d_aff = (r3 @ vals.values.transpose(0, 2, 1)).transpose(1, 0, 2).reshape(aff.shape)
    d_vmap = scatter_neighborhood(a3.transpose(0, 2, 1) @ r3, Vmap.shape, 1, 1)
    reports.append(_report("aggregate", [
        _check_tensor_fn(lambda x: float(np.sum(R * aggregate(x, vals))), aff, d_aff),
        _check_tensor_fn(lambda x: float(np.sum(R * aggregate(aff, sample_neighborhood(x, 1, 1)))), Vmap, d_vmap),
    ], tol))

    # soft-attention routing: gradient reaches only the first maximal column
    groups = [rng.uniform(size=(10, 5)) for _ in range(3)]
    stacked = np.concatenate(groups, axis=1)
    R = rng.normal(size=(10, 1))
    routed = np.zeros_like(stacked)
    routed[np.arange(10), stacked.argmax(axis=1)] = R[:, 0]
    reports.append(_report("soft_attention_map", [
        _check_tensor_fn(lambda x: float(np.sum(R * soft_attention_map(np.split(x, 3, axis=1)))), stacked, routed,
                         signature=lambda x: x.argmax(axis=1).tobytes()),
    ], tol))

    # full NS block: input and every weight, several configurations
    for n_groups, k in ((1, 1), (1, 2), (2, 1), (2, 2)):
        p = random_ns_params(rng, 8, n_groups, k)
        X = separated_frames(rng, p, shape)
        R = rng.normal(size=shape)
        reports.append(_report(f"ns_forward_N{n_groups}_k{k}", _ns_pairs(rng, X, p, R), tol))

    # bce_loss
    z = rng.normal(scale=3, size=(2, 4, 4, 1))
    y = (rng.uniform(size=z.shape) > 0.5).astype(np.float64)
    reports.append(_report("bce_loss", [
        _check_tensor_fn(lambda x: bce_loss(x, y)[0], z, bce_loss(z, y)[1]),
    ], tol))

    # decoder: refined high-level, low-level and every decoder weight
    reports.append(_decoder_report(rng, tol))

    reports.append(tiny_model_check(seed, tol))
    return reports


def _decoder_report(rng: np.random.Generator, tol: float) -> GradReport:
    c_r, c_l, c_d = 4, 3, 2
    params = {
        "dec1.weight": rng.normal(0, 0.4, (3, 3, c_r + c_l, c_l)),
        "dec1.bias": rng.normal(0, 0.1, c_l),
        "dec2.weight": rng.normal(0, 0.4, (3, 3, c_l, c_d)),
        "dec2.bias": rng.normal(0, 0.1, c_d),
        "head.weight": rng.normal(0, 0.4, (1, 1, c_d, 1)),
        "head.bias": rng.normal(0, 0.1, 1),
    }
    Xr = rng.normal(size=(2, 2, 2, c_r))
    Xl = rng.normal(size=(2, 4, 4, c_l))
    cache: dict = {}
    out = decoder_forward(Xr, Xl, params, cache)
    R = rng.normal(size=out.shape)
    grads: dict = {}
    g_r, g_l = decoder_backward(cache, params, R, grads)

    def sig_of(xr, xl, ps):
        c: dict = {}
        decoder_forward(xr, xl, ps, c)
        return np.packbits(c["pre1"] > 0).tobytes() + np.packbits(c["pre2"] > 0).tobytes()

    pairs = [
        _check_tensor_fn(lambda x: float(np.sum(R * decoder_forward(x, Xl, params))), Xr, g_r,
                         signature=lambda x: sig_of(x, Xl, params)),
        _check_tensor_fn(lambda x: float(np.sum(R * decoder_forward(Xr, x, params))), Xl, g_l,
                         signature=lambda x: sig_of(Xr, x, params)),
    ]
    for name in params:
        def f(v, name=name):
            return float(np.sum(R * decoder_forward(Xr, Xl, {**params, name: v})))

        def sig(v, name=name):
            return sig_of(Xr, Xl, {**params, name: v})
        pairs.append(_check_tensor_fn(f, params[name], grads[name], signature=sig))
    return _report("decoder", pairs, tol)


def write_reports_csv(path, reports: list[GradReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["op", "max_rel", "max_abs", "count", "passed"])
        for r in reports:
            w.writerow([r.op_name, f"{r.max_rel_error:.6e}", f"{r.max_abs_error:.6e}",
                        r.num_params_checked, int(r.passed)])
