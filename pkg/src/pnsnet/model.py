"""Toy video segmentation network built around a progressive NS stack.

Layout::

    frames [T,H,W,3], standardized per frame and channel, times input_gain
      -> conv3x3/2 + relu (c_stem) -> conv3x3/2 + relu (c_low)  = low-level, stride 4
      -> conv3x3/2 + relu (c_high)                             = high-level, stride 8
    high-level -> R stacked NS blocks, plus the outer residual
    decoder: up x2, concat low-level, conv3x3 + relu (c_low)
             up x4, conv3x3 + relu (c_dec), conv1x1 -> logits [T,H,W,1]
"""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import ClipBatch
from .io import read_tensor, write_tensor
from .layers import conv2d, conv2d_backward, relu, relu_backward, upsample, upsample_backward
from .metrics import max_metric_sweep
from .ns_block import NsParams, ns_backward_cached, ns_forward_cached
from .tensor import DimensionError

__all__ = [
    "ModelConfig",
    "PnsStack",
    "ToyModel",
    "AdamState",
    "TrainConfig",
    "init_model",
    "pns_forward",
    "pns_backward",
    "model_forward",
    "model_loss",
    "model_loss_and_grads",
    "bce_loss",
    "sigmoid",
    "adam_step",
    "split_dataset",
    "train",
    "infer",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)

NS_NAMES = ("theta", "phi", "g", "w_t")


@dataclass
class ModelConfig:
    c_stem: int = 16
    c_low: int = 24
    c_high: int = 32
    c_dec: int = 8
    groups: int = 4
    kernel: int = 3
    depth: int = 2
    frames: int = 5
    soft_attention: bool = True
    input_gain: float = 16.0


@dataclass
class PnsStack:
    blocks: list[NsParams]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("a PNS stack needs at least one block")
        first = self.blocks[0]
        for b in self.blocks[1:]:
            if (b.channels, b.groups, b.kernel) != (first.channels, first.groups, first.kernel):
                raise DimensionError("all NS blocks in a stack must share C, N and k")

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @property
    def channels(self) -> int:
        return self.blocks[0].channels


@dataclass
class ToyModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    history: list[dict] = field(default_factory=list)

    def stack(self) -> PnsStack:
        cfg = self.config
        blocks = []
        for r in range(cfg.depth):
            arrays = {
                f"{n}.{part}": self.params[f"pns.{r}.{n}.{part}"]
                for n in NS_NAMES for part in ("weight", "bias")
            }
            blocks.append(NsParams.from_arrays(arrays, cfg.groups, cfg.kernel, cfg.soft_attention))
        return PnsStack(blocks)

    def astype(self, dtype) -> "ToyModel":
        return ToyModel(self.config, {k: v.astype(dtype) for k, v in self.params.items()}, list(self.history))


def _conv_init(rng, kh, kw, cin, cout, dtype):
    bound = np.sqrt(6.0 / (kh * kw * cin))
    w = rng.uniform(-bound, bound, size=(kh, kw, cin, cout)).astype(dtype)
    return w, np.zeros(cout, dtype=dtype)


def init_model(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> ToyModel:
    """He-uniform convolutions, fan-in uniform NS embeddings, zero ``w_t`` and head."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    layout = [
        ("enc1", 3, 3, 3, cfg.c_stem),
        ("enc2", 3, 3, cfg.c_stem, cfg.c_low),
        ("enc3", 3, 3, cfg.c_low, cfg.c_high),
    ]
    for name, kh, kw, cin, cout in layout:
        params[f"{name}.weight"], params[f"{name}.bias"] = _conv_init(rng, kh, kw, cin, cout, dtype)
    for r in range(cfg.depth):
        block = NsParams.init(cfg.c_high, cfg.groups, cfg.kernel, rng, dtype, cfg.soft_attention)
        for key, arr in block.arrays().items():
            params[f"pns.{r}.{key}"] = arr
    params["dec1.weight"], params["dec1.bias"] = _conv_init(rng, 3, 3, cfg.c_high + cfg.c_low, cfg.c_low, dtype)
    params["dec2.weight"], params["dec2.bias"] = _conv_init(rng, 3, 3, cfg.c_low, cfg.c_dec, dtype)
    params["head.weight"] = np.zeros((1, 1, cfg.c_dec, 1), dtype=dtype)
    params["head.bias"] = np.zeros(1, dtype=dtype)
    return ToyModel(cfg, params)


# -- progressive NS stack ----------------------------------------------------

def _pns_forward_cached(Xh: np.ndarray, stack: PnsStack):
    if Xh.ndim != 4 or Xh.shape[-1] != stack.channels:
        raise DimensionError(f"PNS input {Xh.shape} does not match stack width {stack.channels}")
    caches = []
    x = Xh
    for block in stack.blocks:
        x, c = ns_forward_cached(x, block)
        caches.append(c)
    return Xh + x, caches


def pns_forward(Xh: np.ndarray, stack: PnsStack) -> np.ndarray:
    """Run the stacked blocks and add the stack input back (outer residual)."""
    return _pns_forward_cached(Xh, stack)[0]


def _pns_backward_cached(caches, stack: PnsStack, grad_out: np.ndarray):
    g = grad_out
    grads = []
    for block, c in zip(reversed(stack.blocks), reversed(caches)):
        g, gp = ns_backward_cached(c, block, g)
        grads.append(gp)
    grads.reverse()
    return grad_out + g, grads


def pns_backward(Xh: np.ndarray, stack: PnsStack, grad_out: np.ndarray):
    """Return ``(grad_Xh, [grad NsParams per block])``."""
    _, caches = _pns_forward_cached(Xh, stack)
    return _pns_backward_cached(caches, stack, grad_out)


# -- full network ------------------------------------------------------------

def _check_clip(frames: np.ndarray) -> None:
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise DimensionError(f"clip frames must be [T,H,W,3], got {frames.shape}")
    if frames.shape[1] % 8 or frames.shape[2] % 8:
        raise DimensionError(f"clip size {frames.shape[1]}x{frames.shape[2]} is not divisible by 8")


def decoder_forward(Xr: np.ndarray, Xl: np.ndarray, params: dict, cache: dict | None = None) -> np.ndarray:
    """Two-stage decoder from refined high-level and low-level features to logits."""
    u1 = upsample(Xr, 2)
    if u1.shape[:3] != Xl.shape[:3]:
        raise DimensionError(f"upsampled high-level {u1.shape} does not align with low-level {Xl.shape}")
    cat = np.concatenate([u1, Xl], axis=-1)
    pre1, cols1 = conv2d(cat, params["dec1.weight"], params["dec1.bias"])
    d1 = relu(pre1)
    u2 = upsample(d1, 4)
    pre2, cols2 = conv2d(u2, params["dec2.weight"], params["dec2.bias"])
    d2 = relu(pre2)
    logits, cols3 = conv2d(d2, params["head.weight"], params["head.bias"])
    if cache is not None:
        cache.update(cat=cat.shape, c_r=Xr.shape[-1], pre1=pre1, cols1=cols1, u2=u2.shape,
                     pre2=pre2, cols2=cols2, d2=d2.shape, cols3=cols3)
    return logits


def decoder_backward(cache: dict, params: dict, grad_logits: np.ndarray, grads: dict):
    """Accumulate decoder parameter gradients; return ``(grad_Xr, grad_Xl)``."""
    g, grads["head.weight"], grads["head.bias"] = conv2d_backward(
        cache["d2"], cache["cols3"], params["head.weight"], 1, grad_logits)
    g = relu_backward(cache["pre2"], g)
    g, grads["dec2.weight"], grads["dec2.bias"] = conv2d_backward(
        cache["u2"], cache["cols2"], params["dec2.weight"], 1, g)
    g = upsample_backward(g, 4)
    g = relu_backward(cache["pre1"], g)
    g, grads["dec1.weight"], grads["dec1.bias"] = conv2d_backward(
        cache["cat"], cache["cols1"], params["dec1.weight"], 1, g)
    c_r = cache["c_r"]
    return upsample_backward(g[..., :c_r], 2), g[..., c_r:]


def standardize_frames(frames: np.ndarray, gain: float) -> np.ndarray:
    """Zero mean, unit deviation per frame and channel, then scaled by ``gain``."""
    mean = frames.mean(axis=(1, 2), keepdims=True)
    std = frames.std(axis=(1, 2), keepdims=True)
    return (frames - mean) * (gain / (std + 1e-3))


def _forward(frames: np.ndarray, model: ToyModel, keep: bool):
    _check_clip(frames)
    p = model.params
    cache: dict = {}
    dtype = p["enc1.weight"].dtype
    x = standardize_frames(frames.astype(dtype, copy=False), model.config.input_gain).astype(dtype, copy=False)
    acts = []
    for i, name in enumerate(("enc1", "enc2", "enc3")):
        pre, cols = conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=2)
        acts.append((x.shape, pre, cols))
        x = relu(pre)
        if i == 1:
            low = x
    high = x
    stack = model.stack()
    refined, ns_caches = _pns_forward_cached(high, stack)
    logits = decoder_forward(refined, low, p, cache if keep else None)
    if keep:
        cache.update(enc=acts, ns=ns_caches, stack=stack)
    return logits, cache


def model_forward(clip: ClipBatch | np.ndarray, model: ToyModel) -> np.ndarray:
    """Logits ``[T, H, W, 1]`` for a clip (or a bare ``[T, H, W, 3]`` frame array)."""
    frames = clip.frames if isinstance(clip, ClipBatch) else clip
    return _forward(frames, model, keep=False)[0]


def branch_signature(frames: np.ndarray, model: ToyModel) -> bytes:
    """Bytes identifying every rectifier pattern and soft-attention argmax.

    Two parameter settings with the same signature lie on the same smooth
    piece of the loss, which finite-difference checks rely on.
    """
    _, cache = _forward(frames, model, keep=True)
    parts = [np.packbits(pre > 0).tobytes() for _, pre, _ in cache["enc"]]
    parts += [np.packbits(cache[k] > 0).tobytes() for k in ("pre1", "pre2")]
    parts += [c.argmax.tobytes() for c in cache["ns"] if c.argmax is not None]
    return b"|".join(parts)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0, -z))


def bce_loss(logits: np.ndarray, masks: np.ndarray):
    """Mean binary cross-entropy on logits and its gradient."""
    if logits.shape != masks.shape:
        raise DimensionError(f"logits {logits.shape} and masks {masks.shape} differ")
    z = logits
    y = masks.astype(z.dtype, copy=False)
    per = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    loss = float(per.mean(dtype=np.float64))
    grad = (sigmoid(z) - y) / np.asarray(n, dtype=z.dtype)
    return loss, grad


def model_loss(clip: ClipBatch, model: ToyModel) -> float:
    return bce_loss(model_forward(clip, model), clip.masks)[0]


def model_loss_and_grads(clip: ClipBatch, model: ToyModel):
    """Loss and a gradient array for every entry of ``model.params``."""
    p = model.params
    logits, cache = _forward(clip.frames, model, keep=True)
    loss, g_logits = bce_loss(logits, clip.masks)
    grads: dict[str, np.ndarray] = {}
    g_ref, g_low = decoder_backward(cache, p, g_logits, grads)
    stack = cache["stack"]
    g_high, block_grads = _pns_backward_cached(cache["ns"], stack, g_ref)
    for r, gp in enumerate(block_grads):
        for key, arr in gp.arrays().items():
            grads[f"pns.{r}.{key}"] = arr
    g = g_high
    for i, name in reversed(list(enumerate(("enc1", "enc2", "enc3")))):
        x_shape, pre, cols = cache["enc"][i]
        if i == 1:
            g = g + g_low
        g = relu_backward(pre, g)
        g, grads[f"{name}.weight"], grads[f"{name}.bias"] = conv2d_backward(
            x_shape, cols, p[f"{name}.weight"], 2, g)
    return loss, grads


# -- optimisation ------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState):
    """One Adam update with bias correction and decoupled weight decay, in place."""
    b1, b2 = state.betas
    state.step += 1
    c1 = 1 - b1 ** state.step
    c2 = 1 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} is {g.shape}, parameter is {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        if state.weight_decay:
            p -= (state.lr * state.weight_decay) * p
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class TrainConfig:
    epochs: int = 2
    lr: float = 1e-4
    weight_decay: float = 1e-4
    seed: int = 0
    holdout: float = 0.125
    model: ModelConfig = field(default_factory=ModelConfig)


def split_dataset(dataset: list, holdout: float, seed: int):
    """Seeded split into ``(train, held_out)``; at least one clip on each side when possible."""
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_hold = int(round(n * holdout))
    if n > 1:
        n_hold = min(max(n_hold, 1), n - 1) if holdout > 0 else 0
    else:
        n_hold = 0
    held = [dataset[i] for i in sorted(order[:n_hold])]
    rest = [dataset[i] for i in sorted(order[n_hold:])]
    return rest, held


def evaluate(model: ToyModel, clips: list[ClipBatch]) -> float:
    """Mean per-clip max Dice."""
    if not clips:
        return float("nan")
    scores = [max_metric_sweep(infer(model, c)[..., 0], c.masks[..., 0]).max_dice for c in clips]
    return float(np.mean(scores))


def train(dataset: list[ClipBatch], cfg: TrainConfig | None = None, model: ToyModel | None = None) -> ToyModel:
    """Single-phase Adam training, one clip per step, seeded shuffling.

    ``model.history`` receives one ``{"epoch", "mean_loss", "holdout_dice"}``
    entry per epoch.
    """
    cfg = cfg or TrainConfig()
    if not dataset:
        raise ValueError("train needs a non-empty dataset")
    train_set, held = split_dataset(dataset, cfg.holdout, cfg.seed)
    if model is None:
        model = init_model(cfg.model, cfg.seed)
    state = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed + 1)
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for i in rng.permutation(len(train_set)):
            loss, grads = model_loss_and_grads(train_set[i], model)
            adam_step(model.params, grads, state)
            losses.append(loss)
        row = {"epoch": epoch, "mean_loss": float(np.mean(losses)), "holdout_dice": evaluate(model, held)}
        model.history.append(row)
        log.info("epoch %d loss %.5f holdout dice %.4f", epoch, row["mean_loss"], row["holdout_dice"])
    return model


def infer(model: ToyModel, clip: ClipBatch | np.ndarray) -> np.ndarray:
    return sigmoid(model_forward(clip, model))


# -- checkpoints ---------------------------------------------------------------

_MANIFEST_KEYS = {
    "C_stem": "c_stem", "C_l": "c_low", "C_h": "c_high", "C_dec": "c_dec",
    "N": "groups", "k": "kernel", "R": "depth", "T": "frames", "soft_attention": "soft_attention",
}


def save_checkpoint(directory, model: ToyModel) -> None:
    os.makedirs(directory, exist_ok=True)
    cfg = asdict(model.config)
    lines = [f"{key}={int(cfg[attr])}" for key, attr in _MANIFEST_KEYS.items()]
    lines.append(f"input_gain={model.config.input_gain!r}")
    for name, arr in model.params.items():
        write_tensor(os.path.join(directory, f"{name}.pnst"), arr)
        lines.append(f"param {name} {'x'.join(str(s) for s in arr.shape)}")
    with open(os.path.join(directory, "model.txt"), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(directory) -> ToyModel:
    hyper: dict = {}
    names: list[tuple[str, tuple]] = []
    with open(os.path.join(directory, "model.txt"), encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("param "):
                _, name, shape = line.split()
                names.append((name, tuple(int(s) for s in shape.split("x"))))
            else:
                key, _, value = line.partition("=")
                if key == "input_gain":
                    hyper["input_gain"] = float(value)
                else:
                    hyper[_MANIFEST_KEYS[key]] = int(value)
    hyper["soft_attention"] = bool(hyper.get("soft_attention", 1))
    cfg = ModelConfig(**hyper)
    params = {}
    for name, shape in names:
        arr = read_tensor(os.path.join(directory, f"{name}.pnst"))
        if arr.shape != shape:
            raise DimensionError(f"{name}: manifest shape {shape}, file shape {arr.shape}")
        params[name] = arr
    return ToyModel(cfg, params)
