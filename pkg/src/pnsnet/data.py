"""Synthetic moving-blob video clips used in place of colonoscopy footage."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ClipBatch", "SynthConfig", "gen_synth_dataset"]


@dataclass
class ClipBatch:
    """A clip of ``T`` frames ``[T, H, W, 3]`` in [0, 1] and masks ``[T, H, W, 1]``."""

    frames: np.ndarray
    masks: np.ndarray

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError(f"frames must be [T,H,W,3], got {self.frames.shape}")
        if self.masks.shape != self.frames.shape[:3] + (1,):
            raise ValueError(f"masks shape {self.masks.shape} does not match frames {self.frames.shape}")
        _, h, w, _ = self.frames.shape
        if h % 8 or w % 8:
            raise ValueError(f"frame size {h}x{w} must be divisible by 8")

    @property
    def frames_count(self) -> int:
        return self.frames.shape[0]


@dataclass
class SynthConfig:
    seed: int = 0
    clips: int = 64
    frames: int = 5
    height: int = 64
    width: int = 112
    radius: tuple[float, float] = (0.14, 0.26)
    velocity: tuple[float, float] = (0.5, 3.0)
    noise_sigma: float = 0.03
    texture: float = 0.08
    fg_color: tuple[float, float, float] = field(default=(0.85, 0.55, 0.45))
    bg_color: tuple[float, float, float] = field(default=(0.45, 0.25, 0.2))
    wobble: float = 0.12

    def __post_init__(self):
        if self.height % 8 or self.width % 8:
            raise ValueError(f"frame size {self.height}x{self.width} must be divisible by 8")
        lo, hi = self.radius
        if not 0 < lo <= hi < 0.5:
            raise ValueError(f"radius range {self.radius} must lie in (0, 0.5)")
        if self.frames < 1 or self.clips < 1:
            raise ValueError("frames and clips must be >= 1")


def _reflect(pos: float, lo: float, hi: float) -> tuple[float, int]:
    """Fold ``pos`` back into [lo, hi]; returns the position and a sign flip."""
    span = hi - lo
    if span <= 0:
        return lo, 1
    u = (pos - lo) % (2 * span)
    if u <= span:
        return lo + u, 1
    return lo + 2 * span - u, -1


def _texture(rng: np.random.Generator, h: int, w: int, amplitude: float) -> np.ndarray:
    if amplitude == 0:
        return np.zeros((h, w))
    yy, xx = np.mgrid[0:h, 0:w]
    tex = np.zeros((h, w))
    for _ in range(4):
        fy, fx = rng.uniform(0.5, 3.0, size=2) * 2 * np.pi / np.array([h, w])
        phase = rng.uniform(0, 2 * np.pi)
        tex += np.sin(fy * yy + fx * xx + phase)
    return amplitude * tex / 4


def _one_clip(rng: np.random.Generator, cfg: SynthConfig) -> ClipBatch:
    T, H, W = cfg.frames, cfg.height, cfg.width
    s = min(H, W)
    r = rng.uniform(*cfg.radius) * s
    aspect = rng.uniform(0.8, 1.25)
    ry, rx = r / np.sqrt(aspect), r * np.sqrt(aspect)
    angle = rng.uniform(0, np.pi)
    reach = max(ry, rx) * (1 + cfg.wobble)
    lo_y, hi_y = reach, H - 1 - reach
    lo_x, hi_x = reach, W - 1 - reach
    cy = rng.uniform(min(lo_y, hi_y), max(lo_y, hi_y))
    cx = rng.uniform(min(lo_x, hi_x), max(lo_x, hi_x))
    speed = rng.uniform(*cfg.velocity)
    heading = rng.uniform(0, 2 * np.pi)
    vy, vx = speed * np.sin(heading), speed * np.cos(heading)
    # low-frequency radial deformation, drifting per frame
    amps = rng.uniform(0, cfg.wobble / 2, size=2)
    phases = rng.uniform(0, 2 * np.pi, size=2)
    drift = rng.uniform(-0.3, 0.3, size=2)
    tex = _texture(rng, H, W, cfg.texture)

    fg = np.asarray(cfg.fg_color)
    bg = np.asarray(cfg.bg_color)
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    frames = np.empty((T, H, W, 3))
    masks = np.empty((T, H, W, 1))
    for t in range(T):
        py, sy = _reflect(cy + vy * t, min(lo_y, hi_y), max(lo_y, hi_y))
        px, sx = _reflect(cx + vx * t, min(lo_x, hi_x), max(lo_x, hi_x))
        dy, dx = yy - py, xx - px
        ca, sa = np.cos(angle), np.sin(angle)
        u = ca * dx + sa * dy
        v = -sa * dx + ca * dy
        theta = np.arctan2(v * rx, u * ry)
        rho = np.hypot(u / rx, v / ry)
        bound = 1.0
        for m, (amp, ph, dr) in enumerate(zip(amps, phases, drift), start=2):
            bound = bound + amp * np.cos(m * theta + ph + dr * t)
        inside = rho <= bound
        img = np.where(inside[..., None], fg, bg + tex[..., None])
        if cfg.noise_sigma > 0:
            img = img + rng.normal(0, cfg.noise_sigma, size=img.shape)
        frames[t] = np.clip(img, 0, 1) if (cfg.noise_sigma > 0 or cfg.texture > 0) else img
        masks[t, ..., 0] = inside
    return ClipBatch(frames.astype(np.float32), masks.astype(np.float32))


def gen_synth_dataset(cfg: SynthConfig) -> list[ClipBatch]:
    """Generate ``cfg.clips`` clips; identical configs give identical arrays."""
    rng = np.random.default_rng(cfg.seed)
    return [_one_clip(rng, cfg) for _ in range(cfg.clips)]
