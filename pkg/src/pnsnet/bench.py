"""Throughput of the constrained NS block against the dense oracle."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .gradcheck import ORACLE_CAP, OracleSizeError, dense_attention_oracle, random_ns_params
from .ns_block import ns_forward

MODES = ("constrained", "dense")


@dataclass
class BenchResult:
    mode: str
    shape: tuple
    times_ms: list[float]
    ms_mean: float
    ms_stddev: float
    fps: float

    def csv_row(self) -> str:
        shape = "x".join(str(s) for s in self.shape)
        return f"{self.mode},{shape},{self.ms_mean:.4f},{self.ms_stddev:.4f},{self.fps:.3f}"


def bench_mode(mode: str, T: int, H: int, W: int, C: int, N: int = 4, k: int = 3,
               iters: int = 20, seed: int = 0) -> BenchResult:
    """Time ``iters`` forward passes after one untimed warm-up.

    The dense oracle always runs with a single attention group.
    """
    if mode not in MODES:
        raise ValueError(f"unknown bench mode {mode!r}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    if mode == "dense":
        if T * H * W * C >= ORACLE_CAP:
            raise OracleSizeError(f"dense oracle refuses T*H*W*C = {T * H * W * C} >= {ORACLE_CAP}")
        p = random_ns_params(rng, C, 1, k)
        X = rng.normal(size=(T, H, W, C))
        fn = dense_attention_oracle
    else:
        p = random_ns_params(rng, C, N, k).astype(np.float32)
        X = rng.normal(size=(T, H, W, C)).astype(np.float32)
        fn = ns_forward
    fn(X, p)
    times = []
    for _ in range(iters):
        start = time.perf_counter()
        fn(X, p)
        times.append((time.perf_counter() - start) * 1e3)
    total_s = sum(times) / 1e3
    return BenchResult(mode, (T, H, W, C), times, float(np.mean(times)), float(np.std(times)),
                       T * iters / total_s if total_s > 0 else float("inf"))


def speedup_trend(sizes=(4, 6, 8), T: int = 2, C: int = 8, N: int = 4, k: int = 3,
                  iters: int = 3, seed: int = 0):
    """``(H*W, dense ms / constrained ms)`` for square frames of each side length."""
    out = []
    for s in sizes:
        c = bench_mode("constrained", T, s, s, C, N=N, k=k, iters=iters, seed=seed)
        d = bench_mode("dense", T, s, s, C, k=k, iters=iters, seed=seed)
        out.append((s * s, d.ms_mean / c.ms_mean))
    return out
