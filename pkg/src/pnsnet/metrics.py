"""Segmentation metrics and the max-over-threshold sweep.

Degenerate cases: two empty masks score dice = iou = 1, and a ground truth
without negatives scores specificity 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DimensionError

__all__ = ["MetricResult", "dice", "iou", "specificity", "mae", "max_metric_sweep", "threshold_grid"]

DEFAULT_STEPS = 256


@dataclass
class MetricResult:
    max_dice: float
    max_spe: float
    max_iou: float
    mae: float
    tau_dice: float
    tau_spe: float
    tau_iou: float


def _check(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def dice(pred_bin, gt) -> float:
    pred_bin, gt = np.asarray(pred_bin, bool), np.asarray(gt, bool)
    _check(pred_bin, gt)
    denom = pred_bin.sum() + gt.sum()
    if denom == 0:
        return 1.0
    return float(2 * np.logical_and(pred_bin, gt).sum() / denom)


def iou(pred_bin, gt) -> float:
    pred_bin, gt = np.asarray(pred_bin, bool), np.asarray(gt, bool)
    _check(pred_bin, gt)
    union = np.logical_or(pred_bin, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred_bin, gt).sum() / union)


def specificity(pred_bin, gt) -> float:
    pred_bin, gt = np.asarray(pred_bin, bool), np.asarray(gt, bool)
    _check(pred_bin, gt)
    neg = ~gt
    n_neg = neg.sum()
    if n_neg == 0:
        return 1.0
    return float(np.logical_and(~pred_bin, neg).sum() / n_neg)


def mae(pred_prob, gt) -> float:
    pred_prob, gt = np.asarray(pred_prob, np.float64), np.asarray(gt, np.float64)
    _check(pred_prob, gt)
    return float(np.abs(pred_prob - gt).mean())


def threshold_grid(steps: int = DEFAULT_STEPS) -> np.ndarray:
    if steps < 2:
        raise ValueError(f"threshold sweep needs at least 2 steps, got {steps}")
    return np.linspace(0.0, 1.0, steps)


def _frame_counts(pred_prob: np.ndarray, gt: np.ndarray, taus: np.ndarray):
    """True/false positive counts per (threshold, frame)."""
    F = pred_prob.shape[0]
    p = pred_prob.reshape(F, -1)
    g = gt.reshape(F, -1).astype(bool)
    tp = np.empty((len(taus), F))
    fp = np.empty((len(taus), F))
    for i, tau in enumerate(taus):
        b = p >= tau
        tp[i] = (b & g).sum(axis=1)
        fp[i] = (b & ~g).sum(axis=1)
    return tp, fp, g.sum(axis=1).astype(float), (~g).sum(axis=1).astype(float)


def max_metric_sweep(pred_prob, gt, steps: int = DEFAULT_STEPS, thresholds=None) -> MetricResult:
    """Maximize frame-averaged dice, specificity and IoU over thresholds.

    ``pred_prob`` and ``gt`` are [T, ...] with the frame axis first (a 2-D
    map counts as a single frame).  Binarization is ``pred >= tau``.
    """
    pred_prob = np.asarray(pred_prob, np.float64)
    gt = np.asarray(gt)
    _check(pred_prob, gt)
    if pred_prob.ndim == 2:
        pred_prob, gt = pred_prob[None], gt[None]
    taus = threshold_grid(steps) if thresholds is None else np.asarray(thresholds, np.float64)
    tp, fp, pos, neg = _frame_counts(pred_prob, gt, taus)
    fn = pos - tp
    tn = neg - fp
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(2 * tp + fp + fn > 0, 2 * tp / (2 * tp + fp + fn), 1.0)
        j = np.where(tp + fp + fn > 0, tp / (tp + fp + fn), 1.0)
        s = np.where(neg > 0, tn / neg, 1.0)
    d, j, s = d.mean(axis=1), j.mean(axis=1), s.mean(axis=1)
    id_, ij, is_ = int(np.argmax(d)), int(np.argmax(j)), int(np.argmax(s))
    return MetricResult(
        max_dice=float(d[id_]),
        max_spe=float(s[is_]),
        max_iou=float(j[ij]),
        mae=mae(pred_prob, gt),
        tau_dice=float(taus[id_]),
        tau_spe=float(taus[is_]),
        tau_iou=float(taus[ij]),
    )
