"""Ablation sweeps over the attention-group count, stack depth and soft-attention."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

from .data import ClipBatch
from .model import TrainConfig, train

log = logging.getLogger(__name__)


@dataclass
class AblationRow:
    variant: str
    groups: int
    depth: int
    soft_attention: bool
    mean_loss: float
    holdout_dice: float


def _run(variant: str, dataset: list[ClipBatch], cfg: TrainConfig, seen: dict) -> AblationRow:
    m = cfg.model
    key = (m.groups, m.depth, m.soft_attention)
    if key not in seen:
        last = train(dataset, cfg).history[-1]
        seen[key] = (last["mean_loss"], last["holdout_dice"])
    loss, dice = seen[key]
    return AblationRow(variant, m.groups, m.depth, m.soft_attention, loss, dice)


def ablation_sweep(dataset: list[ClipBatch], base: TrainConfig, groups=(1, 2, 4, 8), depths=(1, 2, 3),
                   soft_attention: bool = True) -> list[AblationRow]:
    """Train one model per setting; every run shares the data split and seed.

    Settings that coincide (the base model appears on every axis) are
    trained once and reported under each name.
    """
    rows: list[AblationRow] = []
    seen: dict = {}
    for n in groups:
        rows.append(_run(f"N={n}", dataset, replace(base, model=replace(base.model, groups=n)), seen))
    for r in depths:
        rows.append(_run(f"R={r}", dataset, replace(base, model=replace(base.model, depth=r)), seen))
    if soft_attention:
        for on in (True, False):
            name = f"soft_attention={'on' if on else 'off'}"
            rows.append(_run(name, dataset, replace(base, model=replace(base.model, soft_attention=on)), seen))
        log.info("soft-attention on minus off, held-out dice: %+.4f", soft_attention_delta(rows))
    return rows


def soft_attention_delta(rows: list[AblationRow]) -> float:
    """Held-out Dice with soft-attention minus without."""
    on = next(r for r in rows if r.variant == "soft_attention=on")
    off = next(r for r in rows if r.variant == "soft_attention=off")
    return on.holdout_dice - off.holdout_dice


def write_ablation_csv(path, rows: list[AblationRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "N", "R", "soft_attention", "mean_loss", "holdout_dice"])
        for r in rows:
            w.writerow([r.variant, r.groups, r.depth, int(r.soft_attention), f"{r.mean_loss:.6f}", f"{r.holdout_dice:.6f}"])
