"""Command line entry point: ``pnsnet <subcommand> [flags]``.

Exit codes are shared by every subcommand: 0 success, 1 a check failed,
2 an I/O or argument error.
"""
from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import sys
from contextlib import nullcontext

import numpy as np

from .data import ClipBatch, SynthConfig, gen_synth_dataset
from .io import FormatError, read_mask_pgm, read_tensor, write_mask_pgm, write_tensor

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
ORACLE_TOL = 1e-5

log = logging.getLogger("pnsnet")


class CliError(Exception):
    """I/O or argument problem; reported with exit code 2."""


def _thread_limit():
    value = os.environ.get("PNS_THREADS")
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    try:
        n = int(value)
    except ValueError:
        raise CliError(f"PNS_THREADS must be an integer, got {value!r}") from None
    return threadpool_limits(limits=max(1, n))


def _print_config(name: str, args: argparse.Namespace) -> None:
    items = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    print(f"[{name}] " + " ".join(f"{k}={v}" for k, v in items.items()), flush=True)


def max_rel_diff(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Largest ``|a - b| / max(|a|, |b|, floor)`` over all elements."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


# -- clip directory layout ----------------------------------------------------

def clip_dirs(root) -> list[str]:
    dirs = sorted(d for d in glob.glob(os.path.join(root, "clip_*")) if os.path.isdir(d))
    if not dirs:
        raise CliError(f"no clip_* directories under {root}")
    return dirs


def write_clip(directory, clip: ClipBatch) -> None:
    os.makedirs(directory, exist_ok=True)
    for t in range(clip.frames.shape[0]):
        write_tensor(os.path.join(directory, f"frame_{t:02d}.pnst"), clip.frames[t])
        write_mask_pgm(os.path.join(directory, f"mask_{t:02d}.pgm"), clip.masks[t])


def read_masks(directory) -> np.ndarray:
    paths = sorted(glob.glob(os.path.join(directory, "mask_*.pgm")))
    if not paths:
        raise CliError(f"no mask_*.pgm files in {directory}")
    return np.stack([read_mask_pgm(p) for p in paths])


def read_clip(directory) -> ClipBatch:
    paths = sorted(glob.glob(os.path.join(directory, "frame_*.pnst")))
    if not paths:
        raise CliError(f"no frame_*.pnst files in {directory}")
    frames = np.stack([read_tensor(p) for p in paths]).astype(np.float32)
    masks = read_masks(directory).astype(np.float32)[..., None]
    if masks.shape[:3] != frames.shape[:3]:
        raise CliError(f"{directory}: {len(paths)} frames of {frames.shape[1:3]} "
                       f"but masks are {masks.shape[:3]}")
    return ClipBatch(frames, masks)


# -- subcommands ----------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    from .gradcheck import gradcheck_suite, write_reports_csv

    out_dir = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        raise CliError(f"cannot write {args.out}")
    reports = gradcheck_suite(args.seed, args.tol)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.op_name:28s} rel={r.max_rel_error:.3e} abs={r.max_abs_error:.3e} n={r.num_params_checked}")
    try:
        write_reports_csv(args.out, reports)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_oracle_check(args) -> int:
    from .gradcheck import ORACLE_CAP, dense_attention_oracle, random_ns_params
    from .ns_block import ns_forward

    size = args.t * args.h * args.w * args.c
    if size >= ORACLE_CAP:
        raise CliError(f"oracle size cap exceeded: T*H*W*C = {size} >= {ORACLE_CAP}")
    k = args.k
    if 2 * k + 1 < 2 * max(args.h, args.w):
        k = max(args.h, args.w)
        print(f"warning: window 2k+1={2 * args.k + 1} does not cover the frame; using k={k}")
    rng = np.random.default_rng(args.seed)
    p = random_ns_params(rng, args.c, 1, k)
    X = rng.normal(size=(args.t, args.h, args.w, args.c))
    diff = max_rel_diff(ns_forward(X, p), dense_attention_oracle(X, p))
    ok = diff <= ORACLE_TOL
    print(f"max_rel_diff={diff:.6e} tol={ORACLE_TOL:g} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    from .bench import bench_mode
    from .gradcheck import OracleSizeError

    modes = ("constrained", "dense") if args.mode == "both" else (args.mode,)
    rows = []
    for mode in modes:
        try:
            res = bench_mode(mode, args.t, args.h, args.w, args.c, args.n, args.k, args.iters)
        except OracleSizeError as exc:
            raise CliError(str(exc)) from exc
        for i, ms in enumerate(res.times_ms):
            print(f"{mode} iter {i} {ms:.3f} ms")
        print(f"{mode} mean {res.ms_mean:.3f} ms, {res.fps:.2f} fps")
        rows.append(res.csv_row())
    print("mode,shape,ms_mean,ms_stddev,fps")
    for row in rows:
        print(row)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(seed=args.seed, clips=args.clips, frames=args.t, height=args.h, width=args.w,
                      noise_sigma=args.noise, texture=args.texture)
    for i, clip in enumerate(gen_synth_dataset(cfg)):
        write_clip(os.path.join(args.out, f"clip_{i:04d}"), clip)
    print(f"wrote {cfg.clips} clips to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .model import ModelConfig, TrainConfig, save_checkpoint, train

    dataset = [read_clip(d) for d in clip_dirs(args.data)]
    mcfg = ModelConfig(groups=args.n, kernel=args.k, depth=args.r, frames=dataset[0].frames.shape[0],
                       soft_attention=not args.no_soft_attention)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, weight_decay=args.wd, seed=args.seed,
                      holdout=args.holdout, model=mcfg)
    model = train(dataset, cfg)
    save_checkpoint(args.out, model)
    log_path = args.log or os.path.join(args.out, "train_log.csv")
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "holdout_dice"])
        for row in model.history:
            w.writerow([row["epoch"], f"{row['mean_loss']:.6f}", f"{row['holdout_dice']:.6f}"])
            print(f"epoch {row['epoch']} loss {row['mean_loss']:.5f} holdout_dice {row['holdout_dice']:.4f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    from .model import infer, load_checkpoint

    try:
        model = load_checkpoint(args.model)
    except (OSError, KeyError, ValueError) as exc:
        raise CliError(f"cannot load checkpoint {args.model}: {exc}") from exc
    for d in clip_dirs(args.data):
        clip = read_clip(d)
        prob = infer(model, clip)
        out = os.path.join(args.out, os.path.basename(d))
        os.makedirs(out, exist_ok=True)
        write_tensor(os.path.join(out, "prob.pnst"), prob.astype(np.float32))
        for t in range(prob.shape[0]):
            write_mask_pgm(os.path.join(out, f"mask_{t:02d}.pgm"), prob[t] >= args.threshold)
    print(f"wrote predictions to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import max_metric_sweep

    rows = []
    for gdir in clip_dirs(args.gt):
        name = os.path.basename(gdir)
        pdir = os.path.join(args.pred, name)
        gt = read_masks(gdir)
        prob_path = os.path.join(pdir, "prob.pnst")
        if os.path.exists(prob_path):
            pred = read_tensor(prob_path)
            pred = pred[..., 0] if pred.ndim == 4 else pred
        elif os.path.isdir(pdir):
            pred = read_masks(pdir).astype(np.float64)
        else:
            raise CliError(f"missing prediction directory {pdir}")
        if pred.shape != gt.shape:
            raise CliError(f"{pdir}: prediction shape {pred.shape} does not match ground truth {gt.shape}")
        m = max_metric_sweep(pred, gt, steps=args.steps)
        rows.append([name, m.max_dice, m.max_spe, m.max_iou, m.mae, m.tau_dice])
        print(f"{name} max_dice={m.max_dice:.4f} max_spe={m.max_spe:.4f} max_iou={m.max_iou:.4f} mae={m.mae:.4f}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video", "max_dice", "max_spe", "max_iou", "mae", "argmax_tau_dice"])
        for r in rows:
            w.writerow([r[0]] + [f"{v:.6f}" for v in r[1:]])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnsnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", default="gradcheck.csv")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("oracle-check", help="constrained block vs dense all-pairs oracle")
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--c", type=int, default=8)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("bench", help="constrained vs dense throughput")
    p.add_argument("--t", type=int, default=5)
    p.add_argument("--h", type=int, default=32)
    p.add_argument("--w", type=int, default=56)
    p.add_argument("--c", type=int, default=32)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--mode", choices=("constrained", "dense", "both"), default="constrained")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic clip dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=int, default=5)
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=112)
    p.add_argument("--noise", type=float, default=SynthConfig.noise_sigma)
    p.add_argument("--texture", type=float, default=SynthConfig.texture)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the toy model on a clip directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--wd", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.125)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--no-soft-attention", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="write probability maps and masks for every clip")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="metric CSV from prediction and ground-truth directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--steps", type=int, default=256)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    _print_config(args.command, args)
    try:
        with _thread_limit():
            return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
