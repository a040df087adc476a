"""Command-line surface.

Subcommands: gen-data, train, eval, sweep, grad-check. All accept
``--config`` (INI file, see config.py), ``--seed`` (overrides every seed
in the config), and ``--out`` (output directory). Exit codes: 0 success,
1 validation/usage error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .checks import run_gradient_suite
from .config import FullConfig, build_dataset, build_split, load_config
from .data import save_features
from .errors import NumericError, OsrkitError, UsageError
from .evaluate import evaluate, write_oscr_csv, write_roc_csv
from .model import load_checkpoint, save_checkpoint
from .numerics import Metric
from .train import (
    cartesian_cells,
    gap_threshold_cells,
    margin_metric_cells,
    sweep,
    train,
    weight_cells,
    write_history_csv,
    write_sweep_csv,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse from exiting with its own code
        raise UsageError(message)


def _load(args) -> FullConfig:
    if not args.config:
        raise UsageError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = FullConfig(
            model=replace(cfg.model, seed=args.seed),
            loss=cfg.loss,
            train=replace(cfg.train, model=replace(cfg.model, seed=args.seed), seed=args.seed),
            data=replace(cfg.data, seed=args.seed),
        )
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_data(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    dataset = build_dataset(cfg.data)
    path = out / ("dataset.csv" if args.csv else "dataset.ossf")
    save_features(path, dataset)
    print(f"wrote {len(dataset)} samples x {dataset.inputs.shape[1]} dims to {path}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    split = build_split(cfg.data)
    embedder, bank, history = train(split, cfg.train)
    ckpt = out / "model.osrp"
    save_checkpoint(ckpt, embedder, bank)
    write_history_csv(out / "history.csv", history)
    report = evaluate(embedder, bank, split, cfg.train.loss)
    print(f"checkpoint: {ckpt}")
    print(f"history:    {out / 'history.csv'}")
    print(
        f"acc={report.closed_accuracy:.4f} auroc={report.auroc:.4f} oscr={report.oscr:.4f}"
    )
    return 0


def _cmd_eval(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    split = build_split(cfg.data)
    embedder, bank = load_checkpoint(args.checkpoint)
    report = evaluate(embedder, bank, split, cfg.loss)
    write_roc_csv(out / "roc.csv", report.roc_curve)
    write_oscr_csv(out / "oscr.csv", report.oscr_curve)
    summary = {
        "closed_accuracy": report.closed_accuracy,
        "auroc": report.auroc,
        "oscr": report.oscr,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    return 0


def _parse_param_values(raw: str):
    name, _, values = raw.partition("=")
    if not values:
        raise UsageError(f"--param expects name=v1,v2,... got {raw!r}")
    parsed = []
    for v in values.split(","):
        v = v.strip()
        if name.endswith("_metric"):
            parsed.append(Metric(v.lower()))
        else:
            try:
                parsed.append(int(v) if v.isdigit() else float(v))
            except ValueError:
                parsed.append(v)
    return name, parsed


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    split = build_split(cfg.data)
    if args.grid == "gap-threshold":
        cells = gap_threshold_cells()
    elif args.grid == "weights":
        cells = weight_cells()
    elif args.grid == "margin-metric":
        cells = margin_metric_cells()
    elif args.grid == "custom":
        if not args.param:
            raise UsageError("--grid custom requires at least one --param")
        grid = dict(_parse_param_values(p) for p in args.param)
        cells = cartesian_cells(grid)
    else:
        raise UsageError(f"unknown grid {args.grid!r}")
    rows = sweep(cfg.train, cells, split)
    path = out / "sweep.csv"
    write_sweep_csv(path, rows)
    failed = sum(1 for r in rows if r.error is not None)
    print(f"wrote {len(rows)} rows to {path}" + (f" ({failed} failed)" if failed else ""))
    return 0


def _cmd_grad_check(args) -> int:
    results = run_gradient_suite(seed=args.seed or 0, instances=args.instances)
    worst_failed = False
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name:28s} max_rel_err={r.max_error:.3e} (tol {r.tolerance:g})")
        worst_failed = worst_failed or not r.passed
    if worst_failed:
        raise NumericError("gradient check failed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="osrkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    common(p)
    p.add_argument("--csv", action="store_true", help="write CSV instead of binary")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a model, write checkpoint + history")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint, write report + curves")
    common(p)
    p.add_argument("--checkpoint", required=True, help="OSRP checkpoint path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="train/evaluate a parameter grid, write CSV")
    common(p)
    p.add_argument(
        "--grid",
        default="gap-threshold",
        choices=["gap-threshold", "weights", "margin-metric", "custom"],
    )
    p.add_argument("--param", action="append", help="custom grid: name=v1,v2,...")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("grad-check", help="finite-difference check of all gradients")
    common(p)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except OsrkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
