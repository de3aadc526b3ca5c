"""Command-line entry point: ``oodgauge <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ..datagen import r_grid, ratio_grid, read_dataset_csv, write_dataset_csv
from ..model import load_checkpoint, save_checkpoint
from ..scoring import SCORERS, OdinParams
from .config import ExperimentConfig, read_config_file, write_config_file
from .data import build_data
from .evaluate import evaluate_ood, fit_md_stats
from .landscape import LandscapeSpec, render_landscape
from .results import format_summary, read_results, write_results
from .sweep import METHODS, run_grid
from .train import train_run

log = logging.getLogger("oodgauge")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag -> config key
_FLAG_KEYS = {
    "loss": "loss_kind", "ssl": "ssl_kind", "alpha": "alpha", "epochs": "epochs",
    "batch_size": "batch_size", "lr": "lr", "seed": "seed", "dataset": "dataset",
    "scale": "scale", "scorers": "scorers", "odin_temperature": "odin_temperature",
    "odin_epsilon": "odin_epsilon",
}


def _add_config_args(p):
    g = p.add_argument_group("experiment config (flags override --config)")
    g.add_argument("--config", type=Path, help="flat 'key = value' config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    g.add_argument("--loss", choices=("ce", "ovadm"))
    g.add_argument("--ssl", choices=("none", "simclr", "byol"))
    g.add_argument("--alpha", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--dataset", choices=("circle", "blobs"))
    g.add_argument("--scale", type=int, help="divide every dataset size by this (CI runs)")
    g.add_argument("--scorers", help=f"comma list from {','.join(SCORERS)}")
    g.add_argument("--odin-temperature", type=float)
    g.add_argument("--odin-epsilon", type=float)


def resolve_config(args) -> ExperimentConfig:
    flat = read_config_file(args.config) if args.config else {}
    for flag, key in _FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            flat[key] = str(v)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flat[k.strip()] = v.strip()
    try:
        return ExperimentConfig.from_flat(flat)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _methods(text):
    if text in (None, "all"):
        return METHODS
    out = []
    for item in text.split(","):
        loss, _, ssl = item.strip().partition("+")
        out.append((loss, ssl or "none"))
    return out


# subcommands


def cmd_gen(args, config):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = build_data(config)
    for name in ("train", "val", "test"):
        ds = getattr(data, name)
        write_dataset_csv(out / f"{name}.csv", ds.features, ds.labels)
    if config.dataset == "circle":
        for r in (_floats(args.r) if args.r else r_grid()):
            write_dataset_csv(out / f"ood_r{r:.1f}.csv", data.ood_ring(r))
    else:
        for lam in (_floats(args.ratio) if args.ratio else ratio_grid()):
            write_dataset_csv(out / f"mixed_{lam:.1f}.csv", data.mixed(lam))
    write_config_file(config, out / "config.txt")
    print(f"wrote datasets to {out}")


def cmd_train(args, config):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = build_data(config)
    model, history = train_run(config, data)
    save_checkpoint(model, out / "model.ckpt")
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "train_cls_loss", "val_accuracy"])
        w.writeheader()
        for row in history.rows():
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                        for k, v in row.items()})
    write_config_file(config, out / "config.txt")
    print(f"final val accuracy {history.val_accuracy[-1]:.4f}; checkpoint {out / 'model.ckpt'}")


def cmd_eval(args, config):
    model = load_checkpoint(args.checkpoint)
    ood = read_dataset_csv(args.ood)
    if not isinstance(ood, np.ndarray):
        ood = ood.features
    if args.id_test:
        id_test = read_dataset_csv(args.id_test, n_classes=model.n_classes, role="test")
    else:
        id_test = None
    need_data = id_test is None or ("md" in config.scorers and not args.train)
    data = build_data(config) if need_data else None
    if id_test is None:
        id_test = data.test
    stats = None
    if "md" in config.scorers:
        train = (read_dataset_csv(args.train, n_classes=model.n_classes, role="train")
                 if args.train else data.train)
        stats = fit_md_stats(model, train, config.md_lambda_reg)
    odin = OdinParams(config.odin_temperature, config.odin_epsilon)
    for scorer in config.scorers:
        a, acc = evaluate_ood(model, scorer, id_test, ood, stats, odin)
        print(f"{scorer}\tauroc={a:.6f}\tid_accuracy={acc:.6f}")


def _cmd_sweep(args, config, axis):
    want = "circle" if axis == "r" else "blobs"
    if args.dataset is None and config.dataset != want:
        config = config.replace(dataset=want)
    if config.dataset != want:
        raise UsageError(f"sweep-{axis} needs --dataset {want}")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [config.seed]
    grid = _floats(args.grid) if args.grid else None
    records = run_grid(config, _methods(args.methods), seeds, axis, grid)
    write_results(records, args.out, append=args.append)
    write_config_file(config, str(args.out) + ".config")
    print(format_summary(records))


def cmd_landscape(args, config):
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
    else:
        model, _ = train_run(config)
    stats = None
    if args.scorer == "md":
        stats = fit_md_stats(model, build_data(config).train, config.md_lambda_reg)
    spec = LandscapeSpec(args.extent, args.resolution, args.scorer)
    render_landscape(model, spec, args.out, stats,
                     OdinParams(config.odin_temperature, config.odin_epsilon))
    print(f"wrote {args.out}")


def cmd_report(args, config):
    records = []
    for path in args.results:
        records.extend(read_results(path))
    if not records:
        raise UsageError("no records found")
    by_axis = {}
    for r in records:
        by_axis.setdefault(r.axis, []).append(r)
    for axis, recs in by_axis.items():
        print(f"# mean AUROC over seeds, axis = {axis}")
        print(format_summary(recs))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oodgauge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="emit dataset CSVs")
    _add_config_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--r", help="comma list of distance factors (circle); default: full grid")
    p.add_argument("--ratio", help="comma list of mixing ratios (blobs); default: full grid")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model; write checkpoint and history")
    _add_config_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="AUROC of a checkpoint against an OOD CSV")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ood", required=True, help="OOD feature CSV")
    p.add_argument("--id-test", help="ID test CSV; default: regenerate from config")
    p.add_argument("--train", help="training CSV for Mahalanobis stats; default: regenerate")
    p.set_defaults(func=cmd_eval)

    for axis, name in (("r", "sweep-r"), ("mix", "sweep-mix")):
        p = sub.add_parser(name, help=f"AUROC sweep over the {axis} axis")
        _add_config_args(p)
        p.add_argument("--out", required=True, help="results CSV")
        p.add_argument("--append", action="store_true")
        p.add_argument("--seeds", help="comma list of seeds; default: --seed")
        p.add_argument("--methods", default="all",
                       help="'all' or comma list like ce,ovadm+simclr")
        p.add_argument("--grid", help="comma list overriding the default axis grid")
        p.set_defaults(func=lambda a, c, axis=axis: _cmd_sweep(a, c, axis))

    p = sub.add_parser("landscape", help="render a score landscape as PGM")
    _add_config_args(p)
    p.add_argument("--checkpoint", help="default: train from config")
    p.add_argument("--scorer", choices=SCORERS, default="md")
    p.add_argument("--extent", type=float, default=6.5)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("report", help="summarise results CSVs")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_report, config=None, set=[])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args) if args.command != "report" else None
        args.func(args, config)
    except UsageError as exc:
        print(f"oodgauge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"oodgauge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
