"""Command-line entry point: ``mixbayes <subcommand> [options]``.

Every subcommand accepts ``--config`` (JSON), ``--seed``, ``--scale`` and
``--out``. The exit status is 0 exactly when every requested method ran.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .datasets import DatasetSpec, generate
from .estimator import estimate, prepare
from .io import save_model, write_signals
from .rng import ALGORITHM
from .train_supervised import TrainConfig, train
from .train_unsupervised import fit_unsupervised
from .wavelets import WaveletBasis

log = logging.getLogger("mixbayes")

BASELINE_KEYS = ("C", "D", "E", "F", "G", "H", "I", "J")


def _load_json(path):
    return json.loads(Path(path).read_text()) if path else {}


def _experiment_config(args, methods=None) -> harness.ExperimentConfig:
    """Config from --config if given, else the table preset for --dataset/--scale."""
    raw = _load_json(args.config)
    if raw:
        if "dataset" not in raw:
            raise harness.ConfigurationError("config needs a 'dataset' object")
        if args.seed is not None:
            raw["seed"] = args.seed
            raw["dataset"] = {**raw["dataset"], "seed": args.seed}
        if methods is not None:
            raw["methods"] = list(methods)
        return harness.ExperimentConfig.from_dict(raw)
    seed = 0 if args.seed is None else args.seed
    table = 3 if getattr(args, "problem", "denoising") == "deblurring" else 1
    cfg = harness.table_configs(table, args.scale, seed)[args.dataset - 1]
    return replace(cfg, methods=tuple(methods or cfg.methods))


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> int:
    raw = _load_json(args.config)
    if raw:
        spec = DatasetSpec(**raw.get("dataset", raw))
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    else:
        spec = harness.dataset_specs(args.scale, 0 if args.seed is None else args.seed)[args.dataset - 1]
    data = generate(spec)
    out = _out_dir(args, "data")
    meta = {"dataset_id": spec.dataset_id, "seed": spec.seed, "spec": spec.to_dict(), "rng": ALGORITHM}
    if spec.variant != "gmm":
        meta["wavelet"] = WaveletBasis(levels=5).to_dict()
    for split, X, lab in (("train", data.X_train, data.labels_train), ("test", data.X_test, data.labels_test)):
        write_signals(out / f"{split}.csv", X, {**meta, "split": split, "labels": f"{split}_labels.csv"})
        (out / f"{split}_labels.csv").write_text("label\n" + "".join(f"{int(v)}\n" for v in lab))
    if data.model is not None:
        save_model(out / "true_model.gmxb", data.model, {"dataset_id": spec.dataset_id})
    print(f"wrote {spec.n_train} train and {spec.n_test} test signals to {out}")
    return 0


def _test_mse(ctx, prep) -> float:
    return float(np.mean(harness.relative_mse(ctx.Xt, estimate(prep, ctx.Yt))) * 100.0)


def cmd_fit_unsupervised(args) -> int:
    cfg = _experiment_config(args, methods=("B",))
    ctx = harness.ExperimentContext(cfg)
    prep = fit_unsupervised(ctx.X, ctx.A, ctx.noise, ctx.clustering_config(), labels=ctx.labels)
    out = _out_dir(args, "unsupervised")
    save_model(out / "model.gmxb", prep.model, {"method": "B", "sigma": ctx.sigma})
    (out / "labels.csv").write_text("label\n" + "".join(f"{int(v)}\n" for v in ctx.labels))
    summary = {"sigma": ctx.sigma, "components": prep.L, "test_mean_rel_mse_percent": _test_mse(ctx, prep)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_train_supervised(args) -> int:
    cfg = _experiment_config(args, methods=("A",))
    ctx = harness.ExperimentContext(cfg)
    init = fit_unsupervised(ctx.X, ctx.A, ctx.noise, ctx.clustering_config(), labels=ctx.labels).model
    tc = TrainConfig(epochs=args.epochs or cfg.supervised_epochs, batch_size=cfg.supervised_batch,
                     lr=args.lr or cfg.supervised_lr, rank=ctx.s or min(ctx.n, 32), seed=cfg.seed)
    res = train((ctx.X, ctx.Y), ctx.A, ctx.noise, tc, init=init)
    out = _out_dir(args, "supervised")
    save_model(out / "model.gmxb", res.model, {"method": "A", "sigma": ctx.sigma})
    (out / "loss_history.csv").write_text(res.history_csv())
    prep = prepare(res.model, ctx.A, ctx.noise)
    summary = {"sigma": ctx.sigma, "epochs": tc.epochs, "test_mean_rel_mse_percent": _test_mse(ctx, prep)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _report_exit(report: harness.MetricsReport) -> int:
    for key, r in report.methods.items():
        if r.status == "ok":
            print(f"{key:>6}  {r.name:<34} {r.mean_percent:.6g} %")
        else:
            print(f"{key:>6}  {r.name:<34} FAILED: {r.diagnostics.get('error')}")
    return 0 if report.ok else 1


def cmd_run_baseline(args) -> int:
    methods = tuple(args.method)
    bad = [m for m in methods if m not in BASELINE_KEYS]
    if bad:
        raise harness.ConfigurationError(f"not baseline methods: {bad} (choose from {', '.join(BASELINE_KEYS)})")
    cfg = _experiment_config(args, methods=methods)
    report = harness.run_experiment(cfg, _out_dir(args, "baseline"))
    return _report_exit(report)


def cmd_run_experiment(args) -> int:
    cfg = _experiment_config(args, methods=tuple(args.methods) if args.methods else None)
    report = harness.run_experiment(cfg, _out_dir(args, "experiment"))
    return _report_exit(report)


def cmd_reproduce_table(args) -> int:
    seed = 0 if args.seed is None else args.seed
    methods = _load_json(args.config).get("methods") if args.config else None
    csv, reports = harness.reproduce_table(args.table, args.scale, seed, _out_dir(args, f"table{args.table}"), methods)
    print(csv, end="")
    return 0 if all(r.ok for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixbayes", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset=True):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--scale", choices=("mini", "paper"), default="mini")
        sp.add_argument("--out", help="output directory")
        if dataset:
            sp.add_argument("--dataset", type=int, choices=(1, 2, 3), default=1)
            sp.add_argument("--problem", choices=("denoising", "deblurring"), default="denoising")

    sp = sub.add_parser("gen-data", help="write train/test signals as CSV + JSON")
    common(sp)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("fit-unsupervised", help="cluster, fit moments, save the model")
    common(sp)
    sp.set_defaults(func=cmd_fit_unsupervised)

    sp = sub.add_parser("train-supervised", help="train the estimator on (signal, observation) pairs")
    common(sp)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.set_defaults(func=cmd_train_supervised)

    sp = sub.add_parser("run-baseline", help="run baseline methods C-J")
    common(sp)
    sp.add_argument("--method", nargs="+", required=True, choices=BASELINE_KEYS)
    sp.set_defaults(func=cmd_run_baseline)

    sp = sub.add_parser("run-experiment", help="run the methods of a config")
    common(sp)
    sp.add_argument("--methods", nargs="+", choices=tuple(harness.METHODS))
    sp.set_defaults(func=cmd_run_experiment)

    sp = sub.add_parser("reproduce-table", help="run a comparison table (1, 2 or 3)")
    sp.add_argument("table", type=int, choices=(1, 2, 3))
    common(sp, dataset=False)
    sp.set_defaults(func=cmd_reproduce_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigurationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
