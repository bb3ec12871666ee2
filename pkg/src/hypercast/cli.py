"""Command-line interface.

Subcommands:

* ``synth``     — write a deterministic synthetic grouped dataset
* ``prepare``   — split a dataset, fit normalization stats, warm the
                  warping-affinity cache
* ``train``     — train (optionally over several seeds) and checkpoint
* ``evaluate``  — metrics of a checkpoint on a chronological split
* ``predict``   — forecast from one lookback window of a series
* ``export``    — dump learned structure matrices from a checkpoint

Exit codes: 0 success, 2 configuration/usage error, 1 any other failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig
from .data import (chronological_split, generate_synthetic, load_dataset,
                   save_csv, zscore_normalize)
from .dtw import compute_dtw_adjacency
from .errors import (ConfigError, ContractError, DivergenceError, LoadError,
                     NormalizationError)
from .export import export_structures, write_matrix
from .training import evaluate, predict, train

logger = logging.getLogger(__name__)

SPLIT_RATIOS = (0.7, 0.1, 0.2)


def _add_data_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="series file (.csv/.tsv or binary+sidecar)")
    p.add_argument("--timestamp-column", default=None,
                   help="name of an integer timestamp column in delimited input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercast",
        description="Multivariate forecasting with learned graph pyramids "
                    "and sparse hypergraph propagation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grouped dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", type=int, default=3)
    p.add_argument("--vars-per-group", type=int, default=4)
    p.add_argument("--length", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="split, normalize and warm the affinity cache")
    _add_data_arg(p)
    p.add_argument("--out", required=True, help="output directory for cache + stats")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a forecaster")
    p.add_argument("--config", required=True, help="JSON/YAML config file")
    _add_data_arg(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--seeds", default=None,
                   help="comma-separated seed list; trains one model per seed "
                        "and reports mean +/- std test metrics")
    p.add_argument("--cache-dir", default=None,
                   help="warping-affinity cache directory (default: the output dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_data_arg(p)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", default=None, help="also write the metrics JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="forecast from one lookback window")
    p.add_argument("--checkpoint", required=True)
    _add_data_arg(p)
    p.add_argument("--origin", type=int, default=None,
                   help="start index of the lookback window (default: last full window)")
    p.add_argument("--out", default=None,
                   help="write the forecast as a matrix file instead of JSON on stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export", help="dump learned structure matrices")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    return parser


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = generate_synthetic(n_groups=args.groups, vars_per_group=args.vars_per_group,
                            length=args.length, seed=args.seed, noise_amp=args.noise)
    csv_path = out / "synthetic.csv"
    save_csv(ds, csv_path)
    (out / "synthetic.meta.json").write_text(
        json.dumps(ds.meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {csv_path} ({ds.n_vars} variables x {ds.length} steps)")
    return 0


def cmd_prepare(args) -> int:
    ds = load_dataset(args.data, timestamp_column=args.timestamp_column)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = chronological_split(ds.length, SPLIT_RATIOS)
    normalized, stats = zscore_normalize(ds, split.train)
    compute_dtw_adjacency(normalized.values[:, split.train[0]:split.train[1]],
                          cache_dir=out)
    (out / "splits.json").write_text(json.dumps(split.as_dict(), indent=2) + "\n")
    (out / "stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2) + "\n")
    print(f"prepared {ds.n_vars} variables x {ds.length} steps; "
          f"splits {split.as_dict()}; cache in {out}")
    return 0


def _train_one(cfg: ModelConfig, args, out_dir: Path) -> dict:
    ds = load_dataset(args.data, timestamp_column=args.timestamp_column)
    cache_dir = Path(args.cache_dir) if args.cache_dir else out_dir
    result = train(cfg, ds, cache_dir=cache_dir, split_ratios=SPLIT_RATIOS)

    ckpt_dir = out_dir / "checkpoint"
    save_checkpoint(ckpt_dir, result.model, stats=result.stats,
                    epoch=result.best_epoch, best_val_loss=result.best_val_loss,
                    variable_names=result.variable_names)
    (out_dir / "history.json").write_text(
        json.dumps(result.history, indent=2) + "\n")
    report = evaluate(result.model, ds, result.stats, result.split.test,
                      batch_size=cfg.batch_size)
    (out_dir / "metrics.json").write_text(report.to_json())
    print(f"seed {cfg.seed}: best epoch {result.best_epoch} "
          f"(val loss {result.best_val_loss:.6f}); checkpoint in {ckpt_dir}")
    return report.aggregate


def cmd_train(args) -> int:
    cfg = ModelConfig.from_file(args.config)
    if args.seed is not None and args.seeds is not None:
        raise ConfigError("use either --seed or --seeds, not both")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.seeds is None:
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        aggregate = _train_one(cfg, args, out)
        print(json.dumps(aggregate, indent=2, sort_keys=True))
        return 0

    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {args.seeds!r}: {exc}") from exc
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    per_seed = {}
    for seed in seeds:
        seed_cfg = dataclasses.replace(cfg, seed=seed)
        per_seed[seed] = _train_one(seed_cfg, args, out / f"seed_{seed}")
    metrics = sorted(next(iter(per_seed.values())))
    summary = {m: {"mean": float(np.mean([per_seed[s][m] for s in seeds])),
                   "std": float(np.std([per_seed[s][m] for s in seeds]))}
               for m in metrics}
    payload = {"seeds": seeds, "test_metrics": summary}
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    if bundle.stats is None:
        raise LoadError(f"checkpoint {args.checkpoint} holds no normalization stats")
    ds = load_dataset(args.data, timestamp_column=args.timestamp_column)
    split = chronological_split(ds.length, SPLIT_RATIOS)
    span = getattr(split, args.split)
    report = evaluate(bundle.model, ds, bundle.stats, span,
                      batch_size=bundle.config.batch_size)
    text = report.to_json(args.out)
    print(text, end="")
    return 0


def cmd_predict(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    if bundle.stats is None:
        raise LoadError(f"checkpoint {args.checkpoint} holds no normalization stats")
    ds = load_dataset(args.data, timestamp_column=args.timestamp_column)
    t = bundle.config.input_len
    origin = args.origin if args.origin is not None else ds.length - t
    if not 0 <= origin <= ds.length - t:
        raise ConfigError(
            f"origin {origin} out of range [0, {ds.length - t}] for input_len {t}")
    window = ds.values[:, origin:origin + t]
    forecast = predict(bundle.model, bundle.stats, window)
    if args.out:
        write_matrix(args.out, forecast,
                     {"kind": "forecast", "origin": int(origin),
                      "variable_names": ds.variable_names})
        print(f"wrote forecast matrix to {args.out}.bin")
    else:
        payload = {"origin": int(origin), "horizon": forecast.shape[1],
                   "variables": ds.variable_names, "forecast": forecast.tolist()}
        print(json.dumps(payload, indent=2))
    return 0


def cmd_export(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    names = export_structures(bundle.model, args.out,
                              variable_names=bundle.meta.get("variable_names"))
    print(f"exported {', '.join(names)} to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (LoadError, NormalizationError, ContractError, DivergenceError) as exc:
        print(f"error: {type(exc).__name__.removesuffix('Error').lower()}: {exc}",
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
