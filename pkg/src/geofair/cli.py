"""Command-line entry point.

Subcommands: ``gen`` (dataset CSV), ``train`` (checkpoint + log), ``eval``
(metric report JSON), ``experiment`` (two-model comparison), and
``dump-latents``. Exit codes: 0 success, 1 runtime failure, 2 usage error
(bad flags, missing or malformed input files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import net
from .config import experiment_config, load_config_file, resolve_settings
from .errors import FormatError, NumericError, TrainingDiverged, UsageError
from .evaluation import dump_latents, evaluate, run_experiment
from .scm import export_dataset, import_dataset, sample_dataset
from .training import Trainer, config_digest, write_training_log


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geofair",
        description="warped-roll data, geometry-regularized training, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, mode_flag=True):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--n", type=int, help="dataset size")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--lambda-geo", type=float, dest="lambda_geo")
        p.add_argument("--beta", type=float)
        if mode_flag:
            p.add_argument(
                "--mode", choices=("exact", "stencil"), dest="geometry_mode"
            )

    p_gen = sub.add_parser("gen", help="generate a dataset CSV")
    add_common(p_gen)
    p_gen.add_argument("--label-threshold", type=float, dest="label_threshold")
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train one model")
    add_common(p_train)
    p_train.add_argument("--data", help="existing dataset CSV (default: generate)")
    p_train.add_argument(
        "--model",
        choices=("geofair", "baseline"),
        default="geofair",
        help="weight preset: geometry-regularized or plain task model",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, help="dataset CSV")
    p_eval.add_argument("--out", help="optional directory for report.json")
    p_eval.add_argument("--tag", default="model", help="model tag in the report")
    p_eval.set_defaults(func=cmd_eval)

    p_exp = sub.add_parser("experiment", help="baseline vs regularized comparison")
    add_common(p_exp)
    p_exp.set_defaults(func=cmd_experiment)

    p_dump = sub.add_parser("dump-latents", help="write test-set latents CSV")
    p_dump.add_argument("--checkpoint", required=True)
    p_dump.add_argument("--data", required=True)
    p_dump.add_argument("--out", required=True, help="output CSV path")
    p_dump.set_defaults(func=cmd_dump)

    return parser


def _settings_from(args):
    file_values = load_config_file(args.config) if args.config else None
    overrides = {
        key: getattr(args, key, None)
        for key in ("seed", "n", "lambda_geo", "beta", "geometry_mode", "label_threshold")
        if hasattr(args, key)
    }
    return resolve_settings(file_values, overrides)


def _require_file(path, kind):
    if not os.path.exists(path):
        raise UsageError(f"{kind} not found: {path}")


def cmd_gen(args):
    exp = experiment_config(_settings_from(args))
    os.makedirs(args.out, exist_ok=True)
    dataset = sample_dataset(exp.n, exp.seed, exp.label_threshold)
    path = os.path.join(args.out, "dataset.csv")
    export_dataset(dataset, path)
    print(f"wrote {path} ({dataset.n} samples, splits {dataset.sizes})")
    return 0


def cmd_train(args):
    exp = experiment_config(_settings_from(args))
    if args.model == "baseline":
        from dataclasses import replace

        from .losses import LossWeights

        exp.train = replace(exp.train, weights=LossWeights.baseline())
    if args.data:
        _require_file(args.data, "dataset")
        dataset = import_dataset(args.data)
    else:
        dataset = sample_dataset(exp.n, exp.seed, exp.label_threshold)
    os.makedirs(args.out, exist_ok=True)
    trainer = Trainer(exp.train, dataset, exp.make_bundle())
    state_path = os.path.join(args.out, "trainstate.json")
    target = trainer.epoch + exp.train.epochs
    while trainer.epoch < target:
        before = trainer.epoch
        while trainer.epoch == before:
            trainer._one_step()
        trainer.save_state(state_path)
    ckpt = os.path.join(args.out, "checkpoint.json")
    net.save_checkpoint(trainer.best_bundle(), ckpt)
    write_training_log(trainer.log, os.path.join(args.out, "train_log.csv"))
    print(f"wrote {ckpt} (best step {trainer.best_step}, val {trainer.best_val:.6f})")
    return 0


def cmd_eval(args):
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.data, "dataset")
    dataset = import_dataset(args.data)
    report = evaluate(args.checkpoint, dataset.test, model_tag=args.tag)
    text = report.to_json()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        net.write_atomic(os.path.join(args.out, "report.json"), text)
    print(text)
    return 0


def cmd_experiment(args):
    exp = experiment_config(_settings_from(args))
    result = run_experiment(exp, args.out)
    with open(os.path.join(args.out, "table.txt"), "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    return 0


def cmd_dump(args):
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.data, "dataset")
    dataset = import_dataset(args.data)
    out = args.out
    if os.path.isdir(out):
        out = os.path.join(out, "latents.csv")
    dump_latents(args.checkpoint, dataset.test, out)
    print(f"wrote {out} ({len(dataset.test)} rows)")
    return 0


def cli(argv):
    """Run the command line; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, FormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (TrainingDiverged, NumericError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
