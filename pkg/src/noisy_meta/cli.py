"""Command-line entry point: ``noisy-meta {gen-data,train,eval,sweep,prob-analysis}``.

Failures exit with status 1 and a one-line JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import SWEEP_MODES, ConfigError, ExperimentConfig, load_config
from .episodes import DatasetFormatError, NoiseSpec, inject_symmetric_noise, save_csv_dataset
from .evaluation import evaluate
from .learners import LEARNERS
from .experiment import (ResultRow, derive_seed, emit_results, load_splits,
                         run_sweep, train_cell)
from .noise_analysis import analysis_table

log = logging.getLogger("noisy_meta")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> dict:
    cfg = _config(args)
    if cfg.dataset.kind != "synthetic":
        raise ConfigError("gen-data needs a synthetic dataset section")
    train, test = load_splits(cfg)
    out = _outdir(cfg)
    save_csv_dataset(train, out / "train.csv")
    save_csv_dataset(test, out / "test.csv")
    return {"train": str(out / "train.csv"), "test": str(out / "test.csv"),
            "train_examples": len(train), "test_examples": len(test)}


def _pick(values, override):
    return values[0] if override is None else override


def cmd_train(args) -> dict:
    cfg = _config(args)
    learner = _pick(cfg.learners, args.learner)
    mode = _pick(cfg.modes, args.mode)
    eps = _pick(cfg.epsilons, args.epsilon)
    train, _ = load_splits(cfg)
    noisy = inject_symmetric_noise(train, NoiseSpec(eps, derive_seed(cfg.seed, 1, 0, 0)))
    theta, setup = train_cell(cfg, noisy, learner, mode, derive_seed(cfg.seed, 2, 0, 0, 0, 0))
    path = _outdir(cfg) / "theta.ckpt"
    save_checkpoint(theta, setup.spec, path, {"learner": learner, "mode": mode, "epsilon": eps,
                                              "eval_mode": setup.eval_mode, "seed": cfg.seed})
    return {"checkpoint": str(path), "learner": learner, "mode": mode, "epsilon": eps,
            "num_params": setup.spec.num_params}


def cmd_eval(args) -> dict:
    cfg = _config(args)
    theta, spec, meta = load_checkpoint(args.checkpoint, with_metadata=True)
    _, test = load_splits(cfg)
    eval_mode = meta.get("eval_mode", "zero_head" if spec.head_width is None else "as_is")
    res = evaluate(theta, spec, test, cfg.task, cfg.eval, eval_mode, derive_seed(cfg.seed, 3, 0))
    row = ResultRow(meta.get("learner", "unknown"), meta.get("mode", "unknown"),
                    float(meta.get("epsilon", float("nan"))), res.mean_accuracy, res.ci95,
                    int(cfg.seed), 0.0)
    path = _outdir(cfg) / f"eval.{args.format}"
    emit_results([row], args.format, path)
    return {"results": str(path), "mean_accuracy": res.mean_accuracy, "ci95": res.ci95}


def cmd_sweep(args) -> dict:
    cfg = _config(args)
    failures: list = []
    rows = run_sweep(cfg, failures, progress=lambda r: log.info(
        "%s %s eps=%.2f acc=%.4f", r.learner, r.mode, r.epsilon, r.mean_accuracy))
    out = _outdir(cfg)
    path = out / f"results.{args.format}"
    emit_results(rows, args.format, path)
    summary = {"results": str(path), "rows": len(rows), "failed_cells": len(failures)}
    if failures:
        (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n")
        summary["failures"] = str(out / "failures.json")
    return summary


def cmd_prob_analysis(args) -> dict:
    seed = 0 if args.seed is None else args.seed
    rows = analysis_table(args.ns, args.epsilons, args.trials, seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"prob_analysis.{args.format}"
    cols = ("N", "epsilon", "analytic", "monte_carlo", "stderr")
    if args.format == "csv":
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join([str(r["N"]), f"{r['epsilon']:.6f}"]
                                  + [f"{r[c]:.6f}" for c in cols[2:]]))
        path.write_text("\n".join(lines) + "\n")
    else:
        path.write_text(json.dumps([{c: (round(r[c], 6) if isinstance(r[c], float) else r[c])
                                     for c in cols} for r in rows], indent=2) + "\n")
    return {"results": str(path), "rows": len(rows)}


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def _ints(text):
    return tuple(int(x) for x in text.split(","))


class _Parser(argparse.ArgumentParser):
    """Usage errors are reported as JSON like every other failure."""

    def error(self, message):
        print(json.dumps({"status": "error", "error": "UsageError", "message": message}),
              file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noisy-meta", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--config", help="YAML/JSON experiment config")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("gen-data", help="write the synthetic train/test splits as CSV")
    common(p, fmt=False)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="meta-train one learner and save a checkpoint")
    common(p, fmt=False)
    p.add_argument("--learner", choices=LEARNERS)
    p.add_argument("--mode", choices=SWEEP_MODES)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="meta-test a checkpoint on the clean test split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run the learner x mode x epsilon grid")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prob-analysis", help="clean-selection probability, exact vs Monte Carlo")
    common(p)
    p.add_argument("--ns", type=_ints, default=(2, 3, 5))
    p.add_argument("--epsilons", type=_floats, default=(0.0, 0.3, 0.6))
    p.add_argument("--trials", type=int, default=1_000_000)
    p.set_defaults(func=cmd_prob_analysis)
    return parser


def _fail(exc) -> int:
    print(json.dumps({"status": "error", "error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except (ConfigError, CheckpointError, DatasetFormatError, ValueError, OSError) as exc:
        return _fail(exc)
    except Exception as exc:  # noqa: BLE001 - unexpected, but still reported as JSON
        log.debug("unexpected failure", exc_info=True)
        return _fail(exc)
    print(json.dumps({"status": "ok", **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
