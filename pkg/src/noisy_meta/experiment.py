"""Noise sweeps: (learner x mode x epsilon x run) cells, each meta-trained on a
noisy copy of the train split and meta-tested on the clean test split.

Seed splitting (all via ``numpy.random.SeedSequence`` entropy lists):

* dataset:        ``[root, 0]``
* label noise:    ``[root, 1, eps_index, run]``  (shared by all learners/modes)
* meta-training:  ``[root, 2, learner_index, mode_index, eps_index, run]``
* meta-testing:   ``[root, 3, run]``            (same test tasks for every cell)
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .episodes import (NoiseSpec, SplitDataset, TaskSpec, generate_benchmark, inject_symmetric_noise,
                       load_csv_dataset)
from .evaluation import EvalResult, evaluate
from .learners import InnerLoopConfig, OuterConfig, meta_train
from .nn import NetworkSpec

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("learner", "mode", "epsilon", "mean_accuracy", "ci95", "seed", "wall_time_seconds")
REPTILE_TYPE = ("reptile", "eigen_reptile")


@dataclass
class ResultRow:
    learner: str
    mode: str
    epsilon: float
    mean_accuracy: float
    ci95: float
    seed: int
    wall_time_seconds: float


@dataclass
class CellSetup:
    spec: NetworkSpec
    inner: InnerLoopConfig
    outer: OuterConfig
    eval_mode: str
    task_source: str


def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def load_splits(cfg: ExperimentConfig) -> tuple[SplitDataset, SplitDataset]:
    d = cfg.dataset
    if d.kind == "csv":
        return load_csv_dataset(d.train_csv, "train"), load_csv_dataset(d.test_csv, "test")
    return generate_benchmark(d.train_classes, d.test_classes, d.dim, d.class_sep, d.within_std,
                              d.per_class, [cfg.seed, 0], signal_dims=d.signal_dims)


def cell_setup(cfg: ExperimentConfig, learner: str, mode: str, input_dim: int) -> CellSetup:
    net = cfg.network
    widths = (input_dim, *net.hidden, net.embedding)
    steps = cfg.inner.steps[learner]
    o = cfg.outer
    if mode == "supervised":
        spec = NetworkSpec(widths, net.activation, cfg.task.N)
        inner = InnerLoopConfig(steps, cfg.inner.supervised_lr, "supervised_ce",
                                zero_out_head=(learner == "fomaml_zo"))
        beta = o.reptile_beta if learner in REPTILE_TYPE else o.supervised_grad_beta
        outer = OuterConfig(beta, o.meta_batch, o.query_v, "batman", o.query_augs)
        return CellSetup(spec, inner, outer,
                         "reset_head" if learner == "fomaml_zo" else "as_is", "labeled")
    spec = NetworkSpec(widths, net.activation, None)
    sampler = "rand" if mode == "rand" else "batman"
    v = 1 if mode == "man" else cfg.inner.batman_v
    qv = 1 if mode == "man" else o.query_v
    inner = InnerLoopConfig(steps, cfg.inner.contrastive_lr, "batman_clr", batman_v=v,
                            sampler=sampler, support_augs=cfg.inner.support_augs)
    beta = o.reptile_beta if learner in REPTILE_TYPE else o.contrastive_grad_beta
    meta_batch = o.ssl_meta_batch if mode == "ssl" else o.meta_batch
    outer = OuterConfig(beta, meta_batch, qv, sampler, o.query_augs)
    return CellSetup(spec, inner, outer, "zero_head", "ssl" if mode == "ssl" else "labeled")


def train_cell(cfg: ExperimentConfig, train: SplitDataset, learner: str, mode: str,
               seed: int) -> tuple[np.ndarray, CellSetup]:
    setup = cell_setup(cfg, learner, mode, train.dim)
    t = cfg.task
    task_spec = TaskSpec(t.N, int(cfg.support_k.get(learner, t.K)), t.Q)
    theta = meta_train(train, learner, setup.inner, setup.outer, cfg.imaml, setup.spec,
                       cfg.epochs, seed, task_spec=task_spec, dcl=cfg.dcl, aug=cfg.augment,
                       task_source=setup.task_source)
    return theta, setup


def run_cell(cfg: ExperimentConfig, train: SplitDataset, test: SplitDataset, learner: str,
             mode: str, epsilon: float, idx: tuple, run: int) -> tuple[ResultRow, EvalResult]:
    li, mi, ei = idx
    seed = derive_seed(cfg.seed, 2, li, mi, ei, run)
    t0 = time.perf_counter()
    noisy = inject_symmetric_noise(train, NoiseSpec(epsilon, derive_seed(cfg.seed, 1, ei, run)))
    # a diverging cell surfaces as FloatingPointError instead of a garbage accuracy
    with np.errstate(over="raise", invalid="raise"):
        theta, setup = train_cell(cfg, noisy, learner, mode, seed)
        res = evaluate(theta, setup.spec, test, cfg.task, cfg.eval, setup.eval_mode,
                       derive_seed(cfg.seed, 3, run))
    wall = time.perf_counter() - t0 if cfg.record_timing else 0.0
    return ResultRow(learner, mode, float(epsilon), res.mean_accuracy, res.ci95, seed, wall), res


def run_sweep(cfg: ExperimentConfig, failures: Optional[list] = None, progress=None) -> list[ResultRow]:
    """All cells of the grid in a fixed order. A failing cell yields a row with
    NaN accuracy; its error is appended to ``failures`` when given."""
    train, test = load_splits(cfg)
    if np.any(test.examples.y != test.examples.ground_truth):
        raise ValueError("test split carries corrupted labels")
    rows = []
    for li, learner in enumerate(cfg.learners):
        for mi, mode in enumerate(cfg.modes):
            for ei, eps in enumerate(cfg.epsilons):
                for run in range(cfg.runs):
                    try:
                        row, _ = run_cell(cfg, train, test, learner, mode, eps, (li, mi, ei), run)
                    except Exception as exc:  # noqa: BLE001 - isolate the cell
                        log.error("cell %s/%s/eps=%s/run=%d failed: %s", learner, mode, eps, run, exc)
                        if failures is not None:
                            failures.append({"learner": learner, "mode": mode, "epsilon": eps,
                                             "run": run, "error": f"{type(exc).__name__}: {exc}"})
                        row = ResultRow(learner, mode, float(eps), math.nan, math.nan,
                                        derive_seed(cfg.seed, 2, li, mi, ei, run), 0.0)
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def emit_results(rows, fmt: str, path) -> None:
    """Write rows as CSV (fixed column order) or a JSON array; reals to 6 decimals."""
    if not rows:
        raise ValueError("no result rows to write")
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for r in rows:
                d = asdict(r)
                w.writerow([_fmt(d[c]) for c in RESULT_COLUMNS])
        return
    out = []
    for r in rows:
        d = asdict(r)
        out.append({c: (None if isinstance(d[c], float) and math.isnan(d[c])
                        else round(d[c], 6) if isinstance(d[c], float) else d[c])
                    for c in RESULT_COLUMNS})
    path.write_text(json.dumps(out, indent=2) + "\n")


def read_results(path) -> list[ResultRow]:
    path = Path(path)
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
    else:
        with open(path, newline="") as fh:
            raw = list(csv.DictReader(fh))
    rows = []
    for d in raw:
        def num(x):
            return math.nan if x in (None, "nan") else float(x)
        rows.append(ResultRow(d["learner"], d["mode"], num(d["epsilon"]), num(d["mean_accuracy"]),
                              num(d["ci95"]), int(d["seed"]), num(d["wall_time_seconds"])))
    return rows
