"""Meta-testing: optional zero head, supervised fine-tuning on the support set,
query accuracy, and a normal-approximation CI95 over tasks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .episodes import SplitDataset, Task, TaskSpec, sample_task
from .nn import NetworkSpec, ce_loss_and_grad, forward

EVAL_MODES = ("zero_head", "as_is", "reset_head")


@dataclass(frozen=True)
class EvalConfig:
    num_tasks: int = 2048
    finetune_steps: int = 10
    finetune_lr: float = 0.1
    runs: int = 3

    def __post_init__(self):
        if self.num_tasks < 1 or self.finetune_steps < 0 or self.finetune_lr <= 0 or self.runs < 1:
            raise ValueError("invalid evaluation configuration")


@dataclass
class EvalResult:
    mean_accuracy: float
    ci95: float
    per_task_accuracies: np.ndarray = field(repr=False)


def ci95(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("ci95 needs at least two values")
    return float(1.96 * v.std(ddof=1) / np.sqrt(v.size))


def attach_zero_head(theta, spec: NetworkSpec, N: int) -> tuple[np.ndarray, NetworkSpec]:
    """Append an all-zero linear layer with ``N`` outputs to an embedding network."""
    if spec.head_width is not None:
        raise ValueError("network already has a classification head")
    new_spec = spec.with_head(N)
    extra = spec.embedding_dim * N + N
    return np.concatenate([np.asarray(theta, dtype=np.float64), np.zeros(extra)]), new_spec


def predict(params, spec: NetworkSpec, x, rng) -> np.ndarray:
    """Argmax class (0-based) with uniform random tie-breaking."""
    logits, _ = forward(params, spec, x)
    is_max = logits == logits.max(axis=1, keepdims=True)
    keys = np.where(is_max, rng.random(logits.shape), -1.0)
    return keys.argmax(axis=1)


def finetune(params, spec: NetworkSpec, task: Task, steps: int, lr: float) -> np.ndarray:
    phi = np.array(params, dtype=np.float64)
    y = task.support.y - 1
    for _ in range(steps):
        _, g = ce_loss_and_grad(phi, spec, task.support.x, y)
        phi -= lr * g
    return phi


def meta_test_task(theta_star, spec: NetworkSpec, task: Task, cfg: EvalConfig,
                   mode: str = "zero_head", seed=0) -> float:
    """Fine-tune a copy of ``theta_star`` on the support set, score the query set.

    ``zero_head`` attaches a zero head to an embedding network, ``as_is`` uses a
    trained head directly and ``reset_head`` zeroes an existing head first (the
    zeroing trick at test time).
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    N = task.N
    if mode == "zero_head":
        params, sp = attach_zero_head(theta_star, spec, N)
    else:
        if spec.head_width != N:
            raise ValueError(f"head has {spec.head_width} outputs, task has {N} ways")
        params, sp = np.array(theta_star, dtype=np.float64), spec
        if mode == "reset_head":
            params[sp.head_slice()] = 0.0
    phi = finetune(params, sp, task, cfg.finetune_steps, cfg.finetune_lr)
    rng = np.random.default_rng(seed)
    pred = predict(phi, sp, task.query.x, rng)
    return float(np.mean(pred == task.query.y - 1))


def evaluate(theta_star, spec: NetworkSpec, data: SplitDataset, task_spec: TaskSpec,
             cfg: EvalConfig, mode: str = "zero_head", seed=0) -> EvalResult:
    """Mean accuracy over ``cfg.runs * cfg.num_tasks`` test tasks, pooled for the CI."""
    accs = np.empty(cfg.runs * cfg.num_tasks)
    i = 0
    for run in range(cfg.runs):
        for t in range(cfg.num_tasks):
            task = sample_task(data, task_spec, [int(seed), run, t, 0])
            accs[i] = meta_test_task(theta_star, spec, task, cfg, mode, [int(seed), run, t, 1])
            i += 1
    return EvalResult(float(accs.mean()), ci95(accs) if accs.size > 1 else 0.0, accs)
