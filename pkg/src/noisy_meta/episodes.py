"""Labelled splits, N-way K-shot task sampling and symmetric label noise."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class LabeledExample:
    features: np.ndarray
    label: int
    ground_truth: int
    source_id: int


@dataclass(frozen=True)
class ExampleSet:
    """Parallel arrays of examples.

    Learners only ever touch ``x`` and ``y``; ``ground_truth`` is kept for
    analysis and hygiene checks.
    """

    x: np.ndarray
    y: np.ndarray
    source_id: np.ndarray
    ground_truth: np.ndarray

    def __len__(self):
        return len(self.y)

    def take(self, idx) -> "ExampleSet":
        return ExampleSet(self.x[idx], self.y[idx], self.source_id[idx], self.ground_truth[idx])

    @classmethod
    def empty(cls, dim: int) -> "ExampleSet":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class SplitDataset:
    split: str
    examples: ExampleSet
    _pools: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        y = self.examples.y
        pools = {int(c): np.flatnonzero(y == c) for c in np.unique(y)}
        object.__setattr__(self, "_pools", pools)

    @property
    def classes(self) -> dict:
        """Observed label -> indices into ``examples``."""
        return self._pools

    @property
    def dim(self) -> int:
        return self.examples.x.shape[1]

    def __len__(self):
        return len(self.examples)

    def pool(self, label: int) -> ExampleSet:
        return self.examples.take(self._pools[label])

    def iter_examples(self):
        e = self.examples
        for i in range(len(e)):
            yield LabeledExample(e.x[i], int(e.y[i]), int(e.ground_truth[i]), int(e.source_id[i]))

    def with_labels(self, labels) -> "SplitDataset":
        e = self.examples
        return SplitDataset(self.split, ExampleSet(e.x, np.asarray(labels, dtype=np.int64),
                                                   e.source_id, e.ground_truth))

    def noisy_fraction(self) -> float:
        e = self.examples
        return float(np.mean(e.y != e.ground_truth)) if len(e) else 0.0


@dataclass(frozen=True)
class TaskSpec:
    N: int
    K: int
    Q: int = 0

    def __post_init__(self):
        if self.N < 2 or self.K < 1 or self.Q < 0:
            raise ValueError(f"invalid task spec N={self.N} K={self.K} Q={self.Q}")


@dataclass(frozen=True)
class Task:
    """An episode. Labels in ``support.y`` / ``query.y`` are 1..N."""

    support: ExampleSet
    query: ExampleSet
    way_ids: tuple

    @property
    def N(self) -> int:
        return len(self.way_ids)


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")

    @property
    def p(self) -> float:
        return 1.0 - self.epsilon


def corrupted_count(epsilon: float, n: int) -> int:
    # numpy rounds half to even
    return int(np.round(epsilon * n))


def inject_symmetric_noise(data: SplitDataset, noise: NoiseSpec) -> SplitDataset:
    """Relabel exactly ``round(eps * n_c)`` examples of every class to another class.

    Victims are chosen uniformly without replacement inside each class pool, the
    new label uniformly among the other classes of the split. Relabelled
    examples move to the pool of their new label.
    """
    if noise.epsilon == 0.0:
        return data
    labels_all = np.array(sorted(data.classes))
    if len(labels_all) < 2:
        raise ValueError("symmetric noise needs at least two classes in the split")
    rng = np.random.default_rng(noise.seed)
    y = data.examples.y.copy()
    for pos, c in enumerate(labels_all):
        idx = data.classes[int(c)]
        k = corrupted_count(noise.epsilon, len(idx))
        if k == 0:
            continue
        victims = rng.choice(idx, size=k, replace=False)
        # uniform over the other classes: draw from len-1 slots and skip c
        slot = rng.integers(0, len(labels_all) - 1, size=k)
        slot = slot + (slot >= pos)
        y[victims] = labels_all[slot]
    return data.with_labels(y)


def sample_task(data: SplitDataset, spec: TaskSpec, seed) -> Task:
    """Draw N distinct observed classes, then K + Q examples from each.

    Only classes whose pool holds at least K + Q examples are eligible.
    """
    rng = np.random.default_rng(seed)
    need = spec.K + spec.Q
    eligible = sorted(c for c, idx in data.classes.items() if len(idx) >= need)
    if len(eligible) < spec.N:
        raise ValueError(
            f"need {spec.N} classes with >= {need} examples, split has {len(eligible)}"
        )
    ways = rng.choice(np.array(eligible), size=spec.N, replace=False)
    sup_idx, qry_idx, sup_lab, qry_lab = [], [], [], []
    for j, c in enumerate(ways, start=1):
        picks = rng.choice(data.classes[int(c)], size=need, replace=False)
        sup_idx.append(picks[:spec.K])
        qry_idx.append(picks[spec.K:])
        sup_lab.append(np.full(spec.K, j))
        qry_lab.append(np.full(spec.Q, j))
    e = data.examples

    def build(idx, lab):
        idx = np.concatenate(idx)
        return ExampleSet(e.x[idx], np.concatenate(lab).astype(np.int64),
                          e.source_id[idx], e.ground_truth[idx])

    return Task(build(sup_idx, sup_lab), build(qry_idx, qry_lab), tuple(int(c) for c in ways))


def generate_synthetic(num_classes: int, dim: int, class_sep: float, within_std: float,
                       per_class: int, seed, split: str = "train",
                       first_label: int = 0, signal_dims: Optional[int] = None) -> SplitDataset:
    """Isotropic Gaussian clusters.

    Class means are uniform in the hypercube ``[-class_sep/2, class_sep/2]^dim``.
    With ``signal_dims`` set, only the first ``signal_dims`` coordinates of the
    means vary and the rest are zero, so the remaining dimensions carry
    within-class noise only. Labels run ``first_label .. first_label + num_classes - 1``.
    """
    if num_classes < 2 or per_class < 1:
        raise ValueError("need num_classes >= 2 and per_class >= 1")
    k = dim if signal_dims is None else int(signal_dims)
    if not 1 <= k <= dim:
        raise ValueError(f"signal_dims must be in [1, {dim}]")
    rng = np.random.default_rng(seed)
    means = np.zeros((num_classes, dim))
    means[:, :k] = rng.uniform(-class_sep / 2, class_sep / 2, size=(num_classes, k))
    labels = np.repeat(np.arange(num_classes), per_class)
    x = means[labels] + within_std * rng.standard_normal((labels.size, dim))
    labels = labels + first_label
    ex = ExampleSet(x, labels.astype(np.int64), np.arange(labels.size, dtype=np.int64),
                    labels.astype(np.int64))
    return SplitDataset(split, ex)


def generate_benchmark(train_classes: int, test_classes: int, dim: int, class_sep: float,
                       within_std: float, per_class: int, seed,
                       signal_dims: Optional[int] = None) -> tuple[SplitDataset, SplitDataset]:
    """Train/test splits with disjoint class ids drawn from one cluster family."""
    full = generate_synthetic(train_classes + test_classes, dim, class_sep, within_std,
                              per_class, seed, signal_dims=signal_dims)
    e = full.examples
    is_train = e.y < train_classes

    def part(mask, name):
        sub = e.take(np.flatnonzero(mask))
        sub = ExampleSet(sub.x, sub.y, np.arange(len(sub.y), dtype=np.int64), sub.ground_truth)
        return SplitDataset(name, sub)

    return part(is_train, "train"), part(~is_train, "test")


class DatasetFormatError(ValueError):
    pass


def load_csv_dataset(path, split: str = "train") -> SplitDataset:
    """Read header-free ``label,f1,...,fd`` rows."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetFormatError(f"{path}: cannot read file ({exc})") from exc
    labels, rows = [], []
    arity = None
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise DatasetFormatError(f"{path}: row {lineno}: expected label and features")
        try:
            lab = int(row[0])
            feats = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: row {lineno}: {exc}") from exc
        if arity is None:
            arity = len(feats)
        elif len(feats) != arity:
            raise DatasetFormatError(
                f"{path}: row {lineno}: expected {arity} features, got {len(feats)}")
        labels.append(lab)
        rows.append(feats)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    y = np.array(labels, dtype=np.int64)
    ex = ExampleSet(np.array(rows, dtype=np.float64), y, np.arange(len(y), dtype=np.int64), y.copy())
    return SplitDataset(split, ex)


def save_csv_dataset(data: SplitDataset, path) -> None:
    e = data.examples
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for lab, feats in zip(e.y, e.x):
            w.writerow([int(lab)] + [repr(float(v)) for v in feats])
