"""Manifold (Man) sampling, batched Man sampling and the Rand / SSL ablation samplers.

A manifold sample is an (N, 2)-contrastive sub-task: for every way one source
example is picked and turned into two independent augmentations that share a
pseudo-label. Entries are laid out canonically, pair ``j`` (1-based) occupying
rows ``2j-2`` and ``2j-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .episodes import ExampleSet, SplitDataset, Task


@dataclass(frozen=True)
class Augmenter:
    kind: str = "gaussian_jitter_scale"
    jitter_std: float = 0.1
    scale_range: tuple = (0.9, 1.1)

    def __post_init__(self):
        if self.kind not in ("gaussian_jitter_scale", "identity"):
            raise ValueError(f"unknown augmenter kind {self.kind!r}")
        lo, hi = self.scale_range
        if lo > hi or self.jitter_std < 0:
            raise ValueError("invalid augmenter parameters")
        object.__setattr__(self, "scale_range", (float(lo), float(hi)))


def augment(aug: Augmenter, x, seed) -> np.ndarray:
    """``s * x + eta`` with ``s ~ U(scale_range)`` and ``eta ~ N(0, jitter_std^2 I)``.

    A 2-D ``x`` is treated as a batch with one independent draw per row.
    """
    x = np.asarray(x, dtype=np.float64)
    if aug.kind == "identity":
        return x.copy()
    rng = np.random.default_rng(seed)
    lead = x.shape[:-1]
    lo, hi = aug.scale_range
    s = rng.uniform(lo, hi, size=lead + (1,)) if hi > lo else np.full(lead + (1,), lo)
    out = s * x
    if aug.jitter_std > 0:
        out = out + aug.jitter_std * rng.standard_normal(x.shape)
    return out


@dataclass(frozen=True)
class AugmentationPool:
    """Pre-generated augmentations of a set of source examples.

    ``aug[i, a]`` is the a-th augmentation of source ``i``.
    """

    aug: np.ndarray
    y: np.ndarray
    source_id: np.ndarray
    ground_truth: np.ndarray

    @property
    def n_aug(self) -> int:
        return self.aug.shape[1]

    def __len__(self):
        return len(self.y)


def build_augmentation_pool(examples: ExampleSet, aug: Augmenter, n_aug: int, seed) -> AugmentationPool:
    if n_aug < 1:
        raise ValueError("n_aug must be >= 1")
    rep = np.repeat(examples.x[:, None, :], n_aug, axis=1)
    return AugmentationPool(augment(aug, rep, seed), examples.y, examples.source_id,
                            examples.ground_truth)


Source = Union[ExampleSet, AugmentationPool]


@dataclass(frozen=True)
class ManifoldSample:
    x: np.ndarray  # (2N, d)
    pseudo_labels: np.ndarray  # (2N,) 1..N, each twice
    source_id: np.ndarray
    ground_truth: np.ndarray

    @property
    def N(self) -> int:
        return len(self.pseudo_labels) // 2

    @property
    def pairing(self) -> dict:
        return {j: (2 * j - 2, 2 * j - 1) for j in range(1, self.N + 1)}

    @property
    def sources(self) -> dict:
        return {j: int(self.source_id[2 * j - 2]) for j in range(1, self.N + 1)}


@dataclass(frozen=True)
class ManBatch:
    """``v`` manifold samples stacked along the first axis."""

    x: np.ndarray  # (v, 2N, d)
    pseudo_labels: np.ndarray  # (v, 2N)
    source_id: np.ndarray
    ground_truth: np.ndarray

    @property
    def v(self) -> int:
        return self.x.shape[0]

    @property
    def samples(self) -> list:
        return [ManifoldSample(self.x[i], self.pseudo_labels[i], self.source_id[i],
                               self.ground_truth[i]) for i in range(self.v)]


def _pick_sources(source: Source, N: int, v: int, rng, stratified: bool) -> np.ndarray:
    """Indices (v, N) of chosen source examples."""
    y = source.y
    if stratified:
        picks = np.empty((v, N), dtype=np.int64)
        for j in range(1, N + 1):
            idx = np.flatnonzero(y == j)
            if idx.size == 0:
                raise ValueError(f"no examples with label {j} to sample from")
            picks[:, j - 1] = idx[rng.integers(0, idx.size, size=v)]
        return picks
    if len(y) < N:
        raise ValueError(f"need at least {N} examples, source has {len(y)}")
    return np.stack([rng.choice(len(y), size=N, replace=False) for _ in range(v)])


def _materialise(source: Source, picks: np.ndarray, aug: Augmenter, rng) -> ManBatch:
    v, N = picks.shape
    flat = np.repeat(picks, 2, axis=1)  # (v, 2N)
    if isinstance(source, AugmentationPool):
        n_aug = source.n_aug
        if n_aug < 2:
            raise ValueError("augmentation pool needs >= 2 augmentations per source")
        a1 = rng.integers(0, n_aug, size=(v, N))
        a2 = rng.integers(0, n_aug - 1, size=(v, N))
        a2 = a2 + (a2 >= a1)
        which = np.stack([a1, a2], axis=2).reshape(v, 2 * N)
        x = source.aug[flat, which]
    else:
        x = augment(aug, source.x[flat], rng)
    labels = np.tile(np.repeat(np.arange(1, N + 1), 2), (v, 1))
    return ManBatch(x, labels, source.source_id[flat], source.ground_truth[flat])


def batman_sample(source: Source, N: int, v: int, aug: Augmenter, seed) -> ManBatch:
    """``v`` independent Man samples; each way's source is drawn from label ``j``'s pool."""
    if v < 1:
        raise ValueError("v must be >= 1")
    rng = np.random.default_rng(seed)
    picks = _pick_sources(source, N, v, rng, stratified=True)
    return _materialise(source, picks, aug, rng)


def man_sample(source: Source, N: int, aug: Augmenter, seed) -> ManifoldSample:
    return batman_sample(source, N, 1, aug, seed).samples[0]


def rand_batch(source: Source, N: int, v: int, aug: Augmenter, seed) -> ManBatch:
    """``v`` Rand manifolds: N sources drawn without replacement, labels ignored."""
    rng = np.random.default_rng(seed)
    picks = _pick_sources(source, N, v, rng, stratified=False)
    return _materialise(source, picks, aug, rng)


def rand_manifold_sample(source: Source, N: int, aug: Augmenter, seed) -> ManifoldSample:
    return rand_batch(source, N, 1, aug, seed).samples[0]


def make_ssl_task(data: SplitDataset, N: int, K: int, Q: int, aug: Augmenter, seed) -> Task:
    """Label-free task: N random sources, K + Q augmentations each, split K / Q."""
    rng = np.random.default_rng(seed)
    e = data.examples
    if len(e) < N:
        raise ValueError(f"need at least {N} examples, split has {len(e)}")
    src = rng.choice(len(e), size=N, replace=False)
    per = K + Q
    x = augment(aug, np.repeat(e.x[src][:, None, :], per, axis=1), rng)  # (N, K+Q, d)
    labels = np.repeat(np.arange(1, N + 1), per).reshape(N, per)
    sid = np.repeat(e.source_id[src], per).reshape(N, per)
    gt = np.repeat(e.ground_truth[src], per).reshape(N, per)

    def part(sl):
        d = x.shape[-1]
        return ExampleSet(x[:, sl].reshape(-1, d), labels[:, sl].ravel(),
                          sid[:, sl].ravel(), gt[:, sl].ravel())

    return Task(part(slice(0, K)), part(slice(K, per)), tuple(int(s) for s in e.source_id[src]))
