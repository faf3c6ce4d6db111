"""Decoupled contrastive loss (DCL) on manifold-sample embeddings.

For an anchor ``i`` with positive ``p(i)`` the anchor loss is::

    -s(i, p) / tau + log sum_{k != i, p} exp(s(i, k) / tau)

with negatives taken from the anchor's own manifold only. The positive never
enters the denominator. A manifold's loss is the mean over its 2N anchors and
a batch's loss is the sum over manifolds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class DclConfig:
    tau: float = 0.1
    normalize: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def normalize_embeddings(z) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normalise rows. Returns ``(u, zero_mask)``; zero rows stay zero."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    zero = norms[..., 0] == 0
    u = np.divide(z, norms, out=np.zeros_like(z), where=norms > 0)
    return u, zero


def dcl_loss(manifolds, cfg: DclConfig = DclConfig()) -> tuple[float, np.ndarray]:
    """Total DCL over a stack of manifolds.

    ``manifolds`` is an array ``(M, 2N, d)`` (or a list of ``(2N, d)`` arrays of
    equal shape) in canonical pair order. Returns the summed loss and its
    gradient with the same shape as the input.
    """
    z = np.asarray(manifolds, dtype=np.float64)
    if z.ndim == 2:
        z = z[None]
    if z.ndim != 3 or z.shape[1] % 2:
        raise ValueError(f"expected (M, 2N, d) embeddings, got shape {z.shape}")
    if z.shape[1] < 4:
        raise ValueError("DCL needs at least two pairs per manifold (N >= 2)")
    losses, grad = kernels.dcl_batch(z, cfg.tau, cfg.normalize)
    return float(losses.sum()), grad


def infonce_loss_reference(z, tau: float) -> float:
    """Coupled InfoNCE on one manifold; kept only to contrast with DCL in tests."""
    u, _ = normalize_embeddings(np.asarray(z, dtype=np.float64))
    n = len(u)
    sim = u @ u.T / tau
    total = 0.0
    for i in range(n):
        p = i ^ 1
        others = [k for k in range(n) if k != i]
        total += -sim[i, p] + np.log(np.exp(sim[i, others]).sum())
    return total / n
