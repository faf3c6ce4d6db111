"""Hot inner loops, each in a numba and a pure-numpy flavour.

Public entry points pick the flavour via :func:`noisy_meta._accel.numba_enabled`.
The ``*_numba`` / ``*_numpy`` functions are importable directly so tests and the
benchmark can compare both paths.
"""
from itertools import permutations

import numpy as np

from ._accel import njit, numba_enabled

# ---------------------------------------------------------------------------
# permanents
# ---------------------------------------------------------------------------


@njit(cache=True)
def _permanent_bruteforce_numba(q):
    # Heap's algorithm, iterative.
    n = q.shape[0]
    perm = np.arange(n)
    c = np.zeros(n, dtype=np.int64)
    total = 0.0
    prod = 1.0
    for r in range(n):
        prod *= q[r, perm[r]]
    total += prod
    i = 0
    while i < n:
        if c[i] < i:
            if i % 2 == 0:
                tmp = perm[0]
                perm[0] = perm[i]
                perm[i] = tmp
            else:
                tmp = perm[c[i]]
                perm[c[i]] = perm[i]
                perm[i] = tmp
            prod = 1.0
            for r in range(n):
                prod *= q[r, perm[r]]
            total += prod
            c[i] += 1
            i = 0
        else:
            c[i] = 0
            i += 1
    return total


def _permanent_bruteforce_numpy(q):
    n = q.shape[0]
    rows = np.arange(n)
    total = 0.0
    chunk = []
    for cols in permutations(range(n)):
        chunk.append(cols)
        if len(chunk) == 65536:
            total += np.prod(q[rows, np.asarray(chunk)], axis=1).sum()
            chunk = []
    if chunk:
        total += np.prod(q[rows, np.asarray(chunk)], axis=1).sum()
    return float(total)


@njit(cache=True)
def _permanent_ryser_numba(q):
    n = q.shape[0]
    total = 0.0
    rowsum = np.zeros(n)
    # Gray-code walk over column subsets.
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        diff = gray ^ prev_gray
        j = 0
        while (diff >> j) & 1 == 0:
            j += 1
        if gray & diff:
            for r in range(n):
                rowsum[r] += q[r, j]
        else:
            for r in range(n):
                rowsum[r] -= q[r, j]
        prev_gray = gray
        prod = 1.0
        for r in range(n):
            prod *= rowsum[r]
        size = 0
        g = gray
        while g:
            size += g & 1
            g >>= 1
        if (n - size) % 2 == 0:
            total += prod
        else:
            total -= prod
    return total


def _permanent_ryser_numpy(q):
    n = q.shape[0]
    subsets = np.arange(1, 1 << n)
    mask = ((subsets[:, None] >> np.arange(n)) & 1).astype(np.float64)
    rowsums = mask @ q.T
    sign = np.where((n - mask.sum(axis=1).astype(np.int64)) % 2 == 0, 1.0, -1.0)
    return float(np.dot(sign, np.prod(rowsums, axis=1)))


def permanent_bruteforce(q):
    """Permanent by summing over all ``n!`` permutations."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    if numba_enabled():
        return float(_permanent_bruteforce_numba(q))
    return _permanent_bruteforce_numpy(q)


def permanent_ryser(q):
    """Permanent by Ryser's inclusion-exclusion formula, ``O(2^n n)``."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    if numba_enabled():
        return float(_permanent_ryser_numba(q))
    return _permanent_ryser_numpy(q)


# ---------------------------------------------------------------------------
# distinct-row counting (Monte-Carlo clean selection)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _count_distinct_rows_numba(classes):
    count = 0
    for t in range(classes.shape[0]):
        seen = np.int64(0)
        ok = True
        for j in range(classes.shape[1]):
            bit = np.int64(1) << classes[t, j]
            if seen & bit:
                ok = False
                break
            seen |= bit
        if ok:
            count += 1
    return count


def _count_distinct_rows_numpy(classes):
    s = np.sort(classes, axis=1)
    return int(np.all(np.diff(s, axis=1) != 0, axis=1).sum())


def count_distinct_rows(classes):
    """Number of rows whose entries are pairwise distinct (entries in 0..62)."""
    classes = np.ascontiguousarray(classes, dtype=np.int64)
    if classes.shape[1] <= 1:
        return int(classes.shape[0])
    if numba_enabled():
        return int(_count_distinct_rows_numba(classes))
    return _count_distinct_rows_numpy(classes)


# ---------------------------------------------------------------------------
# decoupled contrastive loss over a stack of manifolds
# ---------------------------------------------------------------------------

_NORM_FLOOR = 1e-12


@njit(cache=True)
def _dcl_batch_numba(z, tau, normalize):
    m_count, n, d = z.shape
    losses = np.zeros(m_count)
    grad = np.zeros_like(z)
    u = np.empty((n, d))
    norms = np.empty(n)
    sim = np.empty((n, n))
    coef = np.zeros((n, n))
    for m in range(m_count):
        for i in range(n):
            if normalize:
                s = 0.0
                for c in range(d):
                    s += z[m, i, c] * z[m, i, c]
                nrm = max(np.sqrt(s), 1e-12)
            else:
                nrm = 1.0
            norms[i] = nrm
            for c in range(d):
                u[i, c] = z[m, i, c] / nrm
        for i in range(n):
            for k in range(i, n):
                s = 0.0
                for c in range(d):
                    s += u[i, c] * u[k, c]
                sim[i, k] = s
                sim[k, i] = s
        scale = 1.0 / (tau * n)
        total = 0.0
        for i in range(n):
            p = i ^ 1
            mx = -np.inf
            for k in range(n):
                if k != i and k != p and sim[i, k] / tau > mx:
                    mx = sim[i, k] / tau
            acc = 0.0
            for k in range(n):
                coef[i, k] = 0.0
                if k != i and k != p:
                    e = np.exp(sim[i, k] / tau - mx)
                    coef[i, k] = e
                    acc += e
            total += -sim[i, p] / tau + mx + np.log(acc)
            for k in range(n):
                coef[i, k] *= scale / acc
            coef[i, p] = -scale
        losses[m] = total / n
        for i in range(n):
            for c in range(d):
                g = 0.0
                for k in range(n):
                    g += (coef[i, k] + coef[k, i]) * u[k, c]
                grad[m, i, c] = g
            if normalize:
                dot = 0.0
                for c in range(d):
                    dot += grad[m, i, c] * u[i, c]
                for c in range(d):
                    grad[m, i, c] = (grad[m, i, c] - dot * u[i, c]) / norms[i]
    return losses, grad


def _dcl_batch_numpy(z, tau, normalize):
    m_count, n, _ = z.shape
    if normalize:
        norms = np.maximum(np.linalg.norm(z, axis=2, keepdims=True), _NORM_FLOOR)
        u = z / norms
    else:
        norms = None
        u = z
    sim = u @ u.transpose(0, 2, 1) / tau
    idx = np.arange(n)
    partner = idx ^ 1
    neg = np.ones((n, n), dtype=bool)
    neg[idx, idx] = False
    neg[idx, partner] = False
    masked = np.where(neg, sim, -np.inf)
    mx = masked.max(axis=2, keepdims=True)
    e = np.where(neg, np.exp(masked - mx), 0.0)
    acc = e.sum(axis=2, keepdims=True)
    lse = mx[..., 0] + np.log(acc[..., 0])
    pos = sim[:, idx, partner]
    losses = (-pos + lse).mean(axis=1)
    coef = e / acc / (tau * n)
    coef[:, idx, partner] = -1.0 / (tau * n)
    grad_u = (coef + coef.transpose(0, 2, 1)) @ u
    if normalize:
        radial = np.sum(grad_u * u, axis=2, keepdims=True)
        grad = (grad_u - radial * u) / norms
    else:
        grad = grad_u
    return losses, grad


def dcl_batch(z, tau, normalize=True):
    """Per-manifold DCL losses and their gradients.

    Parameters
    ----------
    z : ndarray, shape (M, 2N, d)
        Embeddings of M manifolds; rows ``2j`` and ``2j+1`` form a positive pair.
    tau : float
        Temperature.
    normalize : bool
        Use cosine similarity (unit-normalised rows) instead of raw dot products.

    Returns
    -------
    losses : ndarray, shape (M,)
        Mean anchor loss of each manifold.
    grad : ndarray, shape (M, 2N, d)
        Gradient of ``losses.sum()`` with respect to ``z``.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    if numba_enabled():
        return _dcl_batch_numba(z, float(tau), bool(normalize))
    return _dcl_batch_numpy(z, float(tau), bool(normalize))
