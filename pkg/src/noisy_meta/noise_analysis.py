"""Probability that a Man sample's N ways carry N distinct ground truths.

Under symmetric noise the way-``i`` draw has ground truth ``j`` with probability
``q_ij`` (``p`` on the diagonal, ``(1-p)/(N-1)`` elsewhere). A clean selection
assigns every way a different class, i.e. a permutation ``sigma``, so the
probability is the permanent ``sum_sigma prod_i q_{i, sigma(i)}``. For N = 2 this
gives ``p^2 + (1-p)^2``.

Note: summing ``trace(P Q)`` over all N! permutation matrices ``P`` is not a
probability. Q is row-stochastic, so that sum equals N! for every ``p``. The
permanent is the quantity that reproduces ``p^2 + (1-p)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from . import kernels

MAX_EXACT_N = 10


@dataclass(frozen=True)
class ConfusionMatrixQ:
    N: int
    p: float

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")

    @classmethod
    def from_epsilon(cls, N: int, epsilon: float) -> "ConfusionMatrixQ":
        return cls(N, 1.0 - epsilon)

    def matrix(self) -> np.ndarray:
        off = (1.0 - self.p) / (self.N - 1)
        q = np.full((self.N, self.N), off)
        np.fill_diagonal(q, self.p)
        return q


def clean_selection_probability(q: ConfusionMatrixQ) -> float:
    """Permanent of Q via Ryser's formula (N <= 10)."""
    if q.N > MAX_EXACT_N:
        raise ValueError(f"N={q.N} exceeds {MAX_EXACT_N}; use monte_carlo_clean_prob")
    return kernels.permanent_ryser(q.matrix())


def clean_selection_bruteforce(q: ConfusionMatrixQ) -> float:
    """Same quantity by explicit enumeration of all N! permutations."""
    if q.N > MAX_EXACT_N:
        raise ValueError(f"N={q.N} exceeds {MAX_EXACT_N}")
    return kernels.permanent_bruteforce(q.matrix())


def clean_selection_closed_form(q: ConfusionMatrixQ) -> float:
    """``per(aI + bJ) = sum_k C(N,k) a^k b^(N-k) (N-k)!`` with ``b`` the off-diagonal."""
    N = q.N
    b = (1.0 - q.p) / (N - 1)
    a = q.p - b
    return float(sum(comb(N, k) * a ** k * b ** (N - k) * factorial(N - k) for k in range(N + 1)))


def simulate_draws(N: int, epsilon: float, trials: int, rng) -> np.ndarray:
    """Ground truths ``(trials, N)`` of one draw per way from an unbounded balanced
    split whose labels were corrupted independently at rate ``epsilon``."""
    way = np.arange(N)
    keep = rng.random((trials, N)) >= epsilon
    other = rng.integers(0, N - 1, size=(trials, N))
    other = other + (other >= way)
    return np.where(keep, way, other)


def monte_carlo_clean_prob(N: int, epsilon: float, trials: int, seed,
                           chunk: int = 1 << 17) -> tuple[float, float]:
    """Frequency of clean selections and its binomial standard error."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if N > 62:
        raise ValueError("N must be <= 62")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        hits += kernels.count_distinct_rows(simulate_draws(N, epsilon, n, rng))
        done += n
    est = hits / trials
    return est, float(np.sqrt(est * (1.0 - est) / trials))


def analysis_table(Ns=(2, 3, 5), epsilons=(0.0, 0.3, 0.6), trials: int = 1_000_000, seed=0) -> list[dict]:
    rows = []
    for i, N in enumerate(Ns):
        for j, eps in enumerate(epsilons):
            exact = clean_selection_probability(ConfusionMatrixQ.from_epsilon(N, eps))
            est, se = monte_carlo_clean_prob(N, eps, trials, [int(seed), i, j])
            rows.append({"N": N, "epsilon": eps, "analytic": exact, "monte_carlo": est, "stderr": se})
    return rows
