import itertools
import math

import numpy as np
import pytest

from noisy_meta import kernels
from noisy_meta._accel import HAVE_NUMBA, numba_enabled

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _perm_reference(q):
    n = q.shape[0]
    return sum(math.prod(q[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n)))


def test_env_flag_toggles(monkeypatch):
    monkeypatch.setenv("NOISY_META_DISABLE_NUMBA", "1")
    assert not numba_enabled()
    monkeypatch.setenv("NOISY_META_DISABLE_NUMBA", "0")
    assert numba_enabled() == HAVE_NUMBA


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7])
def test_permanent_routes_agree(n, rng):
    q = rng.uniform(-1, 1, (n, n))
    ref = _perm_reference(q)
    assert kernels._permanent_bruteforce_numpy(q) == pytest.approx(ref, abs=1e-12)
    assert kernels._permanent_ryser_numpy(q) == pytest.approx(ref, abs=1e-12)


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 4, 6, 8])
def test_permanent_numba_matches_numpy(n, rng):
    q = rng.uniform(0, 1, (n, n))
    assert kernels._permanent_bruteforce_numba(q) == pytest.approx(kernels._permanent_bruteforce_numpy(q), rel=1e-12)
    assert kernels._permanent_ryser_numba(q) == pytest.approx(kernels._permanent_ryser_numpy(q), rel=1e-12)


def test_permanent_known_values():
    assert kernels.permanent_ryser(np.ones((4, 4))) == pytest.approx(24.0)
    assert kernels.permanent_bruteforce(np.eye(5)) == pytest.approx(1.0)
    assert kernels.permanent_ryser(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(10.0)


def test_count_distinct_rows(rng, monkeypatch):
    c = np.array([[0, 1, 2], [0, 0, 1], [2, 1, 0], [3, 3, 3]])
    assert kernels.count_distinct_rows(c) == 2
    monkeypatch.setenv("NOISY_META_DISABLE_NUMBA", "1")
    assert kernels.count_distinct_rows(c) == 2
    assert kernels.count_distinct_rows(c[:, :1]) == 4


@needs_numba
def test_count_distinct_rows_twins(rng):
    c = rng.integers(0, 5, (20000, 4))
    assert kernels._count_distinct_rows_numba(c) == kernels._count_distinct_rows_numpy(c)


@needs_numba
@pytest.mark.parametrize("normalize", [True, False])
def test_dcl_twins(rng, normalize):
    z = rng.standard_normal((4, 10, 6))
    l1, g1 = kernels._dcl_batch_numba(z, 0.3, normalize)
    l2, g2 = kernels._dcl_batch_numpy(z, 0.3, normalize)
    np.testing.assert_allclose(l1, l2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-10, atol=1e-12)


def test_dcl_dispatch_respects_flag(rng, monkeypatch):
    z = rng.standard_normal((2, 6, 3))
    a = kernels.dcl_batch(z, 0.1)
    monkeypatch.setenv("NOISY_META_DISABLE_NUMBA", "1")
    b = kernels.dcl_batch(z, 0.1)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)
