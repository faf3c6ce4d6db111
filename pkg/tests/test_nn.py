import numpy as np
import pytest

from noisy_meta.nn import (NetworkSpec, backward, ce_loss_and_grad, cross_entropy,
                           finite_diff_grad, flatten, forward, hvp, init_network, input_grad,
                           sgd_step, unflatten)

from helpers import rel_err


def test_param_count_and_zero_bias():
    spec = NetworkSpec((2, 3))
    theta = init_network(spec, 7)
    assert theta.shape == (9,)
    assert np.all(theta[-3:] == 0.0)
    assert np.array_equal(theta, init_network(spec, 7))
    assert NetworkSpec((4, 8, 16), head_width=5).num_params == 269


def test_init_scale():
    spec = NetworkSpec((100, 50))
    W, _ = unflatten(init_network(spec, 0), spec)[0]
    assert np.abs(W).max() <= 0.1
    assert abs(W.mean()) < 0.01


@pytest.mark.parametrize("widths", [(1,), (3, 0, 2)])
def test_invalid_spec(widths):
    with pytest.raises(ValueError):
        NetworkSpec(widths)


def test_flatten_roundtrip(rng):
    spec = NetworkSpec((4, 7, 3), "tanh", 2)
    theta = rng.standard_normal(spec.num_params)
    assert np.array_equal(flatten(unflatten(theta, spec)), theta)


def test_forward_trivial_cases(rng):
    spec = NetworkSpec((3, 5, 4), "relu")
    out, _ = forward(np.zeros(spec.num_params), spec, rng.standard_normal((6, 3)))
    assert np.all(out == 0.0)

    ident = NetworkSpec((3, 3))
    theta = flatten([(np.eye(3), np.zeros(3))])
    x = rng.standard_normal((4, 3))
    np.testing.assert_array_equal(forward(theta, ident, x)[0], x)

    spec = NetworkSpec((2, 8, 6))
    out, _ = forward(init_network(spec, 1), spec, rng.standard_normal((4, 2)))
    assert out.shape == (4, 6)


def test_forward_rejects_bad_dim():
    spec = NetworkSpec((3, 4))
    with pytest.raises(ValueError):
        forward(init_network(spec, 0), spec, np.zeros((2, 5)))


def test_backward_zero_grad(rng):
    spec = NetworkSpec((3, 5, 2), head_width=4)
    _, tr = forward(init_network(spec, 0), spec, rng.standard_normal((5, 3)))
    assert not np.any(backward(tr, np.zeros((5, 4))))
    with pytest.raises(ValueError):
        backward(tr, np.zeros((5, 3)))


def test_backward_single_linear_sum(rng):
    spec = NetworkSpec((3, 2))
    x = rng.standard_normal((5, 3))
    _, tr = forward(init_network(spec, 0), spec, x)
    gW, gb = unflatten(backward(tr, np.ones((5, 2))), spec)[0]
    # d sum(xW + b) / dW = column sums of x outer ones
    np.testing.assert_allclose(gW, np.outer(x.sum(axis=0), np.ones(2)))
    np.testing.assert_allclose(gb, [5.0, 5.0])


@pytest.mark.parametrize("act", ["relu", "tanh"])
@pytest.mark.parametrize("head", [None, 3])
def test_backward_matches_finite_differences(act, head):
    for seed in range(5):
        rng = np.random.default_rng(seed)
        spec = NetworkSpec((4, 6, 5), act, head)
        theta = init_network(spec, seed) + 0.1 * rng.standard_normal(spec.num_params)
        x = rng.standard_normal((7, 4))
        w = rng.standard_normal((7, spec.output_dim))

        def f(p):
            return float(np.sum(w * forward(p, spec, x)[0]))

        _, tr = forward(theta, spec, x)
        assert rel_err(backward(tr, w), finite_diff_grad(f, theta, 1e-5)) <= 1e-4


def test_input_grad_matches_finite_differences(rng):
    spec = NetworkSpec((3, 5, 2), "tanh")
    theta = init_network(spec, 0)
    x = rng.standard_normal((1, 3))
    w = rng.standard_normal((1, 2))
    _, tr = forward(theta, spec, x)
    fd = finite_diff_grad(lambda xx: float(np.sum(w * forward(theta, spec, xx.reshape(1, 3))[0])),
                          x.ravel())
    assert rel_err(input_grad(tr, w).ravel(), fd) <= 1e-6


def test_cross_entropy_values():
    loss, g = cross_entropy(np.zeros((2, 5)), np.array([0, 3]))
    assert loss == pytest.approx(np.log(5))
    expected = np.full((2, 5), 0.2)
    expected[0, 0] -= 1
    expected[1, 3] -= 1
    np.testing.assert_allclose(g, expected / 2)

    loss, _ = cross_entropy(np.array([[1e6, 0.0, 0.0]]), np.array([0]))
    assert loss == pytest.approx(0.0, abs=1e-12)

    loss, _ = cross_entropy(np.array([[1.0, 0.0]]), np.array([0]))
    assert loss == pytest.approx(np.log1p(np.exp(-1.0)), abs=1e-12)
    assert loss == pytest.approx(0.3133, abs=1e-4)


def test_cross_entropy_label_range():
    with pytest.raises(ValueError):
        cross_entropy(np.zeros((1, 3)), np.array([3]))


def test_cross_entropy_grad_fd(rng):
    logits = rng.standard_normal((4, 3))
    labels = np.array([0, 2, 1, 1])
    _, g = cross_entropy(logits, labels)
    fd = finite_diff_grad(lambda z: cross_entropy(z.reshape(4, 3), labels)[0], logits.ravel())
    assert rel_err(g.ravel(), fd) <= 1e-6


def test_sgd_step():
    np.testing.assert_array_equal(sgd_step([1.0, 1.0], [1.0, -1.0], 0.5), [0.5, 1.5])
    p = np.array([3.0, 4.0])
    np.testing.assert_array_equal(sgd_step(p, [7.0, 7.0], 0.0), p)
    with pytest.raises(ValueError):
        sgd_step([1.0], [1.0, 2.0], 0.1)


def test_sgd_monotone_on_quadratic(rng):
    A = np.diag([1.0, 4.0, 10.0])
    p = rng.standard_normal(3)
    losses = []
    for _ in range(50):
        losses.append(0.5 * p @ A @ p)
        p = sgd_step(p, A @ p, 0.15)  # below 2 / max curvature
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_finite_diff_simple():
    np.testing.assert_array_equal(finite_diff_grad(lambda p: 3.0, np.ones(4)), np.zeros(4))
    g = finite_diff_grad(lambda p: 0.5 * p @ p, np.array([3.0, -2.0]), 1e-5)
    np.testing.assert_allclose(g, [3.0, -2.0], atol=1e-8)


def test_hvp_quadratic(rng):
    M = rng.standard_normal((4, 4))
    A = M @ M.T
    v = rng.standard_normal(4)
    out = hvp(lambda p: A @ p, rng.standard_normal(4), v, 1e-4)
    np.testing.assert_allclose(out, A @ v, atol=1e-6)
    assert not np.any(hvp(lambda p: A @ p, np.ones(4), np.zeros(4)))


def test_hvp_linear_in_v(rng):
    spec = NetworkSpec((3, 6, 4), "tanh", 3)
    theta = init_network(spec, 2)
    x = rng.standard_normal((9, 3))
    y = rng.integers(0, 3, 9)

    def g(p):
        return ce_loss_and_grad(p, spec, x, y)[1]

    v1 = rng.standard_normal(spec.num_params)
    v2 = rng.standard_normal(spec.num_params)
    lhs = hvp(g, theta, v1 + v2, 1e-4)
    rhs = hvp(g, theta, v1, 1e-4) + hvp(g, theta, v2, 1e-4)
    assert rel_err(lhs, rhs) <= 1e-3


def test_forward_deterministic(rng):
    spec = NetworkSpec((3, 5, 2))
    theta = init_network(spec, 0)
    x = rng.standard_normal((4, 3))
    assert np.array_equal(forward(theta, spec, x)[0], forward(theta, spec, x)[0])
