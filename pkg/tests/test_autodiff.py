import numpy as np
import pytest

from mdem import autodiff as ad
from mdem.autodiff import UnsupportedOrder, forward_with_input_derivatives, loss_gradient
from mdem.network import NetworkParams, init_network


def fd_jacobian(params, x, h=1e-5):
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        zp = forward_with_input_derivatives(params, x + e).value
        zm = forward_with_input_derivatives(params, x - e).value
        cols.append((zp - zm) / (2 * h))
    return np.stack(cols, -1)


def test_affine_layer_jacobian_and_hessian(rng):
    W = rng.standard_normal((3, 2))
    p = NetworkParams([W], [rng.standard_normal(3)], "identity")
    b = forward_with_input_derivatives(p, np.array([0.3, -0.2]), order=2)
    np.testing.assert_allclose(b.jacobian, W, atol=1e-15)
    assert np.all(b.hessian == 0.0)


def test_deep_network_jacobian_matches_fd(rng):
    p = init_network([2] + [60] * 6 + [2], seed=3)
    x = rng.uniform(0, 1, (5, 2))
    b = forward_with_input_derivatives(p, x)
    J = np.stack([fd_jacobian(p, xi) for xi in x])
    assert np.linalg.norm(b.jacobian - J) / np.linalg.norm(J) < 1e-5


def test_hessian_matches_fd_of_jacobian_and_is_symmetric(rng):
    W1 = rng.standard_normal((8, 2))
    p = NetworkParams([W1, W1.T.copy()], [np.zeros(8), np.zeros(2)], "tanh")
    for x in (np.zeros(2), np.array([0.4, -0.7])):
        b = forward_with_input_derivatives(p, x, order=2)
        h = 1e-5
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            dJ = (forward_with_input_derivatives(p, x + e).jacobian
                  - forward_with_input_derivatives(p, x - e).jacobian) / (2 * h)
            np.testing.assert_allclose(b.hessian[:, :, j], dJ, rtol=1e-6, atol=1e-8)
        np.testing.assert_array_equal(b.hessian, np.swapaxes(b.hessian, -1, -2))


def test_order_two_reduces_to_order_one(rng):
    p = init_network([2, 16, 16, 6], seed=1)
    x = rng.uniform(0, 1, (7, 2))
    a = forward_with_input_derivatives(p, x, 1)
    b = forward_with_input_derivatives(p, x, 2)
    np.testing.assert_array_equal(a.value, b.value)
    np.testing.assert_array_equal(a.jacobian, b.jacobian)
    assert a.hessian is None


def test_relu_has_no_second_order():
    p = init_network([2, 4, 2], "relu", seed=0)
    forward_with_input_derivatives(p, np.zeros(2), 1)
    with pytest.raises(UnsupportedOrder):
        forward_with_input_derivatives(p, np.zeros(2), 2)
    with pytest.raises(UnsupportedOrder):
        forward_with_input_derivatives(init_network([2, 4, 2]), np.zeros(2), 3)


def test_linear_quadratic_form_gradient(rng):
    W = rng.standard_normal((2, 2))
    b = np.zeros(2)
    x = np.array([0.7, -1.3])
    p = NetworkParams([W], [b], "identity")

    def loss(q):
        z, _, _ = ad.mlp_jets(q.weights, q.biases, q.activation, x[None, :], 1)
        return ad.vsum(z * z)

    val, g = loss_gradient(p, loss)
    z = W @ x
    assert val == pytest.approx(z @ z)
    np.testing.assert_allclose(g.weights[0], 2 * np.outer(z, x), rtol=1e-13)


def test_gradient_through_spatial_derivatives_matches_fd(rng):
    p = init_network([2, 8, 8, 2], seed=5)
    x = rng.uniform(0, 1, (6, 2))

    def loss(q):
        z, dz, d2z = ad.mlp_jets(q.weights, q.biases, q.activation, x, 2)
        return ad.vsum(ad.tanh(dz) * dz) + ad.vsum(d2z * d2z) + ad.mean(z)

    def value_at(theta):
        return float(ad.value(loss(p.unflatten(theta))))

    _, g = loss_gradient(p, loss)
    g = g.to_vector()
    theta = p.to_vector()
    fd = np.zeros_like(theta)
    for k in range(len(theta)):
        h = 1e-6 * max(1.0, abs(theta[k]))
        e = np.zeros_like(theta)
        e[k] = h
        fd[k] = (value_at(theta + e) - value_at(theta - e)) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_traversal_orders_agree(rng):
    p = init_network([2, 8, 8, 6], seed=2)
    x = rng.uniform(0, 1, (9, 2))

    def loss(q):
        z, dz, _ = ad.mlp_jets(q.weights, q.biases, q.activation, x, 1)
        return ad.vsum(z * z) + ad.vsum(ad.exp(-dz * dz))

    _, g1 = loss_gradient(p, loss, order="tape")
    _, g2 = loss_gradient(p, loss, order="dfs")
    a, b = g1.to_vector(), g2.to_vector()
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(a)


def test_parameter_free_loss_has_zero_gradient():
    p = init_network([2, 4, 2], seed=0)
    val, g = loss_gradient(p, lambda q: 3.0)
    assert val == 3.0 and not np.any(g.to_vector())


def test_unused_parameter_gets_zero_gradient(rng):
    p = init_network([2, 4, 6], seed=0)
    x = rng.uniform(0, 1, (3, 2))

    def loss(q):
        z, _, _ = ad.mlp_jets(q.weights, q.biases, q.activation, x, 1)
        return ad.vsum(z[:, 0:2] * z[:, 0:2])  # stress outputs unused

    _, g = loss_gradient(p, loss)
    assert not np.any(g.weights[-1][2:6]) and not np.any(g.biases[-1][2:6])
    assert np.any(g.weights[-1][0:2])


def test_elementwise_ops_and_broadcasting(rng):
    tape = ad.Tape()
    a = tape.variable(rng.uniform(0.5, 2.0, (3, 4)))
    b = tape.variable(rng.uniform(0.5, 2.0, (4,)))
    out = ad.vsum(ad.log(a) * b / (a + 1.0) + ad.sqrt(a) ** 3 - ad.softplus(-a) + ad.sigmoid(b))
    ga, gb = tape.gradient(out, [a, b])

    def f(A, B):
        return np.sum(np.log(A) * B / (A + 1) + np.sqrt(A) ** 3 - np.log1p(np.exp(A * -1.0)) + 1 / (1 + np.exp(-B)))

    h = 1e-6
    A, B = a.value, b.value
    for idx in [(0, 0), (2, 3), (1, 2)]:
        e = np.zeros_like(A)
        e[idx] = h
        assert ga[idx] == pytest.approx((f(A + e, B) - f(A - e, B)) / (2 * h), rel=1e-6)
    e = np.zeros_like(B)
    e[1] = h
    assert gb[1] == pytest.approx((f(A, B + e) - f(A, B - e)) / (2 * h), rel=1e-6)


def test_where_concat_and_indexing(rng):
    tape = ad.Tape()
    a = tape.variable(rng.standard_normal(6))
    mask = np.array([True, False, True, False, False, True])
    out = ad.vsum(ad.where(mask, a * a, 2.0 * a)) + ad.vsum(ad.concat([a[0:2], a[[5, 5]]]))
    (g,) = tape.gradient(out, [a])
    expect = np.where(mask, 2 * a.value, 2.0)
    expect[0] += 1
    expect[1] += 1
    expect[5] += 2
    np.testing.assert_allclose(g, expect, rtol=1e-14)
