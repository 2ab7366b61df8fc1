import numpy as np
import pytest

from mdem import autodiff as ad
from mdem.network import (BadArchitecture, NetworkParams, OutputTransform, evaluate, init_network, load_params,
                          save_params, transformed_jets, zero_network)


def constant_output(z):
    """Network whose raw output is the constant vector ``z``."""
    z = np.asarray(z, dtype=float)
    return NetworkParams([np.zeros((len(z), 2))], [z.copy()], "identity")


def test_parameter_count_and_widths():
    p = init_network([2] + [60] * 6 + [2], seed=0)
    assert p.n_params == 2 * 60 + 60 + 5 * (60 * 60 + 60) + 60 * 2 + 2 == 18602
    assert len(p.weights) == 7 and p.widths == [2] + [60] * 6 + [2]
    q = init_network([2] + [60] * 6 + [6], seed=0)
    assert q.n_outputs == 6 and q.has_stress_head


def test_init_is_reproducible_glorot():
    a, b = init_network([2, 30, 30, 2], seed=7), init_network([2, 30, 30, 2], seed=7)
    np.testing.assert_array_equal(a.to_vector(), b.to_vector())
    c = init_network([2, 30, 30, 2], seed=8)
    assert not np.array_equal(a.to_vector(), c.to_vector())
    assert np.abs(a.weights[1]).max() <= np.sqrt(6.0 / 60)
    assert all(not np.any(bb) for bb in a.biases)


@pytest.mark.parametrize("widths", [[3, 4, 2], [2], [2, 0, 2]])
def test_bad_architecture(widths):
    with pytest.raises(BadArchitecture):
        init_network(widths)


def test_unflatten_round_trip_and_size_check():
    p = init_network([2, 5, 6], seed=1)
    v = p.to_vector()
    np.testing.assert_array_equal(p.unflatten(v).to_vector(), v)
    with pytest.raises(BadArchitecture):
        p.unflatten(np.zeros(len(v) + 1))


def test_hadamard_transform_example():
    tr = OutputTransform(u_scale=("X", "Y"))
    ev = evaluate(constant_output([3.0, 4.0]), tr, np.array([0.0, 0.5]))
    np.testing.assert_array_equal(ev.u, [0.0, 2.0])


def test_clamped_scalar_transform_pins_left_edge():
    tr = OutputTransform(u_scale=("X", "X"))
    ev = evaluate(constant_output([3.0, 4.0]), tr, np.array([[0.0, 0.5], [0.5, 0.0]]))
    np.testing.assert_array_equal(ev.u, [[0.0, 0.0], [1.5, 2.0]])


def test_beam_transform_example():
    tr = OutputTransform(u_scale=("X * Y", "Y"))
    ev = evaluate(constant_output([5.0, 7.0]), tr, np.array([1.0, 2.0]))
    np.testing.assert_array_equal(ev.u, [10.0, 14.0])


def test_zero_network_gives_identity_deformation():
    p = zero_network([2, 8, 8, 2])
    ev = evaluate(p, OutputTransform(u_scale=("X", "Y")), np.random.default_rng(0).uniform(0, 1, (10, 2)))
    assert not np.any(ev.u) and not np.any(ev.grad_u)


@pytest.mark.parametrize("scale,zero_lines", [
    (("X", "X"), [("x", 0.0, (0, 1))]),
    (("X * Y", "Y"), [("x", 0.0, (0,)), ("y", 0.0, (0, 1))]),
])
def test_transforms_vanish_exactly_on_constraint_lines(rng, scale, zero_lines):
    p = init_network([2, 16, 16, 2], seed=4)
    tr = OutputTransform(u_scale=scale)
    t = rng.uniform(0, 1, 25)
    for axis, val, comps in zero_lines:
        pts = np.column_stack([np.full(25, val), t]) if axis == "x" else np.column_stack([t, np.full(25, val)])
        ev = evaluate(p, tr, pts)
        for c in comps:
            assert np.all(ev.u[:, c] == 0.0)


def test_grad_u_matches_finite_differences(rng):
    p = init_network([2, 20, 20, 6], seed=9)
    tr = OutputTransform(u_shift=("0.1 * X * X", "0"), u_scale=("X * Y", "Y + 1"), p_scale=("10",) * 4)
    x = rng.uniform(0, 1, (8, 2))
    ev = evaluate(p, tr, x, order=2)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        du = (evaluate(p, tr, x + e).u - evaluate(p, tr, x - e).u) / (2 * h)
        np.testing.assert_allclose(ev.grad_u[:, :, j], du, rtol=1e-5, atol=1e-8)
        dg = (evaluate(p, tr, x + e).grad_u - evaluate(p, tr, x - e).grad_u) / (2 * h)
        np.testing.assert_allclose(ev.hess_u[:, :, :, j], dg, rtol=1e-5, atol=1e-6)
    assert ev.p_hat.shape == (8, 2, 2)
    ev2 = evaluate(p, tr, x)
    np.testing.assert_array_equal(ev2.u, ev.u)


def test_stress_head_transform():
    p = constant_output([0, 0, 1.0, 2.0, 3.0, 4.0])
    tr = OutputTransform(p_shift=("1", "0", "0", "0"), p_scale=("10", "10", "10", "X"))
    ev = evaluate(p, tr, np.array([0.5, 0.5]))
    np.testing.assert_array_equal(ev.p_hat, [[11.0, 20.0], [30.0, 2.0]])


def test_trained_mode_passes_network_output_through():
    tr = OutputTransform(mode="trained", u_scale=("X", "X"))
    ev = evaluate(constant_output([3.0, 4.0]), tr, np.array([0.0, 0.5]))
    np.testing.assert_array_equal(ev.u, [3.0, 4.0])
    with pytest.raises(ValueError):
        OutputTransform(mode="learned")


def test_checkpoint_round_trip(tmp_path):
    p = init_network([2, 7, 5, 6], "softplus", seed=11)
    path = tmp_path / "params.txt"
    save_params(path, p)
    q = load_params(path)
    assert q.activation == "softplus" and q.widths == p.widths
    np.testing.assert_array_equal(q.to_vector(), p.to_vector())
    assert path.read_text().splitlines()[0] == "mdem-network-params v1"


def test_checkpoint_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("something else\n")
    with pytest.raises(ValueError, match="not a network checkpoint"):
        load_params(bad)
    bad.write_text("mdem-network-params v9\nactivation tanh\nwidths 2 2\n")
    with pytest.raises(ValueError, match="version"):
        load_params(bad)


def test_transformed_jets_accept_tape_parameters(rng):
    p = init_network([2, 6, 2], seed=0)
    tape = ad.Tape()
    theta = tape.variable(p.to_vector())
    tr = OutputTransform(u_scale=("X", "X")).at(rng.uniform(0, 1, (4, 2)))
    jets = transformed_jets(p.unflatten(theta), tr, 2)
    (g,) = tape.gradient(ad.vsum(jets.d2u * jets.d2u) + ad.vsum(jets.u), [theta])
    assert g.shape == theta.value.shape and np.all(np.isfinite(g))
