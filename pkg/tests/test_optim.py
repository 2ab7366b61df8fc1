import numpy as np
import pytest

from mdem.optim import adam, lbfgs


def quadratic(target):
    def fun(x):
        d = x - target
        return float(d @ d), 2 * d, None
    return fun


def rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return float(f), g, None


def test_adam_quadratic(rng):
    target = rng.standard_normal(10)
    res = adam(quadratic(target), np.zeros(10), 1000, lr=1e-2)
    assert res.f < 1e-4 or quadratic(target)(res.x)[0] < 1e-4


def test_adam_single_step_is_lr():
    res = adam(lambda x: (float(np.sum(x)), np.ones_like(x), None), np.zeros(4), 1, lr=1e-3)
    np.testing.assert_allclose(res.x, -1e-3, rtol=1e-6)


def test_adam_callback_sees_loss_before_update():
    seen = []
    adam(quadratic(np.ones(2)), np.zeros(2), 3, callback=lambda k, x, f, aux: seen.append((k, f)))
    assert [k for k, _ in seen] == [1, 2, 3] and seen[0][1] == 2.0


def test_lbfgs_rosenbrock():
    res = lbfgs(rosenbrock, np.array([-1.2, 1.0]), 200, tol_change=0.0, tol_grad=1e-7)
    assert res.n_iter < 200
    assert np.linalg.norm(rosenbrock(res.x)[1]) < 1e-6
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)


def test_lbfgs_losses_non_increasing(rng):
    A = rng.standard_normal((30, 30))
    H = A @ A.T + np.eye(30)
    b = rng.standard_normal(30)

    def fun(x):
        return float(0.5 * x @ H @ x - b @ x), H @ x - b, None

    res = lbfgs(fun, np.zeros(30), 300)
    assert np.all(np.diff(res.losses) <= 0)
    np.testing.assert_allclose(res.x, np.linalg.solve(H, b), atol=1e-6)


def test_lbfgs_relative_change_stop():
    res = lbfgs(quadratic(np.ones(3)), np.zeros(3), 1000, tol_change=1e-9, patience=10, tol_grad=0.0)
    assert res.converged and res.n_iter < 1000


def test_lbfgs_survives_non_finite_regions():
    def fun(x):
        if x[0] > 0.5:
            return np.inf, np.full_like(x, np.nan), None
        return quadratic(np.array([2.0]))(x)

    res = lbfgs(fun, np.array([0.0]), 50)
    assert np.isfinite(res.f) and res.x[0] <= 0.5
    assert np.all(np.diff(res.losses) <= 0)


def test_lbfgs_is_deterministic(rng):
    x0 = rng.standard_normal(2)
    a = lbfgs(rosenbrock, x0, 50)
    b = lbfgs(rosenbrock, x0, 50)
    assert a.losses == b.losses
