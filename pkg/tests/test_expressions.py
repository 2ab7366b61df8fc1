import numpy as np
import pytest

from mdem.expressions import ExpressionError, parse, vector_jets

PTS = np.array([[0.0, 0.0], [0.5, 2.0], [1.5, -1.0]])


@pytest.mark.parametrize("text,fn", [
    ("0", lambda x, y: 0 * x),
    ("2.5", lambda x, y: 2.5 + 0 * x),
    ("X", lambda x, y: x),
    ("y", lambda x, y: y),
    ("X * Y - 3 * Y", lambda x, y: x * y - 3 * y),
    ("(X + 1) ** 2 / 4", lambda x, y: (x + 1) ** 2 / 4),
    ("-X + 1e-3", lambda x, y: -x + 1e-3),
])
def test_values(text, fn):
    np.testing.assert_allclose(parse(text)(PTS), fn(PTS[:, 0], PTS[:, 1]), rtol=1e-15)


def test_exact_derivatives():
    j = parse("X * X * Y + 2 * Y").jet(PTS)
    x, y = PTS[:, 0], PTS[:, 1]
    np.testing.assert_allclose(j.dx, 2 * x * y)
    np.testing.assert_allclose(j.dy, x * x + 2)
    np.testing.assert_allclose(j.dxx, 2 * y)
    np.testing.assert_allclose(j.dxy, 2 * x)
    np.testing.assert_allclose(j.dyy, 0 * x)


def test_division_by_constants_only():
    j = parse("X * X / (2 * 2)").jet(PTS)
    np.testing.assert_allclose(j.dxx, 0.5 + 0 * PTS[:, 0])
    with pytest.raises(ExpressionError, match="division"):
        parse("1 / (X + 2)")


def test_vector_jets_shapes():
    v, g, h = vector_jets(("X", "Y", "X * Y"), PTS)
    assert v.shape == (3, 3) and g.shape == (2, 3, 3) and h.shape == (3, 3, 3)
    np.testing.assert_array_equal(g[0, :, 2], PTS[:, 1])


@pytest.mark.parametrize("text", ["sin(X)", "Z", "X ** Y", "import os", "X if Y else 1", "", "X +", "__a__"])
def test_rejects_invalid(text):
    with pytest.raises(ExpressionError):
        parse(text)
