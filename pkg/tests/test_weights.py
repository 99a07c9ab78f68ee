import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgfdm.errors import InvalidArgumentError
from sgfdm.stars import Star
from sgfdm.weights import WeightSpec, _cubic_spline, star_weights, weight

POT = WeightSpec("potential", 3)
EXP = WeightSpec("exponential", 2)
SPL = WeightSpec("cubic_spline")


def test_potential_values():
    assert weight(POT, 1.0) == 1.0
    assert weight(POT, 0.5) == 8.0


def test_spline_values():
    assert weight(SPL, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert weight(SPL, 0.5, 1.0) == pytest.approx(1 / 6, rel=1e-14)


def test_exponential_limit():
    ds = [1e-1, 1e-2, 1e-3, 1e-4]
    ws = [weight(EXP, d) for d in ds]
    assert all(a < b for a, b in zip(ws, ws[1:]))
    assert ws[-1] == pytest.approx(1.0, abs=1e-7)
    assert all(w < 1 for w in ws)


def test_invalid():
    with pytest.raises(InvalidArgumentError):
        weight(POT, 0.0)
    with pytest.raises(InvalidArgumentError):
        WeightSpec("potential", 0)
    with pytest.raises(InvalidArgumentError):
        WeightSpec("exponential", -1)
    with pytest.raises(InvalidArgumentError):
        WeightSpec("gaussian")


def test_star_weights():
    s = Star.from_offsets([-0.5, 0.5])
    np.testing.assert_array_equal(star_weights(POT, s), [8.0, 8.0])
    s2 = Star.from_offsets([0.1, -0.3, 0.6])
    w = star_weights(SPL, s2)
    assert w[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.all(w[:-1] > 0)


def test_spline_continuity():
    inner = lambda s: 2 / 3 - 4 * s**2 + 4 * s**3
    outer = lambda s: 4 / 3 - 4 * s + 4 * s**2 - 4 / 3 * s**3
    assert abs(inner(0.5) - outer(0.5)) < 1e-12
    assert abs(outer(1.0)) < 1e-12
    assert _cubic_spline(1.5) == 0.0


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0),
       st.sampled_from([POT, EXP, WeightSpec("potential", 1.5), WeightSpec("exponential", 0.5)]))
def test_monotone_strict(a, b, spec):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    assert weight(spec, lo) > weight(spec, hi) > 0


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_spline_monotone_positive(a, b):
    lo, hi = min(a, b), max(a, b)
    assert weight(SPL, lo, 1.0) >= weight(SPL, hi, 1.0)
    if hi < 1.0:
        assert weight(SPL, hi, 1.0) > 0
