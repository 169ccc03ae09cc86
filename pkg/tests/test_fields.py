import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parakernel.errors import InputError, UnsupportedRepresentationError
from parakernel.fields import FourierField, PolyField, field_from_json, fourier_bounds, is_zero


def random_fourier(rng, n, terms=3, time=False):
    freqs = rng.integers(-2, 3, size=(terms, n + 1)).astype(float)
    if not time:
        freqs[:, 0] = 0
    return FourierField(n, freqs, rng.uniform(-1, 1, terms), rng.uniform(-1, 1, terms))


def test_fourier_evaluate_matches_formula():
    f = FourierField(1, [[0, 2.0], [0, 1.0]], [0.5, 0.0], [0.0, -1.0])
    x = np.array([[0.3], [-1.1]])
    want = 0.5 * np.sin(2 * x[:, 0]) - np.cos(x[:, 0])
    assert np.allclose(f.evaluate(0.0, x), want)


def test_time_frequency_needs_time_dependence():
    with pytest.raises(InputError):
        FourierField(1, [[1.0, 1.0]], [1.0], [0.0], time_dependent=False)
    assert FourierField(1, [[1.0, 1.0]], [1.0], [0.0]).time_dependent


@pytest.mark.parametrize("n", [1, 2])
def test_localization_reproduces_taylor_values(rng, n):
    f = random_fourier(rng, n)
    y = rng.uniform(-0.5, 0.5, n)
    P = f.localize(y, D=12)
    x = y + 0.05 * rng.normal(size=n)
    assert np.isclose(P(x), f.evaluate(0.0, x), atol=1e-12)


def test_time_layers_match_time_derivatives(rng):
    f = random_fourier(rng, 1, time=True)
    layers = f.localize([0.2], t0=0.1, D=8, time_degree=4)
    dt = 0.01
    x = np.array([0.23])
    approx = sum(p(x) * dt ** l for l, p in enumerate(layers))
    assert np.isclose(approx, f.evaluate(0.1 + dt, x), atol=1e-10)


def test_poly_localization_is_exact():
    p = PolyField(2, {(2, 0): 1.0, (0, 1): -3.0, (1, 1): 0.5})
    loc = p.localize([0.4, -0.2], D=2)
    x = np.array([1.1, 0.7])
    assert np.isclose(loc(x), p.evaluate(0.0, x))


def test_from_taylor_divides_by_factorial():
    p = PolyField.from_taylor(1, {(2,): 2.0})
    assert p.terms == {(2,): 1.0}


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_restrict_freezes_coordinates(a, x1, x2):
    f = FourierField(2, [[0, 1.0, 2.0], [0, 0.0, 1.0]], [a, 1.0], [0.5, -a])
    g = f.restrict({1: x2})
    assert np.isclose(g.evaluate(0.0, [x1]), f.evaluate(0.0, [x1, x2]), atol=1e-12)


def test_compose_linear(rng):
    f = random_fourier(rng, 2)
    L = np.array([[1.0, 0.3], [0.0, 2.0]])
    z = rng.normal(size=2)
    assert np.isclose(f.compose_linear(L).evaluate(0.0, z), f.evaluate(0.0, L @ z))
    p = PolyField(2, {(2, 0): 1.0, (1, 1): -1.0})
    assert np.isclose(p.compose_linear(L).evaluate(0.0, z), p.evaluate(0.0, L @ z))


def test_fourier_bounds():
    f = FourierField(2, [[0, 1.0, -2.0], [0, 0.5, 0.0]], [1.0, 0.0], [1.0, 0.2])
    b = fourier_bounds([f])
    assert b["m0"] == [0, 1.0, 2.0] or b["m0"] == [0.0, 1.0, 2.0]
    assert b["abs_m0"] == 2
    assert np.isclose(b["ebar"], 0.5 * np.sqrt(2))
    assert b["term_count_bound"] == 5
    with pytest.raises(UnsupportedRepresentationError):
        fourier_bounds([PolyField(1, {(1,): 1.0})])


def test_json_round_trip(rng):
    f = random_fourier(rng, 2)
    g = field_from_json(json.loads(json.dumps(f.to_json())))
    x = rng.normal(size=(4, 2))
    assert np.allclose(f.evaluate(0.0, x), g.evaluate(0.0, x))
    p = PolyField(2, {(1, 0): -1.0, (0, 3): 0.25})
    q = field_from_json(p.to_json())
    assert q.terms == p.terms


def test_json_rejects_unknown_keys():
    with pytest.raises(InputError):
        field_from_json({"type": "poly", "coeffs": [], "dim": 1, "colour": "red"})
    with pytest.raises(InputError):
        field_from_json({"type": "spline"})


def test_is_zero():
    assert is_zero(FourierField.zero(2))
    assert is_zero(PolyField.zero(1))
    assert not is_zero(FourierField.constant(1.0, 1))
