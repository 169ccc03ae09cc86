import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parakernel import _kernels
from parakernel.errors import InputError
from parakernel.polyalg import (
    LocalPolynomial,
    basis,
    gradient_dot,
    laplacian,
    monomial_ray_integral,
    multiply,
    ray_integral,
    recenter,
)

coef = st.floats(-3, 3, allow_nan=False)


def poly(dim, D, values, y=None):
    y = np.zeros(dim) if y is None else y
    B = basis(dim, D)
    c = np.zeros(B.size)
    c[: len(values)] = values[: B.size]
    return LocalPolynomial(dim, y, D, c)


@st.composite
def poly_pairs(draw, max_dim=2, max_D=4):
    dim = draw(st.integers(1, max_dim))
    D = draw(st.integers(1, max_D))
    size = basis(dim, D).size
    a = draw(st.lists(coef, min_size=size, max_size=size))
    b = draw(st.lists(coef, min_size=size, max_size=size))
    return poly(dim, D, a), poly(dim, D, b)


def test_basis_is_graded_prefix():
    small, big = basis(2, 2), basis(2, 4)
    assert big.exps[: small.size].tolist() == small.exps.tolist()
    assert np.all(np.diff(big.degs) >= 0)


def test_product_truncates_at_cap():
    one_plus = LocalPolynomial.from_terms({(0,): 1.0, (1,): 1.0}, 1, [0.0], 2)
    one_minus = LocalPolynomial.from_terms({(0,): 1.0, (1,): -1.0}, 1, [0.0], 2)
    assert multiply(one_plus, one_minus).terms() == {(0,): 1.0, (2,): -1.0}
    low = [LocalPolynomial.from_terms(p.terms(), 1, [0.0], 1) for p in (one_plus, one_minus)]
    prod = multiply(*low)
    assert prod.terms() == {(0,): 1.0}
    assert prod.truncation_loss == 1


@given(poly_pairs())
def test_product_commutes(pq):
    p, q = pq
    assert multiply(p, q).allclose(multiply(q, p), atol=1e-12)


@given(poly_pairs(max_D=3), st.floats(-1, 1), st.floats(-1, 1))
def test_product_matches_pointwise_when_nothing_dropped(pq, a, b):
    p, q = pq
    D = 2 * p.degree_cap
    lift = lambda r: LocalPolynomial.from_terms(r.terms(), r.dim, r.base_point, D)
    x = np.array([a, b][: p.dim])
    assert np.isclose(multiply(lift(p), lift(q))(x), p(x) * q(x), rtol=1e-10, atol=1e-10)


@given(poly_pairs(), st.floats(-1, 1), st.floats(-1, 1))
def test_recenter_preserves_values(pq, a, b):
    p, _ = pq
    new = np.array([a, b][: p.dim])
    moved = recenter(p, new)
    x = new + 0.3
    assert np.isclose(moved(x), p(x), rtol=1e-9, atol=1e-9)


def test_recenter_square():
    sq = LocalPolynomial.from_terms({(2,): 1.0}, 1, [0.0], 2)
    assert recenter(sq, [1.0]).terms() == {(0,): 1.0, (1,): 2.0, (2,): 1.0}


@given(poly_pairs(), st.integers(1, 5))
def test_ray_integral_solves_transport_equation(pq, k):
    R, _ = pq
    c = ray_integral(R, k)
    euler = LocalPolynomial(R.dim, R.base_point, R.degree_cap, R.basis.euler(c.coeffs))
    assert (k * c + euler).allclose(R, atol=1e-12)


def test_ray_integral_rejects_order_zero():
    with pytest.raises(InputError):
        ray_integral(LocalPolynomial.constant(1.0, 1, [0.0], 2), 0)


def test_monomial_ray_integral_example():
    got = monomial_ray_integral((2,), [1.0], 1, 2)
    expected = {(0,): 1.0, (1,): 1.0, (2,): 1 / 3}
    assert got.terms().keys() == expected.keys()
    assert all(np.isclose(got.terms()[g], v) for g, v in expected.items())


def test_laplacian_and_gradient_dot():
    p = LocalPolynomial.from_terms({(2, 0): 1.0, (0, 2): 3.0, (1, 1): 2.0}, 2, [0.0, 0.0], 3)
    assert laplacian(p).terms() == {(0, 0): 8.0}
    x1 = LocalPolynomial.from_terms({(1, 0): 1.0}, 2, [0.0, 0.0], 3)
    # grad p . grad x1 = dp/dx1 = 2 x1 + 2 x2
    assert gradient_dot(p, x1).terms() == {(1, 0): 2.0, (0, 1): 2.0}


def test_mismatched_operands_raise():
    a = LocalPolynomial.constant(1.0, 1, [0.0], 2)
    with pytest.raises(InputError):
        multiply(a, LocalPolynomial.constant(1.0, 1, [0.5], 2))
    with pytest.raises(InputError):
        multiply(a, LocalPolynomial.constant(1.0, 1, [0.0], 3))


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba disabled")
def test_numba_and_numpy_products_agree(rng):
    B = basis(3, 6)
    P = rng.normal(size=(7, B.size))
    Q = rng.normal(size=(7, B.size))
    a = _kernels.mul_rows_numpy(P, Q, B.mul_a, B.mul_b, B.mul_c, B.size)
    b = _kernels.mul_rows_numba(P, Q, B.mul_a, B.mul_b, B.mul_c, B.size)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_dropped_counts_match_loop(rng):
    B = basis(2, 5)
    P = rng.normal(size=(6, B.size)) * (rng.random((6, B.size)) < 0.5)
    Q = rng.normal(size=(6, B.size)) * (rng.random((6, B.size)) < 0.5)
    want = _kernels._dropped_py(P, Q, B.degs, 5)
    assert np.array_equal(_kernels.dropped_numpy(P, Q, B.degs, 5), want)
    assert np.array_equal(_kernels.dropped_products(P, Q, B.degs, 5), want)
