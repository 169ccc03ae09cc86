import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parakernel.errors import InputError
from parakernel.fields import FourierField
from parakernel.horizon import (
    HorizonParams,
    beta_lower_bound,
    certified_horizon,
    empirical_ratio_diagnostic,
)
from parakernel.wkb import expand


def test_reference_values():
    assert beta_lower_bound(HorizonParams(1, 1, 1.0, 1.0)).beta == 1 / 9
    assert beta_lower_bound(HorizonParams(1, 1, 1.0, 1.0, variable_diffusion=True)).beta == 1 / 18


@given(st.floats(0.1, 10))
def test_inverse_square_scaling_in_R(R):
    base = beta_lower_bound(HorizonParams(2, 2, 0.7, 1.0)).beta
    assert math.isclose(beta_lower_bound(HorizonParams(2, 2, 0.7, R)).beta, base / R ** 2,
                        rel_tol=1e-15)


def test_drift_free_is_unbounded():
    b = beta_lower_bound(HorizonParams(1, 0, 0.0, 1.0))
    assert b.beta == math.inf and b.drift_free and b.marker


def test_invalid_parameters():
    with pytest.raises(InputError):
        HorizonParams(0, 1, 1.0, 1.0)
    with pytest.raises(InputError):
        HorizonParams(1, 1, 1.0, 0.0)


def test_certified_horizon_from_fields():
    f = FourierField(1, [[0, 1.0]], [np.sqrt(2)], [np.sqrt(2)])
    assert math.isclose(certified_horizon([f], 1.0), 1 / 9)


def test_diagnostic_flags_divergence_far_beyond_horizon():
    f = FourierField(1, [[0, 2.0]], [1.0], [0.5])
    e = expand([f], [0.0], K=10, D=32)
    pts = np.linspace(-1, 1, 5)[:, None]
    beta = certified_horizon([f], 1.0)
    assert empirical_ratio_diagnostic(e, 0.9 * beta, pts)["converging"]
    assert not empirical_ratio_diagnostic(e, 50.0, pts)["converging"]


def test_diagnostic_needs_order_two(ou_drift):
    with pytest.raises(InputError):
        empirical_ratio_diagnostic(expand(ou_drift, [0.0], K=1), 0.1, [[0.0]])
