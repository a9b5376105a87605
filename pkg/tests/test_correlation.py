import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitplot.correlation import (CorrelationStructure, coefficients, components,
                                   patterned_matrix)
from splitplot.errors import ValidationError


@st.composite
def structures(draw):
    s2 = draw(st.floats(0.01, 50.0))
    w = draw(st.floats(0.0, 0.95))
    b = draw(st.floats(0.0, 1.0)) * w
    return CorrelationStructure(s2, w, b)


@given(structures())
@settings(max_examples=300)
def test_components_sum_exactly(corr):
    a, b, e = components(corr)
    assert min(a, b, e) >= 0
    assert a + b + e == corr.sigma2_total


def test_component_values():
    c = CorrelationStructure(2.0, 0.24, 0.192)
    assert c.sigma_a2 == pytest.approx(0.384, rel=1e-14)
    assert c.sigma_b2 == pytest.approx(0.096, rel=1e-12)
    assert c.sigma_e2 == pytest.approx(1.52, rel=1e-14)


@pytest.mark.parametrize("args, fragment", [
    ((1.0, 0.1, 0.2), "bpicc <= wpicc"),
    ((1.0, 0.2, -0.1), "0 <= bpicc"),
    ((1.0, 1.0, 0.5), "wpicc < 1"),
    ((0.0, 0.1, 0.1), "sigma2_total"),
])
def test_invalid_iccs_name_the_inequality(args, fragment):
    with pytest.raises(ValidationError, match=fragment):
        CorrelationStructure(*args)


def test_slack_snaps_to_boundary():
    c = CorrelationStructure(1.0, 0.2, 0.2 + 1e-14)
    assert c.bpicc == c.wpicc
    assert c.sigma_b2 == 0.0


def test_from_components_roundtrip():
    c = CorrelationStructure.from_components(0.3, 0.1, 0.6)
    assert c.wpicc == pytest.approx(0.4)
    assert c.bpicc == pytest.approx(0.3)


def test_cluster_covariance_entries():
    c = CorrelationStructure(1.0, 0.24, 0.192)
    V = c.cluster_covariance([2, 3])
    assert V.shape == (5, 5)
    assert np.allclose(np.diag(V), 1.0)
    assert V[0, 1] == pytest.approx(0.24)
    assert V[0, 2] == pytest.approx(0.192)
    assert V[2, 4] == pytest.approx(0.24)


@pytest.mark.parametrize("m, T", [(1, 1), (1, 4), (3, 2), (5, 6)])
@pytest.mark.parametrize("icc", [(0.0, 0.0), (0.2, 0.2), (0.24, 0.192), (0.6, 0.05)])
def test_patterned_inverse(m, T, icc):
    k = coefficients(CorrelationStructure(1.0, *icc), m, T)
    A = patterned_matrix(k.a1, k.b1, k.c1, m, T)
    B = patterned_matrix(k.a2, k.b2, k.c2, m, T)
    assert np.max(np.abs(A @ B - np.eye(m * T))) < 1e-12


@given(structures(), st.integers(1, 8), st.integers(1, 6))
@settings(max_examples=100)
def test_sum_coefficients_are_total_inverse_sums(corr, m, T):
    # a3, b3, c3 are the sum of diagonal, within-period and all entries of the inverse / sigma2
    k = coefficients(corr, m, T)
    inv = patterned_matrix(k.a2, k.b2, k.c2, m, T)
    total = inv.sum()
    assert math.isclose(k.a3 + k.b3 + k.c3, total, rel_tol=1e-9, abs_tol=1e-9)
