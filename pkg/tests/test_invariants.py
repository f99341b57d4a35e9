import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zsc.invariants import (
    PINCHING_MAX, Eigenvalues, invariants_from_eigenvalues, k_bound, normalize_orientation,
    normalize_orientation_array, p1_spectrum, p1_spectrum_array, pinching_array, symmetric_functions,
)

from conftest import circle_of_constraint

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
triples = st.tuples(finite, finite, finite)


def test_schwarzschild_type_triple():
    inv = invariants_from_eigenvalues(Eigenvalues(1.0, 1.0, -0.5))
    assert (inv.R, inv.H, inv.K) == (0.0, 1.5, -0.5)
    assert inv.pinching == pytest.approx(4.0 / 27.0, abs=1e-15)
    assert inv.p1_spectrum == (0.5, 0.5, 2.0)


def test_pinching_absent_when_H_vanishes():
    assert invariants_from_eigenvalues(Eigenvalues(1.0, -1.0, 0.0)).pinching is None
    assert np.isnan(pinching_array([[1.0, -1.0, 0.0]])[0])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        Eigenvalues(1.0, math.nan, 0.0)
    with pytest.raises(ValueError):
        Eigenvalues(math.inf, 0.0, 0.0)


@given(triples)
def test_squared_norm_identity(t):
    inv = invariants_from_eigenvalues(Eigenvalues.of(t))
    scale = max(1.0, inv.normA2)
    assert abs(inv.H**2 - (inv.normA2 + 2.0 * inv.R)) <= 1e-12 * scale * 4


@given(triples)
def test_newton_inequality(t):
    inv = invariants_from_eigenvalues(Eigenvalues.of(t))
    assert inv.H * inv.K <= inv.R**2 / 2.0 + 1e-12 * max(1.0, inv.normA2) ** 2


@given(triples)
def test_k_bound(t):
    inv = invariants_from_eigenvalues(Eigenvalues.of(t))
    assert inv.K <= float(k_bound(inv.normA)) * (1 + 1e-12) + 1e-300


@given(triples)
def test_orientation_normalization(t):
    ev = normalize_orientation(Eigenvalues.of(t))
    assert sum(ev) >= 0.0
    assert abs(abs(ev.lambda1) - abs(t[0])) == 0.0


@given(st.floats(min_value=-math.pi, max_value=math.pi))
def test_p1_positive_on_zero_scalar_curvature(theta):
    lam = circle_of_constraint(theta)
    if abs(np.prod(lam)) < 1e-12:
        return
    for sign in (1.0, -1.0):
        ev = normalize_orientation(Eigenvalues.of(sign * lam))
        assert min(p1_spectrum(ev)) > 0.0


def test_vectorized_helpers_match_scalar(rng):
    lams = rng.normal(size=(500, 3))
    H, R, K = symmetric_functions(lams)
    for i in range(0, 500, 50):
        inv = invariants_from_eigenvalues(Eigenvalues.of(lams[i]))
        assert (H[i], R[i], K[i]) == pytest.approx((inv.H, inv.R, inv.K), rel=1e-14, abs=1e-14)
        assert tuple(p1_spectrum_array(lams[i])) == pytest.approx(inv.p1_spectrum, abs=1e-14)
    assert np.all(normalize_orientation_array(lams).sum(axis=1) >= 0)


def test_pinching_never_exceeds_max_on_constraint():
    lam = circle_of_constraint(np.linspace(-math.pi, math.pi, 200001))
    assert np.nanmax(pinching_array(lam)) <= PINCHING_MAX + 1e-15
