import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from zsc.constants import (
    beta_window, c0_of_c, constant_chain, g_ratios, max_pinching_ratio, project_to_constraint,
    proposition_constants, q_window, sample_constraint_set, window_factor,
)
from zsc.errors import DomainError, EmptyConstraintSet
from zsc.invariants import PINCHING_MAX, symmetric_functions

from conftest import circle_of_constraint


def _pinching(theta):
    H, _, K = symmetric_functions(circle_of_constraint(theta))
    return -K / H**3


def _ratio(theta):
    return np.max(g_ratios(circle_of_constraint(theta)).reshape(np.shape(theta) + (9,)), axis=-1)


@pytest.fixture(scope="module")
def brute():
    theta = np.linspace(-math.pi, math.pi, 2_000_001)
    return theta, _pinching(theta), _ratio(theta)


def test_max_pinching_against_brute_force(brute):
    theta, pinch, _ = brute
    best = max_pinching_ratio()
    assert abs(best.value - PINCHING_MAX) < 1e-12
    assert abs(pinch.max() - best.value) < 1e-5
    # argmax is a permutation of (2, 2, -1)/3
    target = np.array(sorted(best.argmax))
    assert np.max(np.abs(target - np.array([-1.0, 2.0, 2.0]) / 3.0)) < 1e-6


def test_c0_at_extreme_pinching_matches_oracle(brute):
    theta, pinch, _ = brute
    i = int(np.argmax(pinch))
    h = theta[1] - theta[0]
    res = minimize_scalar(lambda t: -_pinching(t), bounds=(theta[i] - h, theta[i] + h), method="bounded",
                          options={"xatol": 1e-13})
    oracle = float(_ratio(res.x))
    assert abs(oracle - 16.0) < 1e-6
    assert abs(c0_of_c(PINCHING_MAX) - oracle) < 1e-6


@pytest.mark.parametrize("c", [0.05, 0.1, 0.14])
def test_c0_below_extreme_matches_brute_force(brute, c):
    _, pinch, ratio = brute
    oracle = float(ratio[pinch >= c].max())
    assert c0_of_c(c) == pytest.approx(oracle, rel=1e-4)


def test_c0_domain():
    with pytest.raises(DomainError):
        c0_of_c(0.2)
    with pytest.raises(DomainError):
        c0_of_c(0.0)


def test_projection_lands_on_constraint(rng):
    x, ok = project_to_constraint(rng.normal(size=(1000, 3)))
    _, R, _ = symmetric_functions(x[ok])
    assert ok.mean() > 0.9
    assert np.max(np.abs(R)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(x, axis=1) - 1.0)) < 1e-14


def test_sample_constraint_set_floor():
    with pytest.raises(EmptyConstraintSet):
        sample_constraint_set(100, c_floor=0.2)
    pts = sample_constraint_set(100, c_floor=PINCHING_MAX)
    assert pts and all(abs(s.invariants_at_point.pinching - PINCHING_MAX) < 1e-12 for s in pts)


def test_window_exponents():
    assert window_factor(16.0) == pytest.approx(1.0 / 513.0)
    assert window_factor(16.0, 1) == pytest.approx(1.0 / 33.0)
    with pytest.raises(DomainError):
        window_factor(16.0, 3)
    assert q_window(16.0) == pytest.approx(math.sqrt(1.0 / 513.0))


@given(st.floats(min_value=1e-4, max_value=1.0 - 1e-4), st.floats(min_value=1e-4, max_value=1.0 - 1e-4))
def test_admissible_draws_keep_C1_below_one(uq, ub):
    c0 = 16.0
    q = uq * q_window(c0)
    _, bmax = beta_window(q, c0)
    beta = ub * bmax
    chain = constant_chain(c0, q, beta)
    w = window_factor(c0)
    assert q * q + beta * q + 2 * beta < w
    assert chain["C1"] < 1.0
    assert chain["C2"] > 0 and chain["C3"] > 0


def test_proposition_constants_chain():
    k = proposition_constants(PINCHING_MAX, 0.01, c0=16.0)
    assert k.C1 < 1.0 and k.beta == pytest.approx(0.5 * k.beta_max)
    assert k.p == pytest.approx(2.51)
    assert k.pinching_margin(0.5 * k.delta_max()) > 0.0
    assert k.pinching_margin(k.delta_max()) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        proposition_constants(PINCHING_MAX, 0.5, c0=16.0)
    with pytest.raises(DomainError):
        proposition_constants(PINCHING_MAX, 0.01, beta=1.0, c0=16.0)
