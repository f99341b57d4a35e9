import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from zsc.constants import proposition_constants
from zsc.errors import DeltaTooLarge, DomainError, DomainExceeded, NonRadialUnsupported
from zsc.immersion.radial import profile_of
from zsc.invariants import PINCHING_MAX
from zsc.stability import (
    DESTABILIZING, corollary_p_window, instability_search, parametric_bump, piecewise_linear_radial,
    quadratic_form_q1, sobolev_check, sobolev_crossover, ssy_corollary_check, ssy_cutoff,
)


@pytest.fixture(scope="module")
def consts():
    return proposition_constants(PINCHING_MAX, 0.01, c0=16.0)


def _schwarzschild_q1_oracle(model, f):
    """Q1 by scipy.quad in the profile parameter with closed-form curvatures."""
    def integrand(t):
        F = 1.0 + t * t / 4.0
        a = F**-1.5
        rho = float(model.reference_radius(t))
        dv = 4.0 * math.pi * F * F * math.sqrt(1.0 + t * t / 4.0)
        return (2.0 * a * float(f.derivative(rho)) ** 2 - 1.5 * a**3 * float(f(rho)) ** 2) * dv

    inv = profile_of(model).inverse_arc
    T = float(inv(np.array([f.support]))[0])
    kinks = [float(inv(np.array([k]))[0]) for k in f.kinks if 0 < k < f.support]
    return quad(integrand, 0.0, T, epsrel=1e-12, limit=400, points=kinks)[0]


@pytest.mark.parametrize("f", [parametric_bump(3.0, 1.0), ssy_cutoff(2.0),
                               piecewise_linear_radial([0.0, 1.0, 4.0], [1.0, 2.0, 0.0])])
def test_q1_matches_quad_oracle(schw, f):
    rep = quadratic_form_q1(schw, f)
    assert rep.q1_value == pytest.approx(_schwarzschild_q1_oracle(schw, f), rel=1e-8)
    assert rep.q1_value == pytest.approx(rep.gradient_term + rep.curvature_term)


def test_q1_cylinder_closed_form(circle):
    # sphere average of <P1 d_rho, d_rho> is 2/3 on the unit circle cylinder
    for r in (0.5, 1.0, 1.5):
        assert quadratic_form_q1(circle, ssy_cutoff(r)).q1_value == pytest.approx(56 * math.pi * r / 9, rel=1e-10)


@given(st.floats(0.0, 20.0), st.floats(0.2, 10.0), st.floats(-3.0, 3.0))
def test_cylinder_stable_for_bumps(center, width, amplitude):
    rep = quadratic_form_q1(_CIRCLE, parametric_bump(center, width, amplitude))
    assert rep.q1_value >= -1e-12


@given(st.lists(st.floats(-5.0, 5.0), min_size=1, max_size=5), st.floats(0.5, 10.0))
def test_graph_stable_for_piecewise_linear(values, span):
    knots = np.linspace(0.0, span, len(values) + 1)
    f = piecewise_linear_radial(knots, list(values) + [0.0])
    assert quadratic_form_q1(_GRAPH, f).q1_value >= -1e-12


def test_instability_certificate(schw):
    rep = instability_search(schw, "bump", budget=2000, seed=0)
    assert rep.verdict == DESTABILIZING
    assert rep.q1_value < 0 and abs(rep.q1_value) > 10 * rep.error
    again = instability_search(schw, "bump", budget=2000, seed=0)
    assert again.q1_value == rep.q1_value


def test_search_rejects_bad_input(schw):
    with pytest.raises(DomainError):
        instability_search(schw, "bump", budget=10)
    with pytest.raises(DomainError):
        instability_search(schw, "sine", budget=200)


def test_test_function_errors(schw):
    with pytest.raises(NonRadialUnsupported):
        quadratic_form_q1(schw, lambda rho: rho)
    with pytest.raises(DomainExceeded):
        quadratic_form_q1(schw, ssy_cutoff(1e4))
    with pytest.raises(DomainError):
        piecewise_linear_radial([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        piecewise_linear_radial([1.0, 0.5], [1.0, 0.0])
    with pytest.raises(DomainError):
        parametric_bump(1.0, 0.0)
    with pytest.raises(DomainError):
        ssy_cutoff(-1.0)


def test_sobolev_mechanism(schw, consts):
    delta = 0.5 * consts.delta_max()
    cross = sobolev_crossover(schw, consts, delta)
    lhs = [r.lhs for r in cross.reports]
    rhs = [r.rhs for r in cross.reports]
    assert np.all(np.diff(rhs) < 0)
    assert np.all(np.diff(lhs) >= -1e-9 * np.abs(lhs[1:]))
    assert cross.slope > 0 and cross.extrapolated and cross.r_star > 40.0
    # rhs is the annulus part of rhs_bound
    assert all(r.rhs <= r.rhs_bound for r in cross.reports)


def test_sobolev_delta_guard(schw, consts):
    with pytest.raises(DeltaTooLarge):
        sobolev_check(schw, consts, 5.0, consts.delta_max() * 1.01)


def test_corollary_growth(schw):
    lo, hi = corollary_p_window(16.0)
    p = 0.5 * (lo + hi)
    reps = [ssy_corollary_check(schw, p, r) for r in (5.0, 40.0)]
    assert reps[1].ratio / reps[0].ratio >= 10.0
    with pytest.raises(DomainError):
        ssy_corollary_check(schw, hi + 1.0, 5.0)


def test_corollary_window():
    # p = (5 + 2q)/2 with q in (0, q_max)
    lo, hi = corollary_p_window(16.0)
    assert lo == 2.5
    assert hi == pytest.approx(2.5 + math.sqrt(1.0 / 513.0))
    assert corollary_p_window(16.0, 1)[1] == pytest.approx(2.5 + math.sqrt(1.0 / 33.0))


from zsc.immersion.models import circle_cylinder as _cc, graph as _g  # noqa: E402

_CIRCLE = _cc()
_GRAPH = _g("quadratic")
