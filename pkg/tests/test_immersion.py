import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from zsc.errors import ConfigInvalid, DomainExceeded, NotApplicable
from zsc.immersion.chart import chart_batch, chart_sample, fd_weights
from zsc.immersion.checks import (
    codazzi_check, gradient_squares_residual, l1_convergence, l1_identity, verify_prop21_pointwise,
)
from zsc.immersion.models import interior_points, model_from_dict, schwarzschild
from zsc.immersion.radial import ball_volume, geodesic_radius, growth_exponent, intrinsic_distance, profile_of
from zsc.invariants import PINCHING_MAX, pinching_array
from zsc.oracles import meridian_radius, monte_carlo_ball_volume


def _f(m, t):
    return m + t * t / (4 * m)


# -- finite differences ---------------------------------------------------------


@given(st.lists(st.floats(min_value=-3, max_value=3), min_size=7, max_size=7))
def test_fd_weights_exact_on_sextics(coef):
    x = np.arange(-3, 4)
    W = fd_weights(tuple(x))
    p = np.polynomial.Polynomial(coef)
    for d in range(4):
        exact = p.deriv(d)(0.0) if d else p(0.0)
        assert W[d] @ p(x) == pytest.approx(exact, abs=1e-9 * (1 + np.abs(coef).sum()))


def test_fd_weights_one_sided():
    W = fd_weights((0, 1, 2, 3, 4, 5, 6))
    x = np.arange(7.0)
    assert W[1] @ x**3 == pytest.approx(0.0, abs=1e-10)
    assert W[3] @ x**3 == pytest.approx(6.0)


# -- chart ------------------------------------------------------------------------


def test_schwarzschild_principal_curvatures(schw):
    P = interior_points(schw, 1000, seed=3)
    b = chart_batch(schw, P)
    lam = np.sort(b.eigenvalues, axis=1)
    a = 1.0 / _f(1.0, P[:, 0]) ** 1.5
    ref = np.sort(np.stack([a, a, -0.5 * a], axis=1), axis=1)
    assert np.max(np.abs(lam - ref)) < 1e-8
    R = lam[:, 0] * lam[:, 1] + lam[:, 0] * lam[:, 2] + lam[:, 1] * lam[:, 2]
    assert np.max(np.abs(R)) < 1e-10
    assert np.max(np.abs(pinching_array(lam) - PINCHING_MAX)) < 1e-10


def test_schwarzschild_metric_and_normal(schw):
    p = np.array([2.0, 1.0, 0.3])
    s = chart_sample(schw, p)
    f, fp = _f(1.0, 2.0), 1.0
    assert np.allclose(s.metric, np.diag([1 + fp**2, f * f, f * f * math.sin(1.0) ** 2]), atol=1e-10)
    assert np.linalg.norm(s.normal) == pytest.approx(1.0, abs=1e-12)
    X = chart_batch(schw, p[None, :]).tangents[0]
    assert np.max(np.abs(X @ s.normal)) < 1e-10


def test_cylinder_curvature_and_flat_connection(circle):
    P = interior_points(circle, 200, seed=1)
    b = chart_batch(circle, P)
    assert np.max(np.abs(np.sort(b.eigenvalues, axis=1) - [0.0, 0.0, 1.0])) < 1e-10
    s = chart_sample(circle, P[0])
    assert np.max(np.abs(s.christoffel)) < 1e-10
    assert np.max(np.abs(s.gradA_components)) < 1e-8


def test_graph_curvature_matches_plane_curve(quad_graph):
    P = interior_points(quad_graph, 200, seed=2)
    lam = np.sort(chart_batch(quad_graph, P).eigenvalues, axis=1)
    t = P[:, 2]
    k = 2.0 / (1 + 4 * t * t) ** 1.5
    assert np.max(np.abs(np.abs(lam).max(axis=1) - k)) < 1e-8


def test_codazzi_symmetry(schw):
    for p in interior_points(schw, 20, seed=5):
        asym, trunc = codazzi_check(schw, p)
        assert asym < 1e-8 and trunc < 1e-6


def test_gradient_squares_on_zero_scalar_curvature(schw):
    for p in interior_points(schw, 50, seed=6):
        assert gradient_squares_residual(schw, p) < 1e-6


# -- identities -------------------------------------------------------------------


def test_prop21_pointwise(schw):
    reps = [verify_prop21_pointwise(schw, p, 16.0) for p in interior_points(schw, 100, seed=7)]
    assert all(r.holds for r in reps)
    assert min(r.slack for r in reps) > -1e-5


def test_l1_identity_and_order(schw):
    res = [l1_identity(schw, p).residual for p in interior_points(schw, 100, seed=8)]
    assert max(res) < 1e-5
    order, seq = l1_convergence(schw, np.array([3.0, 1.0, 0.5]))
    assert 1.7 <= order <= 2.3
    assert np.all(np.diff(seq) < 0)


def test_l1_identity_on_cylinder_is_trivial(circle):
    rep = l1_identity(circle, np.array([0.5, -0.5, 1.0]))
    assert abs(rep.lhs) < 1e-9 and abs(rep.rhs) < 1e-9


# -- radial reduction -------------------------------------------------------------


def test_geodesic_radius_closed_form(schw):
    t = np.array([0.0, 0.5, 3.0, 20.0, 55.0])
    rho = geodesic_radius(schw, np.stack([t, np.full(5, 1.0), np.zeros(5)], axis=1))
    assert np.allclose(rho, schw.reference_radius(t), rtol=1e-10, atol=1e-12)
    assert rho[3] == pytest.approx(meridian_radius(schw, 20.0), rel=1e-10)


def test_ball_volume_quadrature_oracle(schw):
    for r in (0.5, 5.0, 30.0):
        T = profile_of(schw).inverse_arc(np.array([r]))[0]
        oracle = quad(lambda t: 4 * math.pi * _f(1, t) ** 2 * math.sqrt(1 + (t / 2) ** 2), 0, T,
                      epsrel=1e-13, limit=200)[0]
        assert ball_volume(schw, r) == pytest.approx(oracle, rel=1e-9)


def test_flat_ball_volumes(circle, quad_graph):
    assert ball_volume(circle, 2.0) == pytest.approx(4 / 3 * math.pi * 8, rel=1e-9)
    # past half the circumference the ball is cut by the slab |s| <= pi
    r = 5.0
    assert ball_volume(circle, r) == pytest.approx(math.pi * (2 * math.pi * r * r - 2 * math.pi**3 / 3), rel=1e-8)
    assert ball_volume(quad_graph, 7.0) == pytest.approx(4 / 3 * math.pi * 343, rel=1e-9)


def test_ball_volume_monte_carlo(schw, circle):
    for model, r in ((schw, 10.0), (circle, 3.0)):
        est, se = monte_carlo_ball_volume(model, r, n=400_000, seed=1)
        assert abs(est - ball_volume(model, r)) < max(4 * se, 1e-3 * est)


def test_growth_exponent(schw, circle):
    alpha, _ = growth_exponent(schw, np.geomspace(5, 50, 10))
    assert abs(alpha - 3.0) < 0.1
    alpha, _ = growth_exponent(circle, np.geomspace(20, 200, 6))
    assert abs(alpha - 2.0) < 0.05


def test_ball_leaving_chart(schw):
    with pytest.raises(DomainExceeded):
        ball_volume(schw, 1e4)


def test_intrinsic_distance(schw, circle):
    p = np.array([[1.0, 0.4, 0.2]])
    q = np.array([[4.0, 0.4, 0.2]])
    assert intrinsic_distance(schw, p, q)[0] == pytest.approx(
        float(schw.reference_radius(4.0) - schw.reference_radius(1.0)), rel=1e-10)
    with pytest.raises(NotApplicable):
        intrinsic_distance(schw, p, np.array([[4.0, 0.5, 0.2]]))
    # the circle's arc wraps: angle 3 and -3 are 2 pi - 6 apart
    d = intrinsic_distance(circle, np.array([[0, 0, 3.0]]), np.array([[0, 0, -3.0]]))[0]
    assert d == pytest.approx(2 * math.pi - 6.0, rel=1e-9)


# -- models -----------------------------------------------------------------------


def test_interior_points_deterministic(schw):
    a = interior_points(schw, 50, seed=9)
    b = interior_points(schw, 50, seed=9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, interior_points(schw, 50, seed=10))


def test_model_from_dict():
    m = model_from_dict({"kind": "rotational", "params": {"m": 2.0}})
    assert m.m == 2.0
    assert model_from_dict(m.to_dict()).to_dict() == m.to_dict()
    with pytest.raises(ConfigInvalid):
        model_from_dict({"kind": "torus"})
    with pytest.raises(ConfigInvalid):
        model_from_dict({"kind": "graph", "params": {"F": "cubic"}})
    with pytest.raises(ConfigInvalid):
        schwarzschild(m=-1.0)


@given(st.floats(min_value=0.2, max_value=5.0))
def test_schwarzschild_scaling(m):
    # curvatures scale like 1/m under homothety
    model = schwarzschild(m=m)
    p = np.array([0.7 * m, 1.0, 0.0])
    lam = np.sort(chart_sample(model, p).eigenvalues.as_array())
    a = math.sqrt(m) / _f(m, 0.7 * m) ** 1.5
    assert np.allclose(lam, sorted([a, a, -0.5 * a]), rtol=1e-8)
