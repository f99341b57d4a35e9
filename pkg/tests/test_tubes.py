import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zsc.errors import DomainError, SubfocalUndefined
from zsc.immersion.models import graph, interior_points
from zsc.invariants import k_bound
from zsc.oracles import monte_carlo_tube_volume
from zsc.tubes import (
    constant_tube, euclidean_ball_bound, euclidean_vs_intrinsic, k_bound_check, self_intersection_test,
    subfocal_tube, theorem_c_tube, tube_volume,
)


def _circle_tube_oracle(h, r, two_sided=False):
    # B_r is a Euclidean 3-ball for r <= pi; the inward parallel sheets shrink by (1 - tau)
    ball = 4.0 / 3.0 * math.pi * r**3
    return ball * (2.0 * h if two_sided else h - 0.5 * h * h)


@pytest.mark.parametrize("h,r,two", [(0.3, 2.0, False), (0.9, 3.0, False), (0.4, 1.0, True)])
def test_circle_constant_tube_closed_form(circle, h, r, two):
    assert tube_volume(constant_tube(circle, h, r, two)) == pytest.approx(_circle_tube_oracle(h, r, two), rel=1e-10)


def test_circle_subfocal_equals_constant(circle):
    assert tube_volume(subfocal_tube(circle, 0.5, 3.0)) == pytest.approx(_circle_tube_oracle(0.5, 3.0), rel=1e-10)


def test_monte_carlo_circle_subfocal(circle):
    spec = subfocal_tube(circle, 0.5, 3.0)
    est, se = monte_carlo_tube_volume(spec, n=1_000_000, seed=0)
    vol = tube_volume(spec)
    assert abs(est - vol) / vol < 0.02
    assert abs(est - vol) < 5 * se


def test_monte_carlo_schwarzschild_subfocal(schw):
    spec = subfocal_tube(schw, 0.5, 5.0)
    est, se = monte_carlo_tube_volume(spec, n=1_000_000, seed=0)
    vol = tube_volume(spec)
    assert abs(est - vol) / vol < 0.02


def test_embedding_ladder_matches_focal_radius(circle):
    hs = np.linspace(0.2, 1.8, 10)
    verdicts = [self_intersection_test(constant_tube(circle, h, 3.5)).embedded for h in hs]
    assert verdicts == [bool(h < 1.0) for h in hs]


def test_witness_is_a_genuine_collision(circle):
    rep = self_intersection_test(constant_tube(circle, 1.5, 3.0))
    assert not rep.embedded
    w = rep.witness
    X = [np.array(x) for x in w["ambient"]]
    # recompute both tube points from the chart independently of the search
    pts = []
    for p, tau in zip(w["params"], w["tau"]):
        u, v, t = p
        base = np.array([u, v, math.cos(t), math.sin(t)])
        inward = -np.array([0.0, 0.0, math.cos(t), math.sin(t)])
        pts.append(base + tau * inward)
    assert np.linalg.norm(pts[0] - pts[1]) < 1e-6 * 10
    assert np.allclose(pts[0], X[0], atol=1e-9)
    assert all(0 <= tau <= 1.5 + 1e-12 for tau in w["tau"])
    assert w["intrinsic_separation_lower"] > 0.5


def test_subfocal_embedded(schw, circle):
    assert self_intersection_test(subfocal_tube(schw, 0.5, 5.0)).embedded
    assert self_intersection_test(subfocal_tube(circle, 0.5, 3.0)).embedded


def test_schwarzschild_thick_tube_not_embedded(schw):
    rep = self_intersection_test(constant_tube(schw, 2.0, 5.0))
    assert not rep.embedded and rep.witness["gap"] < 1e-6


def test_sampling_floor(circle):
    with pytest.raises(DomainError):
        self_intersection_test(constant_tube(circle, 0.5, 3.0), sampling=8)


def test_k_bound_on_charts(schw, quad_graph):
    for model in (schw, quad_graph):
        for p in interior_points(model, 200, seed=4):
            K, bound = k_bound_check(model, p)
            assert K <= bound * (1 + 1e-9) + 1e-15


def test_k_bound_random_triples(rng):
    lam = rng.normal(size=(100_000, 3)) * rng.lognormal(size=(100_000, 1))
    K = np.prod(lam, axis=1)
    assert np.all(K <= k_bound(np.linalg.norm(lam, axis=1)) * (1 + 1e-12))


def test_euclidean_below_intrinsic(schw, circle, quad_graph):
    for model in (schw, circle, quad_graph):
        assert euclidean_vs_intrinsic(model, n=2000, seed=0) <= 1e-9


def test_euclidean_ball_bound(schw, circle):
    for model in (schw, circle):
        V, bound, _ = euclidean_ball_bound(model, 0.5, 5.0)
        assert 0 < V <= bound
    with pytest.raises(SubfocalUndefined):
        euclidean_ball_bound(graph("zero"), 0.5, 5.0)


def test_subfocal_needs_curvature():
    with pytest.raises(SubfocalUndefined):
        tube_volume(subfocal_tube(graph("zero"), 0.5, 3.0))


def test_spec_validation(circle):
    for bad in (lambda: constant_tube(circle, 0.0, 1.0), lambda: subfocal_tube(circle, 1.5, 1.0),
                lambda: theorem_c_tube(circle, 0.5, 1.0, 0.0, 1.0), lambda: constant_tube(circle, 0.5, -1.0)):
        with pytest.raises(DomainError):
            bad()


@given(st.floats(0.05, 1.0), st.floats(0.1, 3.0), st.floats(0.1, 2.0))
def test_theorem_c_below_subfocal(b1, b2, delta):
    # h = min(b1/|A|, b2 rho^delta) never exceeds the subfocal radius b1/|A|
    vc = tube_volume(theorem_c_tube(_SCHW, b1, b2, delta, 4.0))
    vs = tube_volume(subfocal_tube(_SCHW, b1, 4.0))
    assert 0 < vc <= vs * (1 + 1e-9)


from zsc.immersion.models import schwarzschild as _s  # noqa: E402

_SCHW = _s()
