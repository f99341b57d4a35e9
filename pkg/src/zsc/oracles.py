"""Monte-Carlo volume oracles, independent of the chart engine.

These estimators use closed-form profile data (``profile``/``dprofile`` of
a rotational model, ``curve`` of a cylinder) rather than the
finite-difference chart, so they can check the quadrature results.

Every estimator returns ``(estimate, standard_error)`` and draws from
``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

import math

import numpy as np
import shapely
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from ._parallel import threads
from .immersion.chart import chart_sample
from .immersion.models import ROTATIONAL

CHUNK = 250_000


def _weighted_mean(values, box):
    n = values.size
    return box * float(values.mean()), box * float(values.std(ddof=1)) / math.sqrt(n)


def _meridian(model):
    """Closed-form meridian data of a rotational model: (f, f', f'')."""
    f, df = model.profile, model.dprofile

    def ddf(t, h=1e-5):
        return (df(t + h) - df(t - h)) / (2 * h)

    return f, df, ddf


def meridian_radius(model, t):
    """Arc length of the meridian from ``t = 0`` by adaptive quadrature."""
    _, df, _ = _meridian(model)
    return quad(lambda s: math.sqrt(1.0 + df(s) ** 2), 0.0, t, epsabs=0.0, epsrel=1e-13, limit=200)[0]


def _meridian_t(model, r):
    t_max = float(model.domain[0, 1])
    return brentq(lambda t: meridian_radius(model, t) - r, 0.0, t_max, xtol=1e-14)


def _curve_tools(model, n=1 << 15):
    """Dense samples of a cylinder's plane curve with arc length and normal."""
    lo, hi = model.domain[2]
    t = np.linspace(lo, hi, n + 1)
    if model.period is not None:
        t = t[:-1]
    a, b = model.curve(t)
    c = np.stack([a, b], axis=1)

    def deriv(tt, h=1e-5):
        a1, b1 = model.curve(tt + h)
        a0, b0 = model.curve(tt - h)
        am, bm = model.curve(tt)
        d1 = np.stack([(a1 - a0) / (2 * h), (b1 - b0) / (2 * h)], axis=-1)
        d2 = np.stack([(a1 - 2 * am + a0) / h**2, (b1 - 2 * bm + b0) / h**2], axis=-1)
        return d1, d2

    d1, _ = deriv(t)
    speed = np.linalg.norm(d1, axis=1)
    # arc length from the base parameter by the trapezoid rule on the dense grid
    seg = 0.5 * (speed[1:] + speed[:-1]) * np.diff(t)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    s -= np.interp(model.base_coordinate, t, s)
    # orient the 2D normal like the chart normal
    eta = chart_sample(model, model.base).normal[2:]
    d1b, _ = deriv(np.array([model.base_coordinate]))
    nb = np.array([-d1b[0, 1], d1b[0, 0]])
    sign = 1.0 if float(np.dot(nb, eta)) >= 0.0 else -1.0
    return t, c, s, deriv, sign


def _arc_length(model, t):
    """Total arc length of a closed curve (``None`` if open)."""
    if model.period is None:
        return None
    a = float(model.domain[2, 0])

    def speed(x):
        d = np.array(model.curve(np.array([x + 1e-6]))) - np.array(model.curve(np.array([x - 1e-6])))
        return float(np.linalg.norm(d) / 2e-6)

    return quad(speed, a, a + model.period, epsrel=1e-12, limit=200)[0]


def monte_carlo_ball_volume(model, r, n=2_000_000, seed=0):
    """Volume of the intrinsic ball ``B_r`` about the base point.

    Rotational: uniform samples of ``(t, theta, phi)`` weighted by the
    closed-form volume density ``f^2 sin(theta) sqrt(1 + f'^2)``.
    Cylinder/graph: hit-or-miss in flat ``(u, v, s)`` coordinates.
    """
    rng = np.random.default_rng(seed)
    if model.kind == ROTATIONAL:
        f, df, _ = _meridian(model)
        T = _meridian_t(model, r)
        t = rng.uniform(0.0, T, n)
        th = rng.uniform(0.0, math.pi, n)
        w = f(t) ** 2 * np.sin(th) * np.sqrt(1.0 + df(t) ** 2)
        return _weighted_mean(w, T * math.pi * 2.0 * math.pi)
    L = _arc_length(model, None)
    smax = r if L is None else min(r, 0.5 * L)
    x = rng.uniform(-1.0, 1.0, (n, 3)) * np.array([r, r, smax])
    inside = (np.sum(x**2, axis=1) <= r * r).astype(float)
    return _weighted_mean(inside, 4.0 * r * r * 2.0 * smax)


def _rotational_tube_polygon(model, spec, n=4000):
    f, df, ddf = _meridian(model)
    T = _meridian_t(model, spec.r)
    t = np.linspace(0.0, T, n)
    speed = np.sqrt(1.0 + df(t) ** 2)
    # principal curvatures of a rotational hypersurface with inward normal
    k_sph = 1.0 / (f(t) * speed)
    k_mer = -ddf(t) / speed**3
    normA = np.sqrt(2.0 * k_sph**2 + k_mer**2)
    rho = np.array([meridian_radius(model, x) for x in t])
    h = spec.radius(rho, normA)
    # meridian normal (d rho, d z) matched to the chart normal at theta = pi/2, phi = 0
    nrm = np.stack([-np.ones_like(t), df(t)], axis=1) / speed[:, None]
    eta = chart_sample(model, model.profile_params(min(1.0, T)) if T > 0 else model.base).normal
    if nrm[0, 0] * eta[0] + nrm[0, 1] * eta[3] < 0 and abs(eta[0]) > 0:
        nrm = -nrm
    base = np.stack([f(t), t], axis=1)
    lo = base - h[:, None] * nrm if spec.two_sided else base
    hi = base + h[:, None] * nrm
    ring = np.concatenate([lo, hi[::-1]])
    return shapely.Polygon(ring)


def monte_carlo_tube_volume(spec, n=2_000_000, seed=0):
    """Ambient 4-volume of an embedded tube by rejection sampling.

    Rotational: sampling in the meridian half-plane ``(|x_123|, x_4)`` with
    the weight ``4 pi |x_123|^2`` of the orbit spheres, tested against the
    polygon swept by the meridian normals.
    Cylinder/graph: uniform samples in an ambient box, classified by their
    nearest point on the plane curve.
    """
    model = spec.model
    rng = np.random.default_rng(seed)
    if model.kind == ROTATIONAL:
        poly = _rotational_tube_polygon(model, spec)
        x0, z0, x1, z1 = poly.bounds
        x0 = max(x0, 0.0)
        vals = np.empty(n)
        for k in range(0, n, CHUNK):
            m = min(CHUNK, n - k)
            x = rng.uniform(x0, x1, m)
            z = rng.uniform(z0, z1, m)
            vals[k:k + m] = np.where(shapely.contains_xy(poly, x, z), 4.0 * math.pi * x * x, 0.0)
        return _weighted_mean(vals, (x1 - x0) * (z1 - z0))

    t, c, s, deriv, sign = _curve_tools(model)
    L = _arc_length(model, None)
    r = spec.r
    sd = np.abs(s) if L is None else np.minimum(np.abs(s), L - np.abs(s))
    sel = sd <= r
    _, d2 = deriv(t[sel])
    d1, _ = deriv(t[sel])
    kap = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.linalg.norm(d1, axis=1) ** 3
    # largest tube radius over the ball: bounds the box and the foot-point search
    rho_grid = np.linspace(0.0, r, 65)[:, None]
    pad = 1.01 * float(np.max(spec.radius(np.maximum(rho_grid, sd[sel][None, :]), kap[None, :])))
    lo2 = c[sel].min(axis=0) - pad
    hi2 = c[sel].max(axis=0) + pad
    lo = np.concatenate([[-r, -r], lo2])
    hi = np.concatenate([[r, r], hi2])
    # coarse search tree over the part of the curve that can hold a foot point;
    # Newton polishing below recovers full accuracy
    near_t = t[sd <= r + pad]
    tc = np.linspace(near_t.min(), near_t.max(), 1024)
    tree = cKDTree(np.stack(model.curve(tc), axis=1))
    vals = np.empty(n)
    for k in range(0, n, CHUNK):
        m = min(CHUNK, n - k)
        y = lo + (hi - lo) * rng.random((m, 4))
        dist, idx = tree.query(y[:, 2:], distance_upper_bound=pad, workers=threads())
        near = np.isfinite(dist)
        y, idx = y[near], idx[near]
        tt = tc[idx]
        # polish the foot point with Newton steps on <c(t) - y, c'(t)> = 0
        for _ in range(4):
            d1, d2 = deriv(tt)
            a, b = model.curve(tt)
            diff = np.stack([a, b], axis=1) - y[:, 2:]
            g = np.sum(diff * d1, axis=1)
            gp = np.sum(d1 * d1, axis=1) + np.sum(diff * d2, axis=1)
            tt = tt - g / gp
        d1, d2 = deriv(tt)
        a, b = model.curve(tt)
        sp = np.linalg.norm(d1, axis=1)
        nrm = sign * np.stack([-d1[:, 1], d1[:, 0]], axis=1) / sp[:, None]
        tau = np.sum((y[:, 2:] - np.stack([a, b], axis=1)) * nrm, axis=1)
        kappa = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3
        if model.period is not None:
            lo_t = model.domain[2, 0]
            tt = lo_t + np.mod(tt - lo_t, model.period)
        sf = np.interp(tt, t, s)
        if L is not None:
            sf = np.mod(sf + 0.5 * L, L) - 0.5 * L
        rho = np.sqrt(y[:, 0] ** 2 + y[:, 1] ** 2 + sf**2)
        h = spec.radius(rho, kappa)
        tlo = -h if spec.two_sided else 0.0
        vals[k:k + m] = 0.0
        vals[k:k + m][near] = (rho <= r) & (tau >= tlo) & (tau <= h)
    return _weighted_mean(vals, float(np.prod(hi - lo)))
