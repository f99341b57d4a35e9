"""Symmetry-reduced intrinsic geometry: distances, balls and radial integrals.

Every catalog model is a warped or Riemannian product over one chart
parameter ``x`` (the *radial axis*), so the geometry along the symmetry
profile determines everything:

rotational
    ``rho`` is the arc length of the meridian from the neck sphere
    ``t = 0`` and each level set ``{rho = const}`` is a round 2-sphere of
    area ``4 pi f^2``.  A radial function integrates as
    ``int F(rho) area(rho) d rho``.
cylinder / graph
    The metric is flat ``du^2 + dv^2 + ds^2`` with ``s`` the arc length of
    the plane curve measured from the base point, so
    ``rho^2 = u^2 + v^2 + s^2`` (``s`` wrapped for a closed curve).  Radial
    integrals become ``int ds int_{|s|}^{r} F 2 pi rho d rho``.

A :class:`RadialProfile` samples the chart along the profile once and keeps
the fields as piecewise Chebyshev interpolants, from which arc length and its
inverse follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import stats

from ..errors import DomainExceeded, NotApplicable
from ..quadrature import panel_rule, psum, refine
from .chart import STEP, chart_batch
from .models import ROTATIONAL

FIELDS = ("speed", "density", "H", "K", "R", "normA", "lam_x")
CHEB_ORDER = 28


class Piecewise:
    """Piecewise Chebyshev interpolant on consecutive panels.

    ``coefs`` has shape ``(panels, order, *tail)``; evaluation at an array
    ``x`` returns ``x.shape + tail`` so several fields share one pass.
    """

    def __init__(self, breaks, coefs):
        self.breaks = np.asarray(breaks, dtype=float)
        self.coefs = np.asarray(coefs, dtype=float)

    def panel_of(self, x):
        i = np.searchsorted(self.breaks, x, side="right") - 1
        return np.clip(i, 0, len(self.breaks) - 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = self.panel_of(x)
        a, b = self.breaks[i], self.breaks[i + 1]
        t = (2.0 * x - a - b) / (b - a)
        c = self.coefs[i]                                   # x.shape + (order,) + tail
        t = t.reshape(t.shape + (1,) * (c.ndim - x.ndim - 1))
        # Clenshaw recurrence with per-point coefficients
        b1 = np.zeros(c.shape[: x.ndim] + c.shape[x.ndim + 1:])
        b2 = np.zeros_like(b1)
        for k in range(c.shape[x.ndim] - 1, 0, -1):
            b1, b2 = 2.0 * t * b1 - b2 + c[(slice(None),) * x.ndim + (k,)], b1
        return t * b1 - b2 + c[(slice(None),) * x.ndim + (0,)]

    def antiderivative(self):
        """Continuous antiderivative vanishing at ``breaks[0]`` (scalar fields only)."""
        coefs = []
        offset = 0.0
        for k in range(len(self.breaks) - 1):
            half = 0.5 * (self.breaks[k + 1] - self.breaks[k])
            c = C.chebint(self.coefs[k], lbnd=-1.0) * half
            c[0] += offset
            offset = float(C.chebval(1.0, c))
            coefs.append(c)
        return Piecewise(self.breaks, np.array(coefs))


def _profile_breaks(model):
    lo, hi = model.domain[model.radial_axis]
    x0 = model.base_coordinate
    s = float(model.scale[model.radial_axis])
    pts = {lo, hi, x0}
    for sign, edge in ((1.0, hi), (-1.0, lo)):
        d = 0.25 * s
        while d < abs(edge - x0):
            pts.add(x0 + sign * d)
            d *= 2.0
    return np.array(sorted(p for p in pts if lo <= p <= hi))


class RadialProfile:
    """Chart fields along the symmetry profile of ``model``.

    Fields (see :meth:`fields`):

    ``speed``
        ``sqrt(g_xx)``, arc length per unit radial parameter.
    ``density``
        volume per unit radial parameter of the full level set (rotational)
        or, per unit area of the flat factor, per unit arc (cylinder/graph).
    ``H``, ``K``, ``R``, ``normA``
        curvature invariants.
    ``lam_x``
        principal curvature along the radial direction.
    """

    def __init__(self, model, order=CHEB_ORDER, step=STEP):
        self.model = model
        self.rotational = model.kind == ROTATIONAL
        breaks = _profile_breaks(model)
        nodes = C.chebpts1(order)
        a, b = breaks[:-1, None], breaks[1:, None]
        xs = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        batch = chart_batch(model, model.profile_params(xs.ravel()), step)
        ax = model.radial_axis
        lam = batch.eigenvalues
        speed = np.sqrt(batch.metric[:, ax, ax])
        vol = batch.volume_density
        values = {
            "speed": speed,
            # rotational: sqrt(G) carries sin(theta) = 1 on the profile, angles integrate to 4 pi
            "density": 4.0 * math.pi * vol if self.rotational else vol / speed,
            "H": lam.sum(axis=1),
            "K": lam.prod(axis=1),
            "R": lam[:, 0] * lam[:, 1] + lam[:, 0] * lam[:, 2] + lam[:, 1] * lam[:, 2],
            "normA": np.sqrt(np.sum(lam**2, axis=1)),
            "lam_x": batch.shape_operator[:, ax, ax],
        }
        self.breaks = breaks
        table = np.stack([values[name].reshape(xs.shape) for name in FIELDS], axis=-1)
        # chebfit fits every (panel, field) column at once: (order, panels * fields)
        coefs = C.chebfit(nodes, table.transpose(1, 0, 2).reshape(order, -1), order - 1)
        coefs = coefs.reshape(order, len(breaks) - 1, len(FIELDS)).transpose(1, 0, 2)
        self._table = Piecewise(breaks, coefs)
        self.speed = Piecewise(breaks, coefs[..., FIELDS.index("speed")])
        arc = self.speed.antiderivative()
        self._arc0 = float(arc(np.array([model.base_coordinate]))[0])
        self._arc = arc
        self.arc_range = (
            float(arc(breaks[:1])[0]) - self._arc0, float(arc(breaks[-1:])[0]) - self._arc0,
        )
        self.period = None if self.rotational else getattr(model, "period", None)
        self.length = self.arc_range[1] - self.arc_range[0]

    def arc(self, x):
        """Signed arc length of the profile from the base point."""
        return self._arc(np.asarray(x, dtype=float)) - self._arc0

    def inverse_arc(self, s, iters=60):
        """Radial chart parameter at signed arc length ``s`` (vectorized Newton)."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.arc_range
        if np.any(s < lo - 1e-12 * max(1.0, abs(lo))) or np.any(s > hi + 1e-12 * max(1.0, hi)):
            raise DomainExceeded(f"arc length outside the chart range [{lo:.6g}, {hi:.6g}]")
        # bracket by panel, then Newton from linear interpolation
        sb = self.arc(self.breaks)
        i = np.clip(np.searchsorted(sb, s, side="right") - 1, 0, len(sb) - 2)
        a, b = self.breaks[i], self.breaks[i + 1]
        frac = (s - sb[i]) / np.where(sb[i + 1] > sb[i], sb[i + 1] - sb[i], 1.0)
        x = a + (b - a) * np.clip(frac, 0.0, 1.0)
        for _ in range(iters):
            dx = (self.arc(x) - s) / self.speed(x)
            x = np.clip(x - dx, a, b)
            if np.all(np.abs(dx) <= 1e-15 * np.maximum(1.0, np.abs(x))):
                break
        return x

    def fields(self, x):
        """All profile fields at ``x`` as a dict of arrays."""
        v = self._table(x)
        return {name: v[..., k] for k, name in enumerate(FIELDS)}

    def field(self, name, x):
        return self.fields(x)[name]

    def reach(self):
        """Largest ball radius about the base point that fits in the chart."""
        lo, hi = self.arc_range
        if self.rotational:
            return hi
        if self.period is not None:
            return float(self.model.domain[0, 1])
        return min(-lo, hi, float(self.model.domain[0, 1]))


def profile_of(model):
    """Cached :class:`RadialProfile` of ``model``."""
    prof = model.__dict__.get("_radial_profile")
    if prof is None:
        prof = RadialProfile(model)
        model.__dict__["_radial_profile"] = prof
    return prof


def _wrap(d, length):
    d = np.mod(d, length)
    return np.minimum(d, length - d)


def geodesic_radius(model, params, base=None):
    """Intrinsic distance from ``base`` (default: the model's base point).

    For rotational models the base is the neck sphere ``t = 0`` and the
    distance is the meridian arc length; for cylinder/graph models it is the
    flat product distance.
    """
    params = model.canonical(params)
    if base is not None:
        return intrinsic_distance(model, params, base)
    prof = profile_of(model)
    ax = model.radial_axis
    s = prof.arc(params[..., ax])
    if prof.rotational:
        return s
    if prof.period is not None:
        s = _wrap(s, prof.length)
    return np.sqrt(params[..., 0] ** 2 + params[..., 1] ** 2 + s**2)


def intrinsic_distance(model, p, q):
    """Exact intrinsic distance between chart points where it is known.

    Cylinder/graph: always.  Rotational: only for points on a common
    meridian (equal angles), where the meridian is a minimizing geodesic.

    Raises:
        NotApplicable: for rotational pairs off a common meridian.
    """
    p = model.canonical(p)
    q = model.canonical(q)
    prof = profile_of(model)
    ds = prof.arc(p[..., model.radial_axis]) - prof.arc(q[..., model.radial_axis])
    if prof.rotational:
        if np.any(np.abs(p[..., 1:] - q[..., 1:]) > 1e-12):
            raise NotApplicable("intrinsic distance on rotational models is exact only along a meridian")
        return np.abs(ds)
    if prof.period is not None:
        ds = _wrap(ds, prof.length)
    return np.sqrt((p[..., 0] - q[..., 0]) ** 2 + (p[..., 1] - q[..., 1]) ** 2 + ds**2)


def intrinsic_distance_lower(model, p, q):
    """Lower bound on intrinsic distance, exact where :func:`intrinsic_distance` is."""
    p = model.canonical(p)
    q = model.canonical(q)
    prof = profile_of(model)
    if not prof.rotational:
        return intrinsic_distance(model, p, q)
    ds = np.abs(prof.arc(p[..., 0]) - prof.arc(q[..., 0]))
    amb = np.linalg.norm(model.position(p) - model.position(q), axis=-1)
    return np.maximum(ds, amb)


@dataclass(frozen=True)
class RadialIntegral:
    value: float
    error: float
    level: int
    nodes: int


def radial_integral(model, fn, r, kinks=(), rtol=1e-10, atol=0.0, order=16, max_level=None):
    """Integrate a radial integrand over the intrinsic ball ``B_r``.

    ``fn(rho, lam_rho, fields)`` returns the integrand per unit volume, where
    ``lam_rho`` is the principal curvature in the direction of ``grad rho``
    (for flat models the curve curvature weighted by ``s^2 / rho^2``) and
    ``fields`` holds the profile fields at the same points.  ``kinks`` lists
    radii where the integrand is not smooth.

    Raises:
        DomainExceeded: if ``B_r`` does not fit in the chart.
    """
    prof = profile_of(model)
    if max_level is None:
        # the flat-model rule is a tensor product; keep its node count bounded
        max_level = 10 if prof.rotational else 6
    if not r > 0:
        return RadialIntegral(0.0, 0.0, 0, 0)
    if r > prof.reach() * (1 + 1e-12):
        raise DomainExceeded(f"ball of radius {r:g} leaves the chart (reach {prof.reach():.6g})")
    ks = sorted({float(k) for k in kinks if 0.0 < k < r})

    # quadrature runs in the chart parameter x; rho = arc(x) needs no inversion
    if prof.rotational:
        xb = prof.inverse_arc(np.array([0.0] + ks + [r]))

        def evaluate(level):
            x, w = panel_rule(xb, 2**level, order)
            f = prof.fields(x)
            terms = w * f["density"] * fn(prof.arc(x), f["lam_x"], f)
            return psum(terms), x.size, psum(np.abs(terms))

    else:
        L = prof.length if prof.period is not None else np.inf
        smax = min(r, 0.5 * L)
        outer = sorted({-smax, 0.0, smax} | {sg * k for k in ks for sg in (-1.0, 1.0) if k < smax})
        xb = prof.inverse_arc(np.array(outer))
        inner_k = np.array(ks + [r])

        def evaluate(level):
            x, wx = panel_rule(xb, 2**level, order)
            f = prof.fields(x)
            d = np.abs(prof.arc(x))
            ib = np.concatenate([d[:, None], np.clip(inner_k[None, :], d[:, None], r)], axis=1)
            rho, wr = panel_rule(ib, 2**level, order)
            rho_safe = np.where(rho > 0, rho, 1.0)
            ff = {k: v[:, None] for k, v in f.items()}
            lam = ff["lam_x"] * (d[:, None] / rho_safe) ** 2
            terms = wr * fn(rho, lam, ff) * 2.0 * math.pi * rho
            col = wx * f["density"] * f["speed"]
            return psum(col * psum(terms, axis=1)), rho.size, psum(col * psum(np.abs(terms), axis=1))

    res = refine(evaluate, rtol=rtol, atol=atol, max_level=max_level)
    return RadialIntegral(float(res.value), float(res.error), res.level, res.nodes)


def ball_volume(model, r, rtol=1e-10):
    """Volume of the intrinsic ball of radius ``r`` about the base point.

    Raises:
        DomainExceeded: if the ball leaves the chart.
    """
    return radial_integral(model, lambda rho, lam, f: np.ones_like(rho), r, rtol=rtol).value


def growth_exponent(model, r_list):
    """Least-squares slope of ``log vol(B_r)`` against ``log r``.

    Returns ``(alpha, stderr)``.
    """
    r = np.asarray(r_list, dtype=float)
    if r.size < 4 or np.any(np.diff(r) <= 0):
        raise ValueError("r_list must be increasing with at least 4 radii")
    vols = np.array([ball_volume(model, float(x)) for x in r])
    fit = stats.linregress(np.log(r), np.log(vols))
    return float(fit.slope), float(fit.stderr)
