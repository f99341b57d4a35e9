"""Catalog of parametrized hypersurfaces of R^4.

Three families are supported, each carrying enough symmetry that intrinsic
distances and ball volumes reduce to one- or two-dimensional integrals:

``rotational``
    ``X(t, th, ph) = (f(t) sin th cos ph, f(t) sin th sin ph, f(t) cos th, t)``
    for a positive profile ``f`` on ``[0, t_max]``.  The Schwarzschild
    profile ``f = t^2/(4m) + m`` is the zero-scalar-curvature example.
``cylinder``
    ``X(u, v, t) = (u, v, a(t), b(t))`` over a plane curve with positive
    curvature, optionally closed (``period``).
``graph``
    ``X(u, v, t) = (u, v, t, F(t))``: a cylinder over the graph of ``F``.

Models can be built from the factory functions below or from a JSON
document (see :func:`model_from_dict`).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigInvalid

ROTATIONAL = "rotational"
CYLINDER = "cylinder"
GRAPH = "graph"
KINDS = (ROTATIONAL, CYLINDER, GRAPH)


class ImmersionModel:
    """Base class: a vectorized parametrization plus its chart domain.

    Subclasses fill in ``position``.  ``domain`` is a ``(3, 2)`` array of
    parameter bounds and ``hard`` a matching boolean array telling whether
    finite-difference stencils may step past each bound.  ``scale`` sets the
    natural length of each chart parameter (steps are a fraction of it).
    """

    kind = None
    #: index of the chart parameter the geometry depends on
    radial_axis = None

    def __init__(self, domain, hard, scale, spec, orientation="auto", name=None):
        self.domain = np.asarray(domain, dtype=float)
        self.hard = np.asarray(hard, dtype=bool)
        self.scale = np.asarray(scale, dtype=float)
        self.spec = dict(spec)
        if orientation not in ("auto", 1, -1):
            raise ConfigInvalid(f"orientation must be 'auto', 1 or -1, got {orientation!r}", "orientation")
        self.orientation = orientation
        self.name = name or self.kind

    def position(self, p):
        raise NotImplementedError

    def contains(self, p, tol=0.0):
        p = np.asarray(p, dtype=float)
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return np.all((p >= lo - tol) & (p <= hi + tol), axis=-1)

    def profile_params(self, x):
        """Chart point on the symmetry profile with radial coordinate ``x``."""
        raise NotImplementedError

    def canonical(self, p):
        """Chart point(s) with periodic parameters wrapped into the domain."""
        return np.asarray(p, dtype=float)

    def local_scale(self, params):
        """Per-point chart scale, shape ``(N, 3)``.

        Along an unbounded radial axis the embedding grows with the
        coordinate, so the scale there is ``max(scale, |x|)``; this keeps
        finite-difference roundoff from swamping far-out derivatives.
        """
        params = np.atleast_2d(np.asarray(params, dtype=float))
        s = np.repeat(self.scale[None, :], len(params), axis=0)
        ax = self.radial_axis
        if getattr(self, "period", None) is None:
            s[:, ax] = np.maximum(s[:, ax], np.abs(params[:, ax]))
        return s

    @property
    def base(self):
        return self.profile_params(self.base_coordinate)

    def reference_eigenvalues(self, p):
        """Closed-form principal curvatures (ascending), or ``None``."""
        return None

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": dict(self.spec),
            "domain": {k: list(map(float, b)) for k, b in zip(self.axis_names, self.domain)},
        }

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class RotationalModel(ImmersionModel):
    kind = ROTATIONAL
    radial_axis = 0
    axis_names = ("t", "theta", "phi")
    base_coordinate = 0.0

    def __init__(self, profile, dprofile=None, t_max=60.0, scale=1.0, spec=None, **kw):
        domain = [(0.0, t_max), (0.0, math.pi), (-math.pi, math.pi)]
        # t = 0 is a hard edge of the chart; theta and phi stencils may wrap
        hard = [(True, True), (False, False), (False, False)]
        super().__init__(domain, hard, (scale, 1.0, 1.0), spec or {}, **kw)
        self.profile = profile
        self.dprofile = dprofile

    def position(self, p):
        p = np.asarray(p, dtype=float)
        t, th, ph = p[..., 0], p[..., 1], p[..., 2]
        f = self.profile(t)
        st = np.sin(th)
        return np.stack([f * st * np.cos(ph), f * st * np.sin(ph), f * np.cos(th), t], axis=-1)

    def local_scale(self, params):
        """As for the base class, with the phi scale grown like ``1/sqrt(sin theta)``.

        Near the poles ``g_phiphi = f^2 sin^2 theta`` is small and divides the
        roundoff of ``h_phiphi``; a longer phi step trades that for a
        truncation error that stays below 1e-11 for ``sin theta >= 0.05``.
        """
        s = super().local_scale(params)
        th = np.atleast_2d(np.asarray(params, dtype=float))[:, 1]
        s[:, 2] /= np.sqrt(np.maximum(np.abs(np.sin(th)), 0.05))
        return s

    def profile_params(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, np.full_like(x, 0.5 * math.pi), np.zeros_like(x)], axis=-1)


class SchwarzschildModel(RotationalModel):
    """Rotational hypersurface with profile ``t^2/(4m) + m``: R = 0, pinching 4/27."""

    def __init__(self, m=1.0, t_max=60.0, **kw):
        if not m > 0:
            raise ConfigInvalid(f"m must be positive, got {m!r}", "params.m")
        self.m = float(m)
        super().__init__(
            profile=lambda t: t * t / (4.0 * self.m) + self.m,
            dprofile=lambda t: t / (2.0 * self.m),
            t_max=t_max, scale=self.m,
            spec={"profile": "schwarzschild", "m": self.m}, name=f"schwarzschild(m={m:g})", **kw,
        )

    def reference_eigenvalues(self, p):
        t = np.asarray(p, dtype=float)[..., 0]
        a = math.sqrt(self.m) / self.profile(t) ** 1.5
        return np.stack([-0.5 * a, a, a], axis=-1)

    def reference_radius(self, t):
        """Closed-form arc length of the profile from the neck, for m > 0."""
        m = self.m
        t = np.asarray(t, dtype=float)
        return 0.5 * t * np.sqrt(1.0 + (t / (2 * m)) ** 2) + m * np.arcsinh(t / (2 * m))


class CylinderModel(ImmersionModel):
    kind = CYLINDER
    radial_axis = 2
    axis_names = ("u", "v", "t")

    def __init__(self, curve, t_range, period=None, extent=1e3, scale=1.0, spec=None,
                 base_t=0.0, **kw):
        domain = [(-extent, extent), (-extent, extent), t_range]
        hard = [(False, False), (False, False), (period is None, period is None)]
        super().__init__(domain, hard, (1.0, 1.0, scale), spec or {}, **kw)
        self.curve = curve
        self.period = period
        self.base_coordinate = float(base_t)

    def position(self, p):
        p = np.asarray(p, dtype=float)
        a, b = self.curve(p[..., 2])
        return np.stack([p[..., 0], p[..., 1], a, b], axis=-1)

    def canonical(self, p):
        p = np.array(p, dtype=float)
        if self.period is not None:
            lo = self.domain[2, 0]
            p[..., 2] = lo + np.mod(p[..., 2] - lo, self.period)
        return p

    def profile_params(self, x):
        x = np.asarray(x, dtype=float)
        z = np.zeros_like(x)
        return np.stack([z, z, x], axis=-1)


class CircleCylinder(CylinderModel):
    def __init__(self, radius=1.0, **kw):
        if not radius > 0:
            raise ConfigInvalid(f"radius must be positive, got {radius!r}", "params.radius")
        self.radius = float(radius)
        r = self.radius
        super().__init__(
            curve=lambda t: (r * np.cos(t), r * np.sin(t)),
            t_range=(-math.pi, math.pi), period=2 * math.pi,
            spec={"curve": "circle", "radius": r}, name=f"cylinder(circle r={r:g})", **kw,
        )

    def reference_eigenvalues(self, p):
        p = np.asarray(p, dtype=float)
        z = np.zeros(p.shape[:-1])
        return np.stack([z, z, z + 1.0 / self.radius], axis=-1)


class GraphModel(CylinderModel):
    kind = GRAPH

    _FAMILIES = {
        "zero": (lambda a: (lambda t: 0.0 * t), lambda a: (lambda t: 0.0 * t)),
        "quadratic": (lambda a: (lambda t: a * t * t), lambda a: (lambda t: 2.0 * a + 0.0 * t)),
        "hyperbolic": (
            lambda a: (lambda t: a * np.sqrt(1.0 + t * t)),
            lambda a: (lambda t: a * (1.0 + t * t) ** -1.5),
        ),
    }

    def __init__(self, F="quadratic", a=1.0, t_max=1e3, **kw):
        if F not in self._FAMILIES:
            raise ConfigInvalid(f"unknown height family {F!r}; expected one of {sorted(self._FAMILIES)}", "params.F")
        self.height = self._FAMILIES[F][0](a)
        self._height_dd = self._FAMILIES[F][1](a)
        super().__init__(
            curve=lambda t: (t, self.height(t)), t_range=(-t_max, t_max),
            spec={"F": F, "a": float(a)}, name=f"graph({F}, a={a:g})", **kw,
        )

    def position(self, p):
        p = np.asarray(p, dtype=float)
        t = p[..., 2]
        return np.stack([p[..., 0], p[..., 1], t, self.height(t)], axis=-1)

    def reference_eigenvalues(self, p):
        # plane-curve curvature k = F'' / (1 + F'^2)^{3/2}, the other two vanish
        t = np.asarray(p, dtype=float)[..., 2]
        h = 1e-6 * max(1.0, float(np.max(np.abs(t))))
        d1 = (self.height(t + h) - self.height(t - h)) / (2 * h)
        k = np.abs(self._height_dd(t)) / (1.0 + d1 * d1) ** 1.5
        z = np.zeros_like(t)
        return np.stack([z, z, k], axis=-1)


def schwarzschild(m=1.0, t_max=60.0):
    return SchwarzschildModel(m=m, t_max=t_max)


def circle_cylinder(radius=1.0):
    return CircleCylinder(radius=radius)


def graph(F="quadratic", a=1.0, t_max=1e3):
    return GraphModel(F=F, a=a, t_max=t_max)


def model_from_dict(doc):
    """Build a model from ``{kind, params, domain}``; raises :class:`ConfigInvalid`."""
    if not isinstance(doc, dict):
        raise ConfigInvalid("model document must be an object", "")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigInvalid(f"unknown kind {kind!r}; expected one of {list(KINDS)}", "kind")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("params must be an object", "params")
    domain = doc.get("domain", {}) or {}
    try:
        if kind == ROTATIONAL:
            profile = params.get("profile", "schwarzschild")
            if profile != "schwarzschild":
                raise ConfigInvalid(f"unsupported rotational profile {profile!r}", "params.profile")
            t_max = float(domain.get("t", [0.0, 60.0])[1])
            return SchwarzschildModel(m=float(params.get("m", 1.0)), t_max=t_max)
        if kind == CYLINDER:
            curve = params.get("curve", "circle")
            if curve != "circle":
                raise ConfigInvalid(f"unsupported cylinder curve {curve!r}", "params.curve")
            return CircleCylinder(radius=float(params.get("radius", 1.0)))
        t_max = float(domain.get("t", [-1e3, 1e3])[1])
        return GraphModel(F=params.get("F", "quadratic"), a=float(params.get("a", 1.0)), t_max=t_max)
    except (TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(str(exc), "params") from exc


def interior_points(model, n, seed=0):
    """``n`` seeded chart points kept away from degenerate chart edges.

    Rotational: ``t`` in ``[0.05 scale, 0.95 t_max]``, ``theta`` at least 0.1
    from the poles.  Cylinder and graph: ``u, v`` in ``[-10, 10]`` and ``t``
    over the whole period or ``[-10, 10]``.
    """
    rng = np.random.default_rng(seed)
    if model.kind == ROTATIONAL:
        lo = np.array([0.05 * model.scale[0], 0.1, -math.pi])
        hi = np.array([0.95 * model.domain[0, 1], math.pi - 0.1, math.pi])
    else:
        t_lo, t_hi = model.domain[2]
        if model.period is None:
            t_lo, t_hi = max(t_lo, -10.0), min(t_hi, 10.0)
        lo = np.array([-10.0, -10.0, t_lo])
        hi = np.array([10.0, 10.0, t_hi])
    return lo + (hi - lo) * rng.random((n, 3))
