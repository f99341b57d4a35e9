"""Optimization over the compact set of unit curvature triples with R = 0.

The set ``{R = 0} ∩ S^2`` consists of the two circles ``H = ±1``; after
orientation normalization every sample lives on the ``H = 1`` circle.  It
is sampled by a Fibonacci lattice whose points are Newton-projected onto
the constraint, and local refinement walks along the circle through a
tangent step followed by the same projection (a retraction).

On top of that sampler sit the pinching maximum, the constant ``c0(c)``
bounding the squared ratios of Newton-transformation eigenvalues, and the
constant chain ``C1, C2, C3, Lambda1, Lambda2`` of the Sobolev-type
inequality.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _parallel
from .errors import DomainError, EmptyConstraintSet, OptimizerDidNotConverge
from .invariants import (
    PINCHING_MAX,
    CurvatureInvariants,
    Eigenvalues,
    invariants_from_eigenvalues,
    normalize_orientation_array,
    symmetric_functions,
)

PROJECTION_TOL = 1e-14
GRAD_TOL = 1e-12
# Projection is skipped near the poles ±(1,1,1)/sqrt(3), where the
# tangential gradient of R vanishes.
_MIN_TANGENTIAL_GRAD = 1e-3


@dataclass(frozen=True)
class ConstraintSample:
    point: tuple
    invariants_at_point: CurvatureInvariants


class PinchingMax(NamedTuple):
    value: float
    argmax: np.ndarray
    gradient: float
    starts: int


# -- sampling -----------------------------------------------------------------


def fibonacci_sphere(n):
    """``n`` quasi-uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def _tangential_grad_R(x):
    H = x.sum(axis=-1, keepdims=True)
    g = H - x
    return g - np.sum(g * x, axis=-1, keepdims=True) * x


def project_to_constraint(points, tol=PROJECTION_TOL, max_iter=60):
    """Newton-project unit vectors onto ``R = 0`` while staying on the sphere.

    Returns ``(projected, ok)``; rows with ``ok == False`` started too close
    to a pole or did not converge and should be discarded.
    """
    x = np.array(points, dtype=float, ndmin=2)
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    ok = np.linalg.norm(_tangential_grad_R(x), axis=-1) > _MIN_TANGENTIAL_GRAD
    polish = 2
    for _ in range(max_iter):
        _, R, _ = symmetric_functions(x)
        if np.all(np.abs(R[ok]) < tol):
            # quadratic convergence: two more steps push |R| to roundoff
            if polish == 0:
                break
            polish -= 1
        gT = _tangential_grad_R(x)
        gn2 = np.sum(gT * gT, axis=-1)
        step = np.where(ok & (gn2 > 0), R / np.where(gn2 > 0, gn2, 1.0), 0.0)
        x = x - step[:, None] * gT
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
    _, R, _ = symmetric_functions(x)
    ok &= np.abs(R) < 1e-12
    return x, ok


def constraint_points(n):
    """Projected, orientation-normalized lattice points as an ``(m, 3)`` array."""
    x, ok = project_to_constraint(fibonacci_sphere(n))
    return normalize_orientation_array(x[ok])


def pinching_of(points):
    H, _, K = symmetric_functions(points)
    return -K / H**3


def _pinching_grad(x):
    H, _, K = symmetric_functions(x)
    l1, l2, l3 = x[..., 0], x[..., 1], x[..., 2]
    dK = np.stack([l2 * l3, l1 * l3, l1 * l2], axis=-1)
    return -dK / (H**3)[..., None] + (3.0 * K / H**4)[..., None]


def _circle_tangent(x):
    H = x.sum(axis=-1, keepdims=True)
    t = np.cross(x, H - x)
    return t / np.linalg.norm(t, axis=-1, keepdims=True)


def _retract(x):
    y, ok = project_to_constraint(x)
    return normalize_orientation_array(y), ok


def sample_constraint_set(n, c_floor=None):
    """Sample ``{R = 0} ∩ S^2`` from an ``n``-point Fibonacci lattice.

    With ``c_floor`` the samples are filtered to pinching >= ``c_floor``; the
    polished pinching maximizers are appended so the result is nonempty for
    every admissible floor, including the extreme value 4/27 where the
    superlevel set collapses to the maximizer orbit.
    """
    if n < 8:
        raise DomainError(f"grid resolution must be >= 8, got {n}")
    if c_floor is not None and c_floor > PINCHING_MAX:
        raise EmptyConstraintSet(
            f"pinching never exceeds 4/27 on R = 0; c_floor={c_floor!r} is infeasible"
        )
    pts = constraint_points(n)
    if c_floor is not None:
        best = max_pinching_ratio()
        c_eff = min(c_floor, best.value)
        pts = pts[pinching_of(pts) >= c_eff]
        extra = _maximizer_orbit(best.argmax)
        pts = np.concatenate([pts, extra[pinching_of(extra) >= c_eff]])
    return [
        ConstraintSample(tuple(p), invariants_from_eigenvalues(Eigenvalues.of(p)))
        for p in pts
    ]


def _maximizer_orbit(x):
    """All coordinate permutations of a point (the pinching is symmetric)."""
    idx = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    orbit = [x[list(p)] for p in idx]
    keep = []
    for y in orbit:
        if all(np.max(np.abs(y - k)) > 1e-12 for k in keep):
            keep.append(y)
    return np.array(keep)


# -- maximization -------------------------------------------------------------


def _ascend(x0, objective, gradient, gtol=GRAD_TOL, max_iter=500, max_step=0.1):
    """Projected-gradient ascent along the constraint circle with backtracking.

    Once objective differences sink below roundoff, a step is also accepted
    when it keeps the value (to 1e-14 relative) and at least halves the projected gradient.
    """
    x = np.asarray(x0, dtype=float)
    fx = objective(x)
    t = _circle_tangent(x)
    g = float(np.dot(gradient(x), t))
    alpha = 1.0
    for it in range(max_iter):
        if abs(g) < gtol:
            return x, fx, abs(g), it
        alpha = min(alpha, max_step / abs(g))
        while alpha > 1e-20:
            y, ok = _retract((x + alpha * g * t)[None, :])
            y = y[0]
            if ok[0]:
                fy = objective(y)
                ty = _circle_tangent(y)
                gy = float(np.dot(gradient(y), ty))
                gain = 1e-4 * alpha * g * g
                noise = 1e-14 * abs(fx)
                if (gain > noise and fy >= fx + gain) or (
                    fy >= fx - noise and abs(gy) < 0.5 * abs(g)
                ):
                    x, fx, t, g = y, fy, ty, gy
                    alpha *= 2.0
                    break
            alpha *= 0.5
        else:
            return x, fx, abs(g), it
    return x, fx, abs(g), max_iter


def _polish_pinching(x0):
    obj = lambda y: float(pinching_of(y))
    grad = lambda y: _pinching_grad(y)
    return _ascend(x0, obj, grad)


def max_pinching_ratio(starts=None, n_dense=20000, n_starts=16):
    """Maximize -K/H^3 over the constraint set.

    Dense sampling picks the ``n_starts`` best lattice points (or the given
    ``starts``, which are first projected onto the constraint), each start
    is polished by projected-gradient ascent, and the best polished value
    wins; ties within 1e-12 go to the earliest start.
    """
    if starts is None:
        pts = constraint_points(n_dense)
        order = np.argsort(-pinching_of(pts), kind="stable")
        starts = pts[order[:n_starts]]
    else:
        starts, ok = _retract(np.array(starts, dtype=float, ndmin=2))
        starts = starts[ok]
        if len(starts) == 0:
            raise DomainError("no usable start point after projection")
    results = _parallel.pmap(_polish_pinching, list(starts))
    best = None
    for x, fx, g, _ in results:
        if best is None or fx > best[1] + 1e-12:
            best = (x, fx, g)
    x, fx, g = best
    if g > 1e-9:
        raise OptimizerDidNotConverge(
            "pinching refinement stalled",
            {"value": fx, "argmax": x.tolist(), "projected_gradient": g},
        )
    return PinchingMax(float(fx), x, float(g), len(starts))


# -- c0 -----------------------------------------------------------------------


def g_ratios(points):
    """``g[..., i, j] = ((H - l_i) / (H - l_j))^2`` for each triple."""
    x = np.asarray(points, dtype=float)
    s = x.sum(axis=-1, keepdims=True) - x
    return (s[..., :, None] / s[..., None, :]) ** 2


def _g_max(x):
    s = x.sum() - x
    return float((np.max(s) / np.min(s)) ** 2)


def c0_of_c(c, n_dense=20000, n_refine=8):
    """Maximum of the squared Newton-eigenvalue ratios on ``{pinching >= c}``.

    Dense lattice sampling (plus the pinching maximizers, which are always
    feasible) is followed by a feasibility-preserving pattern search along
    the constraint circle from the ``n_refine`` best candidates.

    >>> round(c0_of_c(4 / 27), 6)
    16.0
    """
    if not (c > 0.0) or c > PINCHING_MAX:
        raise DomainError(f"c must lie in (0, 4/27], got {c!r}")
    best = max_pinching_ratio()
    orbit = _maximizer_orbit(best.argmax)
    if best.value - c <= 4.0 * np.spacing(best.value):
        # c is the maximum to roundoff; the superlevel set is the orbit itself
        return float(np.max(g_ratios(orbit)))
    pts = np.concatenate([constraint_points(n_dense), orbit])
    pts = pts[pinching_of(pts) >= c]
    g = np.max(g_ratios(pts).reshape(len(pts), -1), axis=-1)
    order = np.argsort(-g, kind="stable")[:n_refine]
    feasible = lambda y: float(pinching_of(y)) >= c
    refined = _parallel.pmap(lambda x: _pattern_search(x, _g_max, feasible), list(pts[order]))
    return max([float(g[order[0]])] + refined)


def _pattern_search(x, objective, feasible, step=1e-2, min_step=1e-14):
    fx = objective(x)
    while step > min_step:
        t = _circle_tangent(x)
        moved = False
        for sgn in (1.0, -1.0):
            y, ok = _retract((x + sgn * step * t)[None, :])
            y = y[0]
            if ok[0] and feasible(y):
                fy = objective(y)
                if fy > fx:
                    x, fx, moved = y, fy, True
                    break
        if not moved:
            step *= 0.5
    return fx


# -- constant chain -----------------------------------------------------------


def window_factor(c0, c0_exponent=2):
    """``1 / (1 + 2 c0^e)``; ``e = 2`` is the printed form."""
    if c0_exponent not in (1, 2):
        raise DomainError(f"c0_exponent must be 1 or 2, got {c0_exponent!r}")
    return 1.0 / (1.0 + 2.0 * c0**c0_exponent)


def q_window(c0, c0_exponent=2):
    """Upper end of the open interval of admissible exponents q."""
    return math.sqrt(window_factor(c0, c0_exponent))


def beta_window(q, c0, c0_exponent=2):
    """Open interval ``(0, beta_max)`` that keeps ``C1 < 1``."""
    if c0 < 1.0:
        raise DomainError(f"c0 must be >= 1, got {c0!r}")
    w = window_factor(c0, c0_exponent)
    if not (0.0 < q < math.sqrt(w)):
        raise DomainError(f"q={q!r} outside (0, {math.sqrt(w)!r}); beta window is empty")
    beta_max = (w - q * q) / (q + 2.0)
    if not beta_max > 0.0:
        raise DomainError(f"beta window is empty at q={q!r}, c0={c0!r}")
    return (0.0, beta_max)


@dataclass(frozen=True)
class PinchingConstants:
    c: float
    c0: float
    q: float
    beta: float
    C1: float
    C2: float
    C3: float
    Lambda1: float
    Lambda2: float
    p: float
    q_max: float
    beta_max: float
    c0_exponent: int = 2
    delta: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def young_exponents(self):
        """``(a, b)`` with ``a = (5+2q)/(3+2q)``, ``b = (5+2q)/2``."""
        n = 5.0 + 2.0 * self.q
        return n / (3.0 + 2.0 * self.q), n / 2.0

    def pinching_margin(self, delta):
        a, _ = self.young_exponents
        return self.c - self.Lambda1 * delta**a

    def delta_max(self):
        """Largest delta with a positive pinching margin (exclusive)."""
        a, _ = self.young_exponents
        return (self.c / self.Lambda1) ** (1.0 / a)

    def to_dict(self):
        d = asdict(self)
        d.pop("extra")
        d["delta_max"] = self.delta_max()
        d["q_window"] = [0.0, self.q_max]
        d["beta_window"] = [0.0, self.beta_max]
        d.update(self.extra)
        return d


def constant_chain(c0, q, beta, c0_exponent=2):
    """Raw evaluation of ``C1, C2, C3, Lambda1, Lambda2, p`` (no window checks)."""
    w = window_factor(c0, c0_exponent)
    denom = 1.0 + w + 2.0 * q - beta
    num = (1.0 + q) ** 2 + beta * (1.0 + q)
    C1 = num / denom
    C2 = 1.0 + (1.0 + q) / beta + num / (beta * denom)
    C3 = 2.0 * C2 / (3.0 * (1.0 - C1))
    n = 5.0 + 2.0 * q
    p = n / 2.0
    Lambda1 = (3.0 + 2.0 * q) / n * p * p * C3
    Lambda2 = 2.0 * p * p / n * C3
    return dict(C1=C1, C2=C2, C3=C3, Lambda1=Lambda1, Lambda2=Lambda2, p=p)


def proposition_constants(c, q, beta=None, delta=None, c0=None, c0_exponent=2):
    """Full constant chain for pinching floor ``c`` and exponent ``q``.

    ``beta`` defaults to the midpoint of its window.  ``c0`` may be passed to
    skip the optimization (it is recomputed from ``c`` otherwise).
    """
    if not (0.0 < c <= PINCHING_MAX):
        raise DomainError(f"c must lie in (0, 4/27], got {c!r}")
    if c0 is None:
        c0 = c0_of_c(c)
    _, beta_max = beta_window(q, c0, c0_exponent)
    if beta is None:
        beta = 0.5 * beta_max
    if not (0.0 < beta < beta_max):
        raise DomainError(f"beta={beta!r} outside (0, {beta_max!r})")
    chain = constant_chain(c0, q, beta, c0_exponent)
    if not chain["C1"] < 1.0:
        raise DomainError(f"C1={chain['C1']!r} is not below 1")
    if delta is not None and delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return PinchingConstants(
        c=float(c), c0=float(c0), q=float(q), beta=float(beta),
        q_max=q_window(c0, c0_exponent), beta_max=beta_max,
        c0_exponent=c0_exponent, delta=delta, **chain,
    )
