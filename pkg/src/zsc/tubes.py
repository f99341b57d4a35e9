"""Normal tubes around catalog hypersurfaces.

A tube of radius ``h`` over the intrinsic ball ``B_r`` is the set swept by
``p + tau eta(p)`` for ``p`` in ``B_r`` and ``0 <= tau <= h(p)`` (both signs
of ``tau`` for two-sided tubes).  Its volume, as long as the tube is
embedded, is the integral over ``B_r`` of ``int_0^h det(I - tau A) dtau``:

    V = int h - h^2 H / 2 + h^3 R / 3 - h^4 K / 4.

Embeddedness is tested by sampling the tube on a grid, pairing samples
that land close together in R^4 while their base points are far apart on
the hypersurface, and refining each pair to an exact collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.spatial import cKDTree

from .errors import DomainError, SubfocalUndefined
from .immersion.chart import chart_batch, chart_sample
from .immersion.models import ROTATIONAL, interior_points
from .immersion.radial import (
    _wrap, geodesic_radius, intrinsic_distance, intrinsic_distance_lower, profile_of, radial_integral,
)
from .invariants import k_bound

CONSTANT = "constant"
SUBFOCAL = "subfocal"
THEOREM_C = "theoremC"
#: volume of the unit ball in R^4
OMEGA4 = math.pi**2 / 2.0
#: |A| below this counts as zero for the curvature-scaled radii
A_ZERO = 1e-12


@dataclass(frozen=True)
class TubeSpec:
    """Radius function and region of a normal tube.

    ``params`` holds ``h0`` (constant), ``epsilon`` (subfocal) or ``b1``,
    ``b2``, ``delta`` (theoremC); ``r`` is the intrinsic ball radius of the
    region.
    """

    model: object
    kind: str
    params: dict
    r: float
    two_sided: bool = False

    def __post_init__(self):
        p = self.params
        if not self.r > 0:
            raise DomainError(f"region radius must be positive, got {self.r!r}")
        if self.kind == CONSTANT:
            ok = p.get("h0", 0) > 0
        elif self.kind == SUBFOCAL:
            ok = 0 < p.get("epsilon", 0) <= 1
        elif self.kind == THEOREM_C:
            ok = 0 < p.get("b1", 0) <= 1 and p.get("b2", 0) > 0 and p.get("delta", 0) > 0
        else:
            raise DomainError(f"unknown radius function {self.kind!r}")
        if not ok:
            raise DomainError(f"invalid {self.kind} parameters {p}")

    def radius(self, rho, normA):
        """``h`` at points with intrinsic radius ``rho`` and ``|A| = normA``."""
        p = self.params
        rho = np.asarray(rho, dtype=float)
        normA = np.asarray(normA, dtype=float)
        if self.kind == CONSTANT:
            return np.full(np.broadcast(rho, normA).shape, p["h0"])
        if np.any(normA <= A_ZERO):
            raise SubfocalUndefined(f"|A| vanishes on the region; {self.kind} radius undefined")
        if self.kind == SUBFOCAL:
            return p["epsilon"] / normA
        return np.minimum(p["b1"] / normA, p["b2"] * rho ** p["delta"])

    def kinks(self):
        """Radii where ``h`` is not smooth, for quadrature breakpoints.

        For theoremC this is a geometric grading towards ``rho = 0``, where
        ``rho^delta`` is singular, plus the radii where the two branches of
        the minimum cross (rotational models).
        """
        if self.kind != THEOREM_C:
            return ()
        p = self.params
        graded = tuple(self.r * 0.25**k for k in range(1, 24))
        prof = profile_of(self.model)
        if not prof.rotational:
            return graded

        def gap(rho):
            x = prof.inverse_arc(np.array([rho]))
            return float(p["b1"] / prof.fields(x)["normA"][0] - p["b2"] * rho ** p["delta"])

        grid = np.linspace(0.0, self.r, 513)[1:]
        g = np.array([gap(x) for x in grid])
        idx = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
        return graded + tuple(brentq(gap, grid[i], grid[i + 1], xtol=1e-14) for i in idx)

    def to_dict(self):
        return {
            "kind": self.kind, **self.params, "r": self.r, "two_sided": self.two_sided,
            "model": self.model.to_dict(),
        }


def constant_tube(model, h0, r, two_sided=False):
    return TubeSpec(model, CONSTANT, {"h0": float(h0)}, float(r), two_sided)


def subfocal_tube(model, epsilon, r, two_sided=False):
    return TubeSpec(model, SUBFOCAL, {"epsilon": float(epsilon)}, float(r), two_sided)


def theorem_c_tube(model, b1, b2, delta, r, two_sided=False):
    return TubeSpec(model, THEOREM_C, {"b1": float(b1), "b2": float(b2), "delta": float(delta)}, float(r), two_sided)


def tube_volume(spec, rtol=1e-10):
    """Tube-formula volume over ``B_r``.

    Raises:
        DomainExceeded: if ``B_r`` leaves the chart.
        SubfocalUndefined: if ``|A|`` vanishes where the radius needs it.
    """
    two = spec.two_sided

    def integrand(rho, lam, F):
        h = spec.radius(rho, F["normA"])
        if two:
            return 2.0 * h + 2.0 * h**3 * F["R"] / 3.0
        return h - 0.5 * h**2 * F["H"] + h**3 * F["R"] / 3.0 - 0.25 * h**4 * F["K"]

    return radial_integral(spec.model, integrand, spec.r, spec.kinks(), rtol=rtol).value


def k_bound_check(model, params):
    """``(K, |A|^3 / (3 sqrt 3))`` at a chart point; the first never exceeds the second."""
    inv = chart_sample(model, params).invariants
    return inv.K, float(k_bound(inv.normA))


def region_sup_normA(model, r, n=2049):
    """Largest ``|A|`` over the profile points with ``rho <= r``."""
    prof = profile_of(model)
    lo = 0.0 if prof.rotational else max(-r, prof.arc_range[0])
    hi = min(r, prof.arc_range[1])
    x = prof.inverse_arc(np.linspace(lo, hi, n))
    return float(np.max(prof.fields(x)["normA"]))


def euclidean_ball_bound(model, b1, r):
    """Tube volume at constant ``h = b1 a`` against ``omega4 (r + 2 b1 a)^4``.

    ``a = inf 1/|A|`` over ``B_r``.  Returns ``(tube_volume, bound, spec)``.

    Raises:
        SubfocalUndefined: if ``|A|`` vanishes on all of ``B_r``.
    """
    sup = region_sup_normA(model, r)
    if not sup > A_ZERO:
        raise SubfocalUndefined("|A| vanishes on the region; a = inf 1/|A| is infinite")
    a = 1.0 / sup
    spec = constant_tube(model, b1 * a, r)
    return tube_volume(spec), OMEGA4 * (r + 2.0 * b1 * a) ** 4, spec


# --------------------------------------------------------------------------
# self-intersection


@dataclass(frozen=True)
class EmbeddingReport:
    embedded: bool
    sampling: int
    points: int
    candidates: int
    witness: dict = field(default=None)

    def to_dict(self):
        return {
            "verdict": "embedded" if self.embedded else "not_embedded",
            "resolution_qualified": self.embedded,
            "sampling": self.sampling, "points": self.points, "candidates": self.candidates,
            "witness": self.witness,
        }


def _base_grid(spec, n):
    """Chart points of ``B_r`` on an ``n``-per-axis grid.

    Returns the points, the intrinsic spacing of grid neighbours at each
    point (an upper bound), and the parameter step along each chart axis.
    """
    model = spec.model
    prof = profile_of(model)
    r = spec.r
    if prof.rotational:
        T = float(prof.inverse_arc(np.array([r]))[0])
        t = np.linspace(0.0, T, n)
        th = (np.arange(n) + 0.5) * math.pi / n
        ph = -math.pi + 2.0 * math.pi * np.arange(n) / n
        P = np.stack(np.meshgrid(t, th, ph, indexing="ij"), axis=-1).reshape(-1, 3)
        drho = np.max(np.diff(prof.arc(t)))
        spacing = np.maximum(drho, 2.0 * math.pi / n * model.profile(P[:, 0]))
        return P, spacing, np.array([T / (n - 1), math.pi / n, 2.0 * math.pi / n])
    L = prof.length if prof.period is not None else math.inf
    smax = min(r, 0.5 * L)
    s = np.linspace(-smax, smax, n, endpoint=prof.period is None or smax < 0.5 * L)
    x = prof.inverse_arc(s)
    u = np.linspace(-r, r, n)
    P = np.stack(np.meshgrid(u, u, x, indexing="ij"), axis=-1).reshape(-1, 3)
    P = P[geodesic_radius(model, P) <= r * (1 + 1e-12)]
    du = 2.0 * r / (n - 1)
    return P, np.full(len(P), max(du, 2.0 * smax / n)), np.array([du, du, float(np.max(np.diff(x)))])


#: query points per chunk of the candidate search
CHUNK_POINTS = 512
#: ordered pairs scored at once (bounds the scratch memory)
SCORE_BLOCK = 1 << 18


def _separation(model, base):
    """Lower bound on the intrinsic distance between base points ``i`` and ``j``."""
    prof = profile_of(model)
    ax = model.radial_axis
    arc = prof.arc(base[:, ax])
    if prof.rotational:
        pos = model.position(base)
        return lambda i, j: np.maximum(np.abs(arc[i] - arc[j]), np.linalg.norm(pos[i] - pos[j], axis=-1))
    length = prof.length if prof.period is not None else None

    def flat(i, j):
        ds = arc[i] - arc[j]
        if length is not None:
            ds = _wrap(ds, length)
        return np.sqrt((base[i, 0] - base[j, 0]) ** 2 + (base[i, 1] - base[j, 1]) ** 2 + ds**2)

    return flat


def _best_unique(owner, m, f, v, keep):
    """The ``keep`` best-scoring ordered pairs, one per pair of base points."""
    order = np.lexsort((f, m, v))
    m, f, v = m[order], f[order], v[order]
    keys = np.sort(np.stack([owner[m], owner[f]], axis=1), axis=1)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)[:keep]
    return m[first], f[first], v[first]


def _far_pairs(tree, pts, owner, radius, is_far, score):
    """Stream scored sample pairs within ``radius`` from far-apart base points.

    Works in chunks of query points so heavily overlapping tubes cannot
    exhaust memory.  ``score(moving, fixed)`` rates an ordered pair (lower
    is better); both orders are scored and pairs above 2 are dropped.
    Yields ``(moving, fixed, scores, far)`` per chunk, where ``far`` is the
    number of far sample pairs the chunk saw.
    """
    for start in range(0, len(pts), CHUNK_POINTS):
        idx = np.arange(start, min(start + CHUNK_POINTS, len(pts)))
        sdm = cKDTree(pts[idx]).sparse_distance_matrix(tree, radius, output_type="ndarray")
        i, j = idx[sdm["i"]], sdm["j"].astype(np.intp)
        del sdm
        up = j > i
        i, j = i[up], j[up]
        far = is_far(owner[i], owner[j])
        n_far = int(np.count_nonzero(far))
        if n_far == 0:
            yield idx[:0], idx[:0], np.empty(0), 0
            continue
        m = np.concatenate([i[far], j[far]])
        f = np.concatenate([j[far], i[far]])
        v = np.concatenate([score(m[k:k + SCORE_BLOCK], f[k:k + SCORE_BLOCK]) for k in range(0, len(m), SCORE_BLOCK)])
        ok = v <= 2.0
        yield m[ok], f[ok], v[ok], n_far


def _tube_points(spec, params, frac):
    b = chart_batch(spec.model, params)
    rho = geodesic_radius(spec.model, params)
    h = spec.radius(rho, np.sqrt(b.normA2))
    return b.position + (frac * h)[:, None] * b.normal, h


def self_intersection_test(spec, sampling=24, max_candidates=24):
    """Look for two tube samples from distant base points that meet in R^4.

    Base points come from an ``sampling``-per-axis chart grid over ``B_r``
    and normal offsets from ``max(4, sampling // 4)`` levels in ``[0, h]``.
    Pairs closer than ``min h / 2`` whose base points are more than three
    local grid spacings apart on the hypersurface are refined by least squares to
    an exact collision (tolerance ``1e-6`` times the tube diameter).

    An embedded verdict only means no collision was found at this
    resolution; a not-embedded verdict carries a verified witness.
    """
    if sampling < 16:
        raise DomainError(f"sampling must be >= 16 per axis, got {sampling}")
    model = spec.model
    base, spacing, steps = _base_grid(spec, sampling)
    levels = max(4, sampling // 4)
    fr = np.linspace(-1.0 if spec.two_sided else 0.0, 1.0, levels)
    b = chart_batch(model, base)
    rho = geodesic_radius(model, base)
    h = spec.radius(rho, np.sqrt(b.normA2))
    pts = (b.position[:, None, :] + (fr[None, :, None] * h[:, None, None]) * b.normal[:, None, :]).reshape(-1, 4)
    owner = np.repeat(np.arange(len(base)), levels)
    frac_of = np.tile(fr, len(base))
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    tol = 1e-6 * max(diam, 1e-300)
    cell = 0.5 * float(np.min(h))

    # One linearized Newton step per ordered pair: move sample ``m`` so that
    # it lands on sample ``f``.  The tube map's differential at (p, tau) is
    # [X_i - tau A^k_i X_k | eta] (Weingarten) and depends on ``m`` only, so
    # its pseudo-inverse is formed once per sample.  Pairs whose step stays
    # within a couple of grid cells are the ones worth refining.
    tau = frac_of * h[owner]
    X1 = b.tangents[owner]
    J = X1 - tau[:, None, None] * np.einsum("nki,nkx->nix", b.shape_operator[owner], X1)
    J = np.concatenate([J, b.normal[owner][:, None, :]], axis=1)      # (n, 4 unknowns, 4 coords)
    Jinv = np.linalg.pinv(J)
    inv_steps = 1.0 / steps

    flo = fr[0]
    dfr = fr[1] - fr[0]

    def score(m, f):
        # grid cells moved in the base, plus normal levels the step leaves [flo, 1] by
        delta = np.einsum("nxi,nx->ni", Jinv[m], pts[f] - pts[m])
        nf = frac_of[m] + delta[:, 3] / np.maximum(h[owner[m]], 1e-300)
        out = np.maximum(np.maximum(nf - 1.0, flo - nf), 0.0) / dfr
        return np.maximum(np.max(np.abs(delta[:, :3]) * inv_steps, axis=1), out)

    # only hard chart edges bound the refinement; periodic and angular axes run free
    lo_b = np.where(model.hard[:, 0], model.domain[:, 0], -np.inf)
    hi_b = np.where(model.hard[:, 1], model.domain[:, 1], np.inf)

    def refine(moving, fixed):
        target = pts[fixed]
        p1, f1 = base[owner[fixed]], frac_of[fixed]
        x0 = np.concatenate([base[owner[moving]], [frac_of[moving]]])
        # a box of three grid cells keeps the solver from sliding back onto p1
        lb = np.concatenate([np.maximum(lo_b, x0[:3] - 3 * steps), [flo]])
        ub = np.concatenate([np.minimum(hi_b, x0[:3] + 3 * steps), [1.0]])

        def resid(z):
            X, _ = _tube_points(spec, z[None, :3], z[3:])
            return X[0] - target

        sol = least_squares(
            resid, np.clip(x0, lb, ub), bounds=(lb, ub), xtol=1e-14, ftol=1e-15, gtol=1e-15, max_nfev=100,
        )
        if np.linalg.norm(sol.fun) > tol:
            return None
        P = model.canonical(np.stack([p1, sol.x[:3]]))
        if np.any(geodesic_radius(model, P) > spec.r * (1 + 1e-9)):
            return None
        sep = float(intrinsic_distance_lower(model, P[0], P[1]))
        if sep <= 3.0 * max(spacing[owner[moving]], spacing[owner[fixed]]):
            return None
        X, hh = _tube_points(spec, P, np.array([f1, sol.x[3]]))
        return {
            "params": [P[0].tolist(), P[1].tolist()],
            "tau": [float(f1 * hh[0]), float(sol.x[3] * hh[1])],
            "h": hh.tolist(),
            "ambient": [X[0].tolist(), X[1].tolist()],
            "base_ambient": [model.position(P[0]).tolist(), model.position(P[1]).tolist()],
            "gap": float(np.linalg.norm(X[0] - X[1])),
            "intrinsic_separation_lower": sep,
        }

    # Each chunk's best pair is refined at once (heavily overlapping tubes stop
    # early, up to half the refinement budget); the global best of the rest
    # are refined at the end.  ``candidates`` counts the far pairs examined.
    tree = cKDTree(pts)
    sep_of = _separation(model, base)
    is_far = lambda i, j: sep_of(i, j) > 3.0 * np.maximum(spacing[i], spacing[j])  # noqa: E731
    tried = set()
    n_cand = 0
    mov = fix = np.empty(0, dtype=np.intp)
    val = np.empty(0)
    for m, f, v, n_far in _far_pairs(tree, pts, owner, cell, is_far, score):
        n_cand += n_far
        if len(v) == 0:
            continue
        mov, fix, val = np.concatenate([mov, m]), np.concatenate([fix, f]), np.concatenate([val, v])
        if len(val) > 4 * max_candidates:
            mov, fix, val = _best_unique(owner, mov, fix, val, max_candidates)
        if len(tried) < max_candidates // 2:
            k = int(np.lexsort((f, m, v))[0])
            tried.add((int(m[k]), int(f[k])))
            witness = refine(m[k], f[k])
            if witness is not None:
                return EmbeddingReport(False, sampling, len(pts), n_cand, witness)
    if len(val):
        mov, fix, val = _best_unique(owner, mov, fix, val, max_candidates)
    for moving, fixed in zip(mov, fix):
        if (int(moving), int(fixed)) in tried:
            continue
        witness = refine(moving, fixed)
        if witness is not None:
            return EmbeddingReport(False, sampling, len(pts), n_cand, witness)
    return EmbeddingReport(True, sampling, len(pts), n_cand, None)


def euclidean_vs_intrinsic(model, n=2000, seed=0):
    """Largest ``|x(p) - x(q)| - d(p, q)`` over ``n`` seeded pairs.

    Pairs are drawn where the intrinsic distance is exact: anywhere on the
    flat models, along a common meridian on rotational ones.  The result
    should never be positive beyond roundoff.
    """
    P = interior_points(model, 2 * n, seed)
    p, q = P[:n], P[n:]
    if model.kind == ROTATIONAL:
        q[:, 1:] = p[:, 1:]
    amb = np.linalg.norm(model.position(p) - model.position(q), axis=-1)
    return float(np.max(amb - intrinsic_distance(model, p, q)))
