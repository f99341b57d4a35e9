"""Pointwise identities verified on chart samples.

* the gradient estimate ``|grad A|^2 - |grad H|^2 >= 2/(1 + 2 c0^e) |grad H|^2``
  valid on pinched zero-scalar-curvature hypersurfaces;
* ``-L1(H) = |grad H|^2 - |grad A|^2 - 3 H K`` where ``L1 f = div(P1 grad f)``;
* Codazzi symmetry of ``h_ijk`` and ``|grad H^2| = |grad |A|^2|`` when R = 0.

``L1(H)`` is computed independently of the chart's own second derivatives
of ``H``: the flux ``sqrt(det g) (P1 grad H)^x`` along the radial chart
axis is evaluated at two staggered points and differenced.  The outer
difference is second order in its step, which is what the convergence
check observes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NotApplicable
from .chart import STEP, chart_batch, chart_sample

#: |R| above this (relative to max(1, |A|^2)) makes a point non-admissible
R_TOL = 1e-8
#: finite-difference budget of the pointwise gradient estimate
PROP21_BUDGET = 1e-5
#: outer step of the flux difference, as a fraction of the local chart scale
L1_STEP = 1e-3
#: off-axis gradient of H tolerated by the one-parameter reduction
RADIAL_TOL = 1e-7


@dataclass(frozen=True)
class GradientReport:
    params: tuple
    gradA2: float
    gradH2: float
    lhs: float          # |grad A|^2 - |grad H|^2
    rhs: float          # 2/(1 + 2 c0^e) |grad H|^2
    slack: float        # lhs - rhs
    c0: float
    c0_exponent: int
    R: float
    pinching: object
    holds: bool

    def to_dict(self):
        return asdict(self)


def verify_prop21_pointwise(model, params, c0, c0_exponent=2, step=STEP, budget=PROP21_BUDGET):
    """Check the pinched gradient estimate for ``grad A`` at one chart point.

    The inequality is declared to hold when ``slack >= -budget *
    max(1, |grad A|^2)``, the budget absorbing finite-difference error.

    Raises:
        NotApplicable: if the scalar curvature is not zero at the point.
    """
    s = chart_sample(model, params, step)
    inv = s.invariants
    if abs(inv.R) > R_TOL * max(1.0, inv.normA2):
        raise NotApplicable(f"R = {inv.R:.3e} at {list(map(float, params))}; the estimate needs R = 0")
    gA2, gH2 = s.gradA2, s.gradH2
    lhs = gA2 - gH2
    rhs = 2.0 / (1.0 + 2.0 * c0**c0_exponent) * gH2
    slack = lhs - rhs
    return GradientReport(
        params=tuple(map(float, params)), gradA2=gA2, gradH2=gH2, lhs=lhs, rhs=rhs,
        slack=slack, c0=float(c0), c0_exponent=int(c0_exponent), R=inv.R,
        pinching=inv.pinching, holds=bool(slack >= -budget * max(1.0, gA2)),
    )


def _radial_flux(model, points, step):
    """``sqrt(det g) (P1 grad H)^x`` along the radial axis at each point."""
    b = chart_batch(model, points, step)
    x = model.radial_axis
    # chart components of dH from principal-frame components: dH_i = sum_a Einv[i, a] dH(e_a)
    dH = np.einsum("nia,na->ni", np.linalg.inv(b.frame), b.grad_H)
    off = np.delete(dH, x, axis=1)
    scale = np.maximum(1.0, np.abs(dH[:, x]))
    if np.any(np.abs(off) > RADIAL_TOL * scale[:, None]):
        raise NotApplicable(f"H varies off the {model.axis_names[x]} axis; no one-parameter reduction")
    ginv = np.linalg.inv(b.metric)
    P1 = b.H[:, None, None] * ginv - np.einsum("nik,nkj->nij", b.shape_operator, ginv)
    return b.volume_density * np.einsum("nj,nj->n", P1[:, x, :], dH), b


def _flux_nodes(model, x0, s):
    """Offsets (in units of s) and first-derivative weights of the outer stencil."""
    lo, hi = model.domain[model.radial_axis]
    hard_lo, hard_hi = model.hard[model.radial_axis]
    if hard_lo and x0 - 0.5 * s < lo:
        offs = np.array([0.0, 0.5, 1.0])
    elif hard_hi and x0 + 0.5 * s > hi:
        offs = np.array([-1.0, -0.5, 0.0])
    else:
        return np.array([-0.5, 0.5]), np.array([-1.0, 1.0])
    V = np.vander(offs, 3, increasing=True).T
    return offs, np.linalg.solve(V, np.array([0.0, 1.0, 0.0]))


@dataclass(frozen=True)
class L1Report:
    params: tuple
    L1H: float
    lhs: float          # -L1(H)
    rhs: float          # |grad H|^2 - |grad A|^2 - 3 H K
    residual: float
    step: float

    def to_dict(self):
        return asdict(self)


def l1_identity(model, params, step=L1_STEP, fd_step=STEP):
    """Both sides of the L1 identity at one point, as an :class:`L1Report`.

    ``step`` is the outer flux-difference step as a fraction of the chart
    scale; ``fd_step`` the inner stencil step.  The relative residual is
    ``|lhs - rhs|`` over the largest of ``|lhs|``, ``|rhs|`` and the sizes of
    the individual terms (``|grad A|^2``, ``|grad H|^2``, ``3|HK|``,
    ``|A|^4``), so cancellation to zero, as on cylinders, is measured
    against the terms that cancel.
    """
    params = np.asarray(params, dtype=float)
    x = model.radial_axis
    s = step * float(model.local_scale(params)[0, x])
    offs, w = _flux_nodes(model, params[x], s)
    pts = np.repeat(params[None, :], offs.size + 1, axis=0)
    pts[:-1, x] += offs * s
    flux, b = _radial_flux(model, pts, fd_step)
    center = b.sample(offs.size)
    L1H = float(np.dot(w, flux[:-1]) / s / b.volume_density[-1])
    inv = center.invariants
    lhs = -L1H
    rhs = center.gradH2 - center.gradA2 - 3.0 * inv.H * inv.K
    scale = max(abs(lhs), abs(rhs), center.gradA2, center.gradH2, abs(3.0 * inv.H * inv.K), inv.normA2**2)
    residual = abs(lhs - rhs) / scale if scale > 0.0 else 0.0
    return L1Report(tuple(map(float, params)), L1H, lhs, rhs, residual, float(step))


def verify_l1_identity(model, params, step=L1_STEP, fd_step=STEP):
    """Relative residual of ``-L1(H) = |grad H|^2 - |grad A|^2 - 3HK``.

    Raises:
        NotApplicable: if ``H`` is not a function of the radial chart
            parameter near ``params``.
    """
    return l1_identity(model, params, step, fd_step).residual


def l1_convergence(model, params, steps=(0.08, 0.04, 0.02, 0.01)):
    """Observed order of the L1 residual under step halving.

    Returns ``(order, residuals)`` with ``order`` the least-squares slope of
    log residual against log step (NaN when a residual is exactly zero).
    """
    res = np.array([verify_l1_identity(model, params, s) for s in steps])
    if np.any(res <= 0.0):
        return float("nan"), res   # exact agreement: no order to fit
    order = float(np.polyfit(np.log(steps), np.log(res), 1)[0])
    return order, res


def codazzi_check(model, params, step=STEP):
    """Largest Codazzi asymmetry of ``h_ijk`` and a truncation estimate.

    The estimate is the change of ``h`` when the finite-difference step is
    doubled, which bounds the error of the finer value for a 4th-order rule.
    """
    h = chart_sample(model, params, step).gradA_components
    h2 = chart_sample(model, params, 2 * step).gradA_components
    asym = max(
        float(np.max(np.abs(h - h.transpose(0, 2, 1)))),
        float(np.max(np.abs(h - h.transpose(2, 1, 0)))),
    )
    return asym, float(np.max(np.abs(h - h2)))


def gradient_squares_residual(model, params, step=STEP):
    """Relative gap between ``|grad H^2|^2`` and ``|grad |A|^2|^2``.

    The two agree on any hypersurface with R = 0 because ``H^2 = |A|^2``.
    """
    s = chart_sample(model, params, step)
    lam = s.eigenvalues.as_array()
    H = lam.sum()
    gH2sq = np.sum((2.0 * H * s.grad_H) ** 2)
    gA = 2.0 * np.einsum("a,aac->c", lam, s.gradA_components)
    gAsq = np.sum(gA**2)
    scale = max(gH2sq, gAsq)
    return float(abs(gH2sq - gAsq) / scale) if scale > 0 else 0.0
