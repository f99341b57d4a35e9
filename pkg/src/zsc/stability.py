"""Stability form, destabilizing test functions and Sobolev-inequality mechanics.

For a zero-scalar-curvature hypersurface oriented with ``H > 0`` the second
variation of ``int H dM`` is, after integrating by parts,

    Q1(f) = int <P1 grad f, grad f> dM + 3 int K f^2 dM,

and stability means ``Q1(f) >= 0`` for every compactly supported ``f``.  All
test functions here are radial in the intrinsic distance ``rho`` from the
model's base point, so ``<P1 grad f, grad f> = (H - lam_rho) f'(rho)^2`` and
every integral reduces to :func:`~zsc.immersion.radial.radial_integral`.

On the rotational models the base point is the neck sphere and the chart
covers one half of the hypersurface; radial functions there extend evenly
across the neck, which doubles both terms of ``Q1`` and leaves its sign
unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ._parallel import pmap
from .constants import q_window
from .errors import DeltaTooLarge, DomainError, NonRadialUnsupported
from .immersion.radial import ball_volume, profile_of, radial_integral

NONNEGATIVE = "nonnegative"
DESTABILIZING = "destabilizing"

SSY = "ssy_cutoff"
LINEAR = "piecewise_linear_radial"
BUMP = "parametric_bump"
#: Gaussian bumps are cut off this many widths from their center
BUMP_CUTOFF = 6.0


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported radial function ``f(rho)``.

    Build instances with :func:`ssy_cutoff`, :func:`piecewise_linear_radial`
    or :func:`parametric_bump`.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    params: dict

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        p = self.params
        if self.kind == SSY:
            r = p["r"]
            return np.clip((2.0 * r - rho) / r, 0.0, 1.0)
        if self.kind == LINEAR:
            return np.interp(rho, p["knots"], p["values"], left=p["values"][0], right=0.0)
        z = (rho - p["center"]) / p["width"]
        return np.where(np.abs(z) < BUMP_CUTOFF, p["amplitude"] * np.exp(-z * z), 0.0)

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        p = self.params
        if self.kind == SSY:
            r = p["r"]
            return np.where((rho > r) & (rho < 2.0 * r), -1.0 / r, 0.0)
        if self.kind == LINEAR:
            k, v = np.asarray(p["knots"]), np.asarray(p["values"])
            slopes = np.diff(v) / np.diff(k)
            i = np.searchsorted(k, rho, side="right") - 1
            inside = (i >= 0) & (i < len(slopes))
            return np.where(inside, slopes[np.clip(i, 0, len(slopes) - 1)], 0.0)
        z = (rho - p["center"]) / p["width"]
        return np.where(
            np.abs(z) < BUMP_CUTOFF, -2.0 * z / p["width"] * p["amplitude"] * np.exp(-z * z), 0.0
        )

    @property
    def support(self):
        """Radius beyond which ``f`` vanishes."""
        p = self.params
        if self.kind == SSY:
            return 2.0 * p["r"]
        if self.kind == LINEAR:
            return float(p["knots"][-1])
        return p["center"] + BUMP_CUTOFF * p["width"]

    @property
    def kinks(self):
        p = self.params
        if self.kind == SSY:
            return (p["r"], 2.0 * p["r"])
        if self.kind == LINEAR:
            return tuple(p["knots"])
        return (p["center"] - BUMP_CUTOFF * p["width"], p["center"], p["center"] + BUMP_CUTOFF * p["width"])

    @property
    def is_zero(self):
        if self.kind == BUMP:
            return self.params["amplitude"] == 0.0
        if self.kind == LINEAR:
            return not any(self.params["values"])
        return False

    def to_dict(self):
        return {"kind": self.kind, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}


def ssy_cutoff(r):
    """1 on ``B_r``, ``(2r - rho)/r`` on ``B_2r - B_r``, 0 outside."""
    if not r > 0:
        raise DomainError(f"cutoff radius must be positive, got {r!r}")
    return TestFunction(SSY, {"r": float(r)})


def piecewise_linear_radial(knots, values):
    """Linear interpolant through ``(knots, values)``, constant before the first knot.

    The last value must be 0 so the function is compactly supported.
    """
    k = tuple(float(x) for x in knots)
    v = tuple(float(x) for x in values)
    if len(k) != len(v) or len(k) < 2:
        raise DomainError("knots and values must have equal length >= 2")
    if k[0] < 0 or any(b <= a for a, b in zip(k, k[1:])):
        raise DomainError("knots must be nonnegative and strictly increasing")
    if v[-1] != 0.0:
        raise DomainError("last value must be 0 for compact support")
    return TestFunction(LINEAR, {"knots": k, "values": v})


def parametric_bump(center, width, amplitude=1.0):
    """``amplitude * exp(-(rho - center)^2 / width^2)``, cut off at 6 widths."""
    if not width > 0:
        raise DomainError(f"bump width must be positive, got {width!r}")
    return TestFunction(BUMP, {"center": float(center), "width": float(width), "amplitude": float(amplitude)})


@dataclass(frozen=True)
class StabilityReport:
    q1_value: float
    gradient_term: float
    curvature_term: float
    test_function: TestFunction
    verdict: str
    error: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        d = {
            "q1_value": self.q1_value,
            "gradient_term": self.gradient_term,
            "curvature_term": self.curvature_term,
            "quadrature_error": self.error,
            "verdict": self.verdict,
            "test_function": self.test_function.to_dict(),
        }
        d.update(self.extra)
        return d


def quadratic_form_q1(model, f, rtol=1e-10):
    """Evaluate ``Q1(f)`` on ``model`` by symmetry-reduced quadrature.

    Raises:
        NonRadialUnsupported: if ``f`` is not a radial :class:`TestFunction`.
        DomainExceeded: if the support of ``f`` leaves the chart.
    """
    if not isinstance(f, TestFunction):
        raise NonRadialUnsupported("only radial test functions are supported")
    if f.is_zero:
        return StabilityReport(0.0, 0.0, 0.0, f, NONNEGATIVE)
    r = f.support
    grad = radial_integral(
        model, lambda rho, lam, F: (F["H"] - lam) * f.derivative(rho) ** 2, r, f.kinks, rtol=rtol
    )
    # Q1 only needs the curvature term to the accuracy of the sum
    curv = radial_integral(
        model, lambda rho, lam, F: 3.0 * F["K"] * f(rho) ** 2, r, f.kinks, rtol=rtol,
        atol=rtol * abs(grad.value),
    )
    q1 = grad.value + curv.value
    return StabilityReport(
        q1_value=q1, gradient_term=grad.value, curvature_term=curv.value, test_function=f,
        verdict=DESTABILIZING if q1 < 0.0 else NONNEGATIVE, error=grad.error + curv.error,
    )


#: default search boxes, per family: (name, low, high)
FAMILIES = {
    "bump": (("center", 1.0, 50.0), ("width", 0.5, 30.0), ("amplitude", 1.0, 1.0)),
    "ssy": (("r", 0.5, 50.0),),
}


def _family_member(family, x):
    if family == "bump":
        return parametric_bump(*x)
    return ssy_cutoff(x[0])


#: quadrature tolerance of search probes; the winner is re-evaluated at 1e-10
SEARCH_RTOL = 1e-8


def instability_search(model, family="bump", budget=2000, seed=0, bounds=None):
    """Minimize ``Q1`` over a bounded test-function family.

    Half of the budget goes to uniform random probes drawn from
    ``numpy.random.default_rng(seed)``; the rest to a compass search from
    the best probe, halving the step on failure.  Probes are integrated to
    ``SEARCH_RTOL`` and the winner again at the default tolerance.  Supports
    that leave the chart are skipped.  The result is deterministic for a given seed and
    budget; ties go to the earliest evaluation.

    Returns:
        The :class:`StabilityReport` of the best member found, with the
        search trace summary in ``extra``.
    """
    if budget < 100:
        raise DomainError(f"budget must be >= 100, got {budget}")
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
    spec = FAMILIES[family]
    if bounds:
        spec = tuple((n, *map(float, bounds.get(n, (lo, hi)))) for n, lo, hi in spec)
    lo = np.array([s[1] for s in spec])
    hi = np.array([s[2] for s in spec])
    reach = profile_of(model).reach()
    cache = {}

    def q1_of(x):
        key = tuple(float(v) for v in x)
        if key not in cache:
            f = _family_member(family, key)
            cache[key] = quadratic_form_q1(model, f, SEARCH_RTOL) if f.support <= reach else None
        return cache[key]

    rng = np.random.default_rng(seed)
    probes = lo + (hi - lo) * rng.random((budget // 2, lo.size))
    reports = pmap(q1_of, probes)
    values = np.array([np.inf if r is None else r.q1_value for r in reports])
    best = int(np.argmin(values))
    x, fx = probes[best].copy(), values[best]
    used = len(probes)
    step = 0.25 * (hi - lo)
    active = hi > lo
    while used < budget and np.any(step[active] > 1e-9 * (hi - lo)[active]):
        moved = False
        for i in np.flatnonzero(active):
            for sgn in (-1.0, 1.0):
                if used >= budget:
                    break
                y = x.copy()
                y[i] = np.clip(y[i] + sgn * step[i], lo[i], hi[i])
                rep = q1_of(y)
                used += 1
                if rep is not None and rep.q1_value < fx:
                    x, fx, moved = y, rep.q1_value, True
        if not moved:
            step *= 0.5
    f = _family_member(family, tuple(float(v) for v in x))
    if f.support <= reach:
        rep = quadratic_form_q1(model, f)
    else:
        rep = StabilityReport(math.nan, math.nan, math.nan, f, NONNEGATIVE)
    trace = {"family": family, "budget": int(budget), "seed": int(seed), "evaluations": int(used)}
    return replace(rep, extra={**rep.extra, **trace})


@dataclass(frozen=True)
class SobolevReport:
    r: float
    delta: float
    lhs: float
    rhs: float
    rhs_bound: float
    ratio: float
    exponent: float

    def to_dict(self):
        return dict(self.__dict__)


def sobolev_check(model, consts, r, delta):
    """Both sides of the pinched Sobolev-type inequality for ``ssy_cutoff(r)``.

    With ``n = 5 + 2q``::

        lhs = int H^n (-K/H^3 - Lambda1 delta^(n/(3+2q))) psi^n
        rhs = Lambda2 delta^(-n/2) int |grad psi|^n

    ``rhs_bound`` replaces the annulus volume in ``rhs`` by ``vol(B_2r)``.

    Raises:
        DeltaTooLarge: if ``c - Lambda1 delta^(n/(3+2q)) <= 0``.
    """
    if not delta > 0 or consts.pinching_margin(delta) <= 0.0:
        raise DeltaTooLarge(
            f"delta = {delta!r} leaves no pinching margin (delta must be in (0, {consts.delta_max():.6g}))"
        )
    a, half_n = consts.young_exponents
    n = 2.0 * half_n
    psi = ssy_cutoff(r)
    shift = consts.Lambda1 * delta**a

    def lhs_fn(rho, lam, F):
        H = F["H"]
        pinch = -F["K"] / H**3
        return H**n * (pinch - shift) * psi(rho) ** n

    lhs = radial_integral(model, lhs_fn, 2.0 * r, psi.kinks).value
    v2, v1 = ball_volume(model, 2.0 * r), ball_volume(model, r)
    coef = consts.Lambda2 * delta ** (-half_n)
    # |grad psi| = 1/r on the annulus, so its integral is an annulus volume; done by quadrature
    grad_int = radial_integral(
        model, lambda rho, lam, F: np.abs(psi.derivative(rho)) ** n, 2.0 * r, psi.kinks
    ).value
    rhs = coef * grad_int
    bound = coef * v2 / r**n
    return SobolevReport(
        r=float(r), delta=float(delta), lhs=float(lhs), rhs=float(rhs), rhs_bound=float(bound),
        ratio=float(lhs / rhs) if rhs > 0 else math.inf, exponent=float(n),
    )


@dataclass(frozen=True)
class Crossover:
    r_star: float
    slope: float
    extrapolated: bool
    reports: tuple

    def to_dict(self):
        return {
            "r_star": self.r_star, "log_slope": self.slope, "extrapolated": self.extrapolated,
            "points": [rep.to_dict() for rep in self.reports],
        }


def sobolev_crossover(model, consts, delta, r_list=(5.0, 10.0, 20.0, 40.0)):
    """Radius ``r*`` beyond which the Sobolev-type inequality fails.

    Evaluates :func:`sobolev_check` on ``r_list``.  If the ratio already
    exceeds 1 there, ``r*`` is the first such radius refined by bisection on
    ``log(ratio)``; otherwise a power law is fitted to the ratio and ``r*``
    is its extrapolated crossing (``extrapolated = True``), ``inf`` if the
    fitted slope is not positive.
    """
    reps = tuple(sobolev_check(model, consts, r, delta) for r in r_list)
    logr = np.log([rep.r for rep in reps])
    logq = np.log([rep.ratio for rep in reps])
    slope = float(np.polyfit(logr, logq, 1)[0])
    above = np.flatnonzero(logq > 0.0)
    if above.size and above[0] > 0:
        i = above[0]
        r_star = float(brentq(
            lambda lr: math.log(sobolev_check(model, consts, math.exp(lr), delta).ratio),
            logr[i - 1], logr[i], xtol=1e-6,
        ))
        return Crossover(math.exp(r_star), slope, False, reps)
    if above.size:
        return Crossover(float(reps[0].r), slope, False, reps)
    if slope <= 0.0:
        return Crossover(math.inf, slope, True, reps)
    intercept = float(np.mean(logq - slope * logr))
    return Crossover(float(math.exp(-intercept / slope)), slope, True, reps)


def corollary_p_window(c0=16.0, c0_exponent=2):
    """Open interval of admissible ``p``: ``(5/2, 5/2 + q_max)``."""
    return 2.5, 2.5 + q_window(c0, c0_exponent)


@dataclass(frozen=True)
class CorollaryReport:
    p: float
    r: float
    lhs: float
    rhs: float
    ratio: float

    def to_dict(self):
        return dict(self.__dict__)


def ssy_corollary_check(model, p, r, c0=16.0, c0_exponent=2):
    """``int |A|^2p psi^2p`` against ``int |grad psi|^2p`` for ``ssy_cutoff(r)``.

    Raises:
        DomainError: if ``p`` is outside :func:`corollary_p_window`.
    """
    lo, hi = corollary_p_window(c0, c0_exponent)
    if not lo < p < hi:
        raise DomainError(f"p = {p!r} outside the admissible window ({lo}, {hi:.17g})")
    psi = ssy_cutoff(r)
    e = 2.0 * p
    lhs = radial_integral(model, lambda rho, lam, F: F["normA"] ** e * psi(rho) ** e, 2.0 * r, psi.kinks).value
    rhs = radial_integral(
        model, lambda rho, lam, F: np.abs(psi.derivative(rho)) ** e, 2.0 * r, psi.kinks
    ).value
    return CorollaryReport(float(p), float(r), float(lhs), float(rhs), float(lhs / rhs) if rhs > 0 else math.inf)
