"""Algebra of the three principal curvatures of a hypersurface in R^4.

Conventions used throughout the package:

* ``H`` is the *non-normalized* mean curvature, ``l1 + l2 + l3``.
* ``R`` is the second elementary symmetric function ``l1 l2 + l1 l3 + l2 l3``.
* ``K`` is the Gauss-Kronecker curvature ``l1 l2 l3``.

The scalar API works on :class:`Eigenvalues`; the ``*_array`` helpers take
any array whose last axis has length 3 and are what the samplers and
property tests use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

#: Supremum of the pinching ratio -K/H^3 on {R = 0}.
PINCHING_MAX = 4.0 / 27.0

#: Below this |H| the pinching ratio is reported as absent.
H_ZERO_TOL = 1e-13


@dataclass(frozen=True)
class Eigenvalues:
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def of(cls, values) -> "Eigenvalues":
        l1, l2, l3 = (float(v) for v in values)
        return cls(l1, l2, l3)

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3])

    def __iter__(self):
        return iter((self.lambda1, self.lambda2, self.lambda3))


@dataclass(frozen=True)
class CurvatureInvariants:
    R: float
    H: float
    K: float
    normA2: float
    p1_spectrum: tuple
    pinching: Optional[float]

    @property
    def normA(self) -> float:
        return float(np.sqrt(self.normA2))

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "H": self.H,
            "K": self.K,
            "normA2": self.normA2,
            "p1_spectrum": list(self.p1_spectrum),
            "pinching": self.pinching,
        }


def symmetric_functions(lams):
    """Return ``(H, R, K)`` for an array of triples (last axis = 3)."""
    lams = np.asarray(lams, dtype=float)
    l1, l2, l3 = lams[..., 0], lams[..., 1], lams[..., 2]
    H = l1 + l2 + l3
    R = l1 * l2 + l1 * l3 + l2 * l3
    K = l1 * l2 * l3
    return H, R, K


def pinching_array(lams):
    """-K/H^3 elementwise; NaN where |H| < ``H_ZERO_TOL``."""
    H, _, K = symmetric_functions(lams)
    out = np.full(np.shape(H), np.nan)
    ok = np.abs(H) >= H_ZERO_TOL
    out[ok] = -K[ok] / H[ok] ** 3
    return out


def p1_spectrum_array(lams):
    lams = np.asarray(lams, dtype=float)
    H = lams.sum(axis=-1, keepdims=True)
    return H - lams


def normalize_orientation_array(lams):
    """Flip every triple whose sum is negative so that H >= 0."""
    lams = np.asarray(lams, dtype=float)
    sign = np.where(lams.sum(axis=-1, keepdims=True) < 0.0, -1.0, 1.0)
    return sign * lams


def invariants_from_eigenvalues(ev: Eigenvalues) -> CurvatureInvariants:
    """Curvature invariants of a single triple of principal curvatures.

    >>> inv = invariants_from_eigenvalues(Eigenvalues(1.0, 1.0, -0.5))
    >>> inv.R, inv.H, inv.K
    (0.0, 1.5, -0.5)
    """
    l1, l2, l3 = ev
    H = l1 + l2 + l3
    R = l1 * l2 + l1 * l3 + l2 * l3
    K = l1 * l2 * l3
    normA2 = l1 * l1 + l2 * l2 + l3 * l3
    pinching = None if abs(H) < H_ZERO_TOL else -K / H**3
    return CurvatureInvariants(
        R=R, H=H, K=K, normA2=normA2,
        p1_spectrum=p1_spectrum(ev), pinching=pinching,
    )


def p1_spectrum(ev: Eigenvalues) -> tuple:
    """Eigenvalues of the first Newton transformation ``H I - A``."""
    l1, l2, l3 = ev
    H = l1 + l2 + l3
    return (H - l1, H - l2, H - l3)


def normalize_orientation(ev: Eigenvalues) -> Eigenvalues:
    # H == 0 is left alone; the triple has no preferred orientation there.
    if ev.lambda1 + ev.lambda2 + ev.lambda3 < 0.0:
        return Eigenvalues(-ev.lambda1, -ev.lambda2, -ev.lambda3)
    return ev


def k_bound(normA):
    """|A|^3 / (3 sqrt 3), the largest K compatible with a given |A|."""
    return np.asarray(normA, dtype=float) ** 3 / (3.0 * np.sqrt(3.0))
