"""Pointwise extrinsic geometry of a parametrized hypersurface.

All derivatives of the parametrization up to third order come from one
tensor-product finite-difference stencil of 7 nodes per axis: centered
nodes in the interior and shifted (one-sided) nodes next to a hard chart
edge.  From those derivatives:

* metric ``g_ij = <X_i, X_j>`` and unit normal from the generalized cross
  product of the three tangents;
* second fundamental form ``b_ij = <X_ij, n>`` and ``A = g^{-1} b``;
* Christoffel symbols ``Gamma^k_ij = g^{kl} <X_ij, X_l>``;
* ``d_k b_ij = <X_ijk, n> - A^l_k <X_ij, X_l>`` (Weingarten) and the
  covariant derivative ``b_ij;k``, expressed in the orthonormal principal
  frame as ``h[i, j, k]``.

The batch entry point :func:`chart_batch` works on ``(N, 3)`` parameter
arrays; :func:`chart_sample` wraps it for a single point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DegenerateChart
from ..invariants import CurvatureInvariants, Eigenvalues, invariants_from_eigenvalues

#: stencil nodes per axis; 7 gives 6th/6th/4th order for 1st/2nd/3rd derivatives
NODES = 7
#: default finite-difference step as a fraction of the model's local chart scale
STEP = 1e-2
DET_G_MIN = 1e-14


@lru_cache(maxsize=None)
def fd_weights(offsets):
    """Weights for derivatives 0..3 at 0 from nodes at integer ``offsets``.

    Returns a ``(4, len(offsets))`` array; row ``d`` differentiates ``d``
    times on a unit grid.
    """
    x = np.asarray(offsets, dtype=float)
    n = x.size
    V = np.vander(x, n, increasing=True).T           # V[k, j] = x_j^k
    W = np.zeros((4, n))
    for d in range(4):
        rhs = np.zeros(n)
        rhs[d] = float(np.prod(np.arange(1, d + 1)))
        W[d] = np.linalg.solve(V, rhs)
    W.setflags(write=False)
    return W


def _offsets(model, params, steps):
    """Integer node offsets per point and axis, shifted away from hard edges."""
    half = NODES // 2
    base = np.arange(-half, half + 1)
    N = params.shape[0]
    shift = np.zeros((N, 3), dtype=int)
    for ax in range(3):
        lo, hi = model.domain[ax]
        hard_lo, hard_hi = model.hard[ax]
        x = params[:, ax]
        if hard_lo:
            room = np.floor((x - lo) / steps[:, ax] + 1e-9).astype(int)
            shift[:, ax] = np.maximum(shift[:, ax], np.clip(half - room, 0, half))
        if hard_hi:
            room = np.floor((hi - x) / steps[:, ax] + 1e-9).astype(int)
            shift[:, ax] = np.minimum(shift[:, ax], -np.clip(half - room, 0, half))
    return base[None, None, :] + shift[:, :, None]   # (N, 3, NODES)


def derivatives(model, params, step=STEP):
    """Partial derivatives of the parametrization up to third order.

    Returns ``D`` with shape ``(N, 4, 4, 4, 4)``: ``D[n, a, b, c]`` is
    ``d^a/dx0^a d^b/dx1^b d^c/dx2^c X`` at point ``n`` (only ``a+b+c <= 3``
    is meaningful).
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    steps = step * model.local_scale(params)          # (N, 3)
    offs = _offsets(model, params, steps)
    N = params.shape[0]
    W = np.empty((N, 3, 4, NODES))
    for n in range(N):
        for ax in range(3):
            W[n, ax] = fd_weights(tuple(offs[n, ax]))
    W /= (steps[:, :, None] ** np.arange(4)[None, None, :])[..., None]
    disp = offs * steps[:, :, None]
    grid = (
        params[:, None, None, None, :]
        + np.stack(np.broadcast_arrays(
            disp[:, 0, :, None, None], disp[:, 1, None, :, None], disp[:, 2, None, None, :]
        ), axis=-1)
    )
    X = model.position(grid)                         # (N, 7, 7, 7, 4)
    T = np.einsum("nabcx,nia->nibcx", X, W[:, 0])
    T = np.einsum("nibcx,njb->nijcx", T, W[:, 1])
    return np.einsum("nijcx,nkc->nijkx", T, W[:, 2])


_UNIT = np.eye(3, dtype=int)


def _first(D):
    return np.stack([D[:, _UNIT[i][0], _UNIT[i][1], _UNIT[i][2]] for i in range(3)], axis=1)


def _second(D):
    out = np.empty(D.shape[:1] + (3, 3) + D.shape[-1:])
    for i in range(3):
        for j in range(3):
            a = _UNIT[i] + _UNIT[j]
            out[:, i, j] = D[:, a[0], a[1], a[2]]
    return out


def _third(D):
    out = np.empty(D.shape[:1] + (3, 3, 3) + D.shape[-1:])
    for i in range(3):
        for j in range(3):
            for k in range(3):
                a = _UNIT[i] + _UNIT[j] + _UNIT[k]
                out[:, i, j, k] = D[:, a[0], a[1], a[2]]
    return out


def cross4(X1):
    """Vector orthogonal to the three rows of each ``(3, 4)`` block."""
    out = np.empty(X1.shape[:-2] + (4,))
    cols = [0, 1, 2, 3]
    for i in range(4):
        minor = X1[..., [c for c in cols if c != i]]
        out[..., i] = (-1) ** i * np.linalg.det(minor)
    return out


@dataclass
class ChartBatch:
    """Geometry at ``N`` chart points (arrays with leading axis ``N``)."""

    params: np.ndarray
    position: np.ndarray
    tangents: np.ndarray       # (N, 3, 4)
    normal: np.ndarray         # (N, 4)
    metric: np.ndarray         # (N, 3, 3)
    second_form: np.ndarray    # (N, 3, 3)
    shape_operator: np.ndarray # (N, 3, 3)  A^i_j
    eigenvalues: np.ndarray    # (N, 3) ascending
    frame: np.ndarray          # (N, 3, 3)  e_a = frame[a, i] d_i, principal, orthonormal
    christoffel: np.ndarray    # (N, 3, 3, 3)  Gamma^k_ij stored [k, i, j]
    cov_b: np.ndarray          # (N, 3, 3, 3)  b_ij;k stored [i, j, k]
    gradA: np.ndarray          # (N, 3, 3, 3)  h_ijk in the principal frame
    grad_H: np.ndarray         # (N, 3) frame components of grad H

    @property
    def H(self):
        return self.eigenvalues.sum(axis=-1)

    @property
    def normA2(self):
        return np.sum(self.eigenvalues**2, axis=-1)

    @property
    def gradA2(self):
        return np.sum(self.gradA**2, axis=(1, 2, 3))

    @property
    def gradH2(self):
        return np.sum(self.grad_H**2, axis=-1)

    @property
    def volume_density(self):
        return np.sqrt(np.linalg.det(self.metric))

    def __len__(self):
        return self.params.shape[0]

    def sample(self, n):
        ev = Eigenvalues.of(self.eigenvalues[n])
        return ChartSample(
            parameters=self.params[n], position=self.position[n], metric=self.metric[n],
            second_form=self.second_form[n], shape_operator=self.shape_operator[n],
            eigenvalues=ev, christoffel=self.christoffel[n], gradA_components=self.gradA[n],
            grad_H=self.grad_H[n], frame=self.frame[n], normal=self.normal[n],
            invariants=invariants_from_eigenvalues(ev),
        )


@dataclass
class ChartSample:
    parameters: np.ndarray
    position: np.ndarray
    metric: np.ndarray
    second_form: np.ndarray
    shape_operator: np.ndarray
    eigenvalues: Eigenvalues
    christoffel: np.ndarray
    gradA_components: np.ndarray
    grad_H: np.ndarray
    frame: np.ndarray
    normal: np.ndarray
    invariants: CurvatureInvariants

    @property
    def gradA2(self):
        return float(np.sum(self.gradA_components**2))

    @property
    def gradH2(self):
        return float(np.sum(self.grad_H**2))


def chart_batch(model, params, step=STEP):
    """Geometry of ``model`` at every row of ``params``.

    Raises :class:`DegenerateChart` if any metric determinant is below
    ``DET_G_MIN``.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    D = derivatives(model, params, step)
    pos = D[:, 0, 0, 0]
    X1, X2, X3 = _first(D), _second(D), _third(D)

    g = np.einsum("nix,njx->nij", X1, X1)
    det = np.linalg.det(g)
    bad = ~(det > DET_G_MIN)
    if np.any(bad):
        raise DegenerateChart(
            f"det g = {det[bad][0]:.3e} at parameters {params[bad][0].tolist()}"
        )
    ginv = np.linalg.inv(g)

    nrm = cross4(X1)
    nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
    b = np.einsum("nijx,nx->nij", X2, nrm)
    b = 0.5 * (b + np.swapaxes(b, 1, 2))
    if model.orientation == "auto":
        sign = np.where(np.einsum("nij,nji->n", ginv, b) < 0.0, -1.0, 1.0)
    else:
        sign = np.full(len(params), float(model.orientation))
    nrm *= sign[:, None]
    b *= sign[:, None, None]
    A = np.einsum("nik,nkj->nij", ginv, b)

    # principal orthonormal frame: g = L L^T, S = L^-1 b L^-T = Q diag(lam) Q^T
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    S = np.einsum("nia,nab,njb->nij", Linv, b, Linv)
    lam, Q = np.linalg.eigh(0.5 * (S + np.swapaxes(S, 1, 2)))
    E = np.einsum("nia,nib->nab", Q, Linv)        # rows: e_a in chart components

    gam_first = np.einsum("nijx,nlx->nijl", X2, X1)            # <X_ij, X_l>
    gamma = np.einsum("nkl,nijl->nkij", ginv, gam_first)       # Gamma^k_ij
    db = np.einsum("nijkx,nx->nijk", X3, nrm) - np.einsum("nlk,nijl->nijk", A, gam_first)
    cov_b = (
        db
        - np.einsum("nlki,nlj->nijk", gamma, b)
        - np.einsum("nlkj,nil->nijk", gamma, b)
    )
    h = np.einsum("nai,nbj,nck,nijk->nabc", E, E, E, cov_b)
    grad_H = np.einsum("naac->nc", h)
    return ChartBatch(
        params=params, position=pos, tangents=X1, normal=nrm, metric=g, second_form=b,
        shape_operator=A, eigenvalues=lam, frame=E, christoffel=gamma, cov_b=cov_b,
        gradA=h, grad_H=grad_H,
    )


def chart_sample(model, params, step=STEP) -> ChartSample:
    """Geometry of ``model`` at a single chart point."""
    return chart_batch(model, np.asarray(params, dtype=float)[None, :], step).sample(0)
