"""Symmetric eigendecomposition of sample covariance matrices.

Two backends: ``"lapack"`` (scipy's ``syevr``, used for ensembles) and
``"householder-ql"``, a self-contained Householder tridiagonalisation
followed by implicit-shift QL iterations.  Both return eigenvalues in
descending order.

Ties between equal eigenvalues are broken by a stable sort on the value and
then on the first coordinate of largest magnitude of each vector; within a
pack any deterministic rule is fine because pack coordinates are
exchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateProjection, NonConvergence

__all__ = [
    "EigenPair",
    "ExtremeSpectrum",
    "OrientedPair",
    "sample_covariance",
    "householder_tridiagonalize",
    "tridiagonal_ql",
    "full_symmetric_eig",
    "extreme_spectrum",
    "oriented_extremes",
    "DEGENERATE_THRESHOLD",
]

DEGENERATE_THRESHOLD = 1e-6


def sample_covariance(X):
    """``X^T X / n``, symmetrised so that ``S == S.T`` holds bitwise."""
    X = np.asarray(X, dtype=float)
    S = X.T @ X
    S = 0.5 * (S + S.T)
    S /= X.shape[0]
    return S


def householder_tridiagonalize(S):
    """Reduce symmetric ``S`` to tridiagonal form ``Q^T S Q = T``.

    Returns ``(d, e, Q)`` with ``d`` the diagonal, ``e`` the sub-diagonal
    (length ``n - 1``) and ``Q`` orthogonal.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        # A <- H A H with H = I - 2 v v^T acting on rows/cols k+1..n-1
        sub = A[k + 1:, k:]
        sub -= 2.0 * np.outer(v, v @ sub)
        sub = A[k:, k + 1:]
        sub -= 2.0 * np.outer(sub @ v, v)
        Qs = Q[:, k + 1:]
        Qs -= 2.0 * np.outer(Qs @ v, v)
    d = np.diag(A).copy()
    e = np.diag(A, -1).copy()
    return d, e, Q


def tridiagonal_ql(d, e, Z=None, max_iter=60):
    """Implicit-shift QL on the tridiagonal ``(d, e)``; accumulates rotations into ``Z``.

    Follows the classical tql2 scheme: deflate when an off-diagonal element
    is negligible against its neighbours, otherwise apply a Wilkinson-type
    shift and chase the bulge with Givens rotations.
    """
    d = np.array(d, dtype=float, copy=True)
    n = d.size
    e = np.concatenate([np.asarray(e, dtype=float), [0.0]])
    Z = np.eye(n) if Z is None else np.array(Z, dtype=float, copy=True)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise NonConvergence(f"QL iteration did not converge for eigenvalue {l} after {max_iter} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = Z[:, i].copy()
                Z[:, i] = c * zi - s * Z[:, i + 1]
                Z[:, i + 1] = s * zi + c * Z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, Z


def _sort_desc(w, V):
    pivot = np.argmax(np.abs(V), axis=0)
    order = np.lexsort((pivot, -w))
    return w[order], V[:, order]


def full_symmetric_eig(S, method="lapack", max_iter=60):
    """All eigenpairs of symmetric ``S``, eigenvalues descending."""
    S = np.asarray(S, dtype=float)
    if method == "lapack":
        w, V = scipy.linalg.eigh(S, driver="evr")
    elif method == "householder-ql":
        d, e, Q = householder_tridiagonalize(S)
        w, V = tridiagonal_ql(d, e, Q, max_iter=max_iter)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    return _sort_desc(w, V)


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray


@dataclass
class ExtremeSpectrum:
    """Top eigenpairs (descending), bottom eigenpairs (ascending) and the bulk range."""

    top: list
    bottom: list
    bulk_edges: tuple
    p: int


def extreme_spectrum(S, n_top, n_bottom, method="lapack"):
    """Extract ``n_top`` largest and ``n_bottom`` smallest eigenpairs of ``S``.

    With the LAPACK backend only the needed index ranges are computed; the
    bulk edges are the neighbouring eigenvalues.
    """
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    if n_top + n_bottom > p:
        raise ValueError(f"cannot take {n_top}+{n_bottom} extreme pairs from a {p}x{p} matrix")
    if method == "lapack" and p > 4 * (n_top + n_bottom + 2):
        wt, Vt = scipy.linalg.eigh(S, subset_by_index=[p - n_top - 1, p - 1], driver="evr")
        wb, Vb = scipy.linalg.eigh(S, subset_by_index=[0, n_bottom], driver="evr")
        wt, Vt = wt[::-1], Vt[:, ::-1]
        top = [EigenPair(float(wt[k]), Vt[:, k]) for k in range(n_top)]
        bottom = [EigenPair(float(wb[k]), Vb[:, k]) for k in range(n_bottom)]
        bulk = (float(wb[n_bottom]), float(wt[n_top]))
    else:
        w, V = full_symmetric_eig(S, method)
        top = [EigenPair(float(w[k]), V[:, k]) for k in range(n_top)]
        bottom = [EigenPair(float(w[p - 1 - k]), V[:, p - 1 - k]) for k in range(n_bottom)]
        rest = w[n_top:p - n_bottom]
        bulk = (float(rest.min()), float(rest.max())) if rest.size else (math.nan, math.nan)
    return ExtremeSpectrum(top, bottom, bulk, p)


@dataclass
class OrientedPair:
    """A spike-assigned eigenpair with the sign convention ``u[index] >= 0``.

    ``u`` is the spike-block part rescaled to unit norm and ``v`` the noise
    part with the same rescaling, so ``cos_angle = u[index] / sqrt(1 + |v|^2)``.
    """

    index: int
    value: float
    u: np.ndarray
    v: np.ndarray
    cos_angle: float


def _orient(pair, index, r):
    w = np.asarray(pair.vector, dtype=float)
    wu, wv = w[:r], w[r:]
    nu = float(np.linalg.norm(wu))
    if nu < DEGENERATE_THRESHOLD:
        raise DegenerateProjection(
            f"eigenvector for eigenvalue {pair.value:.6g} has spike-block norm {nu:.3g} < {DEGENERATE_THRESHOLD:g}")
    sign = -1.0 if wu[index] < 0 else 1.0
    u = sign * wu / nu
    v = sign * wv / nu
    cos = float(u[index] / math.sqrt(1.0 + float(v @ v)))
    return OrientedPair(index, pair.value, u, v, cos)


def oriented_extremes(spectrum: ExtremeSpectrum, r_plus, r_minus, r=None):
    """Orient the ``r`` extreme pairs in spike-coordinate order.

    Coordinate ``k < r_plus`` gets the ``k``-th largest eigenvalue.  The
    bottom ``r_minus`` eigenvalues are assigned in descending order to
    coordinates ``r_plus .. r - 1`` so the smallest spike gets the smallest
    eigenvalue.
    """
    r = r_plus + r_minus if r is None else r
    if r_plus + r_minus != r:
        raise ValueError("r_plus + r_minus must equal r")
    if len(spectrum.top) < r_plus or len(spectrum.bottom) < r_minus:
        raise ValueError("spectrum holds fewer extreme pairs than requested")
    pairs = list(spectrum.top[:r_plus]) + list(reversed(spectrum.bottom[:r_minus]))
    return [_orient(pair, k, r) for k, pair in enumerate(pairs)]
