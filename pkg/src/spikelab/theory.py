"""Closed-form limits for the spiked population model.

Everything here is a pure function of spike values and the aspect ratio
``gamma_sq = N / p``.  Spike arguments are the population eigenvalues
``alpha``; the moment functions are evaluated at the corresponding outlier
location ``rho(alpha)`` implicitly, so ``m3(alpha, g2)`` means the MP-weighted
integral of ``x / (rho(alpha) - x)**2``.

Model-dependent assemblies (`eigenvalue_cov`, `eigenvector_cov`,
`angle_theory`, `predict`) accept any object exposing the attributes used by
`spikelab.model.ModelConfig`: ``packs``, ``alphas``, ``gamma_sq_realized`` and
``fourth_moment(i, j, k, l)``.  Spike coordinates are 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import ModelError, TransitionWindow

__all__ = [
    "MpSea",
    "SpikeClass",
    "PackTheory",
    "CovarianceTensor",
    "AngleTheory",
    "TheoryPredictions",
    "mp_support",
    "mp_density",
    "classify_spike",
    "is_supercritical",
    "rho",
    "scaling",
    "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8",
    "diag_limit_a",
    "diag_limit_c",
    "omega_tilde", "theta_tilde", "zeta_tilde", "tau_tilde", "kappa_tilde", "mu_tilde",
    "cos_limit",
    "pack_theory",
    "eigenvalue_cov",
    "eigenvector_cov",
    "eigenvector_coefficients",
    "angle_theory",
    "angle_covariance",
    "predict",
]


def _check_gamma(gamma_sq):
    if not gamma_sq > 1:
        raise ModelError(f"aspect ratio gamma^2 = N/p must exceed 1, got {gamma_sq!r}")
    return 1.0 / gamma_sq


@dataclass(frozen=True)
class MpSea:
    lambda_minus: float
    lambda_plus: float

    def contains(self, x):
        return self.lambda_minus <= x <= self.lambda_plus


def mp_support(gamma_sq) -> MpSea:
    """Edges ``((1 - 1/gamma)**2, (1 + 1/gamma)**2)`` of the Marchenko-Pastur sea."""
    _check_gamma(gamma_sq)
    g_inv = 1.0 / math.sqrt(gamma_sq)
    return MpSea((1.0 - g_inv) ** 2, (1.0 + g_inv) ** 2)


def mp_density(x, gamma_sq):
    """MP density with ratio ``gamma_sq``; vectorised, zero outside the sea."""
    sea = mp_support(gamma_sq)
    x = np.asarray(x, dtype=float)
    inside = (x >= sea.lambda_minus) & (x <= sea.lambda_plus)
    prod = np.where(inside, (sea.lambda_plus - x) * (x - sea.lambda_minus), 0.0)
    safe_x = np.where(inside, x, 1.0)
    out = np.where(inside, gamma_sq / (2.0 * np.pi * safe_x) * np.sqrt(np.maximum(prod, 0.0)), 0.0)
    return out if out.ndim else float(out)


class SpikeClass(enum.Enum):
    SUPERCRITICAL_ABOVE = "supercritical_above"
    SUBCRITICAL_ABOVE = "subcritical_above"
    INSIDE_WINDOW_BELOW = "inside_window_below"
    SUPERCRITICAL_BELOW = "supercritical_below"

    @property
    def detaches(self):
        return self in (SpikeClass.SUPERCRITICAL_ABOVE, SpikeClass.SUPERCRITICAL_BELOW)


def classify_spike(alpha, gamma_sq) -> SpikeClass:
    if not alpha > 0:
        raise ModelError(f"spike values must be positive, got {alpha!r}")
    _check_gamma(gamma_sq)
    g_inv = 1.0 / math.sqrt(gamma_sq)
    if alpha > 1.0 + g_inv:
        return SpikeClass.SUPERCRITICAL_ABOVE
    if alpha < 1.0 - g_inv:
        return SpikeClass.SUPERCRITICAL_BELOW
    if alpha >= 1.0:
        return SpikeClass.SUBCRITICAL_ABOVE
    return SpikeClass.INSIDE_WINDOW_BELOW


def is_supercritical(alpha, gamma_sq):
    return classify_spike(alpha, gamma_sq).detaches


def _require(alpha, gamma_sq):
    c = _check_gamma(gamma_sq)
    if not is_supercritical(alpha, gamma_sq):
        raise TransitionWindow(alpha, gamma_sq)
    return c


def rho(alpha, gamma_sq):
    """Almost-sure limit ``alpha + alpha / (gamma^2 (alpha - 1))`` of a detached eigenvalue."""
    c = _require(alpha, gamma_sq)
    return alpha + c * alpha / (alpha - 1.0)


# Moment functions.  Denominators (a-1)^2 - c and (a-1)(b-1) - c are positive
# exactly when both spikes detach on the same side or on opposite sides of the
# sea, which `_require` guarantees.

def m1(alpha, gamma_sq):
    _require(alpha, gamma_sq)
    return 1.0 / (alpha - 1.0)


def m2(alpha, alpha_prime, gamma_sq):
    c = _require(alpha, gamma_sq)
    _require(alpha_prime, gamma_sq)
    a, b = alpha - 1.0, alpha_prime - 1.0
    ab = a * b
    return (ab + c * alpha * alpha_prime - c) / (ab * (ab - c))


def m3(alpha, gamma_sq):
    c = _require(alpha, gamma_sq)
    return 1.0 / ((alpha - 1.0) ** 2 - c)


def m4(alpha, gamma_sq):
    c = _require(alpha, gamma_sq)
    a = alpha - 1.0
    return 2.0 * a ** 3 / (a * a - c) ** 3


def m5(alpha, gamma_sq):
    c = _require(alpha, gamma_sq)
    a = alpha - 1.0
    return a * a / ((a + c) ** 2 * (a * a - c))


def m6(alpha, gamma_sq):
    c = _require(alpha, gamma_sq)
    return 1.0 / (alpha - 1.0 + c)


def m7(alpha, alpha_prime, gamma_sq):
    c = _require(alpha, gamma_sq)
    _require(alpha_prime, gamma_sq)
    a, b = alpha - 1.0, alpha_prime - 1.0
    num = a * a * b * b * (a * b + c * (alpha * alpha_prime + alpha + alpha_prime - 2.0) + c * c)
    den = (a * a - c) * (b * b - c) * (a * b - c) ** 3
    return num / den


def m8(alpha, alpha_prime, gamma_sq):
    c = _require(alpha, gamma_sq)
    _require(alpha_prime, gamma_sq)
    a, b = alpha - 1.0, alpha_prime - 1.0
    num = a * b * b + c * b * (alpha * alpha_prime + alpha - 2.0) - c * c
    den = (a * b - c) ** 2 * (b * b - c)
    return num / den


def scaling(alpha, gamma_sq):
    """Pack scaling ``1 + alpha * m3 / gamma^2`` dividing the limiting Gaussian matrix."""
    c = _require(alpha, gamma_sq)
    return 1.0 + c * alpha * m3(alpha, gamma_sq)


def diag_limit_a(alpha, gamma_sq):
    """Limit of a diagonal entry of ``A_N(rho)``: ``1 + g/(rho - g)`` with ``g = (1 + m1)/gamma^2``."""
    c = _require(alpha, gamma_sq)
    g = c * (1.0 + m1(alpha, gamma_sq))
    return 1.0 + g / (rho(alpha, gamma_sq) - g)


def diag_limit_c(alpha, gamma_sq):
    """Limit of a diagonal entry of ``C_N(rho)``: ``m5 / (gamma^2 (1 - m6/gamma^2)^2)``."""
    c = _require(alpha, gamma_sq)
    return c * m5(alpha, gamma_sq) / (1.0 - c * m6(alpha, gamma_sq)) ** 2


def omega_tilde(alpha, alpha_prime, gamma_sq):
    c = _require(alpha, gamma_sq)
    _require(alpha_prime, gamma_sq)
    return (1.0 + c / (alpha - 1.0)) * (1.0 + c / (alpha_prime - 1.0))


def theta_tilde(alpha, alpha_prime, gamma_sq):
    c = _require(alpha, gamma_sq)
    _require(alpha_prime, gamma_sq)
    a, b = alpha - 1.0, alpha_prime - 1.0
    return (a + c) * (b + c) / (a * b - c)


def zeta_tilde(alpha, alpha_prime, gamma_sq):
    return diag_limit_c(alpha, gamma_sq) * diag_limit_c(alpha_prime, gamma_sq)


def tau_tilde(alpha, alpha_prime, gamma_sq):
    c = _check_gamma(gamma_sq)
    return c * m7(alpha, alpha_prime, gamma_sq)


def kappa_tilde(alpha, alpha_prime, gamma_sq):
    """Diagonal cross limit between ``A_N(rho(alpha))`` and ``C_N(rho(alpha_prime))``.

    Not symmetric: the first argument belongs to the ``A`` (eigenvalue) side.
    """
    return diag_limit_a(alpha, gamma_sq) * diag_limit_c(alpha_prime, gamma_sq)


def mu_tilde(alpha, alpha_prime, gamma_sq):
    """Trace cross limit ``tr(A(rho(alpha)) C(rho(alpha_prime))) / N``; first argument on the ``A`` side."""
    c = _check_gamma(gamma_sq)
    return c * m3(alpha_prime, gamma_sq) + c * m8(alpha, alpha_prime, gamma_sq)


def cos_limit(alpha, gamma_sq):
    return 1.0 / math.sqrt(scaling(alpha, gamma_sq))


# ---------------------------------------------------------------------------
# Assembled covariance structures


@dataclass(frozen=True)
class PackTheory:
    alpha: float
    multiplicity: int
    rho: float
    scaling: float
    offset: int = 0

    @property
    def coords(self):
        return range(self.offset, self.offset + self.multiplicity)


def pack_theory(alpha, multiplicity, gamma_sq, offset=0) -> PackTheory:
    return PackTheory(alpha, multiplicity, rho(alpha, gamma_sq), scaling(alpha, gamma_sq), offset)


@dataclass
class CovarianceTensor:
    """Covariance between entries of jointly Gaussian limit matrices.

    ``index[k]`` labels row/column ``k`` of ``matrix``.  For eigenvalue
    tensors labels are ``(pack, s, t)`` with ``s <= t`` local to the pack; for
    eigenvector tensors they are ``(i, j)`` meaning ``G^{(j)}_i``.
    """

    index: list
    matrix: np.ndarray
    _pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self._pos = {lab: k for k, lab in enumerate(self.index)}

    def __getitem__(self, key):
        a, b = key
        return float(self.matrix[self._pos[a], self._pos[b]])

    def __len__(self):
        return len(self.index)

    def restrict(self, labels):
        pos = [self._pos[lab] for lab in labels]
        return CovarianceTensor(list(labels), self.matrix[np.ix_(pos, pos)])

    def min_eigenvalue(self):
        if not len(self):
            return 0.0
        return float(np.linalg.eigvalsh(self.matrix).min())

    def is_psd(self, rtol=1e-10):
        tr = float(np.trace(self.matrix))
        return self.min_eigenvalue() >= -rtol * max(tr, 1.0)

    def to_dict(self):
        return {"index": [list(lab) for lab in self.index], "matrix": self.matrix.tolist()}


def _packs(model, gamma_sq):
    return [pack_theory(p.alpha, p.multiplicity, gamma_sq, p.offset) for p in model.packs]


def _gamma(model, gamma_sq):
    return model.gamma_sq_realized if gamma_sq is None else gamma_sq


def eigenvalue_cov(model, gamma_sq=None) -> CovarianceTensor:
    """Covariance of the limiting Gaussian pack matrices ``G^{(j)}``.

    Intra-pack entries use ``omega~ [E xi_s xi_u xi_t xi_v - alpha^2 1{s=t,u=v}]
    + (theta~ - omega~) alpha^2 (1{s=v,u=t} + 1{s=u,t=v})``; inter-pack entries
    keep only the ``omega~`` term.  ``gamma_sq`` defaults to the model's
    realized ``n / p``.
    """
    g2 = _gamma(model, gamma_sq)
    packs = _packs(model, g2)
    index = []
    for j, pk in enumerate(packs):
        for s, t in combinations_with_replacement(range(pk.multiplicity), 2):
            index.append((j, s, t))
    cov = np.empty((len(index), len(index)))
    for k1, (j, s, t) in enumerate(index):
        pj = packs[j]
        for k2, (jp, u, v) in enumerate(index):
            if k2 < k1:
                cov[k1, k2] = cov[k2, k1]
                continue
            pjp = packs[jp]
            fm = model.fourth_moment(pj.offset + s, pjp.offset + u, pj.offset + t, pjp.offset + v)
            om = omega_tilde(pj.alpha, pjp.alpha, g2)
            val = om * (fm - pj.alpha * pjp.alpha * (s == t and u == v))
            if j == jp:
                th = theta_tilde(pj.alpha, pj.alpha, g2)
                val += (th - om) * pj.alpha ** 2 * ((s == v and u == t) + (s == u and t == v))
            cov[k1, k2] = val
    return CovarianceTensor(index, cov)


def _require_distinct(model):
    if any(p.multiplicity != 1 for p in model.packs):
        raise ModelError("eigenvector and angle limits require all spikes to have multiplicity one")


def eigenvector_cov(model, gamma_sq=None) -> CovarianceTensor:
    """Covariance of ``G^{(j)}_i`` (entry ``i`` of column ``j`` of the pack-``j`` matrix)."""
    _require_distinct(model)
    g2 = _gamma(model, gamma_sq)
    al = list(model.alphas)
    r = len(al)
    index = [(i, j) for j in range(r) for i in range(r)]
    cov = np.empty((len(index), len(index)))
    for k1, (i, j) in enumerate(index):
        for k2, (ip, jp) in enumerate(index):
            om = omega_tilde(al[j], al[jp], g2)
            th = theta_tilde(al[j], al[jp], g2)
            fm = model.fourth_moment(i, ip, j, jp)
            val = om * (fm - al[i] * al[ip] * (i == j and ip == jp))
            val += (th - om) * al[i] * al[j] * ((i == jp and j == ip) + (i == ip and j == jp))
            cov[k1, k2] = val
    return CovarianceTensor(index, cov)


def eigenvector_coefficients(model, gamma_sq=None, form="derived"):
    """Matrix ``K`` with ``sqrt(N) u^{(j)}_i -> K[i, j] G^{(j)}_i`` for ``i != j``.

    ``form="derived"`` gives ``alpha_j / (rho_j (alpha_j - alpha_i))``, the
    solution of the first-order perturbation equation for ``u^{(j)}_{-j}``.
    ``form="printed"`` gives ``alpha_i / (rho_j (alpha_j - alpha_i))``, the
    coefficient as it appears in the published statement of the result;
    simulations agree with the derived form.  The diagonal holds
    ``1 / scaling_j`` (the eigenvalue coefficient).
    """
    if form not in ("derived", "printed"):
        raise ValueError(f"unknown coefficient form {form!r}")
    _require_distinct(model)
    g2 = _gamma(model, gamma_sq)
    al = list(model.alphas)
    r = len(al)
    K = np.empty((r, r))
    for j in range(r):
        rj = rho(al[j], g2)
        for i in range(r):
            if i == j:
                K[i, j] = 1.0 / scaling(al[j], g2)
            else:
                num = al[j] if form == "derived" else al[i]
                K[i, j] = num / (rj * (al[j] - al[i]))
    return K


@dataclass
class AngleTheory:
    """Limit law of ``cos`` of the angle between a sample and a true spike eigenvector.

    ``statistic`` refers to ``scaling**1.5 * sqrt(N) * (cos - cos_limit)``,
    whose limit is ``g_coef * G_j + h_coef * H_j``.
    """

    pack: int
    alpha: float
    cos_limit: float
    g_var: float
    h_var: float
    gh_cov: float
    g_coef: float
    h_coef: float
    form: str = "derived"
    g_cov: np.ndarray | None = None
    h_cov: np.ndarray | None = None
    gh_cross: np.ndarray | None = None

    @property
    def statistic_variance(self):
        a, b = self.g_coef, self.h_coef
        return a * a * self.g_var + b * b * self.h_var + 2.0 * a * b * self.gh_cov

    @property
    def block(self):
        return np.array([[self.g_var, self.gh_cov], [self.gh_cov, self.h_var]])

    def to_dict(self):
        return {
            "pack": self.pack,
            "alpha": self.alpha,
            "form": self.form,
            "cos_limit": self.cos_limit,
            "g_var": self.g_var,
            "h_var": self.h_var,
            "gh_cov": self.gh_cov,
            "g_coef": self.g_coef,
            "h_coef": self.h_coef,
            "statistic_variance": self.statistic_variance,
        }


def _gh_matrices(model, g2):
    al = list(model.alphas)
    r = len(al)
    gg = np.empty((r, r))
    hh = np.empty((r, r))
    gh = np.empty((r, r))
    for j in range(r):
        for jp in range(r):
            e = model.fourth_moment(j, j, jp, jp) - al[j] * al[jp]
            same = 2.0 * al[j] ** 2 * (j == jp)
            om, th = omega_tilde(al[j], al[jp], g2), theta_tilde(al[j], al[jp], g2)
            ze, ta = zeta_tilde(al[j], al[jp], g2), tau_tilde(al[j], al[jp], g2)
            ka, mu = kappa_tilde(al[j], al[jp], g2), mu_tilde(al[j], al[jp], g2)
            gg[j, jp] = om * e + (th - om) * same
            hh[j, jp] = ze * e + (ta - ze) * same
            # gh[j, j'] = Cov(G_j, H_j')
            gh[j, jp] = ka * e + (mu - ka) * same
    return gg, hh, gh


def _angle_coefs(alpha, g2, form):
    c = 1.0 / g2
    lead = c * m4(alpha, g2) * alpha / scaling(alpha, g2)
    if form == "derived":
        return 0.5 * lead, -0.5
    if form == "printed":
        return lead, 1.0
    raise ValueError(f"unknown angle form {form!r}")


def angle_theory(model, j, gamma_sq=None, form="derived") -> AngleTheory:
    """Angle limit for spike ``j``.

    ``||v||^2 = alpha m3 / gamma^2 + (Q_jj - alpha m4 x / gamma^2) / sqrt(N)``
    and expanding ``(1 + ||v||^2)^(-1/2)`` to first order gives
    ``statistic -> (alpha m4 G / (gamma^2 scaling) - H) / 2`` (``form="derived"``).
    ``form="printed"`` uses ``alpha m4 G / (gamma^2 scaling) + H``, i.e. without
    the factor 1/2 and with the opposite sign on ``H``; it overstates the
    simulated variance by roughly a factor of ten at alpha=4, gamma^2=4.
    """
    _require_distinct(model)
    g2 = _gamma(model, gamma_sq)
    alpha = model.alphas[j]
    gg, hh, gh = _gh_matrices(model, g2)
    a, b = _angle_coefs(alpha, g2, form)
    return AngleTheory(
        pack=j, alpha=alpha, cos_limit=cos_limit(alpha, g2),
        g_var=gg[j, j], h_var=hh[j, j], gh_cov=gh[j, j], g_coef=a, h_coef=b, form=form,
        g_cov=gg, h_cov=hh, gh_cross=gh,
    )


def angle_covariance(model, gamma_sq=None, form="derived"):
    """Joint limiting covariance of the scaled angle statistics of all spikes."""
    _require_distinct(model)
    g2 = _gamma(model, gamma_sq)
    gg, hh, gh = _gh_matrices(model, g2)
    coefs = np.array([_angle_coefs(a, g2, form) for a in model.alphas])
    a, b = coefs[:, 0], coefs[:, 1]
    return (np.outer(a, a) * gg + np.outer(b, b) * hh
            + np.outer(a, b) * gh + np.outer(b, a) * gh.T)


@dataclass
class TheoryPredictions:
    gamma_sq: float
    sea: MpSea
    packs: list
    eigenvalue: CovarianceTensor
    trace_cov: np.ndarray
    eigenvector: CovarianceTensor | None = None
    vector_coefficients: np.ndarray | None = None
    angles: list = field(default_factory=list)

    def trace_variance(self, j):
        return float(self.trace_cov[j, j])

    def to_dict(self):
        out = {
            "gamma_sq": self.gamma_sq,
            "sea": [self.sea.lambda_minus, self.sea.lambda_plus],
            "packs": [
                {
                    "alpha": p.alpha,
                    "multiplicity": p.multiplicity,
                    "rho": p.rho,
                    "scaling": p.scaling,
                    "fluctuation_variance": float(self.trace_cov[k, k]) / p.multiplicity ** 2
                    if p.multiplicity == 1 else None,
                    "trace_variance": float(self.trace_cov[k, k]),
                }
                for k, p in enumerate(self.packs)
            ],
            "trace_cov": self.trace_cov.tolist(),
            "eigenvalue_cov": self.eigenvalue.to_dict(),
        }
        if self.eigenvector is not None:
            out["eigenvector_cov"] = self.eigenvector.to_dict()
            out["vector_coefficients"] = self.vector_coefficients.tolist()
            out["angles"] = [a.to_dict() for a in self.angles]
        return out


def trace_covariance(tensor: CovarianceTensor, packs):
    """Covariance of pack traces ``sum_s z_s`` in the limit (scalings applied)."""
    q = len(packs)
    out = np.zeros((q, q))
    for j in range(q):
        for jp in range(q):
            tot = 0.0
            for s in range(packs[j].multiplicity):
                for u in range(packs[jp].multiplicity):
                    tot += tensor[(j, s, s), (jp, u, u)]
            out[j, jp] = tot / (packs[j].scaling * packs[jp].scaling)
    return out


def predict(model, gamma_sq=None) -> TheoryPredictions:
    """Every limit quantity for ``model``; eigenvector parts only when spikes are distinct."""
    g2 = _gamma(model, gamma_sq)
    packs = _packs(model, g2)
    ev = eigenvalue_cov(model, g2)
    pred = TheoryPredictions(g2, mp_support(g2), packs, ev, trace_covariance(ev, packs))
    if all(p.multiplicity == 1 for p in model.packs):
        pred.eigenvector = eigenvector_cov(model, g2)
        pred.vector_coefficients = eigenvector_coefficients(model, g2)
        pred.angles = [angle_theory(model, j, g2) for j in range(len(packs))]
    return pred
