"""Harness for the central limit theorem of random bilinear forms.

For matrices ``A(1..K)`` (``N x N``, symmetric) and i.i.d. rows
``(x_s(l), y_s(l))`` independent of the matrices,

    Z(l) = (x(l)^T A(l) y(l) - rho(l) tr A(l)) / sqrt(N)

is asymptotically Gaussian with covariance ``D = D1 + D2``:

    D1[l, l'] = (E[x x' y y'] - rho rho') omega[l, l']
    D2[l, l'] = (E[x y'] E[x' y] + E[x x'] E[y y']) (theta[l, l'] - omega[l, l'])

where ``omega`` and ``theta`` are the limits of ``(1/N) sum_s a_ss a'_ss`` and
``(1/N) sum_{s,t} a_st a'_st``.

Resolvent matrices are built from one pure-noise matrix ``X = eta / sqrt(N)``
(``N x p``):  ``A(alpha) = lam (lam - X X^T)^{-1}`` and
``C(alpha) = X (lam - X^T X)^{-2} X^T`` with ``lam = rho_alpha``.  Both are
stored implicitly through ``B = X Q`` where ``X^T X = Q diag(mu) Q^T``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .errors import ModelError, TransitionWindow
from .model import IID_KINDS, _MARGINAL_FOURTH, _iid, make_rng

__all__ = [
    "Identity", "Banded", "ResolventA", "ResolventC", "VectorLaw", "CltSpec", "CltTheory",
    "NoiseEnvironment", "noise_environment", "pair_limits", "limits", "empirical_trace_limits",
    "sample_statistic", "sample_ensemble", "DecayReport", "decay_check", "dense_matrix", "parse_spec",
]


# ---------------------------------------------------------------------------
# Matrix kinds


@dataclass(frozen=True)
class Identity:
    name = "identity"


@dataclass(frozen=True)
class Banded:
    """Symmetric Toeplitz band with ``a_st = profile[|s - t|]`` for ``|s - t| < len(profile)``."""

    profile: tuple = (1.0, 0.5)
    name = "banded"

    def __post_init__(self):
        object.__setattr__(self, "profile", tuple(float(b) for b in self.profile))
        if not self.profile:
            raise ModelError("banded profile must be non-empty")


@dataclass(frozen=True)
class ResolventA:
    alpha: float
    name = "resolvent_a"


@dataclass(frozen=True)
class ResolventC:
    alpha: float
    name = "resolvent_c"


_RESOLVENT = (ResolventA, ResolventC)


def _check_kind(kind, gamma_sq):
    if isinstance(kind, _RESOLVENT) and not theory.is_supercritical(kind.alpha, gamma_sq):
        raise TransitionWindow(kind.alpha, gamma_sq)


def _kind_to_dict(kind):
    if isinstance(kind, Identity):
        return {"kind": "identity"}
    if isinstance(kind, Banded):
        return {"kind": "banded", "profile": list(kind.profile)}
    return {"kind": kind.name, "alpha": kind.alpha}


def _kind_from_dict(d):
    k = d.get("kind")
    if k == "identity":
        return Identity()
    if k == "banded":
        return Banded(tuple(d.get("profile", (1.0, 0.5))))
    if k in ("resolvent_a", "resolvent_c"):
        if "alpha" not in d:
            raise ModelError(f"{k} needs an alpha")
        return (ResolventA if k == "resolvent_a" else ResolventC)(float(d["alpha"]))
    raise ModelError(f"unknown matrix kind {k!r}")


# ---------------------------------------------------------------------------
# Vector laws


@dataclass(frozen=True)
class VectorLaw:
    """Row law ``x = Lx w``, ``y = Ly w`` with ``w`` i.i.d. unit-variance of ``base`` kind.

    ``Lx``, ``Ly`` are ``K x m``.  All moments below are exact.
    """

    Lx: np.ndarray
    Ly: np.ndarray
    base: str = "gaussian"

    def __post_init__(self):
        Lx = np.atleast_2d(np.asarray(self.Lx, dtype=float))
        Ly = np.atleast_2d(np.asarray(self.Ly, dtype=float))
        if Lx.shape != Ly.shape:
            raise ModelError(f"Lx shape {Lx.shape} != Ly shape {Ly.shape}")
        if self.base not in IID_KINDS:
            raise ModelError(f"unknown base law {self.base!r}")
        object.__setattr__(self, "Lx", Lx)
        object.__setattr__(self, "Ly", Ly)

    @classmethod
    def shared(cls, K, base="gaussian"):
        """``x(l) = y(l) = w`` for every ``l``, a single unit-variance coordinate."""
        one = np.ones((K, 1))
        return cls(one, one.copy(), base)

    @classmethod
    def independent(cls, K, base="gaussian"):
        """``x(l) = y(l) = w_l`` with independent coordinates across ``l``."""
        return cls(np.eye(K), np.eye(K), base)

    @property
    def K(self):
        return self.Lx.shape[0]

    @property
    def m(self):
        return self.Lx.shape[1]

    @property
    def rho(self):
        return np.einsum("km,km->k", self.Lx, self.Ly)

    def second(self, a, b):
        return float(a @ b)

    def fourth(self, a, b, c, d):
        """``E[(a.w)(b.w)(c.w)(d.w)]``."""
        mu4 = _MARGINAL_FOURTH[self.base]
        return float((mu4 - 3.0) * np.sum(a * b * c * d) + (a @ b) * (c @ d) + (a @ c) * (b @ d) + (a @ d) * (b @ c))

    def sample(self, rng, n):
        w = _iid(self.base, rng, (n, self.m))
        return w @ self.Lx.T, w @ self.Ly.T

    def to_dict(self):
        return {"Lx": self.Lx.tolist(), "Ly": self.Ly.tolist(), "base": self.base}


@dataclass(frozen=True)
class CltSpec:
    matrices: tuple
    law: VectorLaw

    def __post_init__(self):
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if len(self.matrices) != self.law.K:
            raise ModelError(f"{len(self.matrices)} matrices but the vector law has K={self.law.K}")

    @property
    def K(self):
        return len(self.matrices)

    @property
    def needs_noise(self):
        return any(isinstance(k, _RESOLVENT) for k in self.matrices)

    def to_dict(self):
        return {"matrices": [_kind_to_dict(k) for k in self.matrices], "law": self.law.to_dict()}


def parse_spec(d) -> CltSpec:
    """Build a `CltSpec` from a JSON-like dict.

    ``law`` is ``{"Lx": ..., "Ly": ..., "base": ...}`` or
    ``{"shared": true, "base": ...}`` / ``{"independent": true, ...}``.
    """
    try:
        mats = tuple(_kind_from_dict(m) for m in d["matrices"])
        law_d = d.get("law", {"shared": True})
        base = law_d.get("base", "gaussian")
        if law_d.get("shared"):
            law = VectorLaw.shared(len(mats), base)
        elif law_d.get("independent"):
            law = VectorLaw.independent(len(mats), base)
        else:
            law = VectorLaw(law_d["Lx"], law_d["Ly"], base)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed CLT spec: {exc!r}") from exc
    return CltSpec(mats, law)


# ---------------------------------------------------------------------------
# Limits


def _diag_limit(kind, g2):
    if isinstance(kind, Identity):
        return 1.0
    if isinstance(kind, Banded):
        return kind.profile[0]
    if isinstance(kind, ResolventA):
        return theory.diag_limit_a(kind.alpha, g2)
    return theory.diag_limit_c(kind.alpha, g2)


def pair_limits(k1, k2, gamma_sq):
    """``(omega, theta)`` limits for a pair of matrix kinds."""
    _check_kind(k1, gamma_sq)
    _check_kind(k2, gamma_sq)
    if isinstance(k1, _RESOLVENT) and isinstance(k2, _RESOLVENT):
        a1, a2 = k1.alpha, k2.alpha
        if isinstance(k1, ResolventA) and isinstance(k2, ResolventA):
            return theory.omega_tilde(a1, a2, gamma_sq), theory.theta_tilde(a1, a2, gamma_sq)
        if isinstance(k1, ResolventC) and isinstance(k2, ResolventC):
            return theory.zeta_tilde(a1, a2, gamma_sq), theory.tau_tilde(a1, a2, gamma_sq)
        if isinstance(k1, ResolventA):
            return theory.kappa_tilde(a1, a2, gamma_sq), theory.mu_tilde(a1, a2, gamma_sq)
        return theory.kappa_tilde(a2, a1, gamma_sq), theory.mu_tilde(a2, a1, gamma_sq)
    if isinstance(k1, Banded) and isinstance(k2, Banded):
        b1, b2 = k1.profile, k2.profile
        w = min(len(b1), len(b2))
        th = b1[0] * b2[0] + 2.0 * sum(b1[k] * b2[k] for k in range(1, w))
        return b1[0] * b2[0], th
    # at least one side is identity, or banded against a resolvent: off-diagonal
    # resolvent entries are O(N^{-1/2}) with random signs and average out
    om = _diag_limit(k1, gamma_sq) * _diag_limit(k2, gamma_sq)
    return om, om


@dataclass
class CltTheory:
    gamma_sq: float
    rho: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    D1: np.ndarray
    D2: np.ndarray

    @property
    def D(self):
        return self.D1 + self.D2

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in
                {"gamma_sq": self.gamma_sq, "rho": self.rho, "omega": self.omega, "theta": self.theta,
                 "D1": self.D1, "D2": self.D2, "D": self.D}.items()}


def limits(spec: CltSpec, gamma_sq=4.0) -> CltTheory:
    """Limiting covariance ``D`` of ``Z``; ``gamma_sq`` only matters for resolvent kinds."""
    K = spec.K
    om = np.empty((K, K))
    th = np.empty((K, K))
    for a in range(K):
        for b in range(K):
            om[a, b], th[a, b] = pair_limits(spec.matrices[a], spec.matrices[b], gamma_sq)
    law = spec.law
    X, Y = law.Lx, law.Ly
    rho = law.rho
    D1 = np.empty((K, K))
    D2 = np.empty((K, K))
    for a in range(K):
        for b in range(K):
            e4 = law.fourth(X[a], X[b], Y[a], Y[b])
            D1[a, b] = (e4 - rho[a] * rho[b]) * om[a, b]
            pair = (X[a] @ Y[b]) * (X[b] @ Y[a]) + (X[a] @ X[b]) * (Y[a] @ Y[b])
            D2[a, b] = pair * (th[a, b] - om[a, b])
    return CltTheory(gamma_sq, rho, om, th, D1, D2)


# ---------------------------------------------------------------------------
# Sampled matrices


@dataclass
class NoiseEnvironment:
    """Spectral data of one noise matrix: ``B = X Q`` (``N x p``) and eigenvalues ``mu`` of ``X^T X``."""

    n: int
    p: int
    B: np.ndarray
    mu: np.ndarray

    @property
    def gamma_sq(self):
        return self.n / self.p


def noise_environment(n, gamma_sq, rng, noise="gaussian") -> NoiseEnvironment:
    p = int(round(n / gamma_sq))
    X = _iid(noise, rng, (n, p)) / math.sqrt(n)
    W = X.T @ X
    mu, Q = np.linalg.eigh(0.5 * (W + W.T))
    return NoiseEnvironment(n, p, X @ Q, mu)


def _weights(kind, env):
    """``(a, d)`` with the matrix equal to ``a I + B diag(d) B^T``."""
    lam = theory.rho(kind.alpha, env.gamma_sq)
    if isinstance(kind, ResolventA):
        return 1.0, 1.0 / (lam - env.mu)
    return 0.0, 1.0 / (lam - env.mu) ** 2


def _band_apply(profile, y):
    out = profile[0] * y
    for k in range(1, len(profile)):
        out[:-k] += profile[k] * y[k:]
        out[k:] += profile[k] * y[:-k]
    return out


def _bilinear_and_trace(kind, x, y, env):
    """``(x^T M y, tr M)`` for 1-D ``x``, ``y`` of length ``N``."""
    n = x.shape[0]
    if isinstance(kind, Identity):
        return float(x @ y), float(n)
    if isinstance(kind, Banded):
        return float(x @ _band_apply(kind.profile, y)), kind.profile[0] * n
    a, d = _weights(kind, env)
    bx, by = env.B.T @ x, env.B.T @ y
    return float(a * (x @ y) + (bx * d) @ by), float(a * n + env.mu @ d)


def _diagonal(kind, env, n):
    if isinstance(kind, Identity):
        return np.ones(n)
    if isinstance(kind, Banded):
        return np.full(n, kind.profile[0])
    a, d = _weights(kind, env)
    return a + (env.B ** 2) @ d


def dense_matrix(kind, env=None, n=None):
    """Materialise the ``N x N`` matrix (for checks at moderate ``N``)."""
    n = env.n if env is not None else n
    if isinstance(kind, Identity):
        return np.eye(n)
    if isinstance(kind, Banded):
        M = np.zeros((n, n))
        for k, b in enumerate(kind.profile):
            idx = np.arange(n - k)
            M[idx, idx + k] = b
            M[idx + k, idx] = b
        return M
    a, d = _weights(kind, env)
    return a * np.eye(n) + (env.B * d) @ env.B.T


def _frob_pair(k1, k2, env, n):
    """``(1/N) sum_{s,t} m1_st m2_st`` without forming dense matrices when avoidable."""
    if isinstance(k1, Banded) and isinstance(k2, Banded):
        b1, b2 = k1.profile, k2.profile
        tot = b1[0] * b2[0] * n + 2.0 * sum(b1[k] * b2[k] * (n - k) for k in range(1, min(len(b1), len(b2))))
        return tot / n
    kinds = sorted((k1, k2), key=lambda k: 0 if isinstance(k, Identity) else 1 if isinstance(k, Banded) else 2)
    lo, hi = kinds
    if isinstance(lo, Identity) and not isinstance(hi, _RESOLVENT):
        return float(np.sum(_diagonal(hi, env, n))) / n
    if isinstance(lo, Identity):
        return _bilinear_and_trace(hi, np.zeros(n), np.zeros(n), env)[1] / n
    if isinstance(lo, Banded):
        Mhi = dense_matrix(hi, env)
        Mlo = dense_matrix(lo, n=n)
        return float(np.sum(Mlo * Mhi)) / n
    a1, d1 = _weights(k1, env)
    a2, d2 = _weights(k2, env)
    mu = env.mu
    return (a1 * a2 * n + a1 * (mu @ d2) + a2 * (mu @ d1) + float(np.sum(mu * mu * d1 * d2))) / n


def empirical_trace_limits(kind, gamma_sq, n, seed=0, other=None, noise="gaussian"):
    """Point estimates ``(omega_hat, theta_hat)`` from one sampled noise matrix.

    ``other`` (default ``kind``) is the second matrix of the pair.
    """
    other = kind if other is None else other
    env = None
    if isinstance(kind, _RESOLVENT) or isinstance(other, _RESOLVENT):
        _check_kind(kind, gamma_sq)
        _check_kind(other, gamma_sq)
        env = noise_environment(n, gamma_sq, make_rng(seed), noise)
    d1, d2 = _diagonal(kind, env, n), _diagonal(other, env, n)
    return float(d1 @ d2) / n, _frob_pair(kind, other, env, n)


# ---------------------------------------------------------------------------
# Sampling the statistic


def _statistic(spec, env, x, y, n, rho):
    z = np.empty(spec.K)
    for l, kind in enumerate(spec.matrices):
        q, tr = _bilinear_and_trace(kind, x[:, l], y[:, l], env)
        z[l] = (q - rho[l] * tr) / math.sqrt(n)
    return z


def sample_statistic(spec: CltSpec, gamma_sq, n, seed, rho=None, noise="gaussian", env=None):
    """One draw of the ``K``-vector ``Z``.

    Matrices come from an independent stream of ``seed``; ``rho`` overrides
    the law's centering (used for degenerate laws).
    """
    ss = np.random.SeedSequence(int(seed))
    mat_ss, vec_ss = ss.spawn(2)
    for kind in spec.matrices:
        _check_kind(kind, gamma_sq)
    if env is None and spec.needs_noise:
        env = noise_environment(n, gamma_sq, make_rng(mat_ss), noise)
    x, y = spec.law.sample(make_rng(vec_ss), n)
    rho = spec.law.rho if rho is None else np.broadcast_to(np.asarray(rho, float), (spec.K,))
    return _statistic(spec, env, x, y, n, rho)


def sample_ensemble(spec: CltSpec, gamma_sq, n, replicates, master_seed=0, matrix_pool=None, noise="gaussian"):
    """``(R, K)`` array of independent draws of ``Z``.

    With ``matrix_pool = M`` only ``M`` noise environments are drawn and
    replicate ``k`` reuses environment ``k % M``; the vectors stay fresh.
    This keeps resolvent runs cheap and leaves the limit covariance intact
    because the trace limits hold for almost every noise matrix.
    """
    for kind in spec.matrices:
        _check_kind(kind, gamma_sq)
    R = int(replicates)
    out = np.empty((R, spec.K))
    rho = spec.law.rho
    pool = {}
    for k in range(R):
        ss = np.random.SeedSequence(int(master_seed), spawn_key=(k,))
        mat_ss, vec_ss = ss.spawn(2)
        env = None
        if spec.needs_noise:
            if matrix_pool:
                slot = k % int(matrix_pool)
                if slot not in pool:
                    pool[slot] = noise_environment(
                        n, gamma_sq, make_rng(np.random.SeedSequence(int(master_seed), spawn_key=(slot, 1))), noise)
                env = pool[slot]
            else:
                env = noise_environment(n, gamma_sq, make_rng(mat_ss), noise)
        x, y = spec.law.sample(make_rng(vec_ss), n)
        out[k] = _statistic(spec, env, x, y, n, rho)
    return out


# ---------------------------------------------------------------------------
# Decay of the unnormalised statistic


@dataclass
class DecayReport:
    kappa: float
    n_grid: list
    medians: list
    ratios: list = field(default_factory=list)

    def __post_init__(self):
        self.ratios = [self.medians[k] / self.medians[k + 1] for k in range(len(self.medians) - 1)]

    @property
    def monotone(self):
        return all(b < a for a, b in zip(self.medians, self.medians[1:]))

    @property
    def overall_factor(self):
        return self.medians[0] / self.medians[-1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "median"])
        for n, m in zip(self.n_grid, self.medians):
            w.writerow([n, repr(m)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"kappa": self.kappa, "n_grid": self.n_grid, "medians": self.medians,
                           "ratios": self.ratios, "monotone": self.monotone,
                           "overall_factor": self.overall_factor}, indent=2)


def decay_check(spec: CltSpec, gamma_sq, kappa, n_grid=(500, 2000, 8000), replicates=200, master_seed=0,
                matrix_pool=4, component=0) -> DecayReport:
    """Median over replicates of ``N^(kappa - 1) |x^T A y - rho tr A|`` at each ``N``.

    Equivalently ``N^(kappa - 1/2) |Z|``; for ``kappa < 1/2`` it tends to zero.
    """
    if not 0 < kappa < 0.5:
        raise ModelError(f"kappa must lie in (0, 1/2), got {kappa!r}")
    meds = []
    for n in n_grid:
        Z = sample_ensemble(spec, gamma_sq, n, replicates, master_seed, matrix_pool)
        meds.append(float(np.median(n ** (kappa - 0.5) * np.abs(Z[:, component]))))
    return DecayReport(float(kappa), [int(n) for n in n_grid], meds)
