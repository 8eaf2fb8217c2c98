"""Numerical integration of resolvent kernels against the Marchenko-Pastur law.

This is the independent check on the closed forms in `spikelab.theory`.
The substitution ``x = c + h cos(phi)`` (``c``, ``h`` the centre and
half-width of the sea) turns ``F(x) dx`` into
``gamma^2 h^2 sin(phi)^2 / (2 pi x) dphi`` on ``[0, pi]``, removing the
square-root edge behaviour; the smooth integrand is then summed with
Gauss-Legendre rules of doubling size until two successive rules agree.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from . import theory
from .errors import NonConvergence, TransitionWindow

__all__ = ["Kind", "IntegrandSpec", "integrate_mp", "mp_nodes", "MomentRow", "MomentReport", "verify_m_report"]

MIN_NODES = 16
MAX_NODES = 4096
_EPS = np.finfo(float).eps


class Kind(enum.Enum):
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    M4 = "m4"
    M5 = "m5"
    M6 = "m6"
    M7 = "m7"
    M8 = "m8"
    NORMALIZATION = "normalization"

    @property
    def two_argument(self):
        return self in (Kind.M2, Kind.M7, Kind.M8)


@dataclass(frozen=True)
class IntegrandSpec:
    kind: Kind
    alpha: float | None = None
    alpha_prime: float | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.two_argument != (self.alpha_prime is not None):
            raise ValueError(f"{kind.value}: alpha_prime must be given iff the kernel takes two spikes")
        if kind is not Kind.NORMALIZATION and self.alpha is None:
            raise ValueError(f"{kind.value}: alpha is required")


def _kernel(spec, g2):
    k = spec.kind
    if k is Kind.NORMALIZATION:
        return lambda x: np.ones_like(x)
    for a in (spec.alpha, spec.alpha_prime):
        if a is not None and not theory.is_supercritical(a, g2):
            raise TransitionWindow(a, g2)
    r = theory.rho(spec.alpha, g2)
    rp = theory.rho(spec.alpha_prime, g2) if k.two_argument else None
    return {
        Kind.M1: lambda x: x / (r - x),
        Kind.M2: lambda x: x * x / ((r - x) * (rp - x)),
        Kind.M3: lambda x: x / (r - x) ** 2,
        Kind.M4: lambda x: 2.0 * x / (r - x) ** 3,
        Kind.M5: lambda x: 1.0 / (r - x) ** 2,
        Kind.M6: lambda x: 1.0 / (r - x),
        Kind.M7: lambda x: x * x / ((r - x) ** 2 * (rp - x) ** 2),
        Kind.M8: lambda x: x * x / ((r - x) * (rp - x) ** 2),
    }[k]


@lru_cache(maxsize=None)
def _legendre(n):
    t, w = roots_legendre(n)
    return t, w


def mp_nodes(gamma_sq, n):
    """Nodes ``x`` and weights ``w`` with ``sum(w f(x)) ~ int f F dx`` for an ``n``-point rule."""
    sea = theory.mp_support(gamma_sq)
    c = 0.5 * (sea.lambda_plus + sea.lambda_minus)
    h = 0.5 * (sea.lambda_plus - sea.lambda_minus)
    t, w = _legendre(n)
    phi = 0.5 * math.pi * (t + 1.0)
    x = c + h * np.cos(phi)
    weights = 0.5 * math.pi * w * gamma_sq * h * h * np.sin(phi) ** 2 / (2.0 * math.pi * x)
    return x, weights


def integrate_mp(spec: IntegrandSpec, gamma_sq, rel_tol=1e-10, max_nodes=MAX_NODES, return_info=False):
    """``int kernel(x) F(x) dx`` over the sea to estimated relative error ``rel_tol``.

    The error estimate is the change between successive rules, floored at a
    multiple of the rounding error of the weighted sum, so tolerances near
    machine precision raise `NonConvergence` instead of passing by accident.
    """
    if not 0 < rel_tol < 1e-2:
        raise ValueError(f"rel_tol must lie in (0, 1e-2), got {rel_tol!r}")
    kernel = _kernel(spec, gamma_sq)
    prev = None
    n = MIN_NODES
    while n <= max_nodes:
        x, w = mp_nodes(gamma_sq, n)
        terms = w * kernel(x)
        val = float(math.fsum(terms))
        if prev is not None:
            floor = 64.0 * _EPS * float(np.abs(terms).sum())
            err = max(abs(val - prev), floor)
            if err <= rel_tol * abs(val) or (val == 0.0 and err <= rel_tol):
                return (val, {"nodes": n, "error": err}) if return_info else val
        prev = val
        n *= 2
    raise NonConvergence(
        f"{spec.kind.value}(alpha={spec.alpha}, alpha'={spec.alpha_prime}) did not reach "
        f"rel_tol={rel_tol:g} within {max_nodes} nodes")


_CLOSED = {
    Kind.M1: theory.m1, Kind.M3: theory.m3, Kind.M4: theory.m4, Kind.M5: theory.m5, Kind.M6: theory.m6,
    Kind.M2: theory.m2, Kind.M7: theory.m7, Kind.M8: theory.m8,
}


@dataclass
class MomentRow:
    kind: str
    alpha: float
    alpha_prime: float | None
    closed: float | None
    quad: float | None
    abs_err: float | None
    rel_err: float | None
    status: str = "ok"


@dataclass
class MomentReport:
    gamma_sq: float
    rel_tol: float
    rows: list

    @property
    def max_rel_err(self):
        errs = [row.rel_err for row in self.rows if row.rel_err is not None]
        return max(errs) if errs else 0.0

    def failures(self, tol=None):
        tol = self.rel_tol if tol is None else tol
        return [row for row in self.rows if row.status != "ok" or row.rel_err >= tol]

    def passed(self, tol=None):
        return not self.failures(tol)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "alpha", "alpha_prime", "closed", "quad", "abs_err", "rel_err", "status"])
        for row in self.rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                        for v in (row.kind, row.alpha, row.alpha_prime, row.closed, row.quad,
                                  row.abs_err, row.rel_err, row.status)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"gamma_sq": self.gamma_sq, "rel_tol": self.rel_tol,
                           "max_rel_err": self.max_rel_err, "rows": [asdict(r) for r in self.rows]},
                          indent=2)


def verify_m_report(gamma_sq, alphas, rel_tol=1e-10) -> MomentReport:
    """Closed form vs quadrature for every kind over ``alphas`` (ordered pairs for two-spike kinds).

    Per-entry failures are recorded in ``status`` rather than raised.
    """
    rows = []
    alphas = [float(a) for a in alphas]
    for kind in _CLOSED:
        args = [(a, b) for a in alphas for b in alphas] if kind.two_argument else [(a, None) for a in alphas]
        for a, b in args:
            row = MomentRow(kind.value, a, b, None, None, None, None)
            try:
                closed = _CLOSED[kind](a, gamma_sq) if b is None else _CLOSED[kind](a, b, gamma_sq)
                quad = integrate_mp(IntegrandSpec(kind, a, b), gamma_sq, rel_tol)
            except TransitionWindow:
                row.status = "TransitionWindow"
            except NonConvergence:
                row.status = "NonConvergence"
            else:
                row.closed, row.quad = closed, quad
                row.abs_err = abs(closed - quad)
                row.rel_err = row.abs_err / abs(quad) if quad != 0 else row.abs_err
            rows.append(row)
    return MomentReport(gamma_sq, rel_tol, rows)
