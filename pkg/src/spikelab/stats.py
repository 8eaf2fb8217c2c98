"""Ensemble statistics and theory-vs-empirical verdicts."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ShapeMismatch, TooFewSamples

__all__ = [
    "MeanCov", "mean_cov", "variance_with_se", "Normality", "normality_check", "median_se",
    "ComparisonRow", "ComparisonReport", "compare",
    "MIN_MEAN_COV_SAMPLES", "MIN_NORMALITY_SAMPLES", "DEFAULT_SE_MULTIPLIER",
]

MIN_MEAN_COV_SAMPLES = 30
MIN_NORMALITY_SAMPLES = 200
DEFAULT_SE_MULTIPLIER = 5.0


@dataclass
class MeanCov:
    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray
    n: int


def mean_cov(samples) -> MeanCov:
    """Sample mean, unbiased covariance, and standard errors of both.

    The covariance SE uses the plug-in fourth-moment estimate
    ``Var[(x_a - m_a)(x_b - m_b)] / R``.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    R = X.shape[0]
    if R < MIN_MEAN_COV_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_MEAN_COV_SAMPLES} samples, got {R}")
    mean = X.mean(axis=0)
    D = X - mean
    cov = D.T @ D / (R - 1)
    prod = D[:, :, None] * D[:, None, :]
    m2 = D.T @ D / R
    var_prod = (prod ** 2).mean(axis=0) - m2 ** 2
    cov_se = np.sqrt(np.maximum(var_prod, 0.0) / R)
    mean_se = np.sqrt(np.diag(cov) / R)
    return MeanCov(mean, cov, mean_se, cov_se, R)


def variance_with_se(x):
    """``(variance, SE)`` of a 1-D sample."""
    mc = mean_cov(np.asarray(x, float)[:, None])
    return float(mc.cov[0, 0]), float(mc.cov_se[0, 0])


@dataclass
class Normality:
    skewness: float
    excess_kurtosis: float
    skew_z: float
    kurt_z: float
    n: int

    def passed(self, multiplier=DEFAULT_SE_MULTIPLIER):
        return abs(self.skew_z) <= multiplier and abs(self.kurt_z) <= multiplier


def normality_check(samples) -> Normality:
    """Moment skewness and excess kurtosis with z-scores from SEs ``sqrt(6/R)``, ``sqrt(24/R)``."""
    x = np.asarray(samples, dtype=float).ravel()
    R = x.size
    if R < MIN_NORMALITY_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_NORMALITY_SAMPLES} samples, got {R}")
    d = x - x.mean()
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0 or m2 <= (np.finfo(float).eps * np.abs(x).max()) ** 2:
        raise ValueError("skewness and kurtosis are undefined for a constant sample")
    skew = float(np.mean(d ** 3)) / m2 ** 1.5
    kurt = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
    return Normality(skew, kurt, skew / math.sqrt(6.0 / R), kurt / math.sqrt(24.0 / R), R)


def median_se(x, level=0.95):
    """Distribution-free SE of the sample median.

    Half the width of the order-statistic confidence interval for the
    median, divided by the normal quantile of ``level``.
    """
    x = np.sort(np.asarray(x, dtype=float).ravel())
    R = x.size
    if R < MIN_MEAN_COV_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_MEAN_COV_SAMPLES} samples, got {R}")
    q = norm.ppf(0.5 + level / 2)
    half = q * math.sqrt(R) / 2
    lo = max(int(math.floor(R / 2 - half)), 0)
    hi = min(int(math.ceil(R / 2 + half)), R - 1)
    return float((x[hi] - x[lo]) / (2 * q))


@dataclass
class ComparisonRow:
    name: str
    empirical: float
    theory: float
    standard_error: float
    z_score: float
    bias_band: float
    verdict: str  # "pass" | "fail"
    required: bool = True


@dataclass
class ComparisonReport:
    rows: list
    se_multiplier: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(row.verdict == "pass" for row in self.rows if row.required)

    def __getitem__(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def extend(self, other: "ComparisonReport"):
        return ComparisonReport(self.rows + other.rows, self.se_multiplier)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "empirical", "theory", "standard_error", "z_score", "bias_band", "verdict", "required"])
        for row in self.rows:
            w.writerow([row.name, repr(row.empirical), repr(row.theory), repr(row.standard_error),
                        repr(row.z_score), repr(row.bias_band), row.verdict, int(row.required)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"passed": self.passed, "se_multiplier": self.se_multiplier,
                           "rows": [asdict(row) for row in self.rows]}, indent=2)

    def summary(self):
        lines = []
        for row in self.rows:
            tag = row.verdict.upper() if row.required else f"({row.verdict})"
            lines.append(f"{tag:6s} {row.name}: empirical={row.empirical:.6g} theory={row.theory:.6g} "
                         f"se={row.standard_error:.3g} z={row.z_score:+.2f}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (multiplier {self.se_multiplier:g})")
        return "\n".join(lines)


def compare(names, empirical, theory, se, se_multiplier=DEFAULT_SE_MULTIPLIER, bias_band=0.0,
            required=True) -> ComparisonReport:
    """Entrywise verdicts: pass iff ``|empirical - theory| <= se_multiplier * se + bias_band``.

    ``z_score`` is ``(empirical - theory) / se``; the bias band widens the
    acceptance region without changing the z-score.
    """
    emp = np.atleast_1d(np.asarray(empirical, dtype=float))
    th = np.atleast_1d(np.asarray(theory, dtype=float))
    se = np.atleast_1d(np.asarray(se, dtype=float))
    if emp.shape != th.shape:
        raise ShapeMismatch(f"empirical shape {emp.shape} != theory shape {th.shape}")
    names = [names] if isinstance(names, str) else list(names)
    if len(names) != emp.size:
        raise ShapeMismatch(f"{len(names)} names for {emp.size} entries")
    se = np.broadcast_to(se, emp.shape) if se.size == 1 else se
    band = np.broadcast_to(np.asarray(bias_band, dtype=float), emp.shape)
    req = np.broadcast_to(np.asarray(required, dtype=bool), emp.shape)
    if se.shape != emp.shape:
        raise ShapeMismatch(f"standard-error shape {se.shape} != empirical shape {emp.shape}")
    rows = []
    for name, e, t, s, b, rq in zip(names, emp.ravel(), th.ravel(), se.ravel(), band.ravel(), req.ravel()):
        diff = e - t
        if s > 0:
            z = diff / s
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        ok = abs(diff) <= se_multiplier * s + b
        rows.append(ComparisonRow(name, float(e), float(t), float(s), float(z), float(b),
                                  "pass" if ok else "fail", bool(rq)))
    return ComparisonReport(rows, float(se_multiplier))
