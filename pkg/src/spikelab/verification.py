"""Theory-vs-ensemble comparison rows shared by the CLI and the acceptance tests."""

from __future__ import annotations

import math

import numpy as np

from . import theory
from .stats import DEFAULT_SE_MULTIPLIER, compare, mean_cov, median_se, variance_with_se, ComparisonReport

__all__ = ["verify_ensemble"]


def verify_ensemble(ens, theory_model=None, se_multiplier=DEFAULT_SE_MULTIPLIER, bias_scale=3.0) -> ComparisonReport:
    """Compare an ensemble with the limits predicted for ``theory_model``.

    Required rows: pack-trace means (against 0, bias band
    ``bias_scale * sqrt(var) / sqrt(n)``), pack-trace variances and
    inter-pack covariances, and for distinct spikes the eigenvector-entry
    variances and angle-statistic variances.  Rows using the alternative
    published coefficient forms and the median cosine are reported as
    diagnostics and do not affect the verdict.
    """
    config = ens.config
    tm = config if theory_model is None else theory_model
    g2 = config.gamma_sq_realized
    pred = theory.predict(tm, g2)
    n = config.n
    band = lambda v: bias_scale * math.sqrt(max(v, 0.0)) / math.sqrt(n)
    q = len(config.packs)
    traces = np.column_stack([ens.pack_trace(j) for j in range(q)])
    mc = mean_cov(traces)
    report = ComparisonReport([], se_multiplier)
    for j in range(q):
        v = pred.trace_variance(j)
        report = report.extend(compare(f"pack{j}.trace_mean", mc.mean[j], 0.0, mc.mean_se[j], se_multiplier, band(v)))
        report = report.extend(compare(f"pack{j}.trace_var", mc.cov[j, j], v, mc.cov_se[j, j], se_multiplier, band(v)))
    for j in range(q):
        for jp in range(j + 1, q):
            report = report.extend(compare(f"pack{j}x{jp}.trace_cov", mc.cov[j, jp], pred.trace_cov[j, jp],
                                           mc.cov_se[j, jp], se_multiplier))
    if pred.eigenvector is None:
        return report
    K_derived = pred.vector_coefficients
    K_printed = theory.eigenvector_coefficients(tm, g2, form="printed")
    r = config.r
    for j in range(r):
        for i in range(r):
            if i == j:
                continue
            emp, se = variance_with_se(ens.vector_entry(j, i))
            gvar = pred.eigenvector[(i, j), (i, j)]
            report = report.extend(compare(f"vec{j}.entry{i}_var", emp, K_derived[i, j] ** 2 * gvar, se, se_multiplier))
            report = report.extend(compare(f"vec{j}.entry{i}_var.printed", emp, K_printed[i, j] ** 2 * gvar, se,
                                           se_multiplier, required=False))
    for j in range(r):
        stat = ens.angle_statistic(j)
        emp, se = variance_with_se(stat)
        report = report.extend(compare(f"angle{j}.stat_var", emp, pred.angles[j].statistic_variance, se, se_multiplier))
        printed = theory.angle_theory(tm, j, g2, form="printed")
        report = report.extend(compare(f"angle{j}.stat_var.printed", emp, printed.statistic_variance, se,
                                       se_multiplier, required=False))
        cos = ens.cos(j)
        report = report.extend(compare(f"angle{j}.cos_median", float(np.median(cos)), pred.angles[j].cos_limit,
                                       median_se(cos), se_multiplier, required=False))
    return report
