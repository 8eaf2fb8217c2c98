"""Gaussian fluctuations of spike eigenvalues.

Runs a small ensemble for a single spike and for a pack of two, then
compares the empirical variance of sqrt(N)(lambda - rho) with the limit.
Raise R for tighter agreement; the acceptance suite uses R=2000.
"""

import sys

from spikelab import predict, run_ensemble
from spikelab.model import ModelConfig
from spikelab.stats import normality_check, variance_with_se

R = int(sys.argv[1]) if len(sys.argv) > 1 else 300

for spikes in [(4.0,), ((4.0, 2),)]:
    cfg = ModelConfig(spikes, gamma_sq=4.0, n=1000)
    ens = run_ensemble(cfg, R, master_seed=11)
    tr = ens.pack_trace(0)
    var, se = variance_with_se(tr)
    th = predict(cfg).trace_variance(0)
    nrm = normality_check(tr) if R >= 200 else None
    print(f"spikes={spikes}: Var(trace z) {var:.2f} +- {se:.2f}, limit {th:.2f}"
          + (f"; skew z {nrm.skew_z:+.2f}, kurt z {nrm.kurt_z:+.2f}" if nrm else ""))
