"""Spikes detaching from the Marchenko-Pastur sea.

Draws one data matrix with two large spikes (a pack of multiplicity two)
and one small spike, then compares the extreme sample eigenvalues with
their almost-sure limits and the bulk with the MP edges.
"""

from spikelab import theory
from spikelab.eigen import extreme_spectrum, sample_covariance
from spikelab.model import ModelConfig, sample_data

cfg = ModelConfig(((4.0, 2), (0.2, 1)), gamma_sq=4.0, n=4000)
g2 = cfg.gamma_sq_realized
sea = theory.mp_support(g2)
print(f"n={cfg.n} p={cfg.p} gamma^2={g2:.4f}; sea [{sea.lambda_minus:.4f}, {sea.lambda_plus:.4f}]")
for a in (4.0, 0.2, 1.2):
    print(f"  alpha={a}: {theory.classify_spike(a, g2).name}" +
          (f", rho={theory.rho(a, g2):.6f}" if theory.is_supercritical(a, g2) else ""))

sp = extreme_spectrum(sample_covariance(sample_data(cfg, 7)), n_top=2, n_bottom=1)
print("top eigenvalues   ", [round(e.value, 4) for e in sp.top], "limit", round(theory.rho(4.0, g2), 4))
print("bottom eigenvalue ", round(sp.bottom[0].value, 4), "limit", round(theory.rho(0.2, g2), 4))
print("bulk range        ", [round(x, 4) for x in sp.bulk_edges])
# the two pack eigenvalues straddle rho; their mean sits much closer than either one
print("pack mean         ", round(sum(e.value for e in sp.top) / 2, 4))
