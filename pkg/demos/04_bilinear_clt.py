"""Bilinear forms x'Ay - rho tr A, normalised by sqrt(N).

Compares the empirical covariance of the vector of bilinear statistics
with the limit D = D1 + D2, for the identity and for the resolvent
lambda (lambda - XX')^-1 of the noise block, then shows that a slower
normalisation N^kappa (kappa < 1/2) sends the statistic to zero.
"""

import numpy as np

from spikelab import clt
from spikelab.clt import CltSpec, Identity, ResolventA, VectorLaw
from spikelab.stats import mean_cov

spec = CltSpec((Identity(), ResolventA(4.0)), VectorLaw.shared(2, "uniform"))
n, g2 = 2000, 4.0
lim = clt.limits(spec, n / round(n / g2))
Z = clt.sample_ensemble(spec, g2, n, 1000, master_seed=2, matrix_pool=10)
mc = mean_cov(Z)
np.set_printoptions(precision=3, suppress=True)
print("limit D\n", lim.D)
print("empirical\n", mc.cov)
print("z-scores\n", (mc.cov - lim.D) / mc.cov_se)

rep = clt.decay_check(CltSpec((Identity(),), VectorLaw.shared(1)), g2, 0.25, (500, 2000, 8000), replicates=200)
print("median N^(kappa-1/2)|Z| for n in", rep.n_grid, "->", np.round(rep.medians, 4))
