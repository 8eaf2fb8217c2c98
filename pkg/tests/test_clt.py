import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikelab import clt, theory as T
from spikelab.clt import Banded, CltSpec, Identity, ResolventA, ResolventC, VectorLaw
from spikelab.errors import ModelError, TransitionWindow
from spikelab.model import make_rng
from spikelab.stats import mean_cov

G2 = 4.0


def test_identity_gaussian_limit():
    lim = clt.limits(CltSpec((Identity(),), VectorLaw.shared(1)))
    assert lim.D[0, 0] == pytest.approx(2.0) and lim.D2[0, 0] == 0


def test_resolvent_limits():
    om, th = clt.pair_limits(ResolventA(4), ResolventA(4), G2)
    assert om == pytest.approx(1.17361, abs=5e-6) and th == pytest.approx(1.20714, abs=5e-6)
    assert clt.pair_limits(ResolventC(4), ResolventA(2.5), G2) == clt.pair_limits(ResolventA(2.5), ResolventC(4), G2)
    assert clt.pair_limits(ResolventA(4), ResolventC(2.5), G2) == (T.kappa_tilde(4, 2.5, G2), T.mu_tilde(4, 2.5, G2))
    with pytest.raises(TransitionWindow):
        clt.limits(CltSpec((ResolventA(1.2),), VectorLaw.shared(1)), G2)


def test_rademacher_identity():
    lim = clt.limits(CltSpec((Identity(),), VectorLaw.shared(1, "rademacher")))
    assert lim.D[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_exact_identity_trace_limits():
    assert clt.empirical_trace_limits(Identity(), G2, 300) == (1.0, 1.0)


def test_resolvent_trace_limits_sampled():
    om, th = clt.empirical_trace_limits(ResolventA(4), G2, 2000, seed=1)
    assert abs(om - 1.17361) < 0.02 and abs(th - 1.20714) < 0.02
    zc, _ = clt.empirical_trace_limits(ResolventC(4), G2, 2000, seed=1)
    assert zc == pytest.approx(T.zeta_tilde(4, 4, G2), rel=0.05)
    ka, mu = clt.empirical_trace_limits(ResolventA(4), G2, 2000, seed=2, other=ResolventC(4))
    assert ka == pytest.approx(T.kappa_tilde(4, 4, G2), rel=0.05)
    assert mu == pytest.approx(T.mu_tilde(4, 4, G2), rel=0.05)


@pytest.mark.parametrize("kind", [ResolventA(4), ResolventC(4), ResolventC(0.2), Banded((1.0, 0.4, -0.2))])
def test_implicit_forms_match_dense(kind):
    rng = make_rng(8)
    env = clt.noise_environment(240, G2, rng)
    M = clt.dense_matrix(kind, env)
    assert np.allclose(M, M.T, atol=1e-12)
    x, y = rng.standard_normal(240), rng.standard_normal(240)
    q, tr = clt._bilinear_and_trace(kind, x, y, env)
    assert q == pytest.approx(x @ M @ y, rel=1e-10)
    assert tr == pytest.approx(np.trace(M), rel=1e-10)
    assert np.allclose(clt._diagonal(kind, env, 240), np.diag(M))
    for other in (Identity(), ResolventA(2.5), ResolventC(4)):
        frob = clt._frob_pair(kind, other, env, 240)
        M2 = clt.dense_matrix(other, env)
        assert frob == pytest.approx(np.sum(M * M2) / 240, rel=1e-9)


def test_resolvent_a_is_scaled_resolvent():
    env = clt.noise_environment(120, G2, make_rng(1))
    lam = T.rho(4, env.gamma_sq)
    X = env.B  # same column space as the noise matrix
    W = X @ X.T
    A = lam * np.linalg.inv(lam * np.eye(120) - W)
    assert np.allclose(clt.dense_matrix(ResolventA(4), env), A, atol=1e-10)


def test_zero_vectors():
    spec = CltSpec((Identity(), Banded((2.0, 1.0))), VectorLaw(np.zeros((2, 1)), np.zeros((2, 1))))
    z = clt.sample_statistic(spec, G2, 400, 0, rho=0.5)
    assert z == pytest.approx([-0.5 * 400 / 20, -0.5 * 800 / 20])


CATALOG = [
    CltSpec((Identity(),), VectorLaw.shared(1)),
    CltSpec((Identity(), ResolventA(4)), VectorLaw.shared(2)),
    CltSpec((ResolventA(4), ResolventC(4), ResolventA(0.2)), VectorLaw.shared(3, "uniform")),
    CltSpec((Banded((1.0, 0.5)), ResolventC(2.5)), VectorLaw([[1.0, 0.0], [0.6, 0.8]], [[0.0, 1.0], [0.6, 0.8]])),
    CltSpec((Identity(), Banded((1.0, -0.3, 0.2))), VectorLaw.independent(2, "rademacher")),
]


@pytest.mark.parametrize("spec", CATALOG)
def test_catalog_psd(spec):
    D = clt.limits(spec, G2).D
    assert np.allclose(D, D.T)
    assert np.linalg.eigvalsh(D).min() >= -1e-12


@given(lx=st.lists(st.floats(-1, 1), min_size=2, max_size=2), ly=st.lists(st.floats(-1, 1), min_size=2, max_size=2),
       base=st.sampled_from(["gaussian", "rademacher", "uniform"]))
@settings(max_examples=30, deadline=None)
def test_fourth_moment_formula(lx, ly, base):
    law = VectorLaw([lx], [ly], base)
    w = clt._iid(base, make_rng(0), (200_000, 2))
    a, b = np.array(lx), np.array(ly)
    sample = (w @ a) ** 2 * (w @ b) ** 2
    expect = law.fourth(a, a, b, b)
    assert abs(sample.mean() - expect) <= 6 * sample.std() / math.sqrt(sample.size) + 1e-12


def test_banded_mc_covariance():
    spec = CltSpec((Identity(), Banded((1.0, 0.5))),
                   VectorLaw([[1.0, 0.0], [0.6, 0.8]], [[1.0, 0.0], [0.0, 1.0]], "uniform"))
    lim = clt.limits(spec, G2)
    Z = clt.sample_ensemble(spec, G2, 2000, 1500, master_seed=3)
    mc = mean_cov(Z)
    assert np.all(np.abs(mc.cov - lim.D) <= 5 * mc.cov_se + 1e-12)


def test_determinism():
    spec = CATALOG[1]
    a = clt.sample_ensemble(spec, G2, 400, 5, 1, matrix_pool=2)
    b = clt.sample_ensemble(spec, G2, 400, 5, 1, matrix_pool=2)
    assert np.array_equal(a, b)


def test_resolvent_entries_bounded():
    biggest = []
    for k in range(100):
        env = clt.noise_environment(1000, G2, make_rng(k))
        lam = T.rho(4, env.gamma_sq)
        d = 1.0 / (lam - env.mu)
        off = (env.B * d) @ env.B.T
        biggest.append(np.abs(off).max() + 1.0)
    assert max(biggest) < 3.0


def test_decay_behaviour():
    spec = CltSpec((Identity(),), VectorLaw.shared(1))
    rep = clt.decay_check(spec, G2, 0.4, (500, 4000), replicates=300, master_seed=1)
    assert rep.monotone and rep.overall_factor > 1.1  # expected 8 ** 0.1 ~ 1.23
    with pytest.raises(ModelError):
        clt.decay_check(spec, G2, 0.5)


def test_parse_spec():
    spec = clt.parse_spec({"matrices": [{"kind": "identity"}, {"kind": "resolvent_a", "alpha": 4}],
                           "law": {"shared": True}})
    assert spec.K == 2 and isinstance(spec.matrices[1], ResolventA)
    with pytest.raises(ModelError):
        clt.parse_spec({"matrices": [{"kind": "wigner"}]})
    with pytest.raises(ModelError):
        clt.parse_spec({"matrices": [{"kind": "identity"}], "law": {"Lx": [[1.0]], "Ly": [[1.0], [2.0]]}})
