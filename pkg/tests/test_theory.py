import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikelab import theory as T
from spikelab.errors import ModelError, TransitionWindow
from spikelab.model import DistributionFamily, ModelConfig

G2 = 4.0

# Reference values from the Gauss-Legendre oracle at rel_tol 1e-13.
QUAD_4 = {"m1": 0.33333333333333265, "m3": 0.11428571428571407, "m4": 0.08060641399416894,
          "m5": 0.0973795435333895, "m6": 0.30769230769230704}
QUAD_02 = {"m1": -1.2499999999999971, "m3": 2.564102564102557, "m4": -17.26259714425354,
           "m5": 5.424878152150863, "m6": -1.8181818181818135}
QUAD_4_25 = {"m2": 0.3529411764705875, "m7": 0.1234160100026167, "m8": 0.30968858131487825}


def test_sea_edges():
    sea = T.mp_support(G2)
    assert sea.lambda_minus == pytest.approx(0.25)
    assert sea.lambda_plus == pytest.approx(2.25)
    assert sea.contains(1.0) and not sea.contains(2.3)


@pytest.mark.parametrize("g2", [0.5, 1.0, -2.0])
def test_aspect_ratio_must_exceed_one(g2):
    with pytest.raises(ModelError):
        T.mp_support(g2)


def test_density_zero_outside_sea():
    x = np.array([0.1, 0.2, 2.3, 5.0])
    assert np.all(T.mp_density(x, G2) == 0)


def test_spike_limits():
    assert T.rho(4.0, G2) == pytest.approx(4.333333333333333, abs=1e-12)
    assert T.rho(0.2, G2) == pytest.approx(0.1375, abs=1e-12)
    assert T.scaling(4.0, G2) == pytest.approx(1.1142857142857143, rel=1e-12)


def test_classification():
    assert T.classify_spike(4.0, G2) is T.SpikeClass.SUPERCRITICAL_ABOVE
    assert T.classify_spike(0.2, G2) is T.SpikeClass.SUPERCRITICAL_BELOW
    assert not T.classify_spike(1.2, G2).detaches
    assert not T.classify_spike(0.8, G2).detaches
    with pytest.raises(TransitionWindow):
        T.rho(1.2, G2)
    with pytest.raises(TransitionWindow):
        T.m3(0.6, G2)


@pytest.mark.parametrize("name", sorted(QUAD_4))
def test_single_moments_match_frozen_quadrature(name):
    f = getattr(T, name)
    assert f(4.0, G2) == pytest.approx(QUAD_4[name], rel=1e-11)
    assert f(0.2, G2) == pytest.approx(QUAD_02[name], rel=1e-11)


@pytest.mark.parametrize("name", sorted(QUAD_4_25))
def test_pair_moments_match_frozen_quadrature(name):
    assert getattr(T, name)(4.0, 2.5, G2) == pytest.approx(QUAD_4_25[name], rel=1e-11)


def test_covariance_constants():
    assert T.omega_tilde(4, 4, G2) == pytest.approx(1.17361, abs=5e-6)
    assert T.theta_tilde(4, 4, G2) == pytest.approx(1.20714, abs=5e-6)
    assert T.zeta_tilde(4, 4, G2) == pytest.approx(T.diag_limit_c(4, G2) ** 2, rel=1e-12)
    assert T.kappa_tilde(4, 2.5, G2) == pytest.approx(T.diag_limit_a(4, G2) * T.diag_limit_c(2.5, G2), rel=1e-12)


def test_cos_limit_and_identity():
    assert T.cos_limit(4.0, G2) == pytest.approx(0.947331, abs=5e-7)
    c = 1 / G2
    alt = (1 - c / 9) / (1 + c / 3)
    assert T.cos_limit(4.0, G2) ** 2 == pytest.approx(alt, abs=1e-12)


supercritical = st.one_of(st.floats(2.6, 20.0), st.floats(0.05, 0.45))


@given(a=supercritical, b=supercritical, g2=st.floats(4.5, 20.0))
@settings(max_examples=60, deadline=None)
def test_identities_hold(a, b, g2):
    c = 1 / g2
    assert T.rho(a, g2) == pytest.approx((1 + c * T.m1(a, g2)) * a, rel=1e-12)
    th = 1 + c * T.m1(a, g2) + c * T.m1(b, g2) + c * T.m2(a, b, g2)
    assert T.theta_tilde(a, b, g2) == pytest.approx(th, rel=1e-10, abs=1e-12)
    assert T.m2(a, b, g2) == pytest.approx(T.m2(b, a, g2), rel=1e-12)
    assert T.m7(a, b, g2) == pytest.approx(T.m7(b, a, g2), rel=1e-12)


@given(a=st.floats(5.5, 30.0), b=st.floats(1.6, 5.0), low=st.floats(0.02, 0.2),
       m=st.integers(1, 2), fam=st.sampled_from(["gaussian", "rademacher", "uniform", "scale_mixture"]))
@settings(max_examples=40, deadline=None)
def test_eigenvalue_tensor_is_psd(a, b, low, m, fam):
    cfg = ModelConfig(((a, m), (b, 1), (low, 1)), 9.0, 9000, DistributionFamily(fam))
    ten = T.eigenvalue_cov(cfg)
    assert np.allclose(ten.matrix, ten.matrix.T)
    assert ten.is_psd(1e-9)


def test_single_spike_fluctuation_variance():
    cfg = ModelConfig((4.0,), G2, 2000)
    pred = T.predict(cfg, G2)
    th = T.theta_tilde(4, 4, G2)
    expect = 2 * th * 16 / T.scaling(4, G2) ** 2
    assert pred.trace_variance(0) == pytest.approx(expect, rel=1e-12)
    assert pred.trace_variance(0) == pytest.approx(31.111, abs=1e-3)


def test_inter_pack_covariance_vanishes_for_iid_and_not_for_mixture():
    gauss = ModelConfig((4.0, 0.2), G2, 2000)
    assert T.eigenvalue_cov(gauss)[(0, 0, 0), (1, 0, 0)] == 0.0
    fam = DistributionFamily.scale_mixture((0.5, 5.0), (8 / 9, 1 / 9))
    mix = ModelConfig((4.0, 0.2), G2, 2000, fam)
    er4 = fam.radial_fourth
    assert er4 == pytest.approx(3.0)
    expect = T.omega_tilde(4, 0.2, G2) * 4 * 0.2 * (er4 - 1)
    assert T.eigenvalue_cov(mix)[(0, 0, 0), (1, 0, 0)] == pytest.approx(expect, rel=1e-12)


def test_pack_tensor_layout():
    cfg = ModelConfig(((4.0, 2), (0.2, 1)), G2, 4000)
    ten = T.eigenvalue_cov(cfg)
    assert ten.index == [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 0, 0)]
    # Gaussian: diagonal entries have variance 2 theta alpha^2, off-diagonal theta alpha^2
    th = T.theta_tilde(4, 4, G2)
    assert ten[(0, 0, 0), (0, 0, 0)] == pytest.approx(2 * th * 16)
    assert ten[(0, 0, 1), (0, 0, 1)] == pytest.approx(th * 16)
    assert ten[(0, 0, 0), (0, 1, 1)] == pytest.approx(0.0, abs=1e-12)


def test_eigenvector_coefficients_forms():
    cfg = ModelConfig((4.0, 2.5), G2, 2000)
    Kd = T.eigenvector_coefficients(cfg, G2)
    Kp = T.eigenvector_coefficients(cfg, G2, form="printed")
    r1 = T.rho(4.0, G2)
    assert Kd[1, 0] == pytest.approx(4.0 / (r1 * 1.5))
    assert Kp[1, 0] == pytest.approx(2.5 / (r1 * 1.5))
    assert Kd[0, 0] == pytest.approx(1 / T.scaling(4.0, G2))
    with pytest.raises(ValueError):
        T.eigenvector_coefficients(cfg, G2, form="other")


def test_eigenvector_requires_distinct():
    cfg = ModelConfig(((4.0, 2),), G2, 2000)
    with pytest.raises(ModelError):
        T.eigenvector_cov(cfg)
    assert T.predict(cfg).eigenvector is None


def test_angle_theory_forms():
    cfg = ModelConfig((4.0,), G2, 2000)
    d = T.angle_theory(cfg, 0, G2)
    p = T.angle_theory(cfg, 0, G2, form="printed")
    assert d.g_coef == pytest.approx(p.g_coef / 2)
    assert d.h_coef == -0.5 and p.h_coef == 1.0
    assert d.statistic_variance == pytest.approx(0.0460, abs=5e-4)
    assert p.statistic_variance > 10 * d.statistic_variance
    assert np.linalg.eigvalsh(d.block).min() >= -1e-12
    cov = T.angle_covariance(ModelConfig((4.0, 2.5, 0.2), G2, 2000), G2)
    assert np.allclose(cov, cov.T)


def test_cross_covariance_orientation():
    # Cov(G_j, H_j') uses the A-resolvent at spike j and the C-resolvent at j'
    cfg = ModelConfig((4.0, 2.5), G2, 2000)
    a = T.angle_theory(cfg, 0, G2)
    gh = a.gh_cross
    e = 0.0  # Gaussian: E xi_j^2 xi_j'^2 - alpha alpha' = 0 off the diagonal
    assert gh[0, 1] == pytest.approx(T.kappa_tilde(4.0, 2.5, G2) * e)
    same = 2 * 16
    assert gh[0, 0] == pytest.approx(T.mu_tilde(4.0, 4.0, G2) * same)


def test_predictions_serialize():
    d = T.predict(ModelConfig((4.0, 0.2), G2, 2000)).to_dict()
    assert d["packs"][0]["rho"] == pytest.approx(4.0 + 0.25 * 4 / 3, rel=1e-3)
    assert len(d["angles"]) == 2
    assert math.isfinite(d["packs"][0]["fluctuation_variance"])
