import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikelab.eigen import (EigenPair, ExtremeSpectrum, extreme_spectrum, full_symmetric_eig, householder_tridiagonalize,
                            oriented_extremes, sample_covariance, tridiagonal_ql)
from spikelab.errors import DegenerateProjection, NonConvergence
from spikelab.model import ModelConfig, sample_data

METHODS = ["lapack", "householder-ql"]


def test_sample_covariance_basics():
    assert np.array_equal(sample_covariance(np.zeros((5, 3))), np.zeros((3, 3)))
    X = np.zeros((10, 4))
    X[:, 2] = np.arange(10.0)
    S = sample_covariance(X)
    w = np.linalg.eigvalsh(S)
    assert np.count_nonzero(np.abs(w) > 1e-12) == 1
    assert w.max() == pytest.approx(np.sum(np.arange(10.0) ** 2) / 10)
    R = np.random.default_rng(0).standard_normal((30, 7))
    S = sample_covariance(R)
    assert np.array_equal(S, S.T)


@pytest.mark.parametrize("method", METHODS)
def test_diagonal_and_2x2(method):
    w, V = full_symmetric_eig(np.diag([1.0, 3.0, 2.0]), method)
    assert np.allclose(w, [3, 2, 1])
    assert np.allclose(np.abs(V), np.eye(3)[:, [1, 2, 0]])
    w, _ = full_symmetric_eig(np.array([[2.0, 1.0], [1.0, 2.0]]), method)
    assert np.allclose(w, [3, 1], atol=1e-14)


@pytest.mark.parametrize("method", METHODS)
def test_random_reconstruction(method):
    A = np.random.default_rng(1).standard_normal((50, 50))
    S = A + A.T
    w, V = full_symmetric_eig(S, method)
    fro = np.linalg.norm(S)
    assert np.linalg.norm(V @ np.diag(w) @ V.T - S) <= 1e-8 * fro
    assert np.abs(V.T @ V - np.eye(50)).max() <= 1e-10
    assert np.all(np.diff(w) <= 0)
    resid = np.linalg.norm(S @ V - V * w, axis=0)
    assert resid.max() <= 1e-8 * fro


@given(n=st.integers(3, 40), p=st.integers(1, 30), seed=st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_matches_gram_oracle(n, p, seed):
    if n <= p:
        n = p + 1
    X = np.random.default_rng(seed).standard_normal((n, p))
    S = sample_covariance(X)
    gram = np.sort(np.linalg.eigvalsh(X @ X.T / n))[::-1][:p]
    for method in METHODS:
        w, _ = full_symmetric_eig(S, method)
        assert np.allclose(w, gram, atol=1e-8)


def test_row_permutation_invariance():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((200, 20))
    perm = rng.permutation(200)
    S1, S2 = sample_covariance(X), sample_covariance(X[perm])
    assert np.abs(S1 - S2).max() <= 1e-12
    w1, _ = full_symmetric_eig(S1)
    w2, _ = full_symmetric_eig(S2)
    assert np.abs(w1 - w2).max() <= 1e-12


def test_tridiagonal_reduction_is_similarity():
    A = np.random.default_rng(2).standard_normal((12, 12))
    S = A + A.T
    d, e, Q = householder_tridiagonalize(S)
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(Q.T @ S @ Q, T, atol=1e-12)


def test_ql_budget():
    with pytest.raises(NonConvergence):
        tridiagonal_ql(np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0]), max_iter=0)


def test_unknown_method():
    with pytest.raises(ValueError):
        full_symmetric_eig(np.eye(2), "jacobi")


@pytest.mark.parametrize("method", METHODS)
def test_extreme_spectrum_ordering(method):
    X = sample_data(ModelConfig(((4.0, 2), (0.2, 1)), 4.0, 800), 3)
    S = sample_covariance(X)
    sp = extreme_spectrum(S, 2, 1, method)
    w, _ = full_symmetric_eig(S)
    assert np.allclose([e.value for e in sp.top], w[:2], atol=1e-10)
    assert sp.bottom[0].value == pytest.approx(w[-1], abs=1e-10)
    lo, hi = sp.bulk_edges
    assert sp.top[-1].value >= hi >= lo >= sp.bottom[-1].value
    assert hi == pytest.approx(w[2], abs=1e-10) and lo == pytest.approx(w[-2], abs=1e-10)
    for pair in sp.top + sp.bottom:
        assert abs(np.linalg.norm(pair.vector) - 1) <= 1e-12
        assert np.linalg.norm(S @ pair.vector - pair.value * pair.vector) <= 1e-8 * np.linalg.norm(S)


def _spectrum(vectors, values, p):
    pairs = [EigenPair(v, np.asarray(w, float)) for v, w in zip(values, vectors)]
    return ExtremeSpectrum(pairs, [], (0.0, 1.0), p)


def test_orientation_of_exact_spike():
    p = 5
    e0 = -np.eye(p)[0]
    (pr,) = oriented_extremes(_spectrum([e0], [3.0], p), 1, 0, 1)
    assert np.array_equal(pr.u, [1.0]) and np.allclose(pr.v, 0) and pr.cos_angle == 1.0


def test_orientation_cos_equals_projection():
    w = np.random.default_rng(3).standard_normal(8)
    w /= np.linalg.norm(w)
    (pr0, pr1) = oriented_extremes(_spectrum([w, w], [3.0, 2.0], 8), 2, 0, 2)
    assert pr0.cos_angle == pytest.approx(abs(w[0]), abs=1e-14)
    assert pr1.cos_angle == pytest.approx(abs(w[1]), abs=1e-14)
    assert pr1.u[1] >= 0 and np.linalg.norm(pr1.u) == pytest.approx(1.0)


def test_degenerate_projection():
    w = np.zeros(6)
    w[4] = 1.0
    with pytest.raises(DegenerateProjection):
        oriented_extremes(_spectrum([w], [3.0], 6), 1, 0, 1)


def test_bottom_pack_assignment_descending():
    p = 6
    top = [EigenPair(5.0, np.eye(p)[0])]
    bottom = [EigenPair(0.05, np.eye(p)[2]), EigenPair(0.1, np.eye(p)[1])]
    pairs = oriented_extremes(ExtremeSpectrum(top, bottom, (0.2, 2.0), p), 1, 2, 3)
    assert [pr.value for pr in pairs] == [5.0, 0.1, 0.05]


def test_angle_single_run():
    X = sample_data(ModelConfig((4.0,), 4.0, 4000), 2024)
    sp = extreme_spectrum(sample_covariance(X), 1, 0)
    (pr,) = oriented_extremes(sp, 1, 0, 1)
    assert abs(pr.cos_angle - 0.947331) < 0.03
