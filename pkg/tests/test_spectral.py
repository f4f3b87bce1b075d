import numpy as np
import pytest
from scipy.linalg import expm

from momentbody.errors import InvalidInput
from momentbody.spectral import (
    as_symmetric,
    density_violation,
    eigh,
    entropy_term,
    exp1,
    is_density,
    lambda_extremes,
    logsumexp,
    logtrexp,
    softmax,
)


def test_as_symmetric_averages_and_copies():
    M = np.array([[1.0, 2.0], [4.0, 3.0]])
    S = as_symmetric(M)
    assert np.array_equal(S, S.T)
    assert S[0, 1] == 3.0
    S[0, 0] = 99
    assert M[0, 0] == 1.0


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.ones(3), [[np.nan, 0], [0, 1]], [[np.inf, 0], [0, 1]]])
def test_as_symmetric_rejects(bad):
    with pytest.raises(InvalidInput):
        as_symmetric(bad)


def test_as_symmetric_size_check():
    with pytest.raises(InvalidInput):
        as_symmetric(np.eye(3), n=2)


def test_exp1_matches_scipy(rng):
    G = rng.standard_normal((6, 6))
    M = G + G.T
    X, logZ = exp1(M)
    E = expm(M)
    assert np.allclose(X, E / np.trace(E), atol=1e-13)
    assert logZ == pytest.approx(np.log(np.trace(E)), abs=1e-12)


def test_exp1_shift_invariance_and_no_overflow():
    M = np.diag([0.0, 1.0, 2.0])
    X0, z0 = exp1(M)
    X1, z1 = exp1(M + 1e4 * np.eye(3))
    assert np.allclose(X0, X1, atol=1e-15)
    assert z1 - z0 == pytest.approx(1e4)
    Xbig, zbig = exp1(np.diag([800.0, 0.0]))
    assert np.all(np.isfinite(Xbig)) and zbig == pytest.approx(800.0)


def test_exp1_zero_is_maximally_mixed():
    X, logZ = exp1(np.zeros((4, 4)))
    assert np.allclose(X, np.eye(4) / 4)
    assert logZ == pytest.approx(np.log(4))


def test_exp1_rejects_nan():
    with pytest.raises(InvalidInput):
        exp1(np.array([[np.nan]]))


def test_softmax_and_logsumexp():
    lam = np.array([1000.0, 1000.0, -1000.0])
    p, logZ = softmax(lam)
    assert np.allclose(p, [0.5, 0.5, 0.0])
    assert logZ == pytest.approx(1000 + np.log(2))
    assert logsumexp(lam) == pytest.approx(logZ)


def test_logtrexp_and_extremes(rng):
    G = rng.standard_normal((5, 5))
    M = G + G.T
    lam = np.linalg.eigvalsh(M)
    assert logtrexp(M) == pytest.approx(np.log(np.exp(lam).sum()))
    assert lambda_extremes(M) == pytest.approx((lam[0], lam[-1]))


def test_eigh_reconstructs(rng):
    G = rng.standard_normal((4, 4))
    M = G + G.T
    lam, V = eigh(M)
    assert np.all(np.diff(lam) >= 0)
    assert np.allclose((V * lam) @ V.T, M)


def test_entropy_term_convention():
    assert entropy_term([1.0, 0.0]) == 0.0
    assert entropy_term([0.5, 0.5]) == pytest.approx(-np.log(2))


def test_density_checks():
    assert is_density(np.eye(3) / 3)
    assert not is_density(np.diag([1.2, -0.2]))
    neg, tr = density_violation(np.diag([0.6, 0.6]))
    assert neg < 0 and tr == pytest.approx(0.2)
