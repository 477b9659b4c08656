import numpy as np
import pytest

from dmfreq.linalg import ThinSvd, eig_dense, pinv_from_svd, thin_svd


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@pytest.mark.parametrize("shape", [(7, 3), (3, 7), (40, 40), (460, 454), (600, 600)])
def test_svd_invariants(shape):
    a = np.random.default_rng(1).standard_normal(shape)
    s = thin_svd(a)
    assert s.k == min(shape)
    assert np.all(np.diff(s.sigma) <= 0) and np.all(s.sigma >= 0)
    assert np.allclose(s.u.T @ s.u, np.eye(s.k), atol=1e-10)
    assert np.allclose(s.v.T @ s.v, np.eye(s.k), atol=1e-10)
    assert np.max(np.abs(s.matrix() - a)) < 1e-9 * max(1.0, np.abs(a).max()) * max(shape)


def test_svd_truncation_is_best_approximation():
    a = np.random.default_rng(2).standard_normal((30, 20))
    full = thin_svd(a)
    s3 = thin_svd(a, 3)
    err = np.linalg.norm(a - s3.matrix(), 2)
    assert err == pytest.approx(full.sigma[3], rel=1e-10)


def test_svd_rejects_bad_input():
    with pytest.raises(ValueError):
        thin_svd(np.ones((3, 3)), 4)
    with pytest.raises(ValueError):
        thin_svd(np.array([[1.0, np.nan]]))


def test_rank_detects_deficiency():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((50, 4)) @ rng.standard_normal((4, 30))
    assert thin_svd(a).rank() == 4


@pytest.mark.parametrize("theta", [2 * np.pi * 10 / 500, 0.3, 1.9])
def test_rotation_eigenvalues(theta):
    e = eig_dense(rotation(theta))
    got = np.sort_complex(e.values)
    want = np.sort_complex(np.exp([-1j * theta, 1j * theta]))
    assert np.allclose(got, want, atol=1e-14)
    assert np.allclose(np.linalg.norm(e.vectors, axis=0), 1.0)
    assert np.all(e.residuals(rotation(theta)) < 1e-13)


def test_rotation_at_10hz_is_0_12566():
    e = eig_dense(rotation(2 * np.pi * 10 / 500))
    assert np.allclose(np.sort(np.angle(e.values)), [-0.12566370614359174, 0.12566370614359174])


def test_eig_random_residuals():
    a = np.random.default_rng(4).standard_normal((60, 60))
    e = eig_dense(a)
    assert np.all(e.residuals(a) < 1e-10)


def test_eig_rejects_rectangular():
    with pytest.raises(ValueError):
        eig_dense(np.ones((2, 3)))


@pytest.mark.parametrize("shape", [(9, 5), (5, 9), (12, 12)])
def test_moore_penrose_identities(shape):
    rng = np.random.default_rng(5)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    p = pinv_from_svd(thin_svd(a))
    assert np.allclose(a @ p @ a, a, atol=1e-10)
    assert np.allclose(p @ a @ p, p, atol=1e-10)
    assert np.allclose((a @ p).conj().T, a @ p, atol=1e-10)
    assert np.allclose((p @ a).conj().T, p @ a, atol=1e-10)
    assert np.allclose(p, np.linalg.pinv(a), atol=1e-10)


def test_pinv_zeroes_tiny_singular_values():
    s = ThinSvd(np.eye(3), np.array([1.0, 1e-3, 1e-15]), np.eye(3))
    p = pinv_from_svd(s)
    assert np.allclose(np.diag(p), [1.0, 1e3, 0.0])
    with pytest.raises(ValueError):
        pinv_from_svd(s, 1.0)
