import numpy as np
import pytest

from stairdet.cxmat import gramian, matched_filter, solve_hermitian
from stairdet.errors import DimensionError, NumericError

from conftest import random_spd


def naive_gramian(H, sigma2):
    B, U = H.shape
    G = np.zeros((U, U), dtype=complex)
    for i in range(U):
        for j in range(U):
            for k in range(B):
                G[i, j] += H[k, i].conjugate() * H[k, j]
        G[i, i] += sigma2
    return G


def naive_mf(H, y):
    B, U = H.shape
    out = np.zeros(U, dtype=complex)
    for i in range(U):
        for k in range(B):
            out[i] += H[k, i].conjugate() * y[k]
    return out


def rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_gramian_identity():
    np.testing.assert_array_equal(gramian(np.eye(2), 0.0), np.eye(2))


def test_gramian_hand_value():
    assert gramian([[1.0], [1.0]], 0.5)[0, 0] == 2.5


def test_gramian_rejects_wide_channel():
    with pytest.raises(DimensionError):
        gramian(np.ones((2, 3)), 0.0)


def test_gramian_rejects_negative_sigma2():
    with pytest.raises(ValueError):
        gramian(np.eye(2), -1.0)


@pytest.mark.parametrize("seed", range(100))
def test_gramian_and_mf_match_loops(seed):
    rng = np.random.default_rng(seed)
    H = rand_c(rng, 16, 4)
    y = rand_c(rng, 16)
    s2 = float(rng.uniform(0, 2))
    G = gramian(H, s2)
    np.testing.assert_allclose(G, naive_gramian(H, s2), rtol=0, atol=1e-12)
    np.testing.assert_allclose(matched_filter(H, y), naive_mf(H, y), rtol=0, atol=1e-12)
    assert np.max(np.abs(G - G.conj().T)) <= 1e-12
    assert np.all(np.diag(G).real > 0)


def test_gramian_seed_42_matches_loop():
    rng = np.random.default_rng(42)
    H = rand_c(rng, 16, 4)
    np.testing.assert_allclose(gramian(H, 0.3), naive_gramian(H, 0.3), atol=1e-12)


def test_matched_filter_examples():
    np.testing.assert_array_equal(matched_filter(np.eye(2), [1 + 2j, 3]), [1 + 2j, 3])
    np.testing.assert_array_equal(matched_filter([[1j], [0]], [1, 1]), [-1j])


def test_matched_filter_dimension_mismatch():
    with pytest.raises(DimensionError):
        matched_filter(np.eye(2), [1, 2, 3])


def test_solve_identity_and_diagonal():
    b = np.array([1 + 1j, -2, 3j])
    np.testing.assert_allclose(solve_hermitian(np.eye(3), b), b, atol=1e-15)
    np.testing.assert_allclose(solve_hermitian(np.diag([2.0, 4.0]), [2, 4]), [1, 1], atol=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_solve_residual(seed):
    G = random_spd(8, seed)
    b = rand_c(np.random.default_rng(seed + 1000), 8)
    x = solve_hermitian(G, b)
    assert np.linalg.norm(G @ x - b) / np.linalg.norm(b) <= 1e-10


def test_solve_rejects_indefinite():
    with pytest.raises(NumericError):
        solve_hermitian(np.diag([1.0, -1.0]), [1, 1])
