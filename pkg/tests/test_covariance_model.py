import numpy as np
import pytest
from scipy.linalg import cholesky

from jointmc.covariance_model import (
    build_joint_covariance,
    build_toeplitz_block,
    calibrate_joint,
    calibrate_tail,
    covariance_from_parameters,
    make_pair,
    max_cross_scale,
    sample_columns,
    semidefinite_cholesky,
)
from jointmc.errors import InvalidParameterError, NotPositiveSemidefiniteError
from jointmc.matrix_ops import effective_rank
from jointmc.seeding import generator

# -- Toeplitz blocks --------------------------------------------------------


def test_toeplitz_entries_per_lag():
    mat = build_toeplitz_block(3, 0.25).matrix
    np.testing.assert_allclose(mat[0], [1.0, 0.5, 0.25])


def test_toeplitz_zero_tail_is_identity():
    np.testing.assert_array_equal(build_toeplitz_block(6, 0.0).matrix, np.eye(6))


def test_toeplitz_lag_one_value():
    block = build_toeplitz_block(5, 0.9)
    # 0.9 ** 0.25 worked by hand: exp(ln(0.9) / 4) = exp(-0.0263401) = 0.974004
    assert block.base == pytest.approx(0.974004, abs=1e-6)
    assert block.matrix[0, 1] == pytest.approx(0.974004, abs=1e-6)


@pytest.mark.parametrize("size, tail", [(4, 0.3), (9, 0.97), (20, 0.5)])
def test_toeplitz_symmetry_exact(size, tail):
    mat = build_toeplitz_block(size, tail).matrix
    for i in range(size):
        for j in range(size):
            assert mat[i, j] == mat[j, i] == mat[0, abs(i - j)]


@pytest.mark.parametrize("size, tail", [(1, 0.5), (4, 1.0), (4, -0.1), (2.5, 0.5)])
def test_toeplitz_rejects_bad_parameters(size, tail):
    with pytest.raises(InvalidParameterError):
        build_toeplitz_block(size, tail)


# -- semidefinite Cholesky --------------------------------------------------


def test_cholesky_matches_scipy_on_positive_definite():
    a = np.random.default_rng(0).standard_normal((6, 6))
    spd = a @ a.T + np.eye(6)
    np.testing.assert_allclose(semidefinite_cholesky(spd), cholesky(spd, lower=True), atol=1e-12)


def test_cholesky_rank_deficient_reconstructs():
    a = np.random.default_rng(1).standard_normal((6, 2))
    psd = a @ a.T
    lower = semidefinite_cholesky(psd)
    np.testing.assert_allclose(lower @ lower.T, psd, atol=1e-10)
    np.testing.assert_array_equal(np.triu(lower, 1), 0.0)


def test_cholesky_reports_failing_minor():
    mat = np.diag([1.0, 2.0, -1.0, 3.0])
    with pytest.raises(NotPositiveSemidefiniteError) as info:
        semidefinite_cholesky(mat)
    assert info.value.index == 3
    assert info.value.category == "not-positive-semidefinite"


# -- joint covariance -------------------------------------------------------


def test_zero_cross_scale_is_block_diagonal():
    spec = covariance_from_parameters(5, 0.4, 0.8, 0.0)
    np.testing.assert_array_equal(spec.realized[:5, 5:], 0.0)


def test_identical_blocks_unit_cross_scale_factors():
    spec = covariance_from_parameters(6, 0.7, 0.7, 1.0)
    np.testing.assert_allclose(spec.factor @ spec.factor.T, spec.realized, atol=1e-10)


def test_two_by_two_not_psd_example():
    # Schur complement S22 - 0.64 S11 = [[0.36, -0.576], [-0.576, 0.36]]
    # has eigenvalues 0.936 and -0.216
    # with M = 2 the lag-one entry is the tail itself
    s11 = build_toeplitz_block(2, 0.9)
    s22 = build_toeplitz_block(2, 0.0)
    schur = s22.matrix - 0.64 * s11.matrix
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(schur)), [-0.216, 0.936], atol=1e-12)
    with pytest.raises(NotPositiveSemidefiniteError) as info:
        build_joint_covariance(s11, s22, 0.8)
    assert info.value.index in (3, 4)


def test_mismatched_block_sizes():
    with pytest.raises(InvalidParameterError):
        build_joint_covariance(build_toeplitz_block(3, 0.5), build_toeplitz_block(4, 0.5), 0.2)


def test_cross_block_two_uses_second_block():
    spec = covariance_from_parameters(4, 0.3, 0.9, 0.5, cross_block=2)
    np.testing.assert_allclose(spec.realized[:4, 4:], 0.5 * spec.block2.matrix)


def test_psd_gate_on_random_specs():
    rng = np.random.default_rng(2)
    accepted = 0
    for _ in range(200):
        size = int(rng.integers(2, 11))
        u11, u22, psi = rng.uniform(0.0, 0.99, size=3)
        try:
            spec = covariance_from_parameters(size, u11, u22, psi)
        except NotPositiveSemidefiniteError:
            continue
        accepted += 1
        eig = np.linalg.eigvalsh(spec.realized)
        assert eig.min() >= -1e-8 * eig.max()
    assert accepted > 20


@pytest.mark.parametrize("cross_block", [1, 2])
def test_max_cross_scale_is_the_psd_edge(cross_block):
    b1, b2 = build_toeplitz_block(8, 0.6), build_toeplitz_block(8, 0.85)
    edge = max_cross_scale(b1, b2, cross_block)
    assert 0 < edge < 1
    build_joint_covariance(b1, b2, edge * (1 - 1e-6), cross_block)
    eig = np.linalg.eigvalsh(build_joint_covariance(b1, b2, 0.0, cross_block).realized)
    assert eig.min() > 0
    with pytest.raises(NotPositiveSemidefiniteError):
        build_joint_covariance(b1, b2, min(1.0, edge * 1.05), cross_block)


# -- sampling ---------------------------------------------------------------


def test_sample_identity_covariance_is_standard_normal():
    spec = covariance_from_parameters(2, 0.0, 0.0, 0.0)
    pair = sample_columns(spec, 50000, seed=3)
    cov = pair.stacked @ pair.stacked.T / 50000
    np.testing.assert_allclose(cov, np.eye(4), atol=0.03)


def test_sampling_fidelity():
    spec = covariance_from_parameters(2, 0.5, 0.3, 0.6)
    pair = sample_columns(spec, 200000, seed=4)
    cov = pair.stacked @ pair.stacked.T / 200000
    np.testing.assert_allclose(cov, spec.realized, atol=0.02)


def test_near_unit_tail_gives_rank_one():
    spec = covariance_from_parameters(10, 1 - 1e-12, 1 - 1e-12, 1.0)
    pair = sample_columns(spec, 40, seed=5)
    assert pair.r == 1


def test_sampling_is_bit_identical():
    spec = covariance_from_parameters(50, 0.97, 0.97, 0.9)
    a = sample_columns(spec, 100, seed=6).stacked
    b = sample_columns(spec, 100, seed=6).stacked
    np.testing.assert_array_equal(a, b)


def test_stacked_rank_bounds_on_random_specs():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        size = int(rng.integers(2, 9))
        u11, u22 = rng.uniform(0.0, 0.999, size=2)
        b1, b2 = build_toeplitz_block(size, u11), build_toeplitz_block(size, u22)
        psi = rng.uniform(0, 1) * max_cross_scale(b1, b2)
        spec = build_joint_covariance(b1, b2, psi)
        pair = sample_columns(spec, int(rng.integers(2 * size, 4 * size)), int(rng.integers(2**32)))
        assert pair.rank_bounds_hold, (pair.r1, pair.r2, pair.r)
        checked += 1


def test_cross_correlation_lowers_stacked_rank():
    b = build_toeplitz_block(20, 0.9)
    z = generator(8).standard_normal((40, 60))
    independent = make_pair(build_joint_covariance(b, b, 0.0).factor @ z)
    identical = make_pair(build_joint_covariance(b, b, 1.0).factor @ z)
    assert identical.r <= independent.r
    assert identical.r == identical.r1


# -- calibration ------------------------------------------------------------


def test_calibrate_full_rank_gives_small_tail():
    # full rank holds on a whole interval [0, u_max); its midpoint comes back
    tail = calibrate_tail(10, 10, 30, seed=0)
    assert tail < 0.5
    z = generator(0).standard_normal((10, 30))
    assert effective_rank(z) == 10
    block = build_toeplitz_block(10, tail)
    assert effective_rank(semidefinite_cholesky(block.matrix) @ z) == 10


def test_calibrate_rank_one_gives_tail_near_one():
    assert calibrate_tail(1, 10, 30, seed=0) > 0.99


def test_calibrate_closed_loop():
    tail = calibrate_tail(6, 50, 100, seed=11)
    assert 0 < tail < 1
    z = generator(11).standard_normal((50, 100))
    block = build_toeplitz_block(50, tail)
    assert effective_rank(semidefinite_cholesky(block.matrix) @ z) == 6


def test_calibrate_rejects_impossible_target():
    with pytest.raises(InvalidParameterError):
        calibrate_tail(11, 10, 30, seed=0)


def test_calibrate_joint_hits_targets():
    cal = calibrate_joint(50, 100, 6, 6, 9, seed=12)
    pair = sample_columns(cal.spec(50), 100, 12)
    assert (pair.r1, pair.r2, pair.r) == (6, 6, 9)


def test_calibrate_joint_rejects_impossible_stacked_rank():
    with pytest.raises(InvalidParameterError):
        calibrate_joint(50, 100, 6, 6, 13, seed=0)
