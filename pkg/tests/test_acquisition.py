import numpy as np
import pytest

from jointmc.acquisition import acquire, add_noise, sample_mask, snr_to_sigma
from jointmc.covariance_model import build_toeplitz_block, make_pair
from jointmc.errors import InvalidParameterError
from jointmc.seeding import SubSeeds, derive_seed, split_seed


@pytest.fixture
def pair():
    rng = np.random.default_rng(0)
    return make_pair(rng.standard_normal((8, 2)) @ rng.standard_normal((2, 6)))


@pytest.mark.parametrize("snr, sigma", [(50, 10**-2.5), (0, 1.0), (20, 0.1)])
def test_snr_to_sigma(snr, sigma):
    block = build_toeplitz_block(5, 0.7)
    assert snr_to_sigma(block, snr) == pytest.approx(sigma, rel=1e-12)


def test_snr_infinite_is_noiseless():
    assert snr_to_sigma(build_toeplitz_block(5, 0.7), float("inf")) == 0.0


def test_add_noise_zero_sigma_is_copy():
    a = np.arange(6.0).reshape(2, 3)
    out = add_noise(a, 0.0, seed=1)
    np.testing.assert_array_equal(out, a)
    assert out is not a


def test_add_noise_variance():
    a = np.zeros((1000, 1000))
    out = add_noise(a, 0.3, seed=2)
    assert np.var(out - a) == pytest.approx(0.09, rel=0.01)


def test_add_noise_deterministic():
    a = np.ones((4, 4))
    np.testing.assert_array_equal(add_noise(a, 0.5, 3), add_noise(a, 0.5, 3))


def test_add_noise_rejects_negative_sigma():
    with pytest.raises(InvalidParameterError):
        add_noise(np.ones(2), -0.1, 0)


def test_mask_extremes():
    assert sample_mask(3, 4, 12, 0).all()
    assert not sample_mask(3, 4, 0, 0).any()
    assert sample_mask(5, 7, 13, 4).sum() == 13


def test_mask_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        sample_mask(2, 2, 5, 0)


def test_mask_uniform():
    counts = np.zeros((2, 2))
    for i in range(100000):
        counts += sample_mask(2, 2, 1, i)
    np.testing.assert_allclose(counts / 100000, 0.25, atol=0.0025)


def test_full_noiseless_observation_returns_truth(pair):
    obs = acquire(pair, 24, 24, 0.0, 0.0, seed=5)
    np.testing.assert_array_equal(obs.values, pair.stacked)
    assert obs.n_missing == 0


def test_no_dataset1_observations(pair):
    obs = acquire(pair, 0, 10, 0.1, 0.1, seed=6)
    np.testing.assert_array_equal(obs.values[:4], 0.0)
    assert obs.k1 == 0 and obs.k2 == 10


def test_dataset2_seed_does_not_move_omega1(pair):
    seeds = split_seed(7)
    other = SubSeeds(seeds.noise1, seeds.noise2, seeds.mask1, derive_seed(99))
    a = acquire(pair, 10, 10, 0.1, 0.1, seeds)
    b = acquire(pair, 10, 10, 0.1, 0.1, other)
    np.testing.assert_array_equal(a.omega1, b.omega1)
    assert not np.array_equal(a.omega2, b.omega2)


def test_observation_set_invariants(pair):
    obs = acquire(pair, 9, 14, 0.2, 0.2, seed=8)
    assert obs.n_observed == 23 == len(obs.omega1) + len(obs.omega2)
    r = np.random.default_rng(9).standard_normal(obs.shape)
    once = obs.project(r)
    np.testing.assert_array_equal(obs.project(once), once)
    rows, cols = np.vstack([obs.omega1, obs.omega2]).T
    assert np.sum(once**2) == np.sum(r[rows, cols] ** 2)
    assert obs.sampling_fraction == pytest.approx(23 / 48)
    assert np.all(obs.omega2[:, 0] >= obs.m)


def test_seeds_are_stable_and_distinct():
    assert derive_seed(0, "truth") == derive_seed(0, "truth")
    assert len({derive_seed(0, 1, 2, t) for t in range(50)}) == 50
    assert derive_seed(-1) != derive_seed(1)
    assert len(set(split_seed(3))) == 4
