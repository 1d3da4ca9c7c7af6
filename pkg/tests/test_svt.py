import numpy as np
import pytest

from jointmc.acceptance import reference_svt
from jointmc.acquisition import acquire
from jointmc.covariance_model import make_pair
from jointmc.errors import InvalidParameterError
from jointmc.matrix_ops import nmse
from jointmc.svt import SvtParams, default_step, svt_recover


def rank_one_pair(seed, m=20, n=40):
    rng = np.random.default_rng(seed)
    return make_pair(np.outer(rng.standard_normal(2 * m), rng.standard_normal(n)))


@pytest.mark.parametrize("p, step", [(1.0, 1.2), (0.5, 1.99), (0.9, 1.2 / 0.9)])
def test_default_step(p, step):
    assert default_step(p) == pytest.approx(step)


def test_default_step_rejects_bad_fraction():
    with pytest.raises(InvalidParameterError):
        default_step(0.0)


@pytest.mark.parametrize(
    "kwargs", [dict(tau=0.0, step=1.0), dict(tau=1.0, step=2.0), dict(tau=1.0, step=1.0, tolerance=0)]
)
def test_params_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        SvtParams(**kwargs)


def test_rank_one_recovery_matches_reference():
    pair = rank_one_pair(0)
    obs = acquire(pair, 560, 560, 0.0, 0.0, seed=1)
    params = SvtParams.defaults(obs)
    assert params.tau == 200.0
    result = svt_recover(obs, params)
    assert result.converged and result.iterations <= 500
    err = nmse(pair.stacked, result.estimate)
    assert err < 1e-3
    ref = reference_svt(obs.values, obs.mask, params.tau, params.step, 1e-4, 500)
    assert abs(err - nmse(pair.stacked, ref)) <= 1e-6


def test_full_observation_meets_stopping_rule():
    pair = rank_one_pair(2)
    obs = acquire(pair, 800, 800, 0.0, 0.0, seed=3)
    result = svt_recover(obs, SvtParams.defaults(obs))
    assert result.converged
    gap = np.linalg.norm(obs.project(result.estimate) - obs.values) / np.linalg.norm(obs.values)
    assert gap <= 1e-4
    assert result.residual_history[-1] == pytest.approx(gap)


def test_huge_threshold_never_moves():
    pair = rank_one_pair(4)
    obs = acquire(pair, 400, 400, 0.0, 0.0, seed=5)
    result = svt_recover(obs, SvtParams(tau=1e9, step=0.1, max_iterations=30))
    assert not result.converged and result.iterations == 30
    np.testing.assert_array_equal(result.estimate, 0.0)
    assert result.residual_history[-1] == 1.0


def test_residual_settles_monotonically():
    pair = rank_one_pair(6)
    obs = acquire(pair, 640, 640, 0.0, 0.0, seed=7)
    result = svt_recover(obs, SvtParams.defaults(obs))
    assert result.converged
    tail = np.array(result.residual_history[-50:])
    assert np.all(np.diff(tail) <= 1e-9)


def test_estimate_rank_counts_singular_values_above_tau():
    pair = rank_one_pair(8)
    obs = acquire(pair, 500, 500, 0.0, 0.0, seed=9)
    params = SvtParams(tau=150.0, step=1.5, max_iterations=3)
    # rebuild the dual after two steps by hand, then check the third iterate
    y = np.zeros(obs.shape)
    for _ in range(2):
        u, s, vt = np.linalg.svd(y, full_matrices=False)
        x = (u * np.maximum(s - params.tau, 0)) @ vt
        y = y + params.step * (obs.values - obs.project(x))
    result = svt_recover(obs, params)
    expected = int(np.sum(np.linalg.svd(y, compute_uv=False) > params.tau))
    assert np.linalg.matrix_rank(result.estimate, tol=1e-8) == expected


def test_tau_schedule_overrides_fixed_tau():
    pair = rank_one_pair(10)
    obs = acquire(pair, 500, 500, 0.0, 0.0, seed=11)
    params = SvtParams(tau=1.0, step=1.2, max_iterations=5)
    result = svt_recover(obs, params, tau_schedule=[1e9, 1e9])
    assert result.threshold_history == [1e9] * 5
    np.testing.assert_array_equal(result.estimate, 0.0)


def test_empty_observation_rejected():
    pair = rank_one_pair(12)
    obs = acquire(pair, 0, 0, 0.0, 0.0, seed=0)
    with pytest.raises(InvalidParameterError):
        svt_recover(obs, SvtParams(tau=1.0, step=1.0))
