import itertools
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from oracles import gaussian_se_map
from scoamp import oamp
from scoamp.coupling import CouplingConfig
from scoamp.denoiser import BernoulliGaussianPrior, mmse
from scoamp.harness import ExperimentConfig, make_trials
from scoamp.state_evolution import (SeState, compare_se_mc, default_profiles,
                                    fixed_point_residual, run_se, se_init, se_step)


def gaussian_case(N=64, delta=0.25, sigma2=0.05):
    c = CouplingConfig(L=1, W=0, N=N, M=int(delta * N), sigma2=sigma2)
    return c, default_profiles(c, 1.0), BernoulliGaussianPrior(1.0)


@pytest.mark.parametrize("v_ba", [1.0, 0.3, 2.5, 1e-3])
def test_gaussian_scalar_map(v_ba):
    c, profiles, prior = gaussian_case()
    nxt = se_step(SeState(t=0, v_ba=np.array([v_ba])), c, profiles, prior)
    ref = gaussian_se_map(v_ba, 0.25, 0.05)
    for key, value in ref.items():
        assert abs(getattr(nxt, key)[0] - value) <= 1e-12, key


def test_gaussian_trajectory_constant_after_first_step():
    c, profiles, prior = gaussian_case(delta=0.5, sigma2=1e-3)
    traj = run_se(c, profiles, prior, T=20)
    expected = (1 - 0.5 + 0.5 * 1e-3) / (1 + 0.5 * 1e-3)
    assert np.allclose(traj.v_b[1:, 0], expected, rtol=0, atol=1e-12)
    assert traj.converged and traj.converged_at == 2
    assert np.allclose([s.v_ba[0] for s in traj.states], 1.0, atol=1e-12)


def test_init_uses_coupling_energy():
    c = CouplingConfig(L=4, W=1, N=8, M=4, sigma2=0.1)
    v = se_init(c).v_ba
    assert np.allclose(v, [0.5, 1, 1, 1, 0.5])


def test_low_and_high_rate_regimes():
    prior = BernoulliGaussianPrior(0.1)
    low = CouplingConfig(L=1, W=0, N=1024, M=51, sigma2=1e-3)
    high = CouplingConfig(L=1, W=0, N=1024, M=900, sigma2=1e-3)
    v_low = run_se(low, default_profiles(low, 10.0), prior).v_b[-1, 0]
    v_high = run_se(high, default_profiles(high, 10.0), prior).v_b[-1, 0]
    assert v_low > 0.5
    assert v_high < 10 * 1e-3


def test_coupling_beats_uncoupled_in_waterfall():
    prior = BernoulliGaussianPrior(0.1)
    out = {}
    for L, W in [(8, 1), (1, 0)]:
        c = CouplingConfig(L=L, W=W, N=1024, M=195, sigma2=1e-3)
        out[L] = run_se(c, default_profiles(c, 10.0), prior).largest_mse[-1]
    assert 10 * np.log10(out[1] / out[8]) > 10


GRID = list(itertools.product((0, 1), (0.2, 0.35, 0.6), (0.05, 0.1, 0.2), (1.0, 10.0)))


@pytest.mark.parametrize("W, delta, rho, kappa", GRID)
def test_monotone_non_increasing(W, delta, rho, kappa):
    c = CouplingConfig(L=1 if W == 0 else 8, W=W, N=1024, M=int(delta * 1024), sigma2=1e-3)
    traj = run_se(c, default_profiles(c, kappa), BernoulliGaussianPrior(rho))
    rise = float(np.diff(traj.v_b, axis=0).max())
    if rise > 1e-12:
        # not a theorem, so a rise is reported rather than failed
        warnings.warn(f"SE not monotone at W={W}, delta={delta}, rho={rho}, kappa={kappa}: "
                      f"v_b rose by {rise:.3e}")
    assert traj.converged


def test_nearly_independent_of_n_at_fixed_delta():
    prior = BernoulliGaussianPrior(0.1)
    curves = []
    for N in (4096, 16384):
        c = CouplingConfig(L=8, W=1, N=N, M=int(0.3 * N), sigma2=1e-3)
        curves.append(run_se(c, default_profiles(c, 10.0), prior, T=60, fp_tol=1e-300).v_b)
    a, b = curves
    assert np.max(np.abs(a - b) / b) < 0.01


def test_fixed_point_residual_small():
    c = CouplingConfig(L=8, W=1, N=512, M=128, sigma2=1e-3)
    profiles = default_profiles(c, 10.0)
    prior = BernoulliGaussianPrior(0.1)
    traj = run_se(c, profiles, prior)
    assert traj.converged
    assert fixed_point_residual(traj, c, profiles, prior) < 1e-10
    s = traj.states[-1]
    assert np.allclose(s.v_b, mmse(s.v_suf, prior))


def test_run_se_bad_arguments():
    c, profiles, prior = gaussian_case()
    with pytest.raises(ValueError):
        run_se(c, profiles, prior, T=0)
    with pytest.raises(ValueError):
        run_se(c, profiles, prior, fp_tol=0.0)


def test_compare_se_mc():
    c, profiles, prior = gaussian_case(delta=0.5)
    traj = run_se(c, profiles, prior, T=30)
    assert len(traj.v_b) == 3
    trace = np.repeat(traj.v_b[-1:], 11, axis=0)[None] * np.array([[[1.0]], [[1.1]]])
    dev, per = compare_se_mc(traj, trace)
    assert dev == pytest.approx(0.05) and per.shape == (10,)
    dev, _ = compare_se_mc(traj, trace[0], iterations=[1, 2])
    assert dev == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        compare_se_mc(traj, np.ones((5, 2)))
    short = run_se(c, profiles, prior, T=1)
    with pytest.raises(ValueError):
        compare_se_mc(short, trace, iterations=[5])


def test_infinite_tolerance_stops_after_one_step():
    c, profiles, prior = gaussian_case()
    traj = run_se(c, profiles, prior, fp_tol=np.inf)
    assert traj.converged and traj.converged_at == 1 and len(traj.v_b) == 2


def test_scalar_fixed_point_matches_root_finder():
    # the v_ba map of the all-Gaussian case has a single root; solve it independently
    sigma2 = 0.02
    c, profiles, prior = gaussian_case(N=1024, delta=0.4, sigma2=sigma2)
    delta = c.M / c.N
    root = brentq(lambda v: gaussian_se_map(v, delta, sigma2)["v_ba"] - v, 0.05, 20.0,
                  xtol=1e-14)
    v_b_star = gaussian_se_map(root, delta, sigma2)["v_b"]
    traj = run_se(c, profiles, prior)
    assert traj.converged
    assert traj.states[-1].v_ba[0] == pytest.approx(root, rel=1e-10)
    assert traj.v_b[-1, 0] == pytest.approx(v_b_star, rel=1e-10)


def _oamp_one_step(cfg, delta, trials, chunk=25):
    c = cfg.coupling(delta)
    prior = BernoulliGaussianPrior(cfg.rho)
    mse, h2 = [], []
    for start in range(0, trials, chunk):
        x, xv, ops, ys = make_trials(cfg, c, 0, range(start, start + chunk))
        state = oamp.iterate(oamp.init(c, (chunk,)), c, ops, ys, prior)
        h, _ = oamp.error_vectors(state, xv, c)
        mse.append(np.mean((state.x_b - x) ** 2, axis=-1))
        h2.append(np.stack([np.mean(e ** 2, axis=-1) for e in h], axis=-1))
    return c, np.concatenate(mse).mean(axis=0), np.concatenate(h2).mean(axis=0)


def test_one_step_matches_trial_averaged_empirical_variances():
    cfg = ExperimentConfig(L=16, W=1, N=2 ** 12, kappa=10.0, rho=0.1, snr_db=30.0, T=1,
                           trials=100, deltas=(0.3,), zetas=(1.0,))
    c, mse, h2 = _oamp_one_step(cfg, 0.3, trials=100)
    state = se_step(se_init(c), c, default_profiles(c, cfg.kappa), BernoulliGaussianPrior(0.1))
    assert np.max(np.abs(h2 - state.v_ab) / state.v_ab) <= 0.10
    assert np.max(np.abs(mse - state.v_b) / state.v_b) <= 0.10


def test_se_mc_gap_shrinks_with_n():
    prior = BernoulliGaussianPrior(0.1)
    medians = []
    for n in (2 ** 10, 2 ** 12, 2 ** 14):
        cfg = ExperimentConfig(L=1, W=0, N=n, kappa=10.0, rho=0.1, snr_db=30.0, T=10,
                               trials=10, deltas=(0.5,), zetas=(1.0,))
        c = cfg.coupling(0.5)
        x, _, ops, ys = make_trials(cfg, c, 0, range(10))
        _, trace = oamp.run(c, ops, ys, prior, T=10, signals=x)
        traj = run_se(c, default_profiles(c, cfg.kappa), prior, T=10, fp_tol=1e-300)
        _, per = compare_se_mc(traj, trace.mse, iterations=range(1, 11))
        medians.append(np.median(per))
    assert medians[0] > medians[1] > medians[2]
