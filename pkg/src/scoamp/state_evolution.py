"""Deterministic variance recursions that predict the per-iteration MSE of OAMP.

The recursion mirrors the scalar lines of the message-passing loop: the
LMMSE Onsager coefficient is read off the deterministic singular profile
and the denoiser's empirical posterior variance is replaced by the MMSE
of the scalar Gaussian channel.
"""

from dataclasses import dataclass, field

import numpy as np

from .denoiser import mmse
from .sensing import condition_number_profile, eta_from_profile

VAR_FLOOR = 1e-12
DEFAULT_FP_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


class DivergenceError(ArithmeticError):
    """An Onsager coefficient left its admissible range."""


def gamma_squared(config):
    return np.asarray(config.gamma) ** 2


def w_counts(config):
    return np.array([config.w_count(ell) for ell in range(config.n_rows)], dtype=float)


def initial_v_ba(config):
    """``sum_{w in W[ell]} gamma[ell, ell-w]**2`` for every row section."""
    return gamma_squared(config).sum(axis=1)


def extrinsic_a(eta_a, v_ba, counts):
    """Variance leaving the linear module (may be batched over leading axes)."""
    return np.maximum(eta_a * v_ba / (counts * (1 - eta_a)), VAR_FLOOR)


def fuse_variances(v_ab, g2):
    """Harmonic fusion ``(sum_w gamma^2[l+w, l] / v_ab[l+w])^{-1}`` per column section."""
    return 1.0 / ((1.0 / v_ab) @ g2)


def eta_b(v_b, v_ab, g2):
    """``sum_w gamma^2[ell, ell-w] v_b[ell-w] / v_ab[ell]`` per row section."""
    return (v_b @ g2.T) / v_ab


def extrinsic_b(eta, v_ab, counts):
    return np.maximum(eta * v_ab / (1 - eta / counts), VAR_FLOOR)


@dataclass
class SeState:
    """Scalars of one state-evolution iteration, indexed by row or column section."""

    t: int
    v_ba: np.ndarray
    eta_a: np.ndarray = None
    v_ab: np.ndarray = None
    v_suf: np.ndarray = None
    v_b: np.ndarray = None
    eta_b: np.ndarray = None


@dataclass
class SeTrajectory:
    states: list
    converged: bool
    fp_tol: float
    converged_at: int = None
    v_b: np.ndarray = field(default=None, repr=False)

    @property
    def largest_mse(self):
        """Largest predicted MSE over column sections, per iteration."""
        return self.v_b.max(axis=1)


def default_profiles(config, kappa):
    return [condition_number_profile(config.M, config.N, config.w_count(ell), kappa)
            for ell in range(config.n_rows)]


def se_eta_a(profile, snr_ratio):
    return eta_from_profile(profile, snr_ratio)


def se_init(config):
    return SeState(t=0, v_ba=initial_v_ba(config))


def se_step(state, config, profiles, prior):
    g2 = gamma_squared(config)
    counts = w_counts(config)
    eta_a = np.array([se_eta_a(p, config.sigma2 / v)
                      for p, v in zip(profiles, state.v_ba)])
    if np.any(eta_a >= 1):
        raise DivergenceError("LMMSE Onsager coefficient reached 1")
    v_ab = extrinsic_a(eta_a, state.v_ba, counts)
    v_suf = fuse_variances(v_ab, g2)
    v_b = mmse(v_suf, prior)
    eta = eta_b(v_b, v_ab, g2)
    if np.any(eta >= counts):
        raise DivergenceError("denoiser Onsager coefficient reached the window size")
    v_ba = extrinsic_b(eta, v_ab, counts)
    return SeState(t=state.t + 1, v_ba=v_ba, eta_a=eta_a, v_ab=v_ab,
                   v_suf=v_suf, v_b=v_b, eta_b=eta)


def run_se(config, profiles, prior, T=DEFAULT_MAX_ITER, fp_tol=DEFAULT_FP_TOL):
    """Iterate :func:`se_step` until ``v_b`` moves less than ``fp_tol`` in max-norm.

    ``v_b`` before the first step is the prior variance, 1.  Row ``t`` of
    ``trajectory.v_b`` is the prediction after ``t`` iterations.
    """
    if T < 1 or not fp_tol > 0:
        raise ValueError("need T >= 1 and fp_tol > 0")
    state = se_init(config)
    states = [state]
    v_b = [np.ones(config.L)]
    converged_at = None
    for _ in range(T):
        state = se_step(state, config, profiles, prior)
        states.append(state)
        v_b.append(state.v_b)
        if np.max(np.abs(v_b[-1] - v_b[-2])) < fp_tol:
            converged_at = state.t
            break
    return SeTrajectory(states=states, converged=converged_at is not None, fp_tol=fp_tol,
                        converged_at=converged_at, v_b=np.array(v_b))


def fixed_point_residual(trajectory, config, profiles, prior):
    """Max-norm change of ``v_b`` under one extra step from the final state."""
    last = trajectory.states[-1]
    nxt = se_step(last, config, profiles, prior)
    return float(np.max(np.abs(nxt.v_b - last.v_b)))


def compare_se_mc(trajectory, mse, iterations=None):
    """Max relative deviation between trial-averaged MSE and the SE prediction.

    ``mse`` has shape ``(trials, T+1, L)`` or ``(T+1, L)`` with row ``t`` the
    MSE after ``t`` iterations, the layout of :attr:`IterationTrace.mse`.
    Returns ``(max_deviation, per_iteration_deviation)`` over the requested
    iterations (default: all available in both).  A converged trajectory is
    extended at its fixed point to cover longer traces.
    """
    mse = np.asarray(mse, dtype=float)
    if mse.ndim == 3:
        mse = np.nanmean(mse, axis=0)
    if mse.shape[1] != trajectory.v_b.shape[1]:
        raise ValueError("MSE trace and trajectory describe different section counts")
    v_b = trajectory.v_b
    if trajectory.converged and len(v_b) < len(mse):
        # a converged trajectory stays at its fixed point
        v_b = np.vstack([v_b, np.repeat(v_b[-1:], len(mse) - len(v_b), axis=0)])
    n = min(len(mse), len(v_b))
    if iterations is None:
        iterations = range(1, n)
    iterations = list(iterations)
    if max(iterations) >= n:
        raise ValueError(f"iteration {max(iterations)} beyond available {n - 1}")
    pred = v_b[iterations]
    dev = np.abs(mse[iterations] - pred) / pred
    per_iter = dev.max(axis=1)
    return float(per_iter.max()), per_iter
