"""Orthogonal AMP for the spatially coupled system.

Module A applies the LMMSE filter of each row section to its stacked signal
and removes the Onsager term.  Module B fuses the ``W + 1`` row-section
views of every column section into one sufficient statistic, denoises it,
re-stacks the estimate and removes its own Onsager term.  Messages going
back to module A are damped.

All arrays may carry leading batch axes (one entry per Monte-Carlo trial).
Per-row-section messages are lists indexed by ``ell`` with shape
``(..., N_c[ell])``; per-column-section arrays have shape ``(..., L, N)``;
variance scalars have shape ``(..., n_rows)`` or ``(..., L)``.
"""

from dataclasses import dataclass, replace

import numpy as np

from .coupling import build_x_vec
from .denoiser import denoise_vector
from .state_evolution import (DivergenceError, eta_b, extrinsic_a, extrinsic_b,
                              fuse_variances, gamma_squared, initial_v_ba, w_counts)


@dataclass
class OampState:
    """Messages after ``t`` completed iterations.

    ``x_ab``/``v_ab``/``eta_a`` and the column-section fields come from
    iteration ``t - 1``; ``x_ba``/``v_ba`` feed iteration ``t``.
    """

    t: int
    x_ba: list
    v_ba: np.ndarray
    x_ab: list = None
    v_ab: np.ndarray = None
    eta_a: np.ndarray = None
    x_suf: np.ndarray = None
    v_suf: np.ndarray = None
    x_b: np.ndarray = None
    v_b: np.ndarray = None
    eta_b: np.ndarray = None


@dataclass
class IterationTrace:
    """Per-iteration diagnostics.

    ``mse[..., t, l]`` is the empirical MSE of column section ``l`` after
    ``t`` iterations (row 0 is the zero initial estimate) and ``v_b`` the
    matching variance the algorithm believes.  The remaining arrays are
    indexed by the iteration that produced them.  ``failed_at`` is -1 for
    trials that never diverged; entries from a failed trial's divergence
    onwards are NaN.
    """

    mse: np.ndarray
    v_b: np.ndarray
    v_suf: np.ndarray
    v_ab: np.ndarray
    eta_a: np.ndarray
    eta_b: np.ndarray
    failed_at: np.ndarray

    @property
    def largest_mse(self):
        return self.mse.max(axis=-1)

    @property
    def iterations(self):
        return self.eta_a.shape[-2]


def init(config, batch_shape=()):
    x_ba = [np.zeros(tuple(batch_shape) + (config.n_c(ell),)) for ell in range(config.n_rows)]
    v_ba = np.broadcast_to(initial_v_ba(config), tuple(batch_shape) + (config.n_rows,)).copy()
    return OampState(t=0, x_ba=x_ba, v_ba=v_ba)


def module_a_step(state, config, ops, ys, strict=True):
    """LMMSE estimate of every stacked signal followed by its Onsager correction.

    Returns ``(x_ab, v_ab, eta_a)``.
    """
    counts = w_counts(config)
    x_ab, etas = [], []
    for ell, (op, y) in enumerate(zip(ops, ys)):
        x_ba = state.x_ba[ell]
        v = state.v_ba[..., ell]
        snr_ratio = config.sigma2 / v
        x_a = x_ba + op.lmmse(snr_ratio, y - op.forward(x_ba))
        eta = np.asarray(op.eta(snr_ratio))
        if strict and np.any(eta >= 1):
            raise DivergenceError(f"LMMSE Onsager coefficient reached 1 in row section {ell}")
        scale = np.sqrt(counts[ell]) * (1 - eta)
        x_ab.append((x_a - eta[..., None] * x_ba) / scale[..., None])
        etas.append(eta)
    eta_a = np.stack(etas, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = extrinsic_a(eta_a, state.v_ba, counts)
    return x_ab, v_ab, eta_a


def sufficient_statistic(x_ab, v_ab, config):
    """Fuse the ``W + 1`` views of each column section; returns ``(x_suf, v_suf)``."""
    g2 = gamma_squared(config)
    v_suf = fuse_variances(v_ab, g2)
    batch = x_ab[0].shape[:-1]
    x_suf = np.zeros(batch + (config.L, config.N))
    for l in range(config.L):
        acc = 0.0
        for ell, w in config.rows_of(l):
            weight = config.gamma[ell, l] / v_ab[..., ell]
            acc = acc + weight[..., None] * x_ab[ell][..., config.block(ell, w)]
        x_suf[..., l, :] = v_suf[..., l, None] * acc
    return x_suf, v_suf


def module_b_step(state, config, prior, strict=True):
    """Denoise the sufficient statistics and form the Onsager-corrected feedback.

    ``state`` must carry ``x_ab``, ``v_ab``, ``x_suf`` and ``v_suf``.
    Returns ``(x_ba, v_ba, x_b, v_b, eta_b)`` before damping.
    """
    g2 = gamma_squared(config)
    counts = w_counts(config)
    x_b, v_b = denoise_vector(state.x_suf, state.v_suf, prior)
    eta = eta_b(v_b, state.v_ab, g2)
    if strict and np.any(eta >= counts):
        raise DivergenceError("denoiser Onsager coefficient reached the window size")
    x_ba = []
    for ell in range(config.n_rows):
        root = np.sqrt(counts[ell])
        e = eta[..., ell, None]
        stacked = build_x_vec(config, x_b, ell)
        x_ba.append((root * stacked - e * state.x_ab[ell]) / (root * (1 - e / counts[ell])))
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ba = extrinsic_b(eta, state.v_ab, counts)
    return x_ba, v_ba, x_b, v_b, eta


def damp(new, old, zeta):
    """``zeta * new + (1 - zeta) * old`` for arrays or lists of arrays."""
    if not 0 < zeta <= 1:
        raise ValueError(f"damping factor must lie in (0, 1], got {zeta}")
    if isinstance(new, list):
        return [damp(n, o, zeta) for n, o in zip(new, old)]
    if zeta == 1:
        return new
    return zeta * new + (1 - zeta) * old


def iterate(state, config, ops, ys, prior, zeta=1.0, strict=True):
    """One full iteration; returns the next :class:`OampState`."""
    x_ab, v_ab, eta_a = module_a_step(state, config, ops, ys, strict=strict)
    x_suf, v_suf = sufficient_statistic(x_ab, v_ab, config)
    mid = replace(state, x_ab=x_ab, v_ab=v_ab, eta_a=eta_a, x_suf=x_suf, v_suf=v_suf)
    x_ba, v_ba, x_b, v_b, eta = module_b_step(mid, config, prior, strict=strict)
    return replace(mid, t=state.t + 1,
                   x_ba=damp(x_ba, state.x_ba, zeta), v_ba=damp(v_ba, state.v_ba, zeta),
                   x_b=x_b, v_b=v_b, eta_b=eta)


def _healthy(nxt, counts):
    ok = np.all(nxt.eta_a < 1, axis=-1) & np.all(nxt.eta_b < counts, axis=-1)
    ok &= np.all(np.isfinite(nxt.v_ba) & (nxt.v_ba > 0), axis=-1)
    ok &= np.all(np.isfinite(nxt.v_b), axis=-1)
    for xb in nxt.x_ba:
        ok &= np.all(np.isfinite(xb), axis=-1)
    return ok


def _keep(ok, new, old):
    if isinstance(new, list):
        return [_keep(ok, n, o) for n, o in zip(new, old)]
    if old is None:
        return new
    mask = ok.reshape(ok.shape + (1,) * (new.ndim - ok.ndim))
    return np.where(mask, new, old)


def run(config, ops, ys, prior, zeta=1.0, T=200, signals=None, callback=None):
    """Run ``T`` iterations and return ``(x_b, trace)``.

    ``signals`` (shape ``(..., L, N)``) enables the MSE trace; without it
    ``trace.mse`` is NaN.  A trial whose Onsager coefficients leave their
    admissible range is frozen at its last healthy state and flagged in
    ``trace.failed_at``; the other trials keep running.  ``callback(state)``
    is called after every iteration.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if not 0 < zeta <= 1:
        raise ValueError(f"damping factor must lie in (0, 1], got {zeta}")
    batch = np.shape(ys[0])[:-1]
    counts = w_counts(config)
    state = init(config, batch)
    x_b = np.zeros(batch + (config.L, config.N))

    def nan(*tail):
        return np.full(batch + tail, np.nan)

    mse, v_b = nan(T + 1, config.L), nan(T + 1, config.L)
    v_suf, v_ab = nan(T, config.L), nan(T, config.n_rows)
    eta_a, eta_bs = nan(T, config.n_rows), nan(T, config.n_rows)
    failed_at = np.full(batch, -1)
    v_b[..., 0, :] = 1.0
    if signals is not None:
        mse[..., 0, :] = np.mean(signals ** 2, axis=-1)
    alive = np.ones(batch, dtype=bool)
    for t in range(T):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            nxt = iterate(state, config, ops, ys, prior, zeta, strict=False)
            ok = _healthy(nxt, counts) & alive
        newly = alive & ~ok
        failed_at[newly] = t
        alive = ok
        if not alive.any():
            break
        state = replace(nxt, x_ba=_keep(alive, nxt.x_ba, state.x_ba),
                        v_ba=_keep(alive, nxt.v_ba, state.v_ba))
        x_b = _keep(alive, nxt.x_b, x_b)
        a = alive[..., None]
        v_b[..., t + 1, :] = np.where(a, nxt.v_b, np.nan)
        v_suf[..., t, :] = np.where(a, nxt.v_suf, np.nan)
        v_ab[..., t, :] = np.where(a, nxt.v_ab, np.nan)
        eta_a[..., t, :] = np.where(a, nxt.eta_a, np.nan)
        eta_bs[..., t, :] = np.where(a, nxt.eta_b, np.nan)
        if signals is not None:
            err = np.mean((nxt.x_b - signals) ** 2, axis=-1)
            mse[..., t + 1, :] = np.where(a, err, np.nan)
        if callback is not None:
            callback(state)
    trace = IterationTrace(mse=mse, v_b=v_b, v_suf=v_suf, v_ab=v_ab, eta_a=eta_a,
                           eta_b=eta_bs, failed_at=failed_at)
    return x_b, trace


def error_vectors(state, x_vecs, config):
    """``h[ell] = x_ab[ell] - x_vec[ell]/sqrt|W[ell]|`` and ``q[ell] = x_ba[ell] - x_vec[ell]``.

    ``h`` belongs to the iteration that produced ``state.x_ab`` and ``q`` to
    the message ``state.x_ba`` about to enter module A.
    """
    counts = w_counts(config)
    h = None
    if state.x_ab is not None:
        h = [xa - xv / np.sqrt(c) for xa, xv, c in zip(state.x_ab, x_vecs, counts)]
    q = [xb - xv for xb, xv in zip(state.x_ba, x_vecs)]
    return h, q
