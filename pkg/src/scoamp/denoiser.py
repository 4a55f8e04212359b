"""Bayes-optimal scalar denoising for the Bernoulli-Gaussian prior.

The prior puts mass ``1 - rho`` at zero and spreads ``rho`` over
``N(0, 1/rho)``, giving zero mean and unit variance.  Observations are
``u = x + sqrt(v) z`` with ``z ~ N(0, 1)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

GH_NODES = 63


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    rho: float

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")

    @property
    def nonzero_var(self):
        return 1.0 / self.rho


def _check_v(v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise ValueError("effective noise variance must be positive")
    return v


def _responsibility(u, v, prior):
    """Posterior probability that ``x != 0``, computed as a sigmoid of the log-odds."""
    if prior.rho == 1:
        return np.ones(np.broadcast(u, v).shape)
    s = prior.nonzero_var
    log_odds = (np.log(prior.rho) - np.log1p(-prior.rho)
                + 0.5 * np.log(v / (s + v))
                + 0.5 * u ** 2 * s / (v * (s + v)))
    return expit(log_odds)


def posterior_moments(u, v, prior):
    """Posterior mean and variance of ``x`` given ``u``; broadcasts ``u`` against ``v``."""
    u = np.asarray(u, dtype=float)
    v = _check_v(v)
    s = prior.nonzero_var
    gain = s / (s + v)
    pi = _responsibility(u, v, prior)
    mean = pi * gain * u
    var = pi * gain * v + pi * (1 - pi) * (gain * u) ** 2
    return mean, var


def posterior_mean(u, v, prior):
    return posterior_moments(u, v, prior)[0]


def posterior_var(u, v, prior):
    return posterior_moments(u, v, prior)[1]


def denoise_vector(u, v, prior):
    """Element-wise posterior mean of ``u`` and the average posterior variance.

    ``v`` may carry the batch axes of ``u`` (everything but the last axis).
    """
    v = _check_v(v)
    mean, var = posterior_moments(u, v[..., None], prior)
    return mean, var.mean(axis=-1)


@lru_cache(maxsize=None)
def _hermite(n):
    z, w = np.polynomial.hermite_e.hermegauss(n)
    return z, w / np.sqrt(2 * np.pi)


def mmse(v, prior, nodes=GH_NODES):
    """``E[(x - f(x + sqrt(v) z; v))^2]`` by Gauss-Hermite quadrature.

    Integrating the posterior variance directly under the nonzero component
    is hopeless for small ``v``: the responsibility switches on within a
    sliver around ``u = 0`` that no fixed node set resolves.  Using
    ``rho p1(u) (1 - pi(u)) = (1 - rho) p0(u) pi(u)`` moves every such term
    onto the zero component, leaving

        mmse = rho g v + (1 - rho) g^2 v E[pi(sqrt(v) z) z^2],   g = s/(s+v),

    whose integrand is a smooth sigmoid in ``z**2``.
    """
    v = _check_v(v)
    s = prior.nonzero_var
    gain = s / (s + v)
    total = prior.rho * gain * v
    if prior.rho < 1:
        z, w = _hermite(nodes)
        vv = v[..., None]
        tail = (_responsibility(np.sqrt(vv) * z, vv, prior) * z ** 2) @ w
        total = total + (1 - prior.rho) * gain ** 2 * v * tail
    return total
