"""Independent reference implementations used by the tests.

Nothing here calls into the package's numerics: posterior moments come from
adaptive quadrature, OAMP from explicit matrices and plain loops, and the
all-Gaussian state evolution from a hand-derived scalar map.
"""

import numpy as np
from scipy import integrate
from scipy.stats import norm


def quad_posterior(u, v, rho):
    """Posterior mean and variance of the Bernoulli-Gaussian prior by adaptive quadrature.

    The Gaussian branch is integrated over ``x`` around its peak; the point
    mass at zero enters the evidence in closed form.  Both branches are
    scaled by the larger of their marginal densities to stay clear of
    overflow and underflow.
    """
    s = 1.0 / rho
    centre = s / (s + v) * u
    width = np.sqrt(s * v / (s + v))
    lo, hi = centre - 40 * width, centre + 40 * width
    log_zero = np.log1p(-rho) + norm.logpdf(u, scale=np.sqrt(v)) if rho < 1 else -np.inf
    ref = max(log_zero, np.log(rho) + norm.logpdf(u, scale=np.sqrt(s + v)))

    def dens(x):
        return rho * np.exp(norm.logpdf(x, scale=np.sqrt(s))
                            + norm.logpdf(u - x, scale=np.sqrt(v)) - ref)

    opts = dict(points=[centre], epsabs=1e-14, epsrel=1e-13, limit=200)
    z1, _ = integrate.quad(dens, lo, hi, **opts)
    m1, _ = integrate.quad(lambda x: x * dens(x), lo, hi, **opts)
    m2, _ = integrate.quad(lambda x: x * x * dens(x), lo, hi, **opts)
    evidence = np.exp(log_zero - ref) + z1
    mean = m1 / evidence
    return mean, m2 / evidence - mean ** 2


def quad_mmse(v, rho):
    """``E[Var(x | u)]`` integrating the closed-form posterior variance over ``u``."""
    s = 1.0 / rho

    def var_at(u):
        log_odds = (np.log(rho / (1 - rho)) + 0.5 * np.log(v / (s + v))
                    + 0.5 * u * u * s / (v * (s + v)))
        pi = 1 / (1 + np.exp(-log_odds))
        g = s / (s + v)
        return pi * g * v + pi * (1 - pi) * (g * u) ** 2

    def p_u(u):
        return (1 - rho) * norm.pdf(u, scale=np.sqrt(v)) + rho * norm.pdf(u, scale=np.sqrt(s + v))

    # the responsibility switches on at |u| ~ sqrt(v log(1/v)); tell quad where
    knee = np.sqrt(max(v, 1e-300) * max(1.0, np.log(1 / v))) if v < 1 else np.sqrt(v)
    pts = sorted({0.0, knee, 2 * knee, 5 * knee})
    edge = 12 * np.sqrt(s + v)
    total = 0.0
    for a, b in zip([0.0] + pts[1:], pts[1:] + [edge]):
        part, _ = integrate.quad(lambda u: var_at(u) * p_u(u), a, b, epsabs=1e-15,
                                 epsrel=1e-12, limit=400)
        total += part
    return 2 * total


def bg_posterior(u, v, rho):
    """Closed-form Bernoulli-Gaussian posterior moments, written out independently."""
    s = 1.0 / rho
    if rho == 1:
        return u * s / (s + v), np.full_like(u, s * v / (s + v))
    a = (1 - rho) * np.exp(-u ** 2 / (2 * v)) / np.sqrt(v)
    b = rho * np.exp(-u ** 2 / (2 * (s + v))) / np.sqrt(s + v)
    pi = b / (a + b)
    g = s / (s + v)
    mean = pi * g * u
    second = pi * (g * v + (g * u) ** 2)
    return mean, second - mean ** 2


def mc_mmse(v, rho, samples, rng, chunk=10 ** 6):
    """Monte-Carlo estimate ``(mean, standard error)`` of the squared error of the denoiser."""
    total = total_sq = 0.0
    n = 0
    while n < samples:
        k = min(chunk, samples - n)
        x = np.where(rng.random(k) < rho, rng.standard_normal(k) / np.sqrt(rho), 0.0)
        u = x + np.sqrt(v) * rng.standard_normal(k)
        with np.errstate(over="ignore"):
            err = (x - bg_posterior(u, v, rho)[0]) ** 2
        total += err.sum()
        total_sq += (err ** 2).sum()
        n += k
    mean = total / n
    return mean, np.sqrt((total_sq / n - mean ** 2) / n)


def reference_oamp(A, y, gamma, L, W, N, sigma2, rho, zeta=1.0, T=10, x_true=None):
    """Spatially coupled OAMP with explicit matrices and loops.

    ``A[ell]`` is the dense ``M x N_c`` matrix of row section ``ell`` and
    ``y[ell]`` its measurement.  Returns the per-iteration estimates of the
    signal sections and, with ``x_true``, the per-section MSE.
    """
    rows = L + W
    win = [list(range(max(ell - (L - 1), 0), min(W, ell) + 1)) for ell in range(rows)]
    c = [len(w) for w in win]
    nc = [k * N for k in c]
    x_ba = [np.zeros(nc[ell]) for ell in range(rows)]
    v_ba = np.array([sum(gamma[ell, ell - w] ** 2 for w in win[ell]) for ell in range(rows)])
    estimates, mses = [], []
    for _ in range(T):
        x_ab, v_ab = [], np.zeros(rows)
        for ell in range(rows):
            M = A[ell].shape[0]
            Wt = np.linalg.inv(sigma2 / v_ba[ell] * np.eye(M) + A[ell] @ A[ell].T) @ A[ell]
            x_a = x_ba[ell] + Wt.T @ (y[ell] - A[ell] @ x_ba[ell])
            eta = np.trace(np.eye(nc[ell]) - Wt.T @ A[ell]) / nc[ell]
            x_ab.append((x_a - eta * x_ba[ell]) / (np.sqrt(c[ell]) * (1 - eta)))
            v_ab[ell] = eta * v_ba[ell] / (c[ell] * (1 - eta))
        x_b = np.zeros((L, N))
        v_b = np.zeros(L)
        for l in range(L):
            prec, acc = 0.0, np.zeros(N)
            for w in range(W + 1):
                ell = l + w
                k = win[ell].index(w)
                prec += gamma[ell, l] ** 2 / v_ab[ell]
                acc += gamma[ell, l] * x_ab[ell][k * N:(k + 1) * N] / v_ab[ell]
            v_suf = 1 / prec
            mean, var = bg_posterior(v_suf * acc, v_suf, rho)
            x_b[l] = mean
            v_b[l] = var.mean()
        new_x, new_v = [], np.zeros(rows)
        for ell in range(rows):
            eta = sum(gamma[ell, ell - w] ** 2 * v_b[ell - w] for w in win[ell]) / v_ab[ell]
            stacked = np.sqrt(c[ell]) * np.concatenate(
                [gamma[ell, ell - w] * x_b[ell - w] for w in win[ell]])
            new_x.append((np.sqrt(c[ell]) * stacked - eta * x_ab[ell])
                         / (np.sqrt(c[ell]) * (1 - eta / c[ell])))
            new_v[ell] = eta * v_ab[ell] / (1 - eta / c[ell])
        x_ba = [zeta * n + (1 - zeta) * o for n, o in zip(new_x, x_ba)]
        v_ba = zeta * new_v + (1 - zeta) * v_ba
        estimates.append(x_b)
        if x_true is not None:
            mses.append(np.mean((x_b - x_true) ** 2, axis=1))
    return estimates, np.array(mses)


def gaussian_se_map(v_ba, delta, sigma2):
    """One state-evolution step for L=1, W=0, a Gaussian prior and flat singular values.

    With ``s_i^2 = 1/delta`` on ``M = delta N`` values and ``r = sigma2/v_ba``:
    ``eta_A = (1 + r delta - delta)/(1 + r delta)``, ``v_AB = v_ba (1 + r delta - delta)/delta``,
    ``v_B = v_AB/(1 + v_AB)``, ``eta_B = v_B/v_AB`` and ``v_BA = v_AB v_B/(v_AB - v_B)``.
    """
    r = sigma2 / v_ba
    eta_a = (1 + r * delta - delta) / (1 + r * delta)
    v_ab = v_ba * (1 + r * delta - delta) / delta
    v_b = v_ab / (1 + v_ab)
    eta_b = v_b / v_ab
    v_ba_next = v_ab * v_b / (v_ab - v_b)
    return dict(eta_a=eta_a, v_ab=v_ab, v_suf=v_ab, v_b=v_b, eta_b=eta_b, v_ba=v_ba_next)
