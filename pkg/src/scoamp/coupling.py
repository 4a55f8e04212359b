"""Spatially coupled measurement model and its per-row-section vector form.

Column sections ``l = 0..L-1`` hold the unknown signals ``x[l]`` (length N).
Row section ``ell = 0..L+W-1`` observes

    y[ell] = sum_w gamma[ell, ell-w] A[ell][ell-w] x[ell-w] + noise,

which is rewritten as ``y[ell] = A[ell] @ x_vec[ell] + noise`` where
``x_vec[ell]`` stacks ``sqrt(|W[ell]|) * gamma[ell, ell-w] * x[ell-w]`` over
the window ``W[ell]``.  Blocks inside ``x_vec[ell]`` are ordered by increasing
``w``: block 0 belongs to the newest column section.  Every module uses
:meth:`CouplingConfig.block` to locate blocks, so packing and unpacking
cannot drift apart.

Signals carry optional leading batch axes: ``x`` has shape ``(..., L, N)``
and ``x_vec[ell]`` has shape ``(..., N_c[ell])``.
"""

from dataclasses import dataclass, field

import numpy as np

GAMMA_TOL = 1e-12


def uniform_gamma(L, W):
    """Coupling matrix with every in-band entry equal to ``(W+1)**-0.5``.

    Returns an ``(L+W, L)`` array indexed ``[ell, l]``; entries with
    ``ell - l`` outside ``0..W`` are zero.
    """
    if L < 1 or W < 0:
        raise ValueError(f"need L >= 1 and W >= 0, got L={L}, W={W}")
    gamma = np.zeros((L + W, L))
    for l in range(L):
        gamma[l:l + W + 1, l] = (W + 1) ** -0.5
    return gamma


@dataclass(frozen=True)
class CouplingConfig:
    L: int
    W: int
    N: int
    M: int
    sigma2: float
    gamma: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.L < 1 or self.W < 0 or self.N < 1 or self.M < 1:
            raise ValueError(
                f"need L>=1, W>=0, N>=1, M>=1; got L={self.L}, W={self.W}, "
                f"N={self.N}, M={self.M}")
        if self.M > self.N:
            raise ValueError(f"compression rate M/N must be <= 1, got {self.M}/{self.N}")
        if not self.sigma2 > 0:
            raise ValueError(f"noise variance must be positive, got {self.sigma2}")
        if self.gamma is None:
            gamma = uniform_gamma(self.L, self.W)
        else:
            gamma = np.array(self.gamma, dtype=float)
            if gamma.shape != (self.L + self.W, self.L):
                raise ValueError(
                    f"gamma must have shape {(self.L + self.W, self.L)}, got {gamma.shape}")
            ell, l = np.indices(gamma.shape)
            if np.any(gamma[(ell - l < 0) | (ell - l > self.W)] != 0):
                raise ValueError("gamma has nonzero entries outside the coupling band")
            total = np.sum(gamma ** 2) / self.L
            if abs(total - 1.0) > GAMMA_TOL:
                raise ValueError(f"gamma normalization is {total!r}, expected 1")
        gamma.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)

    @property
    def delta(self):
        return self.M / self.N

    @property
    def n_rows(self):
        return self.L + self.W

    @property
    def overall_rate(self):
        """Measurements per unknown over the whole chain, ``(1 + W/L) * delta``."""
        return (1 + self.W / self.L) * self.delta

    def _check_row(self, ell):
        if not 0 <= ell < self.n_rows:
            raise IndexError(f"row section {ell} outside 0..{self.n_rows - 1}")

    def window(self, ell):
        """Offsets ``w`` such that column ``ell - w`` feeds row ``ell``."""
        self._check_row(ell)
        return range(max(ell - (self.L - 1), 0), min(self.W, ell) + 1)

    def w_count(self, ell):
        return len(self.window(ell))

    def n_c(self, ell):
        return self.w_count(ell) * self.N

    def block(self, ell, w):
        """Slice of ``x_vec[ell]`` holding the block for offset ``w``."""
        win = self.window(ell)
        if w not in win:
            raise IndexError(f"offset {w} not in window of row section {ell}")
        k = w - win.start
        return slice(k * self.N, (k + 1) * self.N)

    def rows_of(self, l):
        """Row sections ``l + w`` that observe column section ``l``, as ``(ell, w)`` pairs."""
        if not 0 <= l < self.L:
            raise IndexError(f"column section {l} outside 0..{self.L - 1}")
        return [(l + w, w) for w in range(self.W + 1)]

    def gamma_sq_sum(self, ell):
        """``sum_{w in W[ell]} gamma[ell, ell-w]**2``."""
        return float(sum(self.gamma[ell, ell - w] ** 2 for w in self.window(ell)))


def window_indices(config, ell):
    return list(config.window(ell))


def sample_signals(L, N, rho, rng, size=()):
    """Bernoulli-Gaussian signals of shape ``(*size, L, N)``.

    Each entry is nonzero with probability ``rho`` and then drawn from
    ``N(0, 1/rho)``, so the ensemble has unit variance.
    """
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    shape = ((size,) if np.isscalar(size) else tuple(size)) + (L, N)
    support = rng.random(shape) < rho
    return np.where(support, rng.standard_normal(shape) / np.sqrt(rho), 0.0)


def build_x_vec(config, x, ell):
    """Stack ``sqrt(|W[ell]|) * gamma[ell, ell-w] * x[..., ell-w, :]`` over the window."""
    x = np.asarray(x)
    if x.shape[-2:] != (config.L, config.N):
        raise ValueError(f"signals must end in shape {(config.L, config.N)}, got {x.shape}")
    win = config.window(ell)
    scale = np.sqrt(len(win))
    return np.concatenate(
        [scale * config.gamma[ell, ell - w] * x[..., ell - w, :] for w in win], axis=-1)


def build_all_x_vec(config, x):
    return [build_x_vec(config, x, ell) for ell in range(config.n_rows)]


def measure(config, x_vecs, ops, rng):
    """Noisy measurements ``y[ell] = A[ell] x_vec[ell] + w[ell]`` for every row section.

    ``rng`` may be a single generator or one generator per row section.
    """
    if len(x_vecs) != config.n_rows or len(ops) != config.n_rows:
        raise ValueError(f"need {config.n_rows} stacked signals and operators")
    rngs = rng if isinstance(rng, (list, tuple)) else [rng] * config.n_rows
    ys = []
    for ell, (xv, op) in enumerate(zip(x_vecs, ops)):
        if xv.shape[-1] != config.n_c(ell) or op.n_c != config.n_c(ell) or op.m != config.M:
            raise ValueError(f"dimension mismatch in row section {ell}")
        clean = op.forward(xv)
        ys.append(clean + np.sqrt(config.sigma2) * rngs[ell].standard_normal(clean.shape))
    return ys
