"""Sensing operators ``A = Sigma V^T`` with a prescribed singular-value profile.

The structured ensemble takes ``V = H P`` with ``H`` the orthonormal
Walsh-Hadamard matrix and ``P`` a random column permutation, so every
product costs ``O(N_c log N_c)``.  Equivalently ``V^T v`` is the Hadamard
transform of ``v`` with its entries shuffled, which assigns the singular
values to randomly chosen Hadamard rows.  A dense ensemble with Haar-distributed
``V`` is kept for cross-checks at small sizes.  The left singular factor
is the identity in both cases.

Operators accept inputs with leading batch axes.  A structured operator
may also carry a batch of permutations, shape ``(B, N_c)``, one per trial,
in which case inputs must have a matching leading axis.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import hadamard

_MAX_BLOCK_LOG2 = 6


@dataclass(frozen=True)
class SingularProfile:
    """Non-increasing singular values of one ``M x n_c`` block."""

    values: np.ndarray
    kappa: float
    n_c: int

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def squares(self):
        return self.values ** 2


def condition_number_profile(M, N, w_count, kappa):
    """Geometrically spaced singular values with ratio ``kappa`` and ``sum s**2 == N``.

    ``s[i] = c * kappa**(-i/(M-1))``.  The sum constraint makes the
    eigenvalues of ``w_count * A^T A`` average to one over ``n_c = w_count*N``.
    """
    if kappa < 1:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if M < 1 or N < M:
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    if M == 1 and kappa > 1:
        raise ValueError("a single singular value cannot have condition number > 1")
    if M == 1:
        shape = np.ones(1)
    else:
        shape = float(kappa) ** (-np.arange(M) / (M - 1))
    c = np.sqrt(N / np.sum(shape ** 2))
    values = c * shape
    values.flags.writeable = False
    return SingularProfile(values=values, kappa=float(kappa), n_c=w_count * N)


def is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


@lru_cache(maxsize=None)
def _hadamard_block(d):
    return hadamard(d).astype(float) / np.sqrt(d)


def fwht(v):
    """Orthonormal Walsh-Hadamard transform along the last axis (Sylvester order).

    Scaled by ``n**-0.5`` so the transform is its own inverse.  The Sylvester
    matrix factors as a Kronecker product of blocks of size at most 64; each
    block is applied with one matrix product, after which the transformed
    axis is rotated to the front so the next block sees a trailing axis.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"transform length must be a power of two, got {n}")
    lead = v.shape[:-1]
    x = v.reshape(-1, n)
    rows = x.shape[0]
    k = n.bit_length() - 1
    blocks = []
    while k > 0:
        b = min(_MAX_BLOCK_LOG2, k)
        blocks.append(2 ** b)
        k -= b
    for d in reversed(blocks):
        x = (x.reshape(rows, n // d, d) @ _hadamard_block(d)).transpose(0, 2, 1)
        x = x.reshape(rows, n)
    if not blocks:
        x = x.copy()
    return x.reshape(lead + (n,))


def _gather(v, idx, flat=None):
    """``v[..., idx]`` with one index row per batch entry when ``idx`` is 2-D.

    ``flat`` is ``idx`` offset into the raveled batch, which makes the
    batched gather a single ``np.take``.
    """
    if idx.ndim == 1:
        return v[..., idx]
    if flat is not None and v.shape == idx.shape:
        return np.take(v.reshape(-1), flat).reshape(v.shape)
    return np.take_along_axis(v, np.broadcast_to(idx, v.shape), axis=-1)


def _flat_index(idx):
    if idx.ndim != 2:
        return None
    return (idx + idx.shape[1] * np.arange(idx.shape[0])[:, None]).ravel()


class SensingOperator:
    """One row section's ``M x n_c`` sensing matrix in spectral form.

    Build instances with :func:`structured_operator` or
    :func:`sample_haar_dense`.
    """

    def __init__(self, profile, perm=None, signs=None, vt=None):
        self.profile = profile
        self.m = profile.m
        self.n_c = profile.n_c
        if (perm is None) == (vt is None):
            raise ValueError("give exactly one of perm (structured) or vt (dense)")
        self.perm = perm
        self.signs = signs
        self.vt = vt
        if perm is not None:
            if perm.shape[-1] != self.n_c or not is_power_of_two(self.n_c):
                raise ValueError(f"structured mode needs a power-of-two n_c, got {self.n_c}")
            self.inv_perm = np.argsort(perm, axis=-1)
            self._flat = _flat_index(perm)
            self._flat_inv = _flat_index(self.inv_perm)
            self.matrix = None
        else:
            if vt.shape[-2:] != (self.n_c, self.n_c):
                raise ValueError(f"vt must be {self.n_c} x {self.n_c}")
            self.matrix = self.profile.values[:, None] * vt[..., :self.m, :]

    @property
    def mode(self):
        return "structured" if self.perm is not None else "dense"

    def _check(self, v, n):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != n:
            raise ValueError(f"expected trailing dimension {n}, got {v.shape}")
        return v

    def vt_apply(self, v):
        """``V^T v``."""
        v = self._check(v, self.n_c)
        if self.mode == "dense":
            return np.einsum("...ij,...j->...i", self.vt, v)
        if self.signs is not None:
            v = v * self.signs
        return _gather(fwht(v), self.perm, self._flat)

    def v_apply(self, u):
        """``V u``."""
        u = self._check(u, self.n_c)
        if self.mode == "dense":
            return np.einsum("...ji,...j->...i", self.vt, u)
        out = fwht(_gather(u, self.inv_perm, self._flat_inv))
        if self.signs is not None:
            out = out * self.signs
        return out

    def _pad(self, r):
        pad = np.zeros(r.shape[:-1] + (self.n_c - self.m,))
        return np.concatenate([r, pad], axis=-1)

    def forward(self, v):
        """``A v``."""
        return self.profile.values * self.vt_apply(v)[..., :self.m]

    def adjoint(self, r):
        """``A^T r``."""
        r = self._check(r, self.m)
        return self.v_apply(self._pad(self.profile.values * r))

    def lmmse(self, snr_ratio, r):
        """``W^T r`` with ``W = (snr_ratio I + A A^T)^{-1} A``, evaluated spectrally.

        ``snr_ratio`` (noise variance over prior variance) may be an array
        matching the batch axes of ``r``.
        """
        snr_ratio = _check_snr(snr_ratio)
        r = self._check(r, self.m)
        s = self.profile.values
        gain = s / (snr_ratio[..., None] + s ** 2)
        return self.v_apply(self._pad(gain * r))

    def eta(self, snr_ratio):
        """``n_c^{-1} Tr(I - W^T A)``, the Onsager coefficient of the LMMSE step."""
        return eta_from_profile(self.profile, snr_ratio)

    def to_dense(self):
        """Materialize the matrix by applying the operator to every unit vector.

        Only defined for an operator without a permutation batch.
        """
        if self.perm is not None and self.perm.ndim > 1:
            raise ValueError("cannot materialize a batch of operators")
        return self.forward(np.eye(self.n_c)).T


def _check_snr(snr_ratio):
    snr_ratio = np.asarray(snr_ratio, dtype=float)
    if np.any(~(snr_ratio > 0)):
        raise ValueError("snr_ratio must be positive")
    return snr_ratio


def eta_from_profile(profile, snr_ratio):
    """``1 - n_c^{-1} sum_i s_i^2 / (snr_ratio + s_i^2)``, broadcast over ``snr_ratio``."""
    snr_ratio = _check_snr(snr_ratio)
    s2 = profile.squares
    return 1.0 - np.sum(s2 / (snr_ratio[..., None] + s2), axis=-1) / profile.n_c


def structured_operator(profile, rng, batch=None, random_signs=False):
    """Permuted-Hadamard operator; ``batch`` draws one independent permutation per trial."""
    n_c = profile.n_c
    if not is_power_of_two(n_c):
        raise ValueError(f"Hadamard factor needs a power-of-two column count, got {n_c}")
    if batch is None:
        perm = rng.permutation(n_c)
        shape = (n_c,)
    else:
        perm = np.argsort(rng.random((batch, n_c)), axis=-1)
        shape = (batch, n_c)
    signs = rng.choice([-1.0, 1.0], size=shape) if random_signs else None
    return SensingOperator(profile, perm=perm, signs=signs)


def sample_haar_dense(M, n_c, profile, rng, batch=None):
    """Dense operator whose right factor is Haar-distributed (QR of a Gaussian matrix)."""
    if profile.m != M or profile.n_c != n_c:
        raise ValueError("profile does not match the requested dimensions")
    shape = (n_c, n_c) if batch is None else (batch, n_c, n_c)
    q, r = np.linalg.qr(rng.standard_normal(shape))
    # sign fix makes the QR factor exactly Haar
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    return SensingOperator(profile, vt=np.swapaxes(q, -1, -2))


def make_operators(config, kappa, rng_for_row, ensemble="structured", batch=None,
                   random_signs=False, profile_fn=condition_number_profile):
    """One operator per row section; ``rng_for_row(ell)`` supplies its generator."""
    ops = []
    for ell in range(config.n_rows):
        profile = profile_fn(config.M, config.N, config.w_count(ell), kappa)
        rng = rng_for_row(ell)
        if ensemble == "structured":
            ops.append(structured_operator(profile, rng, batch=batch, random_signs=random_signs))
        elif ensemble == "haar":
            ops.append(sample_haar_dense(config.M, profile.n_c, profile, rng, batch=batch))
        else:
            raise ValueError(f"unknown ensemble {ensemble!r}")
    return ops


def apply_forward(op, v):
    return op.forward(v)


def apply_adjoint(op, r):
    return op.adjoint(r)


def lmmse_apply(op, snr_ratio, r):
    return op.lmmse(snr_ratio, r)


def eta_a(op, snr_ratio):
    return op.eta(snr_ratio)

