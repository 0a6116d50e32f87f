"""Exact sums over Ising-like spin configurations.

Each of ``n_sites`` sites takes one of ``K`` states, and each state is a
length-``d`` integer vector (``d = 1`` for the spin-one qubit model, ``d`` for
SU(d) adjoint weights). For a flattened configuration ``x`` (site-major) the
summand is ``exp(-x.C.x / 2) * exp(i x.mu)``.

Sites are split into a prefix and a suffix. The suffix configurations are
tabulated once; prefixes are processed in blocks, and each block contributes
a dense ``(block, K^suffix)`` array of terms. Block partial sums are combined
with :func:`math.fsum`, so the result does not depend on block size beyond
the rounding of the partials themselves.
"""
import itertools
import math

import numpy as np

_SUFFIX_TERMS = 20000
_BLOCK_TERMS = 1 << 21


def _configs(alphabet, sites):
    k, d = alphabet.shape
    if sites == 0:
        return np.zeros((1, 0))
    idx = np.array(list(itertools.product(range(k), repeat=sites)), dtype=np.intp)
    return alphabet[idx].reshape(idx.shape[0], sites * d).astype(float)


def configuration_sum(alphabet, n_sites, cov, mean, imag=False):
    """Sum ``exp(-x.C.x/2 + i x.mu)`` over all ``K^n_sites`` configurations.

    Parameters
    ----------
    alphabet : (K, d) array_like
        Site states.
    n_sites : int
    cov : (n_sites*d, n_sites*d) array_like
    mean : (n_sites*d,) array_like
    imag : bool
        Also accumulate the imaginary part instead of relying on the
        negation symmetry of the alphabet.

    Returns
    -------
    real : float
    imag : float
        0.0 unless ``imag=True``.
    """
    alphabet = np.asarray(alphabet, dtype=float)
    k, d = alphabet.shape
    cov = np.asarray(cov, dtype=float)
    mean = np.asarray(mean, dtype=float)

    s2 = 0
    while s2 < n_sites and k ** (s2 + 1) <= _SUFFIX_TERMS:
        s2 += 1
    s1 = n_sites - s2
    cut = s1 * d

    suf = _configs(alphabet, s2)
    c_bb = cov[cut:, cut:]
    q_b = np.einsum('ij,jk,ik->i', suf, c_bb, suf)
    p_b = suf @ mean[cut:]

    c_aa = cov[:cut, :cut]
    c_ab = cov[:cut, cut:]
    mu_a = mean[:cut]

    block = max(1, _BLOCK_TERMS // suf.shape[0])
    re_parts, im_parts = [], []
    pre_iter = itertools.product(range(k), repeat=s1)
    while True:
        chunk = list(itertools.islice(pre_iter, block))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.intp).reshape(len(chunk), s1)
        pre = alphabet[idx].reshape(len(chunk), cut)
        q_a = np.einsum('ij,jk,ik->i', pre, c_aa, pre)
        cross = (pre @ c_ab) @ suf.T
        expo = -0.5 * (q_a[:, None] + 2.0 * cross + q_b[None, :])
        phase = (pre @ mu_a)[:, None] + p_b[None, :]
        mag = np.exp(expo)
        re_parts.append(float(np.sum(mag * np.cos(phase))))
        if imag:
            im_parts.append(float(np.sum(mag * np.sin(phase))))
    return math.fsum(re_parts), math.fsum(im_parts)
