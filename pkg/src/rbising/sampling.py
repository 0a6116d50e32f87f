"""Reproducible Monte Carlo plumbing.

Samples are drawn in fixed-size chunks. Chunk ``i`` gets its own generator
seeded from ``SeedSequence(seed, spawn_key=(i,))``, so the stream seen by a
chunk does not depend on how many workers process the chunks or in which
order they finish. Per-chunk statistics are merged in chunk order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

CHUNK_SIZE = 1 << 15

# eigenvalues within this fraction of the largest are treated as exact zeros
ZERO_EIGEN_RTOL = 1e-12


def chunk_rng(seed: int, chunk_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_id,)))


def gaussian_factor(cov, rtol: float = ZERO_EIGEN_RTOL) -> np.ndarray:
    """Return ``L`` with ``L @ L.T == cov`` restricted to the non-null modes.

    Directions with (numerically) zero variance are dropped entirely, so
    samples ``mu + L @ z`` sit exactly on the mean along them.

    Raises
    ------
    ValidationError
        If ``cov`` has an eigenvalue below ``-rtol * lambda_max``.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.size == 0:
        return np.zeros((0, 0))
    w, v = np.linalg.eigh(cov)
    top = max(w[-1], 0.0)
    if top == 0.0:
        if w[0] < 0.0:
            raise ValidationError("covariance is negative definite")
        return np.zeros((cov.shape[0], 0))
    if w[0] < -rtol * top:
        raise ValidationError(
            f"covariance not positive semi-definite: eigenvalue {w[0]:.3e} "
            f"below -{rtol:g} * {top:.3e}")
    keep = w > rtol * top
    return v[:, keep] * np.sqrt(w[keep])


def _merge(stats):
    """Chan et al. pairwise merge of (count, mean, M2) triples, in order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def mc_mean(chunk_fn: Callable[[np.random.Generator, int], np.ndarray],
            samples: int, seed: int, workers: Optional[int] = None,
            chunk_size: int = CHUNK_SIZE):
    """Average ``chunk_fn(rng, size)`` over ``samples`` draws.

    ``chunk_fn`` must return a 1-D array of ``size`` per-sample values.

    Returns
    -------
    mean, stderr : float
        Sample mean and ``std / sqrt(samples)`` (ddof=1; 0 for one sample).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_chunks = math.ceil(samples / chunk_size)

    def run(i):
        size = min(chunk_size, samples - i * chunk_size)
        vals = np.asarray(chunk_fn(chunk_rng(seed, i), size), dtype=float)
        # shifted by the first value: exact for constant chunks
        shift = vals[0]
        dev = vals - shift
        m = shift + dev.mean()
        return size, m, float(np.sum((dev - dev.mean()) ** 2))

    if workers and workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            stats = list(ex.map(run, range(n_chunks)))
    else:
        stats = [run(i) for i in range(n_chunks)]
    n, mean, m2 = _merge(stats)
    if n < 2:
        return float(mean), 0.0
    var = max(m2 / (n - 1), 0.0)
    return float(mean), math.sqrt(var / n)


def haar_unitaries(rng: np.random.Generator, d: int, size: int) -> np.ndarray:
    """Draw ``size`` Haar-random ``d x d`` unitaries, shape ``(size, d, d)``.

    QR of a complex Ginibre matrix, with the phases of ``diag(R)`` moved
    into ``Q`` so the distribution is exactly Haar.
    """
    z = (rng.standard_normal((size, d, d))
         + 1j * rng.standard_normal((size, d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    ph = diag / np.abs(diag)
    return q * ph[:, None, :]
