"""Twirled free evolution.

Averaging ``rho -> U^dag F U rho U^dag F^dag U`` over Haar ``U`` leaves the
identity untouched and multiplies every traceless operator by one scalar,
``(|tr F|^2 - 1) / (d^2 - 1)``. For a diagonal ``F = diag(exp(i theta_k))``
this is the adjoint-weight sum evaluated by :func:`adjoint_scalar_d`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sampling
from .errors import DomainError
from .qudit import build_weights

__all__ = ['TwirledMap', 'r_matrix_qubit', 'adjoint_scalar_d', 'haar_verify',
           'qubit_phases']


@dataclass(frozen=True)
class TwirledMap:
    """Block form ``1 (+) s I_{d^2-1}`` of a twirled unitary channel."""
    dim: int
    adjoint_scalar: float
    trivial_block: float = 1.0

    def matrix(self) -> np.ndarray:
        """The ``d^2 x d^2`` matrix in a basis starting with the identity."""
        diag = np.full(self.dim ** 2, self.adjoint_scalar)
        diag[0] = self.trivial_block
        return np.diag(diag)


def r_matrix_qubit(theta: float) -> TwirledMap:
    return TwirledMap(2, (1.0 + 2.0 * math.cos(theta)) / 3.0)


def qubit_phases(theta: float) -> np.ndarray:
    """State phases ``(theta/2, -theta/2)`` whose difference is ``theta``."""
    return np.array([theta / 2.0, -theta / 2.0])


def _phases(d, phases):
    p = np.asarray(phases, dtype=float)
    if p.shape != (d,):
        raise DomainError(f"expected {d} phases, got shape {p.shape}")
    return p


def adjoint_scalar_d(d: int, phases) -> float:
    """``(1/(d^2-1)) sum_w cos(w . phases)`` over the adjoint weights."""
    ws = build_weights(d)
    p = _phases(d, phases)
    return math.fsum(np.cos(ws.weights @ p)) / len(ws)


def haar_verify(d: int, phases, samples: int = 100_000, seed: int = 0,
                workers: Optional[int] = None):
    """Monte Carlo estimate of the twirled adjoint scalar.

    Each sample draws a Haar ``U`` and evaluates
    ``Re tr(X^dag A X A^dag) / tr(X^dag X)`` with ``A = U^dag F U`` and the
    fixed traceless test operator ``X = diag(1, -1, 0, ...)``.

    Returns
    -------
    estimate, stderr : float
    """
    if int(d) != d or d < 2:
        raise DomainError(f"d must be an integer >= 2, got {d!r}")
    if int(samples) != samples or samples < 100:
        raise DomainError(f"samples must be an integer >= 100, got {samples!r}")
    d = int(d)
    f = np.exp(1j * _phases(d, phases))
    x = np.zeros(d)
    x[0], x[1] = 1.0, -1.0
    norm = float(x @ x)
    scalar_f = bool(np.all(f == f[0]))

    def chunk(rng, size):
        u = sampling.haar_unitaries(rng, d, size)
        if scalar_f:
            # U^dag F U = F exactly; skip the rounding of the products
            return np.ones(size)
        a = np.conj(np.swapaxes(u, 1, 2)) @ (f[None, :, None] * u)
        # tr(X A X A^dag) with X diagonal real
        return np.einsum('i,sij,j,sij->s', x, a, x, np.conj(a)).real / norm

    return sampling.mc_mean(chunk, int(samples), seed, workers=workers)
