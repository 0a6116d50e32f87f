"""Sequence fidelity for d-state systems.

After twirling, each interval acts on the traceless operators as the scalar
``(1/(d^2-1)) sum_w cos(w . theta_n)``, with ``w`` running over the weights
of the SU(d) adjoint representation and ``theta_n`` the d state phases. The
Gaussian average of the product becomes a sum over weight configurations::

    Z  = (d^2-1)^-N sum_{w_1..w_N} exp(-x.chi.x/2 + i x.mu),   x = (w_1, ..., w_N)
    P0 = 1/d + (d-1)/d Z

Phases are flattened interval-major, state-minor: index ``n*d + i`` is state
``i`` of interval ``n``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sampling
from ._enumerate import configuration_sum
from .errors import CapacityError, DomainError, ValidationError
from .noise import PSD_RTOL, SYMMETRY_RTOL, NoiseModel, format_float
from .partition import Method, PartitionResult

__all__ = ['WeightSystem', 'build_weights', 'QuditNoiseModel', 'p0_qudit_bruteforce',
           'p0_qudit_montecarlo', 'qubit_to_qudit', 'qudit_to_qubit',
           'write_qudit_model', 'read_qudit_model', 'MAX_D', 'BRUTEFORCE_MAX_TERMS']

MAX_D = 6
BRUTEFORCE_MAX_TERMS = 3_000_000


@dataclass(frozen=True)
class WeightSystem:
    """Adjoint weights of SU(d) in the standard basis.

    ``weights`` has shape ``(d^2 - 1, d)``: ``d - 1`` zero rows followed by
    every ``e_i - e_j`` with ``i != j``.
    """
    d: int
    weights: np.ndarray

    def __len__(self):
        return self.weights.shape[0]


def build_weights(d: int) -> WeightSystem:
    """Weight multiset for ``2 <= d <= 6``."""
    if int(d) != d or not 2 <= d <= MAX_D:
        raise CapacityError(f"d must be an integer in [2, {MAX_D}], got {d!r}")
    d = int(d)
    rows = [np.zeros(d, dtype=int) for _ in range(d - 1)]
    for i in range(d):
        for j in range(d):
            if i != j:
                w = np.zeros(d, dtype=int)
                w[i], w[j] = 1, -1
                rows.append(w)
    w = np.array(rows)
    w.setflags(write=False)
    return WeightSystem(d, w)


@dataclass(frozen=True)
class QuditNoiseModel:
    """Gaussian state phases of a d-level system over ``N`` intervals.

    Attributes
    ----------
    d, n_intervals : int
    mean : (N, d) ndarray
        Mean phase of state ``i`` in interval ``n``.
    covariance : (N*d, N*d) ndarray
        Interval-major, state-minor flattening.
    """
    d: int
    n_intervals: int
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        d, n = self.d, self.n_intervals
        if int(d) != d or d < 2:
            raise DomainError(f"d must be an integer >= 2, got {d!r}")
        if int(n) != n or n < 1:
            raise DomainError(f"n_intervals must be a positive integer, got {n!r}")
        mean = np.array(self.mean, dtype=float)
        if mean.shape != (n, d):
            raise ValidationError(f"mean must have shape ({n}, {d}), got {mean.shape}")
        cov = np.array(self.covariance, dtype=float)
        m = n * d
        if cov.shape != (m, m):
            raise ValidationError(f"covariance must be {m}x{m}, got {cov.shape}")
        if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(mean))):
            raise ValidationError("mean and covariance must be finite")
        scale = float(np.max(np.abs(cov))) if cov.size else 0.0
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise ValidationError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if scale > 0:
            ev = np.linalg.eigvalsh(cov)
            if ev[0] < -PSD_RTOL * ev[-1]:
                raise ValidationError(
                    f"covariance not positive semi-definite: eigenvalue {ev[0]:.3e} "
                    f"below -{PSD_RTOL:g} * {ev[-1]:.3e}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'covariance', cov)


def p0_qudit_bruteforce(model: QuditNoiseModel) -> PartitionResult:
    """Exact weight-configuration sum.

    Both real and imaginary parts are accumulated; the imaginary part must
    cancel and is reported in ``diagnostics['imag']``.

    Raises
    ------
    CapacityError
        If ``(d^2 - 1)^N`` exceeds three million.
    """
    ws = build_weights(model.d)
    k, n = len(ws), model.n_intervals
    if n * math.log(k) > math.log(BRUTEFORCE_MAX_TERMS):
        raise CapacityError(
            f"brute force needs (d^2-1)^N = {k}^{n} terms, above the "
            f"{BRUTEFORCE_MAX_TERMS:.0e} limit")
    re_sum, im_sum = configuration_sum(ws.weights, n, model.covariance,
                                       model.mean.ravel(), imag=True)
    total = float(k) ** n
    z = re_sum / total
    return PartitionResult(z, Method.BRUTE_FORCE, dim=model.d,
                           diagnostics={'imag': im_sum / total})


def p0_qudit_montecarlo(model: QuditNoiseModel, samples: int = 100_000, seed: int = 0,
                        workers: Optional[int] = None) -> PartitionResult:
    """Average the product of per-interval adjoint scalars over sampled phases."""
    if int(samples) != samples or samples < 1:
        raise DomainError(f"samples must be a positive integer, got {samples!r}")
    d, n = model.d, model.n_intervals
    w = build_weights(d).weights.astype(float)
    factor = sampling.gaussian_factor(model.covariance)
    mu = model.mean.ravel()
    rank = factor.shape[1]
    k = w.shape[0]

    def chunk(rng, size):
        if rank:
            theta = mu + rng.standard_normal((size, rank)) @ factor.T
        else:
            theta = np.broadcast_to(mu, (size, mu.size))
        scal = np.cos(theta.reshape(size, n, d) @ w.T).sum(axis=2) / k
        return np.prod(scal, axis=1)

    mean, err = sampling.mc_mean(chunk, int(samples), seed, workers=workers)
    return PartitionResult(mean, Method.MONTE_CARLO, error_estimate=err, dim=d,
                           diagnostics={'samples': int(samples), 'seed': seed})


_SIGN = np.array([1.0, -1.0])


def qubit_to_qudit(model: NoiseModel) -> QuditNoiseModel:
    """Embed a qubit model as ``d=2`` with state phases ``(theta/2, -theta/2)``."""
    n = model.n_intervals
    mean = np.outer(np.full(n, model.theta0), _SIGN / 2.0)
    cov = np.kron(model.covariance, np.outer(_SIGN, _SIGN) / 4.0)
    return QuditNoiseModel(2, n, mean, cov)


def qudit_to_qubit(model: QuditNoiseModel, atol: float = 1e-12) -> NoiseModel:
    """Collapse a ``d=2`` model onto the phase difference ``theta_1 - theta_2``.

    Raises
    ------
    DomainError
        If ``d != 2`` or the mean difference varies between intervals (the
        qubit model has a single mean phase).
    """
    if model.d != 2:
        raise DomainError(f"only d=2 maps to a qubit, got d={model.d}")
    diff = model.mean[:, 0] - model.mean[:, 1]
    if np.ptp(diff) > atol * max(1.0, float(np.max(np.abs(diff)))):
        raise DomainError("mean phase difference varies between intervals")
    n = model.n_intervals
    proj = np.kron(np.eye(n), _SIGN[None, :])
    cov = proj @ model.covariance @ proj.T
    return NoiseModel(n, float(diff[0]), 0.5 * (cov + cov.T))


_HEADER_RE = re.compile(r'#\s*d\s*=\s*(\d+)\s+n\s*=\s*(\d+)\s*$')


def write_qudit_model(model: QuditNoiseModel, path) -> None:
    """Header ``# d=<d> n=<N>``, the ``N x d`` means, a blank line, the covariance."""
    with open(path, 'w') as fh:
        fh.write(f"# d={model.d} n={model.n_intervals}\n")
        for row in model.mean:
            fh.write(','.join(format_float(v) for v in row) + '\n')
        fh.write('\n')
        for row in model.covariance:
            fh.write(','.join(format_float(v) for v in row) + '\n')


def read_qudit_model(path) -> QuditNoiseModel:
    """Parse the qudit model file.

    Raises
    ------
    ValidationError
        Naming the line at fault.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty model file")
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise ValidationError(f"{path}:1: expected header '# d=<d> n=<N>', got {lines[0]!r}")
    d, n = int(m.group(1)), int(m.group(2))

    def parse(lineno, width):
        if lineno > len(lines):
            raise ValidationError(
                f"{path}:{lineno}: file ends early, expected {width} values for d={d} n={n}")
        text = lines[lineno - 1]
        try:
            vals = [float(t) for t in text.split(',')]
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: malformed number in {text!r}") from None
        if len(vals) != width:
            raise ValidationError(f"{path}:{lineno}: expected {width} values, got {len(vals)}")
        return vals

    mean = [parse(2 + r, d) for r in range(n)]
    blank = n + 2
    if blank > len(lines) or lines[blank - 1].strip():
        raise ValidationError(f"{path}:{blank}: expected a blank line after the means")
    cov = [parse(blank + 1 + r, n * d) for r in range(n * d)]
    for lineno in range(blank + n * d + 1, len(lines) + 1):
        if lines[lineno - 1].strip():
            raise ValidationError(f"{path}:{lineno}: unexpected trailing content")
    return QuditNoiseModel(d, n, np.array(mean), np.array(cov))
