"""Sequence fidelity of single-qubit randomized benchmarking.

Each twirled free-evolution interval with error phase ``theta_n`` shrinks
the Bloch vector by ``(1 + 2 cos theta_n) / 3``. Averaging the product over
Gaussian phases gives the partition function ``Z`` and the sequence fidelity
``P0 = 1/2 + Z/2``.

``Z`` is evaluated several independent ways:

* closed forms for uncorrelated (``chi = 2 beta I``) and quasistatic
  (``chi = 2 beta 1 1^T``) noise;
* a Gauss-Hermite quadrature of the one-dimensional quasistatic integral;
* the exact spin-one Ising sum over ``g in {-1, 0, 1}^N``;
* the high-temperature (small noise) determinant expansion;
* direct Monte Carlo over the Gaussian phases.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla

from . import sampling
from ._enumerate import configuration_sum
from .errors import CapacityError, DomainError, NumericalError, ValidationError
from .noise import NoiseFamily, NoiseModel, format_float
from .toeplitz import levinson_prefix

__all__ = ['Method', 'Order', 'PartitionResult', 'ExpansionIntermediates',
           'z_uncorrelated_exact', 'z_quasistatic_exact', 'trinomial_weights',
           'quadrature_oracle', 'z_bruteforce', 'z_montecarlo',
           'expansion_intermediates', 'z_determinant', 'p0_curve',
           'format_curve_csv', 'write_curve_csv', 'read_curve_csv', 'BRUTEFORCE_MAX_N']

BRUTEFORCE_MAX_N = 18


class Method(str, enum.Enum):
    CLOSED_UNCORRELATED = 'ClosedUncorrelated'
    CLOSED_QUASISTATIC = 'ClosedQuasistatic'
    BRUTE_FORCE = 'BruteForce'
    DETERMINANT = 'Determinant'
    MONTE_CARLO = 'MonteCarlo'
    QUADRATURE_ORACLE = 'QuadratureOracle'


class Order(str, enum.Enum):
    LEADING = 'leading'
    WITH_CORRECTIONS = 'corrections'


@dataclass(frozen=True)
class PartitionResult:
    """Value of ``Z`` and the corresponding sequence fidelity.

    ``p0 = 1/d + (d - 1)/d * z``; for qubits (``dim=2``) this is
    ``1/2 + z/2``.
    """
    z: float
    method: Method
    error_estimate: float = 0.0
    correction_terms: Optional[tuple] = None
    dim: int = 2
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def p0(self) -> float:
        d = self.dim
        return 1.0 / d + (d - 1) / d * self.z


def _signed_power(base: float, n: int) -> float:
    """``base ** n`` through logs, so huge ``n`` neither over- nor underflows early."""
    if base == 0.0:
        return 0.0
    sign = -1.0 if (base < 0 and n % 2) else 1.0
    return sign * math.exp(n * math.log(abs(base)))


def _check(n, beta):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not beta >= 0:
        raise DomainError(f"beta must be >= 0, got {beta!r}")


def z_uncorrelated_exact(n: int, beta: float, theta0: float = 0.0) -> PartitionResult:
    """``Z = ((1 + 2 e^-beta cos theta0) / 3)^N`` for ``chi = 2 beta I``."""
    _check(n, beta)
    base = (1.0 + 2.0 * math.exp(-beta) * math.cos(theta0)) / 3.0
    return PartitionResult(_signed_power(base, int(n)), Method.CLOSED_UNCORRELATED)


def trinomial_weights(n: int) -> np.ndarray:
    """Normalized trinomial coefficients ``C(n, k)_2 / 3^n`` for ``k = 0..n``.

    ``C(n, k)_2`` is the coefficient of ``x^(n+k)`` in ``(1 + x + x^2)^n``.
    Built by repeated three-point averaging, so every intermediate is a
    probability.
    """
    p = np.zeros(2 * n + 3)
    c = n + 1
    p[c] = 1.0
    for t in range(1, n + 1):
        lo, hi = c - t, c + t + 1
        p[lo:hi] = (p[lo - 1:hi - 1] + p[lo:hi] + p[lo + 1:hi + 1]) / 3.0
    return p[c:c + n + 1].copy()


def z_quasistatic_exact(n: int, beta: float, theta0: float = 0.0) -> PartitionResult:
    """Trinomial series for ``chi = 2 beta 1 1^T``.

    ``Z = 3^-N [C(N,0)_2 + 2 sum_k C(N,k)_2 e^(-beta k^2) cos(k theta0)]``.
    """
    _check(n, beta)
    n = int(n)
    p = trinomial_weights(n)
    k = np.arange(1, n + 1)
    z = p[0] + 2.0 * float(np.sum(p[1:] * np.exp(-beta * k * k) * np.cos(k * theta0)))
    return PartitionResult(z, Method.CLOSED_QUASISTATIC)


def _log_integrand(theta, n, beta, theta0):
    f = (1.0 + 2.0 * np.cos(theta)) / 3.0
    with np.errstate(divide='ignore'):
        logf = n * np.log(np.abs(f))
    sign = np.where((f < 0) & (n % 2 == 1), -1.0, 1.0)
    var = 2.0 * beta
    lognorm = -0.5 * (theta - theta0) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
    return logf + lognorm, sign


def _laplace_center(n, beta, theta0):
    """Mode and curvature scale of the quasistatic integrand near ``theta0``."""
    # d/dtheta of n log(1 + 2 cos) - (theta - theta0)^2 / (4 beta)
    def d1(t):
        return -2 * n * math.sin(t) / (1 + 2 * math.cos(t)) - (t - theta0) / (2 * beta)

    def d2(t):
        c = math.cos(t)
        return -2 * n * (2 + c) / (1 + 2 * c) ** 2 - 1.0 / (2 * beta)

    t = theta0
    if 1 + 2 * math.cos(t) > 0.05:
        # the concave branch around theta = 0 (mod 2 pi)
        for _ in range(50):
            step = d1(t) / d2(t)
            t_new = t - step
            if not (1 + 2 * math.cos(t_new) > 0):
                break
            t = t_new
            if abs(step) < 1e-15:
                break
        curv = -d2(t)
    else:
        curv = 1.0 / (2 * beta)
    return t, 1.0 / math.sqrt(curv)


def quadrature_oracle(n: int, beta: float, theta0: float = 0.0,
                      orders: Sequence[int] = (64, 128, 256, 512, 1024),
                      rtol: float = 1e-12) -> PartitionResult:
    """Quasistatic ``Z`` as a one-dimensional Gauss-Hermite quadrature.

    Evaluates ``int ((1 + 2 cos t)/3)^N Normal(t; theta0, 2 beta) dt``. The
    Hermite nodes are centred on the mode of the integrand and scaled to its
    curvature there, which keeps the rule efficient when ``N`` is large and
    the integrand is much narrower than the Gaussian. The order is doubled
    until two successive estimates agree to ``rtol``.

    Raises
    ------
    NumericalError
        If the largest order does not converge; reports the last two
        estimates.
    """
    _check(n, beta)
    if not beta > 0:
        raise DomainError("quadrature oracle needs beta > 0")
    n = int(n)
    center, scale = _laplace_center(n, beta, theta0)
    prev = None
    est = None
    for order in orders:
        x, w = np.polynomial.hermite.hermgauss(order)
        good = w > 0
        x, w = x[good], w[good]
        theta = center + math.sqrt(2.0) * scale * x
        logF, sign = _log_integrand(theta, n, beta, theta0)
        terms = sign * np.exp(np.log(w) + x * x + logF)
        est = math.sqrt(2.0) * scale * math.fsum(terms)
        mass = math.sqrt(2.0) * scale * math.fsum(np.abs(terms))
        if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1e-15 * mass):
            return PartitionResult(est, Method.QUADRATURE_ORACLE,
                                   error_estimate=abs(est - prev),
                                   diagnostics={'order': order})
        prev = est
    raise NumericalError(
        f"Gauss-Hermite quadrature did not converge to {rtol:g}: "
        f"last estimates {prev!r} (order {orders[-2]}) and {est!r} (order {orders[-1]})")


_QUBIT_ALPHABET = np.array([[-1], [0], [1]])


def z_bruteforce(model: NoiseModel) -> PartitionResult:
    """Exact spin-one Ising sum.

    ``Z = 3^-N sum_g exp(-g.chi.g / 2) cos(g.mu)`` over ``g in {-1,0,1}^N``;
    the sine parts cancel between ``g`` and ``-g``.

    Raises
    ------
    CapacityError
        If ``N > 18``.
    """
    n = model.n_intervals
    if n > BRUTEFORCE_MAX_N:
        raise CapacityError(
            f"brute force limited to N <= {BRUTEFORCE_MAX_N} (3^N terms), got N={n}")
    total, _ = configuration_sum(_QUBIT_ALPHABET, n, model.covariance, model.mean)
    return PartitionResult(total / 3.0 ** n, Method.BRUTE_FORCE)


def z_montecarlo(model: NoiseModel, samples: int = 100_000, seed: int = 0,
                 workers: Optional[int] = None) -> PartitionResult:
    """Sample ``theta ~ Normal(mu, chi)`` and average ``prod (1 + 2 cos theta)/3``.

    Zero-variance directions of ``chi`` are pinned at the mean. The result
    depends only on ``(model, samples, seed)``, not on ``workers``.
    """
    if int(samples) != samples or samples < 1:
        raise DomainError(f"samples must be a positive integer, got {samples!r}")
    factor = sampling.gaussian_factor(model.covariance)
    theta0 = model.theta0
    n = model.n_intervals
    rank = factor.shape[1]

    def chunk(rng, size):
        if rank:
            theta = theta0 + rng.standard_normal((size, rank)) @ factor.T
        else:
            theta = np.full((size, n), theta0)
        return np.prod((1.0 + 2.0 * np.cos(theta)) / 3.0, axis=1)

    mean, err = sampling.mc_mean(chunk, int(samples), seed, workers=workers)
    return PartitionResult(mean, Method.MONTE_CARLO, error_estimate=err,
                           diagnostics={'samples': int(samples), 'seed': seed})


@dataclass(frozen=True)
class ExpansionIntermediates:
    """Gaussian data of the small-noise expansion around ``theta0``.

    Attributes
    ----------
    sigma : ndarray
        ``chi (I + c chi)^-1``.
    y : ndarray
        ``2 sin(theta0) / (1 + 2 cos(theta0))`` times the ones vector.
    nu : ndarray
        ``-sigma @ y``.
    c : float
        ``2 (2 + cos theta0) / (1 + 2 cos theta0)^2``.
    logdet : float
        ``log |I + c chi|``.
    """
    sigma: np.ndarray
    y: np.ndarray
    nu: np.ndarray
    c: float
    logdet: float


def _check_theta0(theta0):
    # 1 + 2 cos(theta0) = 0 at +-2 pi/3 (mod 2 pi)
    r = math.remainder(theta0, 2 * math.pi)
    if min(abs(r - 2 * math.pi / 3), abs(r + 2 * math.pi / 3)) < 1e-6:
        raise DomainError(
            f"theta0={theta0!r} is within 1e-6 of +-2pi/3, where 1 + 2 cos(theta0) = 0 "
            "and the small-noise expansion is singular")


def expansion_intermediates(model: NoiseModel) -> ExpansionIntermediates:
    theta0 = model.theta0
    _check_theta0(theta0)
    n = model.n_intervals
    cs, sn = math.cos(theta0), math.sin(theta0)
    den = 1.0 + 2.0 * cs
    c = 2.0 * (2.0 + cs) / den ** 2
    chi = model.covariance
    m = np.eye(n) + c * chi
    cho = sla.cho_factor(m, lower=True)
    sigma = sla.cho_solve(cho, chi)
    sigma = 0.5 * (sigma + sigma.T)
    y = np.full(n, 2.0 * sn / den)
    nu = -sigma @ y
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    return ExpansionIntermediates(sigma, y, nu, c, logdet)


def _correction_coefficients(theta0):
    cs, sn = math.cos(theta0), math.sin(theta0)
    den = 1.0 + 2.0 * cs
    cubic = (7.0 + 2.0 * cs) * sn / (3.0 * den ** 3)
    quartic = ((28.0 + 12.0 * cs - 12.0 * math.cos(2 * theta0) - math.cos(3 * theta0))
               / (12.0 * den ** 4))
    return cubic, quartic


def z_determinant(model: NoiseModel, order: Order = Order.LEADING) -> PartitionResult:
    """High-temperature expansion of ``Z``.

    Leading order::

        Z = ((1 + 2 cos theta0)/3)^N exp(y.Sigma.y / 2) / sqrt|I + c chi|

    ``Order.WITH_CORRECTIONS`` multiplies by ``1 + t3 + t4``, the cubic and
    quartic Wick-contracted terms. ``correction_terms`` always holds
    ``(t3, t4)``. ``error_estimate`` is ``|Z_leading (t3 + t4)|`` for the
    leading order and ``|Z_leading t4|`` (the last included term) otherwise.
    """
    order = Order(order)
    ex = expansion_intermediates(model)
    theta0 = model.theta0
    n = model.n_intervals
    base = (1.0 + 2.0 * math.cos(theta0)) / 3.0
    sign = -1.0 if (base < 0 and n % 2) else 1.0
    log_lead = n * math.log(abs(base)) + 0.5 * float(ex.y @ ex.sigma @ ex.y) - 0.5 * ex.logdet
    lead = sign * math.exp(log_lead)

    s = np.diag(ex.sigma)
    nu = ex.nu
    a3, a4 = _correction_coefficients(theta0)
    t3 = -a3 * float(np.sum(3.0 * s * nu + nu ** 3))
    t4 = -a4 * float(np.sum(3.0 * s * s + 6.0 * s * nu * nu + nu ** 4))
    if order is Order.LEADING:
        z, err = lead, abs(lead * (t3 + t4))
    else:
        z, err = lead * (1.0 + t3 + t4), abs(lead * t4)
    return PartitionResult(z, Method.DETERMINANT, error_estimate=err,
                           correction_terms=(t3, t4),
                           diagnostics={'order': order.value, 'leading': lead})


CURVE_METHODS = ('exact', 'bruteforce', 'det', 'det-corr', 'mc', 'oracle')


def _leading_curve(family: NoiseFamily, ns: np.ndarray) -> list:
    """Leading-order determinant ``Z`` for every ``N`` from one factorization.

    The leading ``N x N`` block of ``M = I + c chi`` is the matrix for length
    ``N``, so prefix log-determinants and prefix solves give the whole curve.
    """
    theta0 = family.theta0
    _check_theta0(theta0)
    cs, sn = math.cos(theta0), math.sin(theta0)
    den = 1.0 + 2.0 * cs
    c = 2.0 * (2.0 + cs) / den ** 2
    y0 = 2.0 * sn / den
    n_max = int(ns.max())
    ones = np.ones(n_max)
    if family.is_toeplitz:
        col = c * family.lags(n_max)
        col[0] += 1.0
        logdet, quad = levinson_prefix(col, ones)
    else:
        m = np.eye(n_max) + c * family.covariance(n_max)
        low = sla.cholesky(m, lower=True)
        logdet = 2.0 * np.cumsum(np.log(np.diag(low)))
        w = sla.solve_triangular(low, ones, lower=True)
        quad = np.cumsum(w * w)
    base = (1.0 + 2.0 * cs) / 3.0
    out = []
    for n in ns:
        i = n - 1
        # y.Sigma.y = y0^2 (N - 1^T M^-1 1) / c
        ysy = y0 * y0 * (n - quad[i]) / c if y0 != 0.0 else 0.0
        sign = -1.0 if (base < 0 and n % 2) else 1.0
        z = sign * math.exp(n * math.log(abs(base)) + 0.5 * ysy - 0.5 * logdet[i])
        out.append(PartitionResult(z, Method.DETERMINANT,
                                   diagnostics={'order': Order.LEADING.value}))
    return out


def p0_curve(family: NoiseFamily, n_list: Sequence[int], method: str = 'exact',
             samples: int = 100_000, seed: int = 0) -> list:
    """Evaluate ``(N, PartitionResult)`` for every ``N`` in ``n_list``.

    Parameters
    ----------
    family : NoiseFamily
    n_list : sequence of int
        Output keeps this order.
    method : {'exact', 'bruteforce', 'det', 'det-corr', 'mc', 'oracle'}
        ``exact`` needs an uncorrelated or quasistatic family and ``oracle`` a
        quasistatic one. ``det`` uses one factorization for the whole list.
    samples, seed : int
        Monte Carlo settings; point ``i`` uses seed ``seed + i``.
    """
    if method not in CURVE_METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {CURVE_METHODS}")
    ns = [int(n) for n in n_list]
    if not ns:
        return []
    if any(n < 1 for n in ns):
        raise DomainError("sequence lengths must be >= 1")
    kind = family.kind
    if method == 'exact' and kind not in ('uncorrelated', 'quasistatic'):
        raise DomainError(f"method 'exact' needs uncorrelated or quasistatic noise, not {kind}")
    if method == 'oracle' and kind != 'quasistatic':
        raise DomainError("method 'oracle' needs quasistatic noise")
    if method == 'bruteforce' and max(ns) > BRUTEFORCE_MAX_N:
        raise CapacityError(
            f"brute force limited to N <= {BRUTEFORCE_MAX_N}, asked for N={max(ns)}")
    if family.max_n is not None and max(ns) > family.max_n:
        raise DomainError(
            f"custom covariance covers N <= {family.max_n}, asked for N={max(ns)}")

    if method == 'det':
        return list(zip(ns, _leading_curve(family, np.array(ns))))

    out = []
    for i, n in enumerate(ns):
        if method == 'exact':
            fn = z_uncorrelated_exact if kind == 'uncorrelated' else z_quasistatic_exact
            res = fn(n, family.beta, family.theta0)
        elif method == 'oracle':
            res = quadrature_oracle(n, family.beta, family.theta0)
        elif method == 'bruteforce':
            res = z_bruteforce(family.model(n))
        elif method == 'det-corr':
            res = z_determinant(family.model(n), Order.WITH_CORRECTIONS)
        else:
            res = z_montecarlo(family.model(n), samples, seed + i)
        out.append((n, res))
    return out


CURVE_HEADER = ['N', 'P0', 'Z', 'method', 'error_estimate']


def format_curve_csv(curve) -> str:
    """Render ``[(N, PartitionResult), ...]`` as the curve CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(CURVE_HEADER)
    for n, res in curve:
        w.writerow([n, format_float(res.p0), format_float(res.z),
                    res.method.value, format_float(res.error_estimate)])
    return buf.getvalue()


def write_curve_csv(curve, path) -> None:
    with open(path, 'w', newline='') as fh:
        fh.write(format_curve_csv(curve))


def read_curve_csv(path):
    """Read a curve CSV; returns ``(N array, P0 array)``.

    Raises
    ------
    ValidationError
        With the offending line number on malformed input.
    """
    ns, ps = [], []
    with open(path, newline='') as fh:
        rows = csv.reader(fh)
        try:
            header = next(rows)
        except StopIteration:
            raise ValidationError(f"{path}: empty curve file") from None
        header = [h.strip() for h in header]
        if header[:2] != ['N', 'P0']:
            raise ValidationError(f"{path}:1: expected header starting 'N,P0', got {header}")
        for lineno, row in enumerate(rows, start=2):
            if not row or not ''.join(row).strip():
                continue
            try:
                n = int(row[0])
                p = float(row[1])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}:{lineno}: malformed row {row}") from None
            ns.append(n)
            ps.append(p)
    return np.array(ns, dtype=int), np.array(ps)
