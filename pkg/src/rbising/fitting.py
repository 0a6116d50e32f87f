"""Exponential and linear fits to benchmarking decay curves.

The exponential model ``A + B (1 - 2 K eps)^N`` is fitted by minimizing::

    sum_N (P0(N) - A - B (1 - 2 K eps)^N)^2 w_N

with ``eps`` the nominal error rate, so ``K`` measures how far the fitted
rate sits from the nominal one. The four scenarios fix or free ``A, B``
(fixed at 1/2) and weight uniformly or by ``1/N``.

The short-sequence linear estimator fits ``A + B (1 - 2 N eps)`` to the
first few points, using an externally supplied asymptote ``A``.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, FittingError, ValidationError

__all__ = ['Weighting', 'FitScenario', 'SCENARIOS', 'FitReport', 'LinearFitReport',
           'generate_quasistatic_data', 'fit_exponential', 'fit_linear_short',
           'scan_nmax', 'fit_reports_json']

K_GRID = (0.05, 20.0)
K_GRID_POINTS = 400


class Weighting(str, enum.Enum):
    UNIFORM = 'uniform'
    INVERSE_N = 'inverse_n'


@dataclass(frozen=True)
class FitScenario:
    fix_ab: bool
    weighting: Weighting

    @classmethod
    def from_number(cls, number: int) -> 'FitScenario':
        try:
            return SCENARIOS[int(number)]
        except (KeyError, ValueError, TypeError):
            raise DomainError(f"scenario must be 1, 2, 3 or 4, got {number!r}") from None

    @property
    def number(self) -> int:
        return 1 + 2 * (not self.fix_ab) + (self.weighting is Weighting.INVERSE_N)

    def weights(self, ns: np.ndarray) -> np.ndarray:
        if self.weighting is Weighting.UNIFORM:
            return np.ones(ns.shape)
        return 1.0 / ns


SCENARIOS = {
    1: FitScenario(True, Weighting.UNIFORM),
    2: FitScenario(True, Weighting.INVERSE_N),
    3: FitScenario(False, Weighting.UNIFORM),
    4: FitScenario(False, Weighting.INVERSE_N),
}


@dataclass(frozen=True)
class FitReport:
    scenario: int
    n_max: int
    a: float
    b: float
    k: float
    epsilon_nominal: float
    objective_value: float

    @property
    def inv_k(self) -> float:
        return 1.0 / self.k if self.k else math.inf

    @property
    def decay_base(self) -> float:
        return 1.0 - 2.0 * self.k * self.epsilon_nominal

    def to_dict(self) -> dict:
        return {'scenario': self.scenario, 'n_max': self.n_max, 'a': self.a, 'b': self.b,
                'k': self.k, 'inv_k': self.inv_k, 'epsilon_nominal': self.epsilon_nominal,
                'objective_value': self.objective_value}


@dataclass(frozen=True)
class LinearFitReport:
    """Result of the short-sequence linear fit.

    Attributes
    ----------
    epsilon_hat : float
        Estimated error rate per gate.
    a, b : float
        The supplied asymptote and the fitted amplitude.
    n_used : tuple of int
        Sequence lengths inside the linear window.
    """
    epsilon_hat: float
    a: float
    b: float
    n_used: tuple

    @property
    def beta_hat(self) -> float:
        return 3.0 * self.epsilon_hat

    def to_dict(self) -> dict:
        return {'scenario': 'linear', 'epsilon_hat': self.epsilon_hat,
                'beta_hat': self.beta_hat, 'a': self.a, 'b': self.b,
                'n_used': list(self.n_used)}


def generate_quasistatic_data(beta: float, n_max: int):
    """Leading-order quasistatic curve ``P0 = 1/2 + 1/2 (1 + 4 N beta/3)^-1/2``.

    Returns
    -------
    ns : (n_max,) int ndarray
        ``1..n_max``.
    p0 : (n_max,) ndarray
    """
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta!r}")
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be a positive integer, got {n_max!r}")
    ns = np.arange(1, int(n_max) + 1)
    return ns, 0.5 + 0.5 / np.sqrt(1.0 + 4.0 * ns * beta / 3.0)


def _as_data(data):
    ns, p0 = data
    ns = np.asarray(ns)
    p0 = np.asarray(p0, dtype=float)
    if ns.shape != p0.shape or ns.ndim != 1:
        raise ValidationError("data must be two equal-length 1-D arrays (N, P0)")
    if ns.size and (np.any(ns < 1) or np.any(ns != np.round(ns))):
        raise ValidationError("sequence lengths must be positive integers")
    if not np.all(np.isfinite(p0)):
        raise ValidationError("P0 values must be finite")
    return ns.astype(float), p0


def _powers(base, ns):
    with np.errstate(divide='ignore'):
        return np.exp(ns * math.log(base)) if base > 0 else np.zeros_like(ns)


def fit_exponential(data, scenario, epsilon: float,
                    n_max: Optional[int] = None) -> FitReport:
    """Weighted least-squares fit of ``A + B (1 - 2 K eps)^N``.

    Parameters
    ----------
    data : (ns, p0)
        Every point with ``N <= n_max`` enters the sum.
    scenario : FitScenario or int
    epsilon : float
        Nominal error rate; the fit reports ``K`` relative to it.
    n_max : int, optional
        Defaults to the largest ``N`` in ``data``.

    Notes
    -----
    ``K`` is boxed so the decay base ``1 - 2 K eps`` stays in ``(0, 1]``.
    For each ``K`` the optimal ``A, B`` solve a weighted linear problem, so a
    grid over ``K`` in ``[0.05, 20]`` followed by a bounded Brent search on
    the reduced objective finds the global minimum along the grid's best
    basin. Nelder-Mead polishes from that point and from ``(1/2, 1/2, 1)``;
    the lowest objective wins.

    Raises
    ------
    FittingError
        If no start produces a finite objective; ``.best`` holds the best
        candidate seen, if any.
    """
    if not isinstance(scenario, FitScenario):
        scenario = FitScenario.from_number(scenario)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon!r}")
    ns, p0 = _as_data(data)
    if n_max is None:
        if not ns.size:
            raise ValidationError("no data to fit")
        n_max = int(ns.max())
    sel = ns <= n_max
    ns, p0 = ns[sel], p0[sel]
    n_params = 1 if scenario.fix_ab else 3
    if ns.size < n_params:
        raise FittingError(f"need at least {n_params} points with N <= {n_max}, got {ns.size}")
    w = scenario.weights(ns)
    sw = np.sqrt(w)
    w_sum, wp_sum = float(w.sum()), float(w @ p0)

    k_max = (1.0 - 1e-12) / (2.0 * epsilon)
    k_lo, k_hi = K_GRID[0], min(K_GRID[1], k_max)
    if k_hi <= k_lo:
        k_lo = k_hi / 400.0

    def full(a, b, k):
        if not 0.0 <= k <= k_max:
            return math.inf
        r = p0 - a - b * _powers(1.0 - 2.0 * k * epsilon, ns)
        return float(np.sum(w * r * r))

    def reduced(k):
        """Objective minimized over (A, B) at fixed K; returns (value, a, b)."""
        if scenario.fix_ab:
            return full(0.5, 0.5, k), 0.5, 0.5
        x = _powers(1.0 - 2.0 * k * epsilon, ns)
        wx = w * x
        gram = np.array([[w_sum, wx.sum()], [wx.sum(), wx @ x]])
        rhs = np.array([wp_sum, wx @ p0])
        if np.linalg.cond(gram) < 1e10:
            coef = np.linalg.solve(gram, rhs)
        else:
            design = np.stack([np.ones_like(x), x], axis=1) * sw[:, None]
            coef, *_ = np.linalg.lstsq(design, p0 * sw, rcond=None)
        a, b = float(coef[0]), float(coef[1])
        r = p0 - a - b * x
        return float(np.sum(w * r * r)), a, b

    grid = np.geomspace(k_lo, k_hi, K_GRID_POINTS)
    vals = np.array([reduced(k)[0] for k in grid])
    if not np.any(np.isfinite(vals)):
        raise FittingError("objective is not finite anywhere on the K grid")
    i = int(np.nanargmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    candidates = []
    brent = optimize.minimize_scalar(lambda k: reduced(k)[0], bounds=(lo, hi),
                                     method='bounded', options={'xatol': 1e-12 * hi})
    k_b = float(brent.x)
    f_b, a_b, b_b = reduced(k_b)
    candidates.append((f_b, a_b, b_b, k_b))
    _, a_g, b_g = reduced(grid[i])
    candidates.append((float(vals[i]), a_g, b_g, float(grid[i])))

    if scenario.fix_ab:
        starts = [(1.0,), (k_b,)]
        fun = lambda v: full(0.5, 0.5, v[0])  # noqa: E731
        bounds = [(0.0, k_max)]
    else:
        starts = [(0.5, 0.5, 1.0), (a_b, b_b, k_b)]
        fun = lambda v: full(v[0], v[1], v[2])  # noqa: E731
        bounds = [(None, None), (None, None), (0.0, k_max)]
    for x0 in starts:
        res = optimize.minimize(fun, np.array(x0, dtype=float), method='Nelder-Mead',
                                bounds=bounds,
                                options={'xatol': 1e-12, 'fatol': 0.0, 'maxiter': 20000,
                                         'maxfev': 40000})
        if np.isfinite(res.fun):
            v = res.x
            if scenario.fix_ab:
                candidates.append((float(res.fun), 0.5, 0.5, float(v[0])))
            else:
                candidates.append((float(res.fun), float(v[0]), float(v[1]), float(v[2])))

    finite = [c for c in candidates if math.isfinite(c[0])]
    if not finite:
        raise FittingError("no optimizer start produced a finite objective")
    f, a, b, k = min(finite, key=lambda c: c[0])
    return FitReport(scenario.number, int(n_max), a, b, k, float(epsilon), f)


def fit_linear_short(data, a_asymptote: float, window: float = 0.01,
                     min_points: int = 2) -> LinearFitReport:
    """Estimate the error rate from the initial, linear part of the decay.

    Points are taken from the shortest sequence onward while the decay
    relative to the first point, ``(P0(N_1) - P0(N)) / (P0(N_1) - A)``,
    stays within ``window``. A straight line through them gives the
    intercept ``A + B`` and slope ``-2 B eps``.

    Raises
    ------
    FittingError
        If the data show no decay toward ``A`` or fewer than ``min_points``
        points fall inside the window.
    """
    ns, p0 = _as_data(data)
    order = np.argsort(ns)
    ns, p0 = ns[order], p0[order]
    if ns.size < min_points:
        raise FittingError(f"need at least {min_points} points, got {ns.size}")
    gap = p0[0] - a_asymptote
    if not gap > 0 or not p0[0] - p0.min() > 0:
        raise FittingError("data show no decay toward the asymptote")
    rel = (p0[0] - p0) / gap
    inside = np.cumprod(rel <= window).astype(bool)
    m = int(inside.sum())
    if m < min_points:
        raise FittingError(
            f"only {m} point(s) within the {window:g} linear window; need {min_points}")
    slope, intercept = np.polyfit(ns[:m], p0[:m], 1)
    b = float(intercept) - a_asymptote
    if not slope < 0 or not b > 0:
        raise FittingError("linear window shows no decay")
    eps = -float(slope) / (2.0 * b)
    return LinearFitReport(eps, float(a_asymptote), b, tuple(int(n) for n in ns[:m]))


def _scan_one(args):
    data, scenario, eps, n_max = args
    return fit_exponential(data, scenario, eps, n_max)


def scan_nmax(beta: float, scenario, n_max_list: Sequence[int],
              workers: Optional[int] = None) -> list:
    """Fit generated quasistatic data for each ``N_max``, in input order."""
    n_max_list = [int(n) for n in n_max_list]
    if not n_max_list:
        return []
    if not isinstance(scenario, FitScenario):
        scenario = FitScenario.from_number(scenario)
    eps = beta / 3.0
    ns, p0 = generate_quasistatic_data(beta, max(n_max_list))
    jobs = [((ns[:m], p0[:m]), scenario, eps, m) for m in n_max_list]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_scan_one, jobs))
    return [_scan_one(j) for j in jobs]


def fit_reports_json(reports) -> str:
    """Serialize one report or a list of them."""
    if isinstance(reports, (FitReport, LinearFitReport)):
        payload = reports.to_dict()
    else:
        payload = [r.to_dict() for r in reports]
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'
