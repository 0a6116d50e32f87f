"""Gaussian phase-noise models.

A noise model describes the error phases accumulated during the ``N`` free
evolution intervals of a benchmarking sequence: a common mean ``theta0`` per
interval and an ``N x N`` covariance matrix ``chi`` (radians^2).

Covariances can be built directly (uncorrelated, quasistatic), read from a
CSV file, or obtained from a piecewise power spectral density of a single-axis
dephasing field ``B(t)`` by integrating it against the free-evolution filter
kernel.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, ValidationError

__all__ = ['NoiseModel', 'PsdSpec', 'NoiseDiagnostics', 'NoiseFamily',
           'make_uncorrelated', 'make_quasistatic', 'make_custom', 'psd_kernel',
           'covariance_lags', 'covariance_from_psd', 'diagnostics',
           'read_covariance_csv', 'write_covariance_csv', 'format_float']

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-12
QUAD_RTOL = 1e-8

_SERIES_CUTOFF = 1e-4


def format_float(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), '.17g')


@dataclass(frozen=True)
class NoiseModel:
    """Mean phase and covariance of the accumulated error phases.

    Attributes
    ----------
    n_intervals : int
        Sequence length ``N``.
    theta0 : float
        Mean error phase per interval, radians.
    covariance : ndarray, shape (N, N)
        Symmetric positive semi-definite covariance, radians^2. Stored
        read-only and exactly symmetric.
    null_modes : int
        Number of eigenvalues in ``[-1e-12 lambda_max, 1e-12 lambda_max]``;
        these directions are treated as deterministic (zero variance).
    """
    n_intervals: int
    theta0: float
    covariance: np.ndarray = field(repr=False)
    null_modes: int = field(default=0, compare=False)

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float, copy=True)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {cov.shape}")
        n = int(self.n_intervals)
        if n < 1:
            raise DomainError(f"n_intervals must be >= 1, got {self.n_intervals}")
        if cov.shape[0] != n:
            raise ValidationError(
                f"covariance is {cov.shape[0]}x{cov.shape[0]} but n_intervals={n}")
        if not np.all(np.isfinite(cov)):
            raise ValidationError("covariance has non-finite entries")
        scale = np.max(np.abs(cov)) if cov.size else 0.0
        asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
        if asym > SYMMETRY_RTOL * scale:
            raise ValidationError(f"covariance not symmetric (max |C - C^T| = {asym:.3e})")
        cov = 0.5 * (cov + cov.T)
        null = 0
        if scale > 0:
            w = np.linalg.eigvalsh(cov)
            top = w[-1]
            if top <= 0 or w[0] < -PSD_RTOL * top:
                raise ValidationError(
                    f"covariance not positive semi-definite: min eigenvalue {w[0]:.3e}, "
                    f"max {top:.3e}")
            null = int(np.sum(np.abs(w) <= PSD_RTOL * top))
        else:
            null = n
        cov.setflags(write=False)
        object.__setattr__(self, 'n_intervals', n)
        object.__setattr__(self, 'theta0', float(self.theta0))
        object.__setattr__(self, 'covariance', cov)
        object.__setattr__(self, 'null_modes', null)

    @property
    def mean(self) -> np.ndarray:
        return np.full(self.n_intervals, self.theta0)

    @property
    def beta(self) -> float:
        """Noise strength ``chi_11 / 2``."""
        return 0.5 * float(self.covariance[0, 0])


def _check_n_beta(n, beta):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not beta >= 0:
        raise DomainError(f"beta must be >= 0, got {beta!r}")


def make_uncorrelated(n: int, beta: float, theta0: float = 0.0) -> NoiseModel:
    """Independent, identically distributed phases: ``chi = 2 beta I``."""
    _check_n_beta(n, beta)
    return NoiseModel(int(n), theta0, 2.0 * beta * np.eye(int(n)))


def make_quasistatic(n: int, beta: float, theta0: float = 0.0) -> NoiseModel:
    """Perfectly correlated phases: ``chi = 2 beta 1 1^T`` (rank one)."""
    _check_n_beta(n, beta)
    return NoiseModel(int(n), theta0, np.full((int(n), int(n)), 2.0 * beta))


def make_custom(covariance, theta0: float = 0.0) -> NoiseModel:
    cov = np.asarray(covariance, dtype=float)
    return NoiseModel(cov.shape[0] if cov.ndim == 2 else 0, theta0, cov)


@dataclass(frozen=True)
class PsdSpec:
    """Piecewise power spectral density of the dephasing field.

    ``S(f) = A`` below ``f_low``, ``A f_low / f`` up to ``f_high`` and
    ``A f_low f_high / f^2`` above. ``f_low = inf`` gives white noise.

    Attributes
    ----------
    amplitude : float
        White level ``A`` (Hz).
    f_low, f_high : float
        Knee frequencies (Hz), ``0 < f_low <= f_high``.
    tau : float
        Free-evolution interval (s).
    """
    amplitude: float
    f_low: float
    f_high: float
    tau: float

    def __post_init__(self):
        if not self.amplitude >= 0 or not math.isfinite(self.amplitude):
            raise DomainError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if not self.f_low > 0:
            raise DomainError(f"f_low must be > 0, got {self.f_low}")
        if not self.f_high >= self.f_low:
            raise DomainError(f"f_high must be >= f_low, got {self.f_high} < {self.f_low}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be positive, got {self.tau}")

    @classmethod
    def white(cls, amplitude: float, tau: float) -> 'PsdSpec':
        return cls(amplitude, math.inf, math.inf, tau)

    def with_tau(self, tau: float) -> 'PsdSpec':
        return PsdSpec(self.amplitude, self.f_low, self.f_high, tau)

    def psd(self, f):
        """Evaluate ``S(f)`` for ``f >= 0``."""
        f = np.asarray(f, dtype=float)
        a, fl, fh = self.amplitude, self.f_low, self.f_high
        with np.errstate(divide='ignore', invalid='ignore'):
            out = np.where(f < fl, a,
                           np.where(f <= fh, a * fl / f, a * fl * fh / f**2))
        return out if out.ndim else float(out)


def psd_kernel(m: int, n: int, f, tau: float):
    """Filter kernel ``cos(2 pi f tau (m-n)) sin^2(pi f tau) / (pi f)^2``.

    Integrating this kernel against a PSD gives the phase covariance
    ``chi_mn``. Tends to ``tau^2`` as ``f -> 0``.
    """
    f = np.asarray(f, dtype=float)
    x = np.pi * f * tau
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(np.abs(x) < _SERIES_CUTOFF,
                         tau * tau * (1.0 - x * x / 3.0),
                         np.sin(x) ** 2 / (np.pi * f) ** 2)
    out = np.cos(2.0 * np.pi * f * tau * (m - n)) * ratio
    return out if out.ndim else float(out)


def _quad(fun, a, b, k, epsabs, epsrel):
    """Integrate ``fun(x) cos(2 pi k x)`` over ``[a, b]`` (``b`` may be inf).

    Returns ``(value, abserr, ok)``.
    """
    kw = dict(limit=400, epsabs=epsabs, epsrel=epsrel, full_output=1)
    if k != 0:
        kw.update(weight='cos', wvar=2.0 * np.pi * k)
        if math.isinf(b):
            kw.pop('epsrel')
            kw['limlst'] = 200
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        res = integrate.quad(fun, a, b, **kw)
    return res[0], res[1], len(res) < 4


def _geometric_edges(a, b, per_decade=1):
    """Breakpoints from ``a`` to ``b`` at one per decade (``a > 0``)."""
    if b <= a:
        return [a]
    n = max(1, int(math.ceil(per_decade * math.log10(b / a))))
    return list(np.geomspace(a, b, n + 1))


# low/high frequency split, in units of 1/tau
_X_SPLIT = 0.5


class _LagIntegrator:
    """Covariance at integer lag ``k`` for one ``PsdSpec``.

    Uses the dimensionless frequency ``x = f tau``:

        chi_k = tau * int_0^inf cos(2 pi k x) sinc(x)^2 S(x / tau) dx.

    Below ``x = 1/2`` the combined integrand is integrated with a cosine
    weight (QAWO), panel by panel between the knees and decade breakpoints.
    Above, ``cos(2 pi k x) sin^2(pi x)`` is expanded into three cosines of
    frequency ``k`` and ``k +- 1``; each is a Fourier integral of a pure power
    law, done with QAWO on finite panels and QAWF on the final infinite one.
    """

    def __init__(self, spec: PsdSpec):
        self.spec = spec
        tau = spec.tau
        self.xl = spec.f_low * tau
        self.xh = spec.f_high * tau
        self.low_edges = self._low_edges()
        self.high_edges = self._high_edges()

    def _low_edges(self):
        xs, xl, xh = _X_SPLIT, self.xl, self.xh
        edges = [0.0]
        if xl < xs:
            edges.append(xl)
            top = min(xh, xs)
            edges.extend(_geometric_edges(xl, top)[1:])
            if xh < xs:
                edges.extend(_geometric_edges(xh, xs)[1:])
        if edges[-1] < xs:
            edges.append(xs)
        return sorted(set(edges))

    def _high_edges(self):
        xs = _X_SPLIT
        knees = [x for x in (self.xl, self.xh) if xs < x < math.inf]
        edges = [xs]
        for kx in knees:
            edges.extend(_geometric_edges(edges[-1], kx)[1:])
        return sorted(set(edges))

    def _power(self, x):
        """``(c, p)`` with ``S(x / tau) = c x^-p`` on the piece containing ``x``."""
        a = self.spec.amplitude
        if x < self.xl:
            return a, 0
        if x <= self.xh:
            return a * self.xl, 1
        return a * self.xl * self.xh, 2

    def low_integrand(self, a, b):
        c, p = self._power(0.5 * (a + b))
        tau = self.spec.tau
        pi = math.pi
        sin = math.sin

        def g(x):
            if x == 0.0:
                return tau * c
            s = sin(pi * x) / (pi * x)
            return tau * c * s * s / x ** p
        return g

    def high_integrand(self, a, b):
        c, p = self._power(0.5 * (a + b))
        c = c / math.pi ** 2
        q = p + 2

        def h(x):
            return c / x ** q
        return h

    def _power_law_tail(self, a):
        """``int_a^inf S(x/tau)/(pi x)^2 dx`` in closed form."""
        c, p = self._power(a * (1 + 1e-12) if a < math.inf else a)
        return c / (math.pi ** 2 * (p + 1) * a ** (p + 1))

    def _power_law_panel(self, a, b):
        """``int_a^b S(x/tau)/(pi x)^2 dx`` on a panel with no interior knee."""
        c, p = self._power(0.5 * (a + b))
        q = p + 2
        return c * (a ** (1 - q) - b ** (1 - q)) / ((q - 1) * math.pi ** 2)

    def scale(self) -> float:
        """Low-frequency part of ``chi_11``; same order as ``chi_11`` itself."""
        edges = self.low_edges
        return sum(_quad(self.low_integrand(a, b), a, b, 0, 0.0, 1e-10)[0]
                   for a, b in zip(edges[:-1], edges[1:]))

    def lag(self, k: int, epsabs: float):
        """Return ``(chi_k, abserr, ok)``."""
        total, err, ok = 0.0, 0.0, True
        edges = self.low_edges
        for a, b in zip(edges[:-1], edges[1:]):
            v, e, good = _quad(self.low_integrand(a, b), a, b, k, epsabs, 1e-12)
            total += v
            err += e
            ok &= good
        he = self.high_edges
        tau = self.spec.tau
        for j, coef in ((k, 0.5), (k + 1, -0.25), (abs(k - 1), -0.25)):
            part = 0.0
            for a, b in zip(he[:-1], he[1:]):
                if j == 0:
                    v, e, good = self._power_law_panel(a, b), 0.0, True
                else:
                    v, e, good = _quad(self.high_integrand(a, b), a, b, j, epsabs / tau, 1e-12)
                part += v
                err += abs(coef) * tau * e
                ok &= good
            if j == 0:
                v, e, good = self._power_law_tail(he[-1]), 0.0, True
            else:
                v, e, good = _quad(self.high_integrand(he[-1], 2 * he[-1] + 1),
                                   he[-1], math.inf, j, epsabs / tau, 1e-12)
            part += v
            err += abs(coef) * tau * e
            ok &= good
            total += coef * tau * part
        return total, err, ok


def _lag_worker(args):
    spec, k, epsabs = args
    return _LagIntegrator(spec).lag(k, epsabs)


def covariance_lags(spec: PsdSpec, n: int, rtol: float = QUAD_RTOL,
                    workers: Optional[int] = None) -> np.ndarray:
    """First row ``chi_{1,1+k}``, ``k = 0..n-1``, of the Toeplitz covariance.

    Errors are controlled relative to ``chi_11`` (the largest entry). Each
    lag is integrated independently, so ``workers > 1`` (a process pool)
    gives bitwise the same result as a serial run.

    Raises
    ------
    NumericalError
        If a quadrature error estimate exceeds ``rtol * chi_11``. The
        achieved tolerance is in the message.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if spec.amplitude == 0:
        return np.zeros(n)
    integ = _LagIntegrator(spec)
    c0, e0, ok0 = integ.lag(0, epsabs=1e-3 * rtol * integ.scale())
    if not (c0 > 0) or e0 > rtol * c0:
        raise NumericalError(
            f"lag-0 quadrature did not converge: value {c0:.6e}, "
            f"achieved tolerance {e0 / max(abs(c0), 1e-300):.2e}")
    lags = np.empty(n)
    lags[0] = c0
    epsabs = 1e-3 * rtol * c0
    jobs = [(spec, k, epsabs) for k in range(1, n)]
    if workers and workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_lag_worker, jobs, chunksize=16))
    else:
        results = [integ.lag(k, epsabs) for _, k, _ in jobs]
    for k, (v, e, ok) in enumerate(results, start=1):
        if e > rtol * c0:
            raise NumericalError(
                f"lag-{k} quadrature did not converge: "
                f"achieved tolerance {e / c0:.2e} relative to chi_11")
        lags[k] = v
    return lags


def _toeplitz(col):
    col = np.asarray(col, dtype=float)
    idx = np.abs(np.arange(col.size)[:, None] - np.arange(col.size)[None, :])
    return col[idx]


def covariance_from_psd(spec: PsdSpec, n: int, theta0: float = 0.0,
                        workers: Optional[int] = None) -> NoiseModel:
    """Covariance of the interval phases under the dephasing PSD ``spec``."""
    return NoiseModel(int(n), theta0, _toeplitz(covariance_lags(spec, n, workers=workers)))


@dataclass(frozen=True)
class NoiseDiagnostics:
    """Free-evolution decay parameters: ``beta ~ (tau / T2*)^alpha``.

    ``t2_star``, ``alpha`` and ``alpha_raw`` are only available when the
    noise is given as a PSD (they need the dependence on ``tau``).
    """
    beta: float
    t2_star: Optional[float] = None
    alpha: Optional[int] = None
    alpha_raw: Optional[float] = None


def diagnostics(source: Union[NoiseModel, PsdSpec], ladder_points: int = 9,
                decades: float = 1.0) -> NoiseDiagnostics:
    """Extract ``beta = chi_11 / 2`` and, for a PSD, ``(T2*, alpha)``.

    ``alpha_raw`` is the slope of ``log(chi_11/2)`` against ``log tau`` over a
    geometric ladder spanning ``decades`` centred on the nominal ``tau``;
    ``alpha`` is that slope rounded to 1 or 2, and ``T2* = tau beta^(-1/alpha)``.

    Raises
    ------
    DomainError
        For a PSD with zero amplitude (alpha is undefined).
    """
    if isinstance(source, NoiseModel):
        return NoiseDiagnostics(beta=source.beta)
    spec = source
    if spec.amplitude == 0:
        raise DomainError("zero covariance: decay exponent alpha is undefined")
    beta = 0.5 * float(covariance_lags(spec, 1)[0])
    taus = spec.tau * np.logspace(-decades / 2, decades / 2, ladder_points)
    betas = np.array([0.5 * covariance_lags(spec.with_tau(t), 1)[0] for t in taus])
    slope = float(np.polyfit(np.log(taus), np.log(betas), 1)[0])
    alpha = 1 if abs(slope - 1) <= abs(slope - 2) else 2
    t2 = float(spec.tau * beta ** (-1.0 / alpha))
    return NoiseDiagnostics(beta=beta, t2_star=t2, alpha=alpha, alpha_raw=slope)


class NoiseFamily:
    """A rule producing a ``NoiseModel`` for every sequence length.

    Parameters
    ----------
    kind : {'uncorrelated', 'quasistatic', 'psd', 'custom'}
    beta : float, optional
        Noise strength for the analytic kinds.
    theta0 : float
    spec : PsdSpec, optional
        Required for ``kind='psd'``.
    covariance : array_like, optional
        Required for ``kind='custom'``; models of length ``n`` use its
        leading ``n x n`` block.
    """

    KINDS = ('uncorrelated', 'quasistatic', 'psd', 'custom')

    def __init__(self, kind, beta=None, theta0=0.0, spec=None, covariance=None):
        if kind not in self.KINDS:
            raise DomainError(f"unknown noise kind {kind!r}")
        self.kind = kind
        self.theta0 = float(theta0)
        self.beta = beta
        self.spec = spec
        self._lags = None
        self._cov = None
        if kind in ('uncorrelated', 'quasistatic'):
            if beta is None or not beta >= 0:
                raise DomainError(f"{kind} noise needs beta >= 0")
        elif kind == 'psd':
            if spec is None:
                raise DomainError("psd noise needs a PsdSpec")
        else:
            if covariance is None:
                raise DomainError("custom noise needs a covariance matrix")
            # validates once at full size
            self._cov = make_custom(covariance, theta0).covariance

    @property
    def max_n(self) -> Optional[int]:
        return self._cov.shape[0] if self._cov is not None else None

    @property
    def is_toeplitz(self) -> bool:
        return self.kind != 'custom'

    def lags(self, n: int) -> np.ndarray:
        """First row of the covariance for length ``n`` (Toeplitz kinds)."""
        if self.kind == 'uncorrelated':
            out = np.zeros(n)
            out[0] = 2.0 * self.beta
            return out
        if self.kind == 'quasistatic':
            return np.full(n, 2.0 * self.beta)
        if self.kind == 'psd':
            if self._lags is None or self._lags.size < n:
                self._lags = covariance_lags(self.spec, n)
            return self._lags[:n].copy()
        raise DomainError("custom covariance is not Toeplitz")

    def covariance(self, n: int) -> np.ndarray:
        if self.kind == 'custom':
            if n > self._cov.shape[0]:
                raise DomainError(
                    f"custom covariance has only {self._cov.shape[0]} intervals, asked for {n}")
            return np.array(self._cov[:n, :n])
        return _toeplitz(self.lags(n))

    def model(self, n: int) -> NoiseModel:
        if self.kind == 'uncorrelated':
            return make_uncorrelated(n, self.beta, self.theta0)
        if self.kind == 'quasistatic':
            return make_quasistatic(n, self.beta, self.theta0)
        return NoiseModel(n, self.theta0, self.covariance(n))


_HEADER_RE = re.compile(r'#\s*n\s*=\s*(\d+)\s+theta0\s*=\s*(\S+)')


def write_covariance_csv(model: NoiseModel, path) -> None:
    lines = [f"# n={model.n_intervals} theta0={format_float(model.theta0)}"]
    for row in model.covariance:
        lines.append(','.join(format_float(v) for v in row))
    with open(path, 'w') as fh:
        fh.write('\n'.join(lines) + '\n')


def read_covariance_csv(path) -> NoiseModel:
    """Read a covariance file written by :func:`write_covariance_csv`.

    Raises
    ------
    ValidationError
        On a malformed file; the message names the offending line.
    """
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, s.strip()) for i, s in enumerate(raw) if s.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty covariance file")
    lineno, head = lines[0]
    m = _HEADER_RE.fullmatch(head)
    if not m:
        raise ValidationError(f"{path}:{lineno}: expected header '# n=<N> theta0=<value>'")
    n = int(m.group(1))
    try:
        theta0 = float(m.group(2))
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: bad theta0 {m.group(2)!r}") from None
    rows = []
    for lineno, s in lines[1:]:
        try:
            row = [float(tok) for tok in s.split(',')]
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric entry") from None
        if len(row) != n:
            raise ValidationError(f"{path}:{lineno}: expected {n} values, got {len(row)}")
        rows.append(row)
    if len(rows) != n:
        raise ValidationError(f"{path}: expected {n} rows, got {len(rows)}")
    return NoiseModel(n, theta0, np.array(rows))
