"""Command-line interface.

Exit codes: 0 success, 1 a verification check failed, 2 usage or input
error, 3 numerical failure (non-convergence, capacity limit, failed fit).
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import fitting, noise, partition, qudit, twirl
from .errors import (CapacityError, DomainError, FittingError, NumericalError,
                     RBIsingError, ValidationError)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

EPILOG = ("exit codes: 0 success, 1 verification failed, 2 usage or input error, "
          "3 numerical failure (no convergence, capacity exceeded, fit failed)")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextmanager
def _output(path):
    if path in (None, '-'):
        yield sys.stdout
    else:
        with open(path, 'w', newline='') as fh:
            yield fh


def _dump_json(payload, path):
    with _output(path) as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + '\n')


def n_grid(n_max: int, n_points: int = 60, spacing: str = 'log') -> list:
    """Sequence lengths ``1..n_max``: log- or linearly spaced, deduplicated."""
    if n_max < 1:
        raise UsageError(f"--n-max must be >= 1, got {n_max}")
    if spacing == 'all':
        return list(range(1, n_max + 1))
    if n_points < 1:
        raise UsageError(f"--n-points must be >= 1, got {n_points}")
    if spacing == 'log':
        raw = np.geomspace(1, n_max, n_points)
    else:
        raw = np.linspace(1, n_max, n_points)
    return sorted({int(round(v)) for v in raw})


def _psd_spec(args):
    missing = [f for f in ('A', 'fl', 'fh', 'tau') if getattr(args, f) is None]
    if missing:
        raise UsageError("PSD noise needs " + ', '.join('--' + m for m in missing))
    return noise.PsdSpec(args.A, args.fl, args.fh, args.tau)


def _family(args):
    kind = args.noise
    psd_given = any(getattr(args, f) is not None for f in ('A', 'fl', 'fh', 'tau'))
    if kind in ('uncorrelated', 'quasistatic'):
        if args.beta is None:
            raise UsageError(f"--noise {kind} needs --beta")
        if psd_given or args.model:
            raise UsageError(f"--noise {kind} takes no PSD flags or --model")
        return noise.NoiseFamily(kind, beta=args.beta, theta0=args.theta0)
    if args.beta is not None:
        raise UsageError(f"--beta does not apply to --noise {kind}")
    if kind == 'psd':
        if args.model:
            raise UsageError("--noise psd takes PSD flags, not --model")
        return noise.NoiseFamily('psd', theta0=args.theta0, spec=_psd_spec(args))
    if psd_given:
        raise UsageError("--noise custom takes --model, not PSD flags")
    if not args.model:
        raise UsageError("--noise custom needs --model <covariance csv>")
    model = noise.read_covariance_csv(args.model)
    theta0 = args.theta0 if args.theta0_given else model.theta0
    return noise.NoiseFamily('custom', theta0=theta0, covariance=model.covariance)


def cmd_fidelity(args):
    ns = n_grid(args.n_max, args.n_points, args.spacing)
    family = _family(args)
    method = args.method
    if method == 'exact' and family.kind not in ('uncorrelated', 'quasistatic'):
        raise UsageError("--method exact needs uncorrelated or quasistatic noise")
    if method == 'oracle' and family.kind != 'quasistatic':
        raise UsageError("--method oracle needs quasistatic noise")
    if family.max_n is not None and args.n_max > family.max_n:
        raise UsageError(f"--n-max {args.n_max} exceeds the {family.max_n} intervals in --model")
    curve = partition.p0_curve(family, ns, method, samples=args.samples, seed=args.seed)
    with _output(args.out) as fh:
        fh.write(partition.format_curve_csv(curve))
    return EXIT_OK


def _fit_data(args):
    if args.input and args.generate:
        raise UsageError("give either --input or --generate, not both")
    if args.input:
        return partition.read_curve_csv(args.input)
    if not args.generate:
        raise UsageError("fit needs --input <curve csv> or --generate")
    if args.beta is None:
        raise UsageError("--generate needs --beta")
    if args.n_max is None:
        raise UsageError("--generate needs --n-max")
    top = args.n_max
    if args.scan is not None:
        top = max([top] + _ladder(args))
    if args.generate == 'quasistatic':
        return fitting.generate_quasistatic_data(args.beta, top)
    ns = np.arange(1, top + 1)
    return ns, np.array([partition.z_quasistatic_exact(int(n), args.beta).p0 for n in ns])


def _ladder(args):
    if args.scan == 'default':
        return [args.n_max * m for m in (1, 10, 100, 1000)]
    try:
        ladder = [int(v) for v in args.scan.split(',') if v.strip()]
    except ValueError:
        raise UsageError(f"--scan expects comma-separated integers, got {args.scan!r}") from None
    if any(v < 1 for v in ladder):
        raise UsageError("--scan values must be >= 1")
    return ladder


def cmd_fit(args):
    if args.scenario == 'linear':
        if args.asymptote is None:
            raise UsageError("--scenario linear needs --asymptote")
        if args.scan is not None:
            raise UsageError("--scan applies to scenarios 1-4")
        ns, p0 = _fit_data(args)
        if args.n_max is not None:
            keep = ns <= args.n_max
            ns, p0 = ns[keep], p0[keep]
        rep = fitting.fit_linear_short((ns, p0), args.asymptote, window=args.window)
        _dump_json(rep.to_dict(), args.out)
        return EXIT_OK
    if args.n_max is not None and args.n_max < 1:
        raise UsageError("--n-max must be >= 1")
    if args.epsilon is None and args.beta is None:
        raise UsageError("exponential fits need --epsilon or --beta (epsilon = beta/3)")
    eps = args.epsilon if args.epsilon is not None else args.beta / 3.0
    data = _fit_data(args)
    scenario = int(args.scenario)
    if args.scan is not None:
        if args.n_max is None:
            raise UsageError("--scan needs --n-max")
        reps = [fitting.fit_exponential(data, scenario, eps, m) for m in _ladder(args)]
        _dump_json([r.to_dict() for r in reps], args.out)
    else:
        rep = fitting.fit_exponential(data, scenario, eps, args.n_max)
        _dump_json(rep.to_dict(), args.out)
    return EXIT_OK


def _verify_covariance(cov):
    n = cov.shape[0]
    top = cov[0, 0]
    toeplitz = all(np.allclose(np.diagonal(cov, k), cov[0, k], rtol=0, atol=1e-15 * max(top, 1e-300))
                   for k in range(n))
    symmetric = np.array_equal(cov, cov.T)
    ev = np.linalg.eigvalsh(cov)
    psd = ev[0] >= -noise.PSD_RTOL * max(ev[-1], 0.0)
    bounded = bool(np.all(np.abs(cov[0]) <= top * (1 + 1e-12)))
    return {'toeplitz': bool(toeplitz), 'symmetric': bool(symmetric),
            'positive_semidefinite': bool(psd), 'lags_bounded_by_variance': bounded}


def cmd_covariance(args):
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    spec = _psd_spec(args)
    model = noise.covariance_from_psd(spec, args.n, args.theta0, workers=args.workers)
    with _output(args.out) as fh:
        fh.write(f"# n={model.n_intervals} theta0={noise.format_float(model.theta0)}\n")
        for row in model.covariance:
            fh.write(','.join(noise.format_float(v) for v in row) + '\n')
    status = EXIT_OK
    if args.diagnostics:
        if spec.amplitude == 0:
            diag = noise.NoiseDiagnostics(beta=0.0)
        else:
            diag = noise.diagnostics(spec)
        _dump_json({'beta': diag.beta, 't2_star': diag.t2_star, 'alpha': diag.alpha,
                    'alpha_raw': diag.alpha_raw}, args.diagnostics)
    if args.verify:
        checks = _verify_covariance(model.covariance)
        ok = all(checks.values())
        detail = ' '.join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
        print(f"covariance check: {'PASS' if ok else 'FAIL'} ({detail})", file=sys.stderr)
        if not ok:
            status = EXIT_FAIL
    return status


def _parse_phases(args):
    if args.phases is not None:
        if args.theta is not None:
            raise UsageError("give either --theta or --phases")
        try:
            ph = [float(v) for v in args.phases.split(',')]
        except ValueError:
            raise UsageError("--phases expects comma-separated numbers") from None
        if len(ph) != args.d:
            raise UsageError(f"--phases needs {args.d} values for --d {args.d}")
        return np.array(ph)
    if args.theta is None:
        raise UsageError("verify-twirl needs --theta (d=2) or --phases")
    if args.d != 2:
        raise UsageError("--theta only applies to --d 2; use --phases")
    return twirl.qubit_phases(args.theta)


def cmd_verify_twirl(args):
    if args.d < 2:
        raise UsageError("--d must be >= 2")
    phases = _parse_phases(args)
    analytic = twirl.adjoint_scalar_d(args.d, phases)
    est, err = twirl.haar_verify(args.d, phases, args.samples, args.seed, workers=args.workers)
    dev = abs(est - analytic)
    ok = dev <= args.sigmas * err if err > 0 else dev <= 1e-12
    payload = {'d': args.d, 'phases': [float(p) for p in phases], 'samples': args.samples,
               'seed': args.seed, 'analytic': analytic, 'estimate': est, 'stderr': err,
               'deviation_sigmas': dev / err if err > 0 else None, 'pass': bool(ok)}
    if args.d == 2:
        payload['qubit_closed_form'] = twirl.r_matrix_qubit(phases[0] - phases[1]).adjoint_scalar
    _dump_json(payload, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_qudit(args):
    try:
        model = qudit.read_qudit_model(args.model)
    except FileNotFoundError:
        raise UsageError(f"model file not found: {args.model}") from None
    if args.method == 'bruteforce':
        res = qudit.p0_qudit_bruteforce(model)
    else:
        res = qudit.p0_qudit_montecarlo(model, args.samples, args.seed, workers=args.workers)
    payload = {'d': model.d, 'n': model.n_intervals, 'method': args.method,
               'p0': res.p0, 'z': res.z, 'error_estimate': res.error_estimate}
    ok = True
    if args.method == 'bruteforce':
        imag = res.diagnostics['imag']
        imag_ok = abs(imag) <= 1e-12 * max(abs(res.z), 1e-300) or abs(imag) <= 1e-15
        payload.update({'imag': imag, 'imag_cancels': bool(imag_ok)})
        ok = ok and imag_ok
    else:
        payload.update({'samples': args.samples, 'seed': args.seed})
    if model.d == 2 and model.n_intervals <= partition.BRUTEFORCE_MAX_N:
        try:
            qb = qudit.qudit_to_qubit(model)
        except DomainError:
            qb = None
        if qb is not None:
            ref = partition.z_bruteforce(qb).p0
            diff = abs(res.p0 - ref)
            tol = 1e-12 if args.method == 'bruteforce' else 4 * res.error_estimate / 2 + 1e-15
            payload['qubit_reduction'] = {'p0': ref, 'abs_diff': diff, 'pass': bool(diff <= tol)}
            ok = ok and diff <= tol
    payload['pass'] = bool(ok)
    _dump_json(payload, args.out)
    return EXIT_OK if ok else EXIT_FAIL


class _Theta0(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.theta0_given = True


def _add_psd(p):
    g = p.add_argument_group('power spectral density')
    g.add_argument('--A', type=float, help='white level A (Hz)')
    g.add_argument('--fl', type=float, help='low knee f_L (Hz); inf for white noise')
    g.add_argument('--fh', type=float, help='high knee f_H (Hz); inf for white noise')
    g.add_argument('--tau', type=float, help='free-evolution interval (s)')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='rbising', description=(
        "Randomized-benchmarking sequence fidelity under correlated Gaussian noise."),
        epilog=EPILOG)
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('fidelity', help='sequence fidelity curve as CSV', epilog=EPILOG)
    p.add_argument('--noise', required=True,
                   choices=['uncorrelated', 'quasistatic', 'psd', 'custom'])
    p.add_argument('--beta', type=float)
    p.add_argument('--theta0', type=float, default=0.0, action=_Theta0)
    p.add_argument('--model', help='covariance CSV for --noise custom')
    p.add_argument('--n-max', type=int, required=True)
    p.add_argument('--n-points', type=int, default=60)
    sp = p.add_mutually_exclusive_group()
    sp.add_argument('--log-n', dest='spacing', action='store_const', const='log',
                    help='log-spaced N grid (default)')
    sp.add_argument('--linear-n', dest='spacing', action='store_const', const='linear')
    sp.add_argument('--all-n', dest='spacing', action='store_const', const='all',
                    help='every N from 1 to --n-max')
    p.add_argument('--method', default='exact', choices=list(partition.CURVE_METHODS))
    _add_psd(p)
    p.add_argument('--samples', type=int, default=100_000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default='-')
    p.set_defaults(func=cmd_fidelity, spacing='log', theta0_given=False)

    p = sub.add_parser('fit', help='exponential or linear fit as JSON', epilog=EPILOG)
    p.add_argument('--input', help='curve CSV with columns N,P0,...')
    p.add_argument('--generate', choices=['quasistatic', 'quasistatic-exact'],
                   help='leading-order or exact quasistatic data for N=1..n-max')
    p.add_argument('--beta', type=float)
    p.add_argument('--epsilon', type=float, help='nominal error rate (default beta/3)')
    p.add_argument('--scenario', required=True, choices=['1', '2', '3', '4', 'linear'])
    p.add_argument('--n-max', type=int)
    p.add_argument('--asymptote', type=float, help='A for --scenario linear')
    p.add_argument('--window', type=float, default=0.01,
                   help='linear fit: largest decay relative to the first point')
    p.add_argument('--scan', nargs='?', const='default',
                   help='fit every N_max in a comma list (default n-max x 1,10,100,1000)')
    p.add_argument('--out', default='-')
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('covariance', help='phase covariance from a PSD', epilog=EPILOG)
    _add_psd(p)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--theta0', type=float, default=0.0)
    p.add_argument('--diagnostics', metavar='PATH',
                   help='write beta, T2*, alpha as JSON ("-" for stdout)')
    p.add_argument('--verify', action='store_true',
                   help='check Toeplitz structure and positivity, print a pass/fail line')
    p.add_argument('--workers', type=int)
    p.add_argument('--out', default='-')
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser('verify-twirl', help='Haar check of the twirled adjoint scalar',
                       epilog=EPILOG)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--theta', type=float, help='qubit phase (d=2)')
    p.add_argument('--phases', help='comma-separated state phases')
    p.add_argument('--samples', type=int, default=100_000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--sigmas', type=float, default=4.0)
    p.add_argument('--workers', type=int)
    p.add_argument('--out', default='-')
    p.set_defaults(func=cmd_verify_twirl)

    p = sub.add_parser('qudit', help='d-state sequence fidelity', epilog=EPILOG)
    p.add_argument('--model', required=True, help='qudit model file')
    p.add_argument('--method', default='bruteforce', choices=['bruteforce', 'mc'])
    p.add_argument('--samples', type=int, default=100_000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--workers', type=int)
    p.add_argument('--out', default='-')
    p.set_defaults(func=cmd_qudit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError, ValidationError, FileNotFoundError) as exc:
        print(f"rbising {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, CapacityError, FittingError) as exc:
        print(f"rbising {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RBIsingError as exc:
        print(f"rbising {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
