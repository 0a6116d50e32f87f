import math

import numpy as np
import pytest

from rbising import noise, partition
from rbising._enumerate import configuration_sum
from rbising.errors import CapacityError, DomainError, ValidationError
from rbising.noise import NoiseFamily
from rbising.partition import Method, Order

from _oracles import random_psd, z_quasistatic_mp, z_uncorrelated_mp


class TestClosedForms:

    def test_uncorrelated_frozen(self):
        # 40-digit evaluations of ((1 + 2 e^-beta)/3)^N
        assert partition.z_uncorrelated_exact(100, 0.01).z == pytest.approx(
            0.5139885325014292, rel=1e-14)
        assert partition.z_uncorrelated_exact(3, 0.1).z == pytest.approx(
            0.8214940485409364, rel=1e-14)

    def test_trivial(self):
        r = partition.z_uncorrelated_exact(1, 0.0)
        assert r.z == 1.0 and r.p0 == 1.0
        assert partition.z_quasistatic_exact(2, 0.0).z == pytest.approx(1.0, rel=1e-15)

    def test_huge_n_does_not_overflow(self):
        z = partition.z_uncorrelated_exact(10 ** 6, 0.01).z
        assert 0.0 <= z < 1e-300 or z == 0.0

    def test_quasistatic_n1_matches_uncorrelated(self):
        for beta, th in [(0.01, 0.0), (0.3, 1.1)]:
            assert partition.z_quasistatic_exact(1, beta, th).z == pytest.approx(
                partition.z_uncorrelated_exact(1, beta, th).z, rel=1e-15)

    def test_trinomial_weights(self):
        np.testing.assert_allclose(partition.trinomial_weights(2) * 9, [3, 2, 1], rtol=1e-15)

    @pytest.mark.parametrize('n, beta, theta0, ref', [
        (150, 0.01, 0.0, 0.5770290136487459),
        (1000, 0.01, 0.0, 0.2640924133622006),
        (1000, 0.01, 0.3, 0.03256273898895186),
    ])
    def test_quasistatic_frozen(self, n, beta, theta0, ref):
        # exact integer trinomial coefficients evaluated at 40 digits
        assert partition.z_quasistatic_exact(n, beta, theta0).z == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize('n', [1, 7, 40, 300])
    def test_quasistatic_against_big_integers(self, n):
        for beta, th in [(0.01, 0.0), (0.1, 0.3)]:
            assert partition.z_quasistatic_exact(n, beta, th).z == pytest.approx(
                z_quasistatic_mp(n, beta, th), rel=1e-12, abs=1e-15)

    def test_uncorrelated_against_mp(self):
        for n, beta, th in [(17, 0.05, 0.3), (5000, 0.001, 0.0)]:
            assert partition.z_uncorrelated_exact(n, beta, th).z == pytest.approx(
                z_uncorrelated_mp(n, beta, th), rel=1e-11)

    @pytest.mark.parametrize('args', [(0, 0.1), (2, -1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            partition.z_quasistatic_exact(*args)
        with pytest.raises(DomainError):
            partition.z_uncorrelated_exact(*args)


class TestQuadratureOracle:

    @pytest.mark.parametrize('theta0', [0.0, 0.3])
    @pytest.mark.parametrize('beta', [0.01, 0.1])
    def test_agrees_with_series(self, beta, theta0):
        for n in range(1, 21):
            a = partition.quadrature_oracle(n, beta, theta0).z
            b = partition.z_quasistatic_exact(n, beta, theta0).z
            assert a == pytest.approx(b, rel=1e-10)

    def test_single_interval(self):
        assert partition.quadrature_oracle(1, 0.01).z == pytest.approx(
            (1 + 2 * math.exp(-0.01)) / 3, rel=1e-13)

    def test_long_sequence(self):
        r = partition.quadrature_oracle(10 ** 4, 0.01)
        assert r.p0 == pytest.approx(partition.z_quasistatic_exact(10 ** 4, 0.01).p0, rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            partition.quadrature_oracle(0, 0.01)
        with pytest.raises(DomainError):
            partition.quadrature_oracle(3, 0.0)


class TestBruteForce:

    def test_uncorrelated(self):
        z = partition.z_bruteforce(noise.make_uncorrelated(3, 0.1)).z
        assert z == pytest.approx(partition.z_uncorrelated_exact(3, 0.1).z, rel=1e-12)

    def test_quasistatic(self):
        z = partition.z_bruteforce(noise.make_quasistatic(8, 0.01, 0.2)).z
        assert z == pytest.approx(partition.z_quasistatic_exact(8, 0.01, 0.2).z, rel=1e-12)

    def test_zero_noise(self):
        z = partition.z_bruteforce(noise.make_custom(np.zeros((5, 5)))).z
        assert z == pytest.approx(1.0, rel=1e-15)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            partition.z_bruteforce(noise.make_uncorrelated(19, 0.01))

    def test_cosine_identity(self):
        # prod(1 + 2 cos theta_n) = sum_g cos(g . theta) is the chi = 0 case
        rng = np.random.default_rng(11)
        for n in (1, 4, 9):
            th = rng.uniform(-np.pi, np.pi, n)
            total, _ = configuration_sum(np.array([[-1], [0], [1]]), n, np.zeros((n, n)), th)
            assert total == pytest.approx(np.prod(1 + 2 * np.cos(th)), abs=1e-9)


class TestMonteCarlo:

    @pytest.mark.parametrize('kind', ['uncorrelated', 'quasistatic'])
    def test_against_closed_form(self, kind):
        fam = NoiseFamily(kind, beta=0.01)
        r = partition.z_montecarlo(fam.model(10), samples=10 ** 6, seed=2)
        exact = partition.p0_curve(fam, [10], 'exact')[0][1].z
        assert abs(r.z - exact) <= 4 * r.error_estimate

    def test_zero_noise_degenerate(self):
        r = partition.z_montecarlo(noise.make_uncorrelated(6, 0.0, 0.4), samples=1000)
        assert r.error_estimate == 0.0
        assert r.z == pytest.approx(((1 + 2 * math.cos(0.4)) / 3) ** 6, rel=1e-14)

    def test_reproducible_across_workers(self):
        m = noise.make_quasistatic(5, 0.05)
        a = partition.z_montecarlo(m, samples=70_000, seed=9)
        b = partition.z_montecarlo(m, samples=70_000, seed=9, workers=3)
        assert (a.z, a.error_estimate) == (b.z, b.error_estimate)

    def test_invalid_samples(self):
        with pytest.raises(DomainError):
            partition.z_montecarlo(noise.make_quasistatic(2, 0.01), samples=0)


class TestExpansion:

    def test_uncorrelated_intermediates(self):
        beta = 0.02
        ex = partition.expansion_intermediates(noise.make_uncorrelated(4, beta))
        np.testing.assert_allclose(ex.sigma, 2 * beta / (1 + 4 * beta / 3) * np.eye(4),
                                   rtol=1e-13, atol=1e-18)
        np.testing.assert_array_equal(ex.nu, np.zeros(4))
        assert ex.c == pytest.approx(2.0 / 3.0)

    def test_quasistatic_sherman_morrison(self):
        n, beta = 7, 0.01
        ex = partition.expansion_intermediates(noise.make_quasistatic(n, beta))
        np.testing.assert_allclose(ex.sigma, 2 * beta * np.ones((n, n)) / (1 + 4 * n * beta / 3),
                                   rtol=1e-12)
        assert math.exp(ex.logdet) == pytest.approx(1 + 4 * n * beta / 3, rel=1e-12)

    def test_quarter_turn(self):
        beta = 0.03
        ex = partition.expansion_intermediates(noise.make_uncorrelated(1, beta, math.pi / 2))
        assert ex.c == pytest.approx(4.0)
        np.testing.assert_allclose(ex.y, [2.0])
        np.testing.assert_allclose(ex.sigma, [[2 * beta / (1 + 8 * beta)]], rtol=1e-13)
        np.testing.assert_allclose(ex.nu, [-4 * beta / (1 + 8 * beta)], rtol=1e-13)

    @pytest.mark.parametrize('theta0', [2 * math.pi / 3, -2 * math.pi / 3 + 1e-8,
                                        4 * math.pi / 3])
    def test_singular_theta0(self, theta0):
        with pytest.raises(DomainError, match='2pi/3'):
            partition.expansion_intermediates(noise.make_uncorrelated(2, 0.01, theta0))

    def test_leading_quasistatic(self):
        r = partition.z_determinant(noise.make_quasistatic(150, 0.01))
        assert r.z == pytest.approx(1 / math.sqrt(3), rel=1e-12)
        assert r.p0 == pytest.approx(0.788675, abs=1e-6)
        assert r.method is Method.DETERMINANT

    def test_leading_uncorrelated(self):
        for n in (1, 10, 100):
            r = partition.z_determinant(noise.make_uncorrelated(n, 0.01))
            assert r.z == pytest.approx((1 + 0.04 / 3) ** (-n / 2), rel=1e-12)

    def test_single_interval_correction(self):
        r = partition.z_determinant(noise.make_uncorrelated(1, 0.01), Order.WITH_CORRECTIONS)
        t3, t4 = r.correction_terms
        assert t3 == 0.0
        assert t4 == pytest.approx(-(1 / 12) * (0.02 / (1 + 0.04 / 3)) ** 2, rel=1e-12)
        # documented example value, quoted to three figures
        assert t4 == pytest.approx(-3.26e-5, rel=0.01)
        assert r.error_estimate == pytest.approx(abs(r.diagnostics['leading'] * t4))

    def test_corrections_improve_accuracy(self):
        for th in (0.0, 0.4):
            m = noise.make_quasistatic(12, 0.01, th)
            exact = partition.z_quasistatic_exact(12, 0.01, th).z
            lead = partition.z_determinant(m, Order.LEADING).z
            corr = partition.z_determinant(m, Order.WITH_CORRECTIONS).z
            assert abs(corr - exact) < 0.2 * abs(lead - exact)

    def test_leading_error_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(1, 9))
            chi = random_psd(rng, n, scale=0.02)
            m = noise.make_custom(chi)
            lead = partition.z_determinant(m).z
            exact = partition.z_bruteforce(m).z
            ex = partition.expansion_intermediates(m)
            bound = np.sum(np.diag(ex.sigma) ** 2) / 12
            assert abs(lead - exact) <= 2 * bound


class TestCurve:

    def test_empty(self):
        assert partition.p0_curve(NoiseFamily('quasistatic', beta=0.01), []) == []

    def test_order_preserved(self):
        ns = [50, 3, 7]
        curve = partition.p0_curve(NoiseFamily('uncorrelated', beta=0.01), ns, 'exact')
        assert [n for n, _ in curve] == ns

    @pytest.mark.parametrize('kind', ['uncorrelated', 'quasistatic'])
    def test_fast_det_path_matches_pointwise(self, kind):
        fam = NoiseFamily(kind, beta=0.01, theta0=0.2)
        ns = [1, 2, 17, 200]
        curve = partition.p0_curve(fam, ns, 'det')
        for n, r in curve:
            assert r.z == pytest.approx(partition.z_determinant(fam.model(n)).z, rel=1e-11)

    def test_fast_det_path_custom(self):
        rng = np.random.default_rng(8)
        chi = random_psd(rng, 30, scale=0.01)
        fam = NoiseFamily('custom', covariance=chi, theta0=0.3)
        for n, r in partition.p0_curve(fam, [1, 11, 30], 'det'):
            assert r.z == pytest.approx(partition.z_determinant(fam.model(n)).z, rel=1e-11)

    def test_incompatible(self):
        fam = NoiseFamily('custom', covariance=np.eye(3) * 0.01)
        with pytest.raises(DomainError):
            partition.p0_curve(fam, [2], 'exact')
        with pytest.raises(DomainError):
            partition.p0_curve(fam, [4], 'det')
        with pytest.raises(DomainError):
            partition.p0_curve(fam, [2], 'simulated')
        with pytest.raises(CapacityError):
            partition.p0_curve(NoiseFamily('quasistatic', beta=0.1), [20], 'bruteforce')


class TestCurveFile:

    def test_round_trip(self, tmp_path):
        curve = partition.p0_curve(NoiseFamily('quasistatic', beta=0.01), [1, 10, 100], 'det')
        p = tmp_path / 'curve.csv'
        partition.write_curve_csv(curve, p)
        lines = p.read_text().splitlines()
        assert lines[0] == 'N,P0,Z,method,error_estimate'
        ns, p0 = partition.read_curve_csv(p)
        np.testing.assert_array_equal(ns, [1, 10, 100])
        np.testing.assert_array_equal(p0, [r.p0 for _, r in curve])

    def test_malformed(self, tmp_path):
        p = tmp_path / 'bad.csv'
        p.write_text('N,P0\n1,0.9\n2,abc\n')
        with pytest.raises(ValidationError, match=':3:'):
            partition.read_curve_csv(p)
        p.write_text('x,y\n')
        with pytest.raises(ValidationError, match=':1:'):
            partition.read_curve_csv(p)
