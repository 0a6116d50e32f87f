import math

import numpy as np
import pytest

from rbising import twirl
from rbising.errors import DomainError


class TestQubitMap:

    @pytest.mark.parametrize('theta, expected', [(0.0, 1.0), (math.pi, -1 / 3),
                                                 (2 * math.pi / 3, 0.0)])
    def test_special_angles(self, theta, expected):
        m = twirl.r_matrix_qubit(theta)
        assert m.dim == 2 and m.trivial_block == 1.0
        assert m.adjoint_scalar == pytest.approx(expected, abs=1e-15)

    def test_matrix(self):
        r = twirl.r_matrix_qubit(0.7).matrix()
        np.testing.assert_allclose(np.diag(r), [1.0] + [(1 + 2 * math.cos(0.7)) / 3] * 3)


class TestAdjointScalar:

    @pytest.mark.parametrize('theta', np.linspace(-3, 3, 7))
    def test_qubit_convention(self, theta):
        assert twirl.adjoint_scalar_d(2, twirl.qubit_phases(theta)) == pytest.approx(
            twirl.r_matrix_qubit(theta).adjoint_scalar, abs=1e-15)

    @pytest.mark.parametrize('d', range(2, 7))
    def test_zero_phases(self, d):
        assert twirl.adjoint_scalar_d(d, np.zeros(d)) == 1.0

    def test_even_in_single_phase(self):
        for eps in (1e-3, 0.1):
            up = twirl.adjoint_scalar_d(3, [eps, 0, 0])
            down = twirl.adjoint_scalar_d(3, [-eps, 0, 0])
            assert up == pytest.approx(down, abs=1e-15)
            # four of the eight weights involve the perturbed state
            assert 1 - up == pytest.approx(eps ** 2 / 4, rel=1e-2)

    def test_character_formula(self):
        rng = np.random.default_rng(0)
        for d in (2, 3, 5):
            ph = rng.uniform(-np.pi, np.pi, d)
            tr = np.sum(np.exp(1j * ph))
            assert twirl.adjoint_scalar_d(d, ph) == pytest.approx(
                (abs(tr) ** 2 - 1) / (d * d - 1), abs=1e-14)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(1)
        for d in (2, 4, 6):
            ph = rng.normal(size=d)
            assert twirl.adjoint_scalar_d(d, ph + 1.234) == pytest.approx(
                twirl.adjoint_scalar_d(d, ph), abs=1e-14)

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            twirl.adjoint_scalar_d(3, [0.0, 0.0])


class TestHaarVerify:

    def test_qubit(self):
        est, err = twirl.haar_verify(2, twirl.qubit_phases(0.7), 100_000, seed=0)
        assert abs(est - (1 + 2 * math.cos(0.7)) / 3) <= 4 * err

    def test_identity_is_exact(self):
        est, err = twirl.haar_verify(3, np.zeros(3), 1000, seed=0)
        assert (est, err) == (1.0, 0.0)

    def test_vanishing_scalar(self):
        est, err = twirl.haar_verify(2, twirl.qubit_phases(2 * math.pi / 3), 100_000, seed=3)
        assert abs(est) <= 4 * err

    def test_reproducible(self):
        ph = [0.1, 0.5, -0.4]
        assert twirl.haar_verify(3, ph, 40_000, 2) == twirl.haar_verify(3, ph, 40_000, 2,
                                                                      workers=2)

    @pytest.mark.parametrize('args', [(1, [0.0], 1000), (2, [0.0, 0.0], 99)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            twirl.haar_verify(*args)
