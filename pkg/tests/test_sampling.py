import numpy as np
import pytest

from rbising import sampling
from rbising.errors import ValidationError


class TestGaussianFactor:

    def test_reconstructs_covariance(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 5))
        c = a @ a.T
        f = sampling.gaussian_factor(c)
        np.testing.assert_allclose(f @ f.T, c, atol=1e-12)

    def test_drops_null_modes(self):
        c = np.full((4, 4), 0.02)
        f = sampling.gaussian_factor(c)
        assert f.shape == (4, 1)
        np.testing.assert_allclose(f @ f.T, c, atol=1e-15)

    def test_zero_matrix(self):
        assert sampling.gaussian_factor(np.zeros((3, 3))).shape == (3, 0)

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            sampling.gaussian_factor(np.diag([1.0, -0.1]))


class TestMcMean:

    def test_independent_of_workers_and_chunking_contract(self):
        def chunk(rng, size):
            return rng.standard_normal(size)

        a = sampling.mc_mean(chunk, 100_000, seed=5)
        b = sampling.mc_mean(chunk, 100_000, seed=5, workers=4)
        assert a == b

    def test_merge_matches_direct(self):
        def chunk(rng, size):
            return rng.uniform(size=size)

        mean, err = sampling.mc_mean(chunk, 5000, seed=1, chunk_size=700)
        vals = np.concatenate([sampling.chunk_rng(1, i).uniform(size=min(700, 5000 - 700 * i))
                               for i in range(8)])
        assert mean == pytest.approx(vals.mean(), rel=1e-13)
        assert err == pytest.approx(vals.std(ddof=1) / np.sqrt(vals.size), rel=1e-10)

    def test_constant_values(self):
        mean, err = sampling.mc_mean(lambda rng, size: np.full(size, 0.25), 1000, seed=0)
        assert (mean, err) == (0.25, 0.0)


class TestHaar:

    def test_unitary(self):
        u = sampling.haar_unitaries(np.random.default_rng(0), 3, 50)
        eye = np.broadcast_to(np.eye(3), u.shape)
        np.testing.assert_allclose(u @ np.conj(np.swapaxes(u, 1, 2)), eye, atol=1e-12)

    def test_second_moment(self):
        # E|U_00|^2 = 1/d and E|U_00|^4 = 2/(d(d+1)) under Haar measure
        d = 3
        u = sampling.haar_unitaries(np.random.default_rng(7), d, 200_000)
        x = np.abs(u[:, 0, 0]) ** 2
        assert x.mean() == pytest.approx(1 / d, abs=4 * x.std() / np.sqrt(x.size))
        y = x ** 2
        assert y.mean() == pytest.approx(2 / (d * (d + 1)), abs=4 * y.std() / np.sqrt(y.size))
