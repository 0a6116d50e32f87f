import numpy as np
import pytest
from scipy import linalg as sla

from rbising.errors import NumericalError
from rbising.toeplitz import levinson_prefix


def _dense_prefix(col, rhs):
    t = sla.toeplitz(col)
    n = col.size
    logdet = [np.linalg.slogdet(t[:k, :k])[1] for k in range(1, n + 1)]
    quad = [rhs[:k] @ np.linalg.solve(t[:k, :k], rhs[:k]) for k in range(1, n + 1)]
    return np.array(logdet), np.array(quad)


class TestLevinson:

    @pytest.mark.parametrize('seed', range(5))
    def test_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        # exponentially decaying correlations plus a diagonal shift are SPD
        col = np.exp(-np.arange(n) * rng.uniform(0.05, 1.0)) * rng.uniform(0.5, 2.0)
        col[0] += rng.uniform(0.1, 1.0)
        rhs = rng.standard_normal(n)
        logdet, quad = levinson_prefix(col, rhs)
        ref_ld, ref_q = _dense_prefix(col, rhs)
        np.testing.assert_allclose(logdet, ref_ld, rtol=1e-11, atol=1e-11)
        np.testing.assert_allclose(quad, ref_q, rtol=1e-9)

    def test_rank_one_update(self):
        n, beta, c = 50, 0.01, 2.0 / 3.0
        col = np.full(n, c * 2 * beta)
        col[0] += 1.0
        logdet, quad = levinson_prefix(col, np.ones(n))
        k = np.arange(1, n + 1)
        np.testing.assert_allclose(np.exp(logdet), 1 + 4 * k * beta / 3, rtol=1e-12)
        np.testing.assert_allclose(quad, k / (1 + 4 * k * beta / 3), rtol=1e-12)

    def test_without_rhs(self):
        logdet, quad = levinson_prefix(np.array([2.0, 0.5]))
        assert quad is None
        assert logdet[-1] == pytest.approx(np.log(4.0 - 0.25))

    def test_single(self):
        logdet, quad = levinson_prefix([3.0], [2.0])
        assert logdet[0] == pytest.approx(np.log(3.0))
        assert quad[0] == pytest.approx(4.0 / 3.0)

    @pytest.mark.parametrize('col', [[0.0, 0.0], [1.0, 1.5], [1.0, 1.0, 1.0]])
    def test_not_positive_definite(self, col):
        with pytest.raises(NumericalError):
            levinson_prefix(col)
