"""Prefix solves for symmetric positive-definite Toeplitz matrices.

The Levinson recursion visits the leading ``k x k`` blocks in order, so a
single pass yields the log-determinant of every leading block together with
the solution of every prefix system. That is exactly what a fidelity curve
over many sequence lengths needs, at O(N^2) cost and O(N) memory.
"""
import numpy as np

from .errors import NumericalError


def levinson_prefix(col, rhs=None):
    """Run the Levinson recursion on ``T = toeplitz(col)``.

    Parameters
    ----------
    col : (N,) array_like
        First column of a symmetric positive-definite Toeplitz matrix.
    rhs : (N,) array_like, optional
        Right-hand side. When given, ``b_k . x_k`` is reported for every
        leading block, where ``T_k x_k = b_k``.

    Returns
    -------
    logdet : (N,) ndarray
        ``logdet[k-1] = log|T_k|``.
    quad : (N,) ndarray or None
        ``quad[k-1] = b_k^T T_k^{-1} b_k`` if ``rhs`` was given.

    Notes
    -----
    Follows Golub & Van Loan, Algorithms 4.7.1/4.7.2, applied to the
    unit-diagonal matrix ``T / col[0]``.
    """
    col = np.asarray(col, dtype=float)
    n = col.size
    r0 = col[0]
    if not r0 > 0:
        raise NumericalError("Toeplitz matrix is not positive definite (t0 <= 0)")
    r = col[1:] / r0
    logdet = np.empty(n)
    logdet[0] = np.log(r0)
    quad = None
    if rhs is not None:
        b = np.asarray(rhs, dtype=float) / r0
        quad = np.empty(n)
        x = np.empty(n)
        x[0] = b[0]
        quad[0] = b[0] * x[0] * r0
    if n == 1:
        return logdet, quad

    y = np.empty(n)
    y[0] = -r[0]
    alpha = -r[0]
    beta = 1.0
    for k in range(1, n):
        beta = (1.0 - alpha * alpha) * beta
        if not beta > 0:
            raise NumericalError(
                f"Toeplitz matrix lost positive definiteness at order {k + 1}")
        logdet[k] = logdet[k - 1] + np.log(r0 * beta)
        if rhs is not None:
            mu = (b[k] - r[:k] @ x[k - 1::-1]) / beta
            x[:k] += mu * y[k - 1::-1]
            x[k] = mu
            quad[k] = (b[:k + 1] @ x[:k + 1]) * r0
        if k < n - 1:
            alpha = -(r[k] + r[:k] @ y[k - 1::-1]) / beta
            y[:k] += alpha * y[k - 1::-1]
            y[k] = alpha
    return logdet, quad
