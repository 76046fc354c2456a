"""Tridiagonal solves for the implicit diffusion step.

``thomas`` is the textbook forward-elimination/back-substitution sweep.
``FactoredTridiagonal`` factors a fixed matrix once with LAPACK (gttrf) and
reuses the factors for every right-hand side (gttrs); the time stepper uses
it because the Crank-Nicolson matrix does not change between steps.
"""

import numpy as np
from scipy.linalg import lapack

from .errors import SolveFailure


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system without pivoting.

    ``lower[i]`` multiplies x[i] in row i+1 and ``upper[i]`` multiplies x[i+1]
    in row i, so both have length n-1.
    """
    n = len(diag)
    c = np.empty(n - 1)
    d = np.empty(n)
    beta = diag[0]
    if beta == 0:
        raise SolveFailure("zero pivot in row 0")
    c[0] = upper[0] / beta if n > 1 else 0.0
    d[0] = rhs[0] / beta
    for i in range(1, n):
        beta = diag[i] - lower[i - 1] * c[i - 1]
        if beta == 0:
            raise SolveFailure(f"zero pivot in row {i}")
        if i < n - 1:
            c[i] = upper[i] / beta
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / beta
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class FactoredTridiagonal:
    def __init__(self, lower, diag, upper):
        lower, diag, upper = (np.asarray(a, float) for a in (lower, diag, upper))
        self.shape = (len(diag), len(diag))
        self._small = None
        if len(diag) < 3:
            # the LAPACK wrapper rejects the empty second superdiagonal of n < 3
            a = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
            if np.linalg.det(a) == 0:
                raise SolveFailure("singular tridiagonal matrix")
            self._small = a
            return
        dl, d, du, du2, ipiv, info = lapack.dgttrf(lower, diag, upper)
        if info != 0:
            raise SolveFailure(f"singular tridiagonal matrix (gttrf info={info})")
        self._factors = (dl, d, du, du2, ipiv)

    def solve(self, rhs):
        if self._small is not None:
            return np.linalg.solve(self._small, rhs)
        x, info = lapack.dgttrs(*self._factors, rhs)
        if info != 0:
            raise SolveFailure(f"gttrs failed with info={info}")
        return x


def neumann_laplacian_bands(n, dx):
    """Bands of the cell-centred Laplacian with reflective ghost cells."""
    inv = 1.0 / dx**2
    diag = np.full(n, -2.0 * inv)
    diag[0] = diag[-1] = -inv
    off = np.full(n - 1, inv)
    return off, diag, off.copy()


def apply_tridiagonal(lower, diag, upper, x):
    y = diag * x
    y[:-1] += upper * x[1:]
    y[1:] += lower * x[:-1]
    return y
