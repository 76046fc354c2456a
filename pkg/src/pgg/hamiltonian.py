"""Hamiltonian H(f, z) = H1(f) + H2(z) of the reduced replicator system.

    H1(f) = -sigma log f - (r - 1 - sigma) log(1 - f)
    H2(z) = -(1 - r/N) log z - (r/2 - 1) log(1 - z) + R(z)

R has no elementary closed form; its derivative is the bounded rational
function R'(z) = -P(z) / (1 + z + ... + z^(N-2)), where P comes from the
exact factorisation Q(z) = (1 - z)^2 P(z).  R itself is tabulated once per
context; every derivative-level quantity uses closed forms.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, FactorizationError, NoRoot
from .model import g_quotient_coeffs, interior_fixed_point
from .polynomial import RationalPoly, geometric_sum

R_TABLE_NODES = 2048
CALIBRATION_POINTS = 10_000


def q_poly(params):
    n, r = params.n, params.r_exact
    c = [Fraction(0)] * n
    c[0] = r / 2 * (1 - Fraction(4, n))
    for j in range(1, n - 2):
        c[j] = -r / n
    c[n - 2] += r * (1 - Fraction(2, n))
    c[n - 1] += -r / 2 * (1 - Fraction(2, n))
    return RationalPoly(c)


def p_poly(params):
    """P with Q = (1 - z)^2 P; raises FactorizationError on a remainder."""
    return q_poly(params).exact_div(RationalPoly([1, -2, 1]), FactorizationError)


def s_poly(params):
    """Numerator S of H2'' = S / (z^2 (1 - z^(N-1))^2)."""
    n = params.n
    b = g_quotient_coeffs(params).coeffs
    c = [Fraction(0)] * (2 * n - 2)
    for k in range(1, n - 1):
        c[k] += b[k] * (k - 1)
        c[n + k - 1] += b[k] * (n - k)
    c[0] -= b[0]
    c[n - 1] += b[0] * n
    return RationalPoly(c)


def sp_partial(params):
    """Six-term partial sum of S used as a sufficient positivity condition.

    The terms are distinct monomials only for N >= 5; for smaller N the
    formula is still evaluated as written.
    """
    n = params.n
    b = g_quotient_coeffs(params)
    m = RationalPoly.monomial
    terms = [
        m(n - 2, b[n - 2] * (n - 3)),
        m(n - 3, b[n - 3] * (n - 4)),
        m(n - 1, b[0] * n) - b[0],
        m(n, b[1] * (n - 1)),
        m(2 * n - 3, 2 * b[n - 2]),
        m(2 * n - 4, 3 * b[n - 3]),
    ]
    return sum(terms, RationalPoly())


def lemma_range(params):
    """Whether max(N/3, 2) < r < N, the sufficient range for H2'' > 0."""
    r, n = params.r_exact, params.n
    return max(Fraction(n, 3), Fraction(2)) < r < n


def _horner(coeffs, x):
    acc = np.zeros_like(x)
    for c in coeffs:
        acc = acc * x + c
    return acc


class _SecondDerivative:
    """Float evaluator of H2'' that avoids cancellation near z = 1.

    Near 1 the numerator is evaluated in the shifted variable w = 1 - z,
    using S(1 - w) expanded exactly.
    """

    def __init__(self, params):
        s = s_poly(params)
        self.low = np.array(s.float_coeffs()[::-1])
        self.high = np.array(s.compose_linear(1, -1).float_coeffs()[::-1])
        self.geo = np.array(geometric_sum(0, params.n - 2).float_coeffs()[::-1])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        w = 1.0 - z
        num = np.where(z < 0.5, _horner(self.low, z), _horner(self.high, w))
        den = z * w * _horner(self.geo, z)
        return num / (den * den)


@lru_cache(maxsize=512)
def _h2dd_evaluator(params):
    return _SecondDerivative(params)


@dataclass(frozen=True, eq=False)
class HamiltonianContext:
    params: object
    p_poly: RationalPoly
    q_poly: RationalPoly
    c_R: float
    r_nodes: np.ndarray
    r_values: np.ndarray
    r_interp: object
    _b: np.ndarray
    _p: np.ndarray
    _geo: np.ndarray


def _r_prime(z, p_coeffs, geo_coeffs):
    return -_horner(p_coeffs, z) / _horner(geo_coeffs, z)


@lru_cache(maxsize=128)
def build_context(params):
    """Factor Q exactly, tabulate R and calibrate its constant so min H2 = 0."""
    q = q_poly(params)
    p = p_poly(params)
    if p.degree != params.n - 3:
        raise FactorizationError(f"deg P = {p.degree}, expected {params.n - 3}")
    pc = np.array(p.float_coeffs()[::-1])
    gc = np.array(geometric_sum(0, params.n - 2).float_coeffs()[::-1])
    bc = np.array(g_quotient_coeffs(params).float_coeffs()[::-1])

    def rp(s):
        return float(_r_prime(np.float64(s), pc, gc))

    nodes = np.linspace(0.0, 1.0, R_TABLE_NODES)
    pieces = [quad(rp, a, b, epsabs=1e-15, epsrel=1e-14)[0] for a, b in zip(nodes[:-1], nodes[1:])]
    values = np.concatenate([[0.0], np.cumsum(pieces)])
    interp = CubicHermiteSpline(nodes, values, _r_prime(nodes, pc, gc))

    n, r = params.n, params.rf
    grid = (np.arange(CALIBRATION_POINTS) + 0.5) / CALIBRATION_POINTS
    try:
        grid = np.append(grid, interior_fixed_point(params).z)
    except NoRoot:
        pass
    raw = -(1 - r / n) * np.log(grid) - (r / 2 - 1) * np.log1p(-grid) + interp(grid)
    c_r = -float(raw.min())
    return HamiltonianContext(params, p, q, c_r, nodes, values, interp, bc, pc, gc)


def _check_open(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise DomainError(f"{name} must lie in the open interval (0, 1)")
    return x


def _out(v):
    return v if np.ndim(v) else float(v)


def eval_H1(f, params):
    f = _check_open(f, "f")
    s, r = params.sf, params.rf
    return _out(-s * np.log(f) - (r - 1 - s) * np.log1p(-f))


def eval_H1_d(f, params):
    f = _check_open(f, "f")
    s, r = params.sf, params.rf
    return _out(-s / f + (r - 1 - s) / (1 - f))


def eval_H1_dd(f, params):
    f = _check_open(f, "f")
    s, r = params.sf, params.rf
    return _out(s / f**2 + (r - 1 - s) / (1 - f) ** 2)


def eval_R(z, ctx):
    return _out(ctx.r_interp(np.asarray(z, dtype=float)) + ctx.c_R)


def eval_R_prime(z, ctx):
    return _out(_r_prime(np.asarray(z, dtype=float), ctx._p, ctx._geo))


def eval_H2(z, ctx):
    z = _check_open(z, "z")
    n, r = ctx.params.n, ctx.params.rf
    raw = -(1 - r / n) * np.log(z) - (r / 2 - 1) * np.log1p(-z)
    return _out(raw + ctx.r_interp(z) + ctx.c_R)


def eval_H2_d(z, ctx):
    """Quotient form -G / (z (1-z)(1-z^(N-1))), with -G/(1-z) expanded exactly."""
    z = _check_open(z, "z")
    return _out(_horner(ctx._b, z) / (z * (1 - z) * _horner(ctx._geo, z)))


def eval_H2_d_split(z, ctx):
    """Split form -(1-r/N)/z + (r/2-1)/(1-z) + R'(z)."""
    z = _check_open(z, "z")
    n, r = ctx.params.n, ctx.params.rf
    return _out(-(1 - r / n) / z + (r / 2 - 1) / (1 - z) + _r_prime(z, ctx._p, ctx._geo))


def eval_H2_dd(z, ctx):
    z = _check_open(z, "z")
    return _out(_h2dd_evaluator(ctx.params)(z))


def eval_H(state, ctx):
    f, z = state
    return eval_H1(f, ctx.params) + eval_H2(z, ctx)


@dataclass(frozen=True)
class HessianReport:
    params: object
    grid_size: int
    min_value: float
    argmin_z: float
    certified_positive: bool
    lemma_range: bool
    exact_certified: object = None

    def csv_row(self):
        p = self.params
        return {
            "r": p.rf,
            "N": p.n,
            "sigma": p.sf,
            "grid_size": self.grid_size,
            "min_value": self.min_value,
            "argmin_z": self.argmin_z,
            "certified": self.certified_positive,
            "lemma_range": self.lemma_range,
        }


def hessian_grid(grid_size):
    """Uniform interior nodes plus Chebyshev nodes clustered at both ends."""
    uniform = (np.arange(grid_size) + 0.5) / grid_size
    m = max(grid_size // 4, 16)
    cheb = 0.5 * (1.0 - np.cos(np.pi * np.arange(1, m) / m))
    return np.unique(np.concatenate([uniform, cheb]))


def certify_hessian(params, grid_size=10_000, exact=False):
    """Scan H2'' on a clustered grid; optionally add a Sturm-sequence certificate."""
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1000")
    z = hessian_grid(grid_size)
    vals = _h2dd_evaluator(params)(z)
    i = int(np.argmin(vals))
    report = HessianReport(
        params=params,
        grid_size=grid_size,
        min_value=float(vals[i]),
        argmin_z=float(z[i]),
        certified_positive=bool(vals[i] > 0),
        lemma_range=lemma_range(params),
        exact_certified=certify_hessian_exact(params) if exact else None,
    )
    return report


def certify_hessian_exact(params):
    """True iff S has no root in (0, 1) and is positive there (so H2'' > 0)."""
    s = s_poly(params)
    if s(Fraction(1, 2)) <= 0:
        return False
    roots = s.count_roots(0, 1)
    if s(Fraction(1)) == 0:
        roots -= 1
    return roots == 0
