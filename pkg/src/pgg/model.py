"""The optional public goods game: parameters, incentive function, payoffs.

State variables are the loner fraction ``z`` and the cooperator fraction
among participants ``f``.  The incentive function

    G(z) = P_d - P_c = (1 - r/N) - (r/N)(z + ... + z^(N-2)) + (r - 1 - r/N) z^(N-1)

is always evaluated in this polynomial form so that z = 1 is regular.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InternalError, InvalidParams, NoRoot
from .polynomial import RationalPoly

SCAN_POINTS = 1000
ROOT_TOL = 1e-14


def _as_number(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


@dataclass(frozen=True)
class ModelParams:
    """Game and diffusion parameters.

    ``r`` and ``sigma`` may be given as ``Fraction`` (or decimal strings) for
    the exact identity checks; dynamics always use their float values.
    ``strict=False`` admits 0 < r <= N, needed to study the r = 2 limit.
    """

    r: object
    n: int
    sigma: object
    d_f: float = 0.1
    d_z: float = 0.1
    strict: bool = field(default=True, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "r", _as_number(self.r))
        object.__setattr__(self, "sigma", _as_number(self.sigma))
        n, r, s = self.n, self.r_exact, self.sigma_exact
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 3:
            raise InvalidParams(f"N must be an integer >= 3, got {n!r}")
        object.__setattr__(self, "n", int(n))
        if not (self.d_f > 0 and self.d_z > 0):
            raise InvalidParams("diffusion coefficients must be positive")
        if self.strict:
            if not 2 < r < n:
                raise InvalidParams(f"need 2 < r < N, got r={float(r)}, N={n}")
            if not 0 < s < r - 1:
                raise InvalidParams(f"need 0 < sigma < r - 1, got sigma={float(s)}")
        else:
            if not 0 < r <= n:
                raise InvalidParams(f"relaxed mode needs 0 < r <= N, got r={float(r)}")
            if not s > 0:
                raise InvalidParams("sigma must be positive")

    @property
    def r_exact(self):
        return Fraction(self.r)

    @property
    def sigma_exact(self):
        return Fraction(self.sigma)

    @property
    def rf(self):
        return float(self.r)

    @property
    def sf(self):
        return float(self.sigma)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


class OdeState(NamedTuple):
    f: float
    z: float


def g_poly(params):
    """G as an exact polynomial of degree N - 1."""
    n, r = params.n, params.r_exact
    c = [1 - r / n] + [-r / n] * (n - 2) + [r - 1 - r / n]
    return RationalPoly(c)


def g_quotient_coeffs(params):
    """The polynomial sum_k b_k z^k = -G(z)/(1 - z), b_k = -1 + (r/N)(k+1)."""
    n, r = params.n, params.r_exact
    b = RationalPoly([-1 + r / n * (k + 1) for k in range(n - 1)])
    if RationalPoly([1, -1]) * b != -g_poly(params):
        raise InternalError("(1 - z) * B(z) != -G(z)")
    return b


def a_coeffs(params):
    """The coefficients a_j = r - 1 - j r / N for j = 1 .. N-1."""
    n, r = params.n, params.r_exact
    return [r - 1 - Fraction(j) * r / n for j in range(1, n)]


@lru_cache(maxsize=256)
def _float_poly(params):
    return np.array(g_poly(params).float_coeffs()[::-1])


def eval_G(z, params):
    """Floating-point G(z) by Horner's rule on the polynomial form."""
    coeffs = _float_poly(params)
    z = np.asarray(z, dtype=float)
    acc = np.zeros_like(z)
    for c in coeffs:
        acc = acc * z + c
    return acc if np.ndim(acc) else float(acc)


def eval_G_prime(z, params):
    return g_poly(params).derivative()(float(z))


def psi(z, n):
    """The z-factor z(1-z)(1-z^(N-1)) of the replicator speed."""
    return z * (1.0 - z) * (1.0 - z ** (n - 1))


def eval_phi(f, z, params):
    """phi(f, z) = f(1-f) z(1-z)(1-z^(N-1)), nonnegative on the unit square."""
    return f * (1.0 - f) * psi(z, params.n)


def round_payoffs(eta_c, c, params):
    """Single-round payoffs (P_c, P_d) with ``eta_c`` cooperators among N."""
    n = params.n
    if not 0 <= eta_c <= n:
        raise InvalidParams(f"eta_c must lie in [0, {n}], got {eta_c}")
    pool = params.rf * c * eta_c / n
    return pool - c, pool


def mixed_payoffs(x, z, params):
    """Expected payoffs (P_l, P_d, P_c) for cooperator share x, loner share z."""
    if z >= 1.0:
        raise DomainError("payoff formula is singular at z = 1")
    if x < 0 or z < 0 or x + z > 1 + 1e-15:
        raise DomainError(f"need x >= 0, z in [0, 1), x + z <= 1; got x={x}, z={z}")
    n, r, s = params.n, params.rf, params.sf
    geo = (1.0 - z**n) / (1.0 - z)
    p_d = s * z ** (n - 1) + r * x / (1.0 - z) * (1.0 - geo / n)
    p_c = p_d - eval_G(z, params)
    return s, p_d, p_c


def scan_sign_changes(params, points=SCAN_POINTS):
    """Brackets (a, b) in (0, 1) on which G changes sign."""
    zs = np.arange(1, points) / points
    s = np.sign(eval_G(zs, params))
    out = [(float(z), float(z)) for z in zs[s == 0]]  # exact zeros on a node
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    out += [(float(zs[i]), float(zs[i + 1])) for i in idx]
    return sorted(out)


def _bisect(fn, a, b, tol=ROOT_TOL):
    fa = fn(a)
    if fa == 0:
        return a
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = fn(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


@lru_cache(maxsize=256)
def interior_fixed_point(params):
    """The interior equilibrium (sigma/(r-1), z*) with G(z*) = 0."""
    brackets = scan_sign_changes(params)
    if not brackets:
        raise NoRoot(f"G has no sign change on (0, 1) for r={params.rf}, N={params.n}")
    a, b = brackets[0]
    z_star = _bisect(lambda z: eval_G(z, params), a, b)
    return OdeState(params.sf / (params.rf - 1.0), z_star)
