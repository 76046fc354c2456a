"""Dense univariate polynomials with exact rational coefficients.

A polynomial c_0 + c_1 z + ... + c_n z^n is stored as the tuple
(c_0, ..., c_n) of ``fractions.Fraction`` with the leading coefficient
nonzero; the zero polynomial is the empty tuple.

The operators +, -, *, //, % and divmod are overloaded; calling a
polynomial evaluates it (exactly for int/Fraction arguments, in floating
point for float or numpy arguments).
"""

from fractions import Fraction
from numbers import Rational

import numpy as np


def _frac(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)  # exact binary value of the float
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot convert {type(c).__name__} to an exact rational")


def _trim(coeffs):
    n = len(coeffs)
    while n and coeffs[n - 1] == 0:
        n -= 1
    return tuple(coeffs[:n])


class RationalPoly:
    """Immutable polynomial over Q."""

    __slots__ = ("_c",)

    def __init__(self, coeffs=()):
        self._c = _trim([_frac(c) for c in coeffs])

    @classmethod
    def monomial(cls, k, c=1):
        return cls([0] * k + [c])

    @classmethod
    def constant(cls, c):
        return cls([c])

    @property
    def coeffs(self):
        return self._c

    @property
    def degree(self):
        """Index of the leading coefficient; ``-inf`` for the zero polynomial."""
        return len(self._c) - 1 if self._c else float("-inf")

    def __getitem__(self, k):
        if k < 0:
            raise IndexError("negative coefficient index")
        return self._c[k] if k < len(self._c) else Fraction(0)

    def __len__(self):
        return len(self._c)

    def __bool__(self):
        return bool(self._c)

    def __eq__(self, other):
        if isinstance(other, RationalPoly):
            return self._c == other._c
        if isinstance(other, (int, Fraction)):
            return self._c == RationalPoly([other])._c
        return NotImplemented

    def __hash__(self):
        return hash(self._c)

    def __repr__(self):
        return f"RationalPoly({[str(c) for c in self._c]})"

    @staticmethod
    def _coerce(other):
        if isinstance(other, RationalPoly):
            return other
        return RationalPoly([other])

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self._c, other._c
        if len(a) < len(b):
            a, b = b, a
        return RationalPoly([x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly([-c for c in self._c])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self._c, other._c
        if not a or not b:
            return RationalPoly()
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return RationalPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = RationalPoly([1])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __divmod__(self, other):
        other = self._coerce(other)
        if not other:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self._c)
        d = other._c
        lead = d[-1]
        if len(rem) < len(d):
            return RationalPoly(), self
        quot = [Fraction(0)] * (len(rem) - len(d) + 1)
        for k in range(len(quot) - 1, -1, -1):
            q = rem[k + len(d) - 1] / lead
            quot[k] = q
            if q:
                for j, c in enumerate(d):
                    rem[k + j] -= q * c
        return RationalPoly(quot), RationalPoly(rem[: len(d) - 1])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other, error=ArithmeticError):
        """Quotient of an exact division; raises ``error`` on a nonzero remainder."""
        q, rem = divmod(self, other)
        if rem:
            raise error(f"division leaves remainder {rem!r}")
        return q

    def __call__(self, z):
        """Horner evaluation; exact for rationals, vectorised for arrays."""
        if isinstance(z, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self._c):
                acc = acc * z + c
            return acc
        if not isinstance(z, float):
            z = np.asarray(z, dtype=float)
        acc = 0.0 * z
        for c in reversed(self.float_coeffs()):
            acc = acc * z + c
        return acc

    def float_coeffs(self):
        return [float(c) for c in self._c]

    def derivative(self):
        return RationalPoly([k * c for k, c in enumerate(self._c)][1:])

    def compose_linear(self, a, b):
        """Return the polynomial w -> p(a + b*w) (Taylor shift and scaling)."""
        a, b = _frac(a), _frac(b)
        lin = RationalPoly([a, b])
        out = RationalPoly()
        for c in reversed(self._c):
            out = out * lin + c
        return out

    def coefficient_sum(self):
        return sum(self._c, Fraction(0))

    def sign_changes(self):
        """Number of sign changes in the coefficient sequence (zeros skipped)."""
        signs = [c > 0 for c in self._c if c != 0]
        return sum(1 for s, t in zip(signs, signs[1:]) if s != t)

    def sturm_sequence(self):
        seq = [self, self.derivative()]
        while seq[-1]:
            rem = -(seq[-2] % seq[-1])
            if not rem:
                break
            seq.append(rem)
        return seq

    def count_roots(self, a, b):
        """Number of distinct real roots in the half-open interval (a, b].

        Sturm's theorem, evaluated in exact arithmetic at rational endpoints.
        """
        if not self:
            raise ValueError("zero polynomial has infinitely many roots")
        a, b = _frac(a), _frac(b)
        seq = self.sturm_sequence()

        def variations(x):
            vals = [p(x) for p in seq]
            signs = [v > 0 for v in vals if v != 0]
            return sum(1 for s, t in zip(signs, signs[1:]) if s != t)

        return variations(a) - variations(b)


Z = RationalPoly([0, 1])
ONE = RationalPoly([1])


def geometric_sum(lo, hi):
    """The polynomial z^lo + z^(lo+1) + ... + z^hi (zero if hi < lo)."""
    if hi < lo:
        return RationalPoly()
    return RationalPoly([0] * lo + [1] * (hi - lo + 1))
