from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pgg.errors import DomainError
from pgg.hamiltonian import (build_context, certify_hessian, certify_hessian_exact, eval_H, eval_H1, eval_H1_d,
                             eval_H1_dd, eval_H2, eval_H2_d, eval_H2_d_split, eval_H2_dd, eval_R, eval_R_prime,
                             hessian_grid, lemma_range, p_poly, q_poly, s_poly, sp_partial)
from pgg.model import ModelParams, eval_G, interior_fixed_point
from pgg.polynomial import RationalPoly, geometric_sum


@pytest.fixture(scope="module")
def ctx():
    return build_context(ModelParams(3, 5, 1))


def test_factorization_reference():
    p = ModelParams(3, 5, 1)
    P = p_poly(p)
    assert q_poly(p) == RationalPoly([1, -2, 1]) * P
    assert P.degree == 2
    assert P(Fraction(1)) == Fraction(-3, 5)
    for r in (Fraction(5, 2), Fraction(4), Fraction(11, 2)):
        assert p_poly(ModelParams(r, 6, Fraction(1, 2)))(Fraction(1)) == 0


def test_n3_closed_forms():
    p = ModelParams(Fraction(5, 2), 3, Fraction(1, 2))
    c = build_context(p)
    r = 2.5
    assert eval_R_prime(0.0, c) == pytest.approx(r / 6, abs=1e-15)
    z = np.linspace(0.01, 0.99, 50)
    assert np.allclose(eval_R_prime(z, c), (r / 6) / (1 + z), atol=1e-14)
    expected = (1 - r / 3) / z**2 + (r / 2 - 1) / (1 - z) ** 2 - (r / 6) / (1 + z) ** 2
    assert np.allclose(eval_H2_dd(z, c), expected, rtol=1e-11)
    assert np.all(expected > 0)
    ref = ModelParams(3, 3, 1, strict=False)
    assert eval_R_prime(0.0, build_context(ref)) == pytest.approx(0.5, abs=1e-15)


def test_n4_hessian_positive():
    for r in (2.2, 3.0, 3.9):
        c = build_context(ModelParams(r, 4, (r - 1) / 2))
        z = np.linspace(1e-4, 1 - 1e-4, 2000)
        assert np.all(eval_H2_dd(z, c) > 0)


def test_H1_values():
    p = ModelParams(3, 5, 1)
    assert eval_H1_d(0.5, p) == 0
    assert eval_H1(0.5, p) == pytest.approx(2 * np.log(2), abs=1e-15)
    f = (np.arange(10_000) + 0.5) / 10_000
    assert np.all(eval_H1_dd(f, p) > 0)
    assert np.all(eval_H1(f, p) >= eval_H1(0.5, p))
    for bad in (0.0, 1.0):
        with pytest.raises(DomainError):
            eval_H1(bad, p)


def _central(fn, z, h):
    return (fn(z + h) - fn(z - h)) / (2 * h)


@pytest.mark.parametrize("z", [0.1, 0.35, 0.7, 0.9])
def test_derivatives_second_order(ctx, z):
    exact1 = eval_H2_d(z, ctx)
    exact2 = eval_H2_dd(z, ctx)
    e1 = [abs(_central(lambda u: eval_H2(u, ctx), z, h) - exact1) for h in (1e-2, 1e-3)]
    e2 = [abs(_central(lambda u: eval_H2_d(u, ctx), z, h) - exact2) for h in (1e-2, 1e-3, 1e-4)]
    assert e1[1] < e1[0] / 50  # O(h^2): about 100x per decade
    assert e2[1] < e2[0] / 50 and e2[2] < e2[1] / 50
    h = 1e-4
    assert _central(lambda u: eval_H1(u, ctx.params), z, h) == pytest.approx(eval_H1_d(z, ctx.params), rel=1e-6)
    assert _central(lambda u: eval_H1_d(u, ctx.params), z, h) == pytest.approx(eval_H1_dd(z, ctx.params),
                                                                              rel=1e-6)


def test_split_and_quotient_forms_agree(ctx):
    z = (np.arange(1000) + 0.5) / 1000
    assert np.max(np.abs(eval_H2_d(z, ctx) - eval_H2_d_split(z, ctx))) < 1e-10
    p = ctx.params
    direct = -eval_G(z, p) / (z * (1 - z) * (1 - z ** (p.n - 1)))
    assert np.allclose(eval_H2_d(z, ctx), direct, rtol=1e-9)


def test_R_table_against_quadrature(ctx):
    for z in (0.05, 0.3, 0.77, 0.999):
        val, _ = quad(lambda s: eval_R_prime(s, ctx), 0, z, epsabs=1e-13)
        assert eval_R(z, ctx) - eval_R(1e-300, ctx) == pytest.approx(val, abs=1e-11)


def test_R_prime_bound(ctx):
    p = ctx.params
    P = p_poly(p)
    z = np.linspace(0, 1, 10_001)
    rp = eval_R_prime(z, ctx)
    direct = np.abs(P(z)) / geometric_sum(0, p.n - 2)(z)
    assert np.allclose(np.abs(rp), direct, atol=1e-15)
    assert abs(eval_R_prime(1.0, ctx)) == pytest.approx(abs(float(P(Fraction(1)))) / (p.n - 1), abs=1e-15)


def test_H2_calibration(ctx):
    z = (np.arange(10_000) + 0.5) / 10_000
    h2 = eval_H2(z, ctx)
    zs = interior_fixed_point(ctx.params).z
    assert h2.min() >= -1e-10
    assert abs(eval_H2(zs, ctx)) < 1e-10
    assert abs(eval_H2_d(zs, ctx)) < 1e-10


def test_H_minimum_and_structure(ctx):
    fs, zs = interior_fixed_point(ctx.params)
    g = (np.arange(100) + 0.5) / 100
    F, Zg = np.meshgrid(g, g)
    assert np.all(eval_H1(F, ctx.params) + eval_H2(Zg, ctx) >= eval_H((fs, zs), ctx) - 1e-12)
    assert eval_H((1e-6, zs), ctx) > eval_H((1e-3, zs), ctx) > eval_H((0.1, zs), ctx)
    d1 = eval_H((0.3, 0.2), ctx) - eval_H((0.6, 0.2), ctx)
    d2 = eval_H((0.3, 0.8), ctx) - eval_H((0.6, 0.8), ctx)
    assert d1 == pytest.approx(d2, abs=1e-13)
    with pytest.raises(DomainError):
        eval_H2(1.0, ctx)


def test_S_is_numerator_of_second_derivative(ctx):
    p = ctx.params
    S = s_poly(p)
    geo = RationalPoly([1] + [0] * (p.n - 2) + [-1])  # 1 - z^(N-1)
    z = np.linspace(0.05, 0.95, 37)
    assert np.allclose(S(z) / (z**2 * geo(z) ** 2), eval_H2_dd(z, ctx), rtol=1e-10)


@given(st.integers(3, 25), st.integers(1, 9))
def test_S_value_at_one(n, k):
    # S(z) = O(1 - z) fails in general; exact value is (r-2)(N-1)^2/2
    r = 2 + (n - 2) * Fraction(k, 10)
    assert s_poly(ModelParams(r, n, Fraction(1, 2)))(Fraction(1)) == (r - 2) * (n - 1) ** 2 / 2


def test_sp_partial_properties():
    for n, r in ((5, Fraction(3)), (8, Fraction(6)), (12, Fraction(9))):
        p = ModelParams(r, n, Fraction(1, 2))
        assert sp_partial(p)(Fraction(0)) == 1 - r / n
    p = ModelParams(Fraction(7, 2), 6, Fraction(1, 2))
    omitted = s_poly(p) - sp_partial(p)
    z = np.linspace(0, 1, 2001)
    assert np.all(omitted(z) >= -1e-14)


def test_certify_reference_cases():
    rep = certify_hessian(ModelParams(3, 5, 1), 10_000)
    assert rep.certified_positive and rep.lemma_range and rep.min_value > 0
    bad = certify_hessian(ModelParams(2, 20, 0.5, strict=False), 10_000)
    assert not bad.certified_positive and 0.6 <= bad.argmin_z <= 0.8 and not bad.lemma_range
    assert certify_hessian(ModelParams(2, 5, 0.5, strict=False), 10_000).certified_positive
    with pytest.raises(ValueError):
        certify_hessian(ModelParams(3, 5, 1), 500)
    row = rep.csv_row()
    assert list(row) == ["r", "N", "sigma", "grid_size", "min_value", "argmin_z", "certified", "lemma_range"]


def test_exact_certificate_matches_grid():
    assert certify_hessian_exact(ModelParams(3, 5, 1))
    assert not certify_hessian_exact(ModelParams(2, 20, 0.5, strict=False))
    rep = certify_hessian(ModelParams(Fraction(9, 2), 7, 1), 2000, exact=True)
    assert rep.exact_certified == rep.certified_positive


def test_hessian_grid_clusters_at_ends():
    g = hessian_grid(1000)
    assert g.min() < 1e-4 and g.max() > 1 - 1e-4
    assert np.all((g > 0) & (g < 1)) and np.all(np.diff(g) > 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 30), st.integers(1, 19))
def test_lemma_range_certifies(n, k):
    lo = max(Fraction(n, 3), Fraction(2))
    r = lo + (n - lo) * Fraction(k, 20)
    p = ModelParams(r, n, (r - 1) / 2)
    assert lemma_range(p)
    assert certify_hessian(p, 2000).certified_positive
