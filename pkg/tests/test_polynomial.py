import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatcube.polynomial import (
    BudgetError,
    IdenticallyZeroRestriction,
    MonomialPlan,
    PolynomialFormatError,
    RootCountWarning,
    SparsePolynomial,
    all_monomials,
    count_circle_roots,
    evaluate,
    fischer_norm_squared,
    harmonic_decompose,
    parse_polynomial_json,
    polynomial_to_json,
    restrict_to_great_circle,
    rotate_polynomial,
    sphere_monomial_moment,
    sphere_norm_squared,
)
from heatcube.special_functions import GegenbauerBasis, harmonic_dimension
from heatcube.sphere import haar_rotation, make_rng, sample_tangent, sample_uniform_sphere


def unit_vectors(rng, n, size):
    g = rng.standard_normal((size, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def test_canonical_form_and_degree():
    p = SparsePolynomial(3, {(1, 0, 0): 1.0, (0, 2, 1): 2.0, (0, 0, 0): 0.0})
    assert len(p) == 2 and p.degree == 3
    q = p - p
    assert q.is_zero and len(q) == 0
    with pytest.raises(ValueError):
        SparsePolynomial(2, {(1, -1): 1.0})
    with pytest.raises(ValueError):
        SparsePolynomial(2, {(1, 0, 0): 1.0})


def test_evaluate_spot_values():
    assert evaluate(SparsePolynomial.constant(4, 3.0), np.ones(4)) == 3.0
    p = SparsePolynomial(3, {(1, 1, 0): 1.0})
    assert evaluate(p, [1.0, -1.0, 5.0]) == -1.0
    circle = SparsePolynomial(3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 0): -1.0})
    theta = 0.7
    assert evaluate(circle, [math.cos(theta), math.sin(theta), 0.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        evaluate(p, [1.0, 2.0])


def test_arithmetic_matches_pointwise():
    rng = np.random.default_rng(1)
    p = SparsePolynomial.random(3, 2, rng)
    q = SparsePolynomial.random(3, 3, rng)
    x = rng.standard_normal((20, 3))
    assert np.allclose((p * q).evaluate_many(x), p.evaluate_many(x) * q.evaluate_many(x))
    assert np.allclose((p + q).evaluate_many(x), p.evaluate_many(x) + q.evaluate_many(x))
    assert np.allclose((p**3).evaluate_many(x), p.evaluate_many(x) ** 3)
    assert np.allclose((2.5 * p).evaluate_many(x), 2.5 * p.evaluate_many(x))


def test_monomial_plan_matches_direct_sum():
    rng = np.random.default_rng(2)
    p = SparsePolynomial.random(6, 4, rng)
    x = rng.standard_normal((1000, 6))
    direct = np.array([evaluate(p, row) for row in x[:50]])
    assert np.allclose(MonomialPlan(p).evaluate(x)[:50], direct, rtol=1e-12, atol=1e-12)
    assert np.allclose(MonomialPlan(p).evaluate(x, chunk=7), MonomialPlan(p).evaluate(x))


def test_random_polynomial_covers_every_monomial():
    p = SparsePolynomial.random(3, 2, np.random.default_rng(0))
    assert set(p.terms) == set(all_monomials(3, 2))
    assert len(all_monomials(4, 3)) == math.comb(7, 3)


def test_rotation_is_composition():
    rng = np.random.default_rng(4)
    n = 5
    p = SparsePolynomial.random(n, 3, rng)
    R = haar_rotation(n, make_rng(1))
    q = rotate_polynomial(p, R)
    x = rng.standard_normal((30, n))
    # (Rp)(x) = p(R^T x)
    assert np.allclose(q.evaluate_many(x), p.evaluate_many(x @ R.matrix), atol=1e-10)
    with pytest.raises(ValueError):
        rotate_polynomial(p, 2 * np.eye(n))


def test_rotation_budget_guard():
    p = SparsePolynomial(14, {tuple([2] * 7 + [0] * 7): 1.0})
    with pytest.raises(BudgetError):
        rotate_polynomial(p**2, np.eye(14))


@pytest.mark.parametrize("n", [3, 5, 8])
def test_rotation_preserves_sphere_norm(n):
    rng = np.random.default_rng(n)
    p = SparsePolynomial.random(n, 3, rng)
    q = rotate_polynomial(p, haar_rotation(n, make_rng(n, 2)))
    assert sphere_norm_squared(q) == pytest.approx(sphere_norm_squared(p), rel=1e-9)


def test_sphere_moments_against_monte_carlo():
    rng = np.random.default_rng(5)
    n = 4
    x = unit_vectors(rng, n, 400_000)
    for a in [(2, 0, 0, 0), (2, 2, 0, 0), (4, 0, 0, 0), (2, 2, 2, 0), (1, 1, 0, 0)]:
        vals = np.prod(x ** np.array(a), axis=1)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - sphere_monomial_moment(a)) <= 4 * se + 1e-15
    assert sphere_monomial_moment((2, 0, 0, 0)) == pytest.approx(1 / 4)
    assert sphere_monomial_moment((1, 0, 0, 0)) == 0.0


def test_decomposition_of_simple_cases():
    n = 4
    r2 = SparsePolynomial.norm_squared(n)
    dec = harmonic_decompose(r2)
    assert dec.degrees == [0]
    x1 = SparsePolynomial.variable(n, 0)
    dec = harmonic_decompose(x1 * x1)
    # x_1^2 = (x_1^2 - |x|^2/n) + |x|^2/n
    assert dec.norm_by_degree()[0] == pytest.approx(1 / n**2)
    assert dec.norm_by_degree()[2] == pytest.approx(sphere_norm_squared(x1 * x1) - 1 / n**2)


@pytest.mark.parametrize("n,d", [(3, 4), (5, 3), (8, 2), (6, 4)])
def test_decomposition_invariants(n, d):
    rng = np.random.default_rng(10 * n + d)
    p = SparsePolynomial.random(n, d, rng)
    dec = harmonic_decompose(p)
    x = unit_vectors(rng, n, 100)
    assert np.allclose(dec.total().evaluate_many(x), p.evaluate_many(x), atol=1e-9)
    assert sum(dec.norms) == pytest.approx(sphere_norm_squared(p), rel=1e-9)
    for (ell, part), norm in zip(dec.parts, dec.norms):
        assert set(part.homogeneous_components()) == {ell}
        lap = part.laplacian()
        assert lap.max_abs_coeff() <= 1e-9 * max(part.max_abs_coeff(), 1.0)
        # Fischer-norm route to the same sphere norm
        assert fischer_norm_squared(part) == pytest.approx(norm, rel=1e-9)
        # spherical eigenfunction with eigenvalue -l(n + l - 2)
        lb = part.laplace_beltrami()
        assert np.allclose(lb.evaluate_many(x), -ell * (n + ell - 2) * part.evaluate_many(x), atol=1e-8)


def test_laplace_beltrami_of_non_harmonic():
    # on the sphere, Delta_S x_1^2 = 2 - 2n x_1^2
    n = 5
    x1 = SparsePolynomial.variable(n, 0)
    rng = np.random.default_rng(0)
    x = unit_vectors(rng, n, 10)
    lb = (x1 * x1).laplace_beltrami()
    assert np.allclose(lb.evaluate_many(x), 2 - 2 * n * x[:, 0] ** 2)


def test_zonal_harmonic_is_gegenbauer():
    # gamma_l(w . x) is a degree-l harmonic with unit sphere norm
    n, ell = 5, 3
    basis = GegenbauerBasis(n, ell)
    w = np.array([0.6, 0.0, 0.8, 0.0, 0.0])
    lin = SparsePolynomial.linear(w)
    coeffs = np.polynomial.polynomial.polyfit(np.linspace(-1, 1, 9), basis.eval_all(np.linspace(-1, 1, 9))[ell], ell)
    f = SparsePolynomial.constant(n, 0.0)
    for j, c in enumerate(coeffs):
        f = f + float(c) * lin**j
    dec = harmonic_decompose(f)
    norms = dec.norm_by_degree()
    assert norms.get(ell, 0.0) == pytest.approx(1.0, rel=1e-9)
    assert sum(v for k, v in norms.items() if k != ell) < 1e-18
    assert f(w) == pytest.approx(math.sqrt(harmonic_dimension(n, ell)))


def test_gegenbauer_reproducing_identity_monte_carlo():
    n, ell = 4, 2
    basis = GegenbauerBasis(n, ell)
    rng = np.random.default_rng(6)
    w = unit_vectors(rng, n, 1)[0]
    y = unit_vectors(rng, n, 1)[0]
    x = unit_vectors(rng, n, 400_000)
    vals = basis.eval_all(np.clip(x @ w, -1, 1))[ell] * basis.eval_all(np.clip(x @ y, -1, 1))[ell]
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    target = float(basis.eval_all(np.array(w @ y))[ell]) / math.sqrt(harmonic_dimension(n, ell))
    assert abs(vals.mean() - target) <= 3 * se


def test_fourier_form_matches_direct_evaluation():
    rng = np.random.default_rng(7)
    for n, d in [(3, 2), (5, 4), (8, 5)]:
        p = SparsePolynomial.random(n, d, rng)
        u = sample_uniform_sphere(n, rng)
        w = sample_tangent(u, rng)
        res = restrict_to_great_circle(p, u, w)
        theta = rng.uniform(0, 2 * math.pi, 50)
        pts = np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * w
        direct = p.evaluate_many(pts)
        assert np.allclose(res(theta), direct, atol=1e-10)
        assert np.allclose(res.eval_cos_sin(theta), direct, atol=1e-10)


def test_root_count_spot_values():
    n = 3
    e = np.eye(n)
    x1 = SparsePolynomial.variable(n, 0)
    assert count_circle_roots(restrict_to_great_circle(x1, e[0], e[1])) == 2
    # x_1 x_2 on the (1,2) circle: cos t sin t has 4 zeros
    assert count_circle_roots(restrict_to_great_circle(x1 * SparsePolynomial.variable(n, 1), e[0], e[1])) == 4
    # x_3 + 2 never vanishes on the (1,2) circle
    p = SparsePolynomial.variable(n, 2) + 2.0
    assert count_circle_roots(restrict_to_great_circle(p, e[0], e[1])) == 0
    with pytest.raises(IdenticallyZeroRestriction):
        count_circle_roots(restrict_to_great_circle(SparsePolynomial.variable(n, 2), e[0], e[1]))
    with pytest.raises(ValueError):
        restrict_to_great_circle(x1, e[0], e[0])


def test_root_bound_on_random_circles():
    rng = np.random.default_rng(8)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RootCountWarning)
        for _ in range(300):
            n = int(rng.integers(3, 11))
            d = int(rng.integers(1, 6))
            p = SparsePolynomial.random(n, d, rng)
            u = sample_uniform_sphere(n, rng)
            w = sample_tangent(u, rng)
            assert count_circle_roots(restrict_to_great_circle(p, u, w)) <= 2 * d


def test_json_round_trip_and_diagnostics():
    p = SparsePolynomial.random(3, 2, np.random.default_rng(0))
    q = parse_polynomial_json(polynomial_to_json(p))
    assert q.allclose(p, atol=0.0)
    bad = {
        "[": "line 1",
        "{}": "non-empty JSON array",
        "[]": "non-empty JSON array",
        '[{"exponents": [1, 0]}]': "term 0",
        '[{"exponents": [1, 0], "coeff": 1}, {"exponents": [1], "coeff": 2}]': "term 1: field 'exponents'",
        '[{"exponents": [1, -1], "coeff": 1}]': "negative",
        '[{"exponents": [1, 0.5], "coeff": 1}]': "term 0: field 'exponents'",
        '[{"exponents": [1, 0], "coeff": "x"}]': "term 0: field 'coeff'",
    }
    for text, fragment in bad.items():
        with pytest.raises(PolynomialFormatError, match=fragment):
            parse_polynomial_json(text)
    multi = '[\n{"exponents": [1, 0], "coeff": 1},\n{"exponents": [0, 1] "coeff": 2}\n]'
    with pytest.raises(PolynomialFormatError, match="line 3"):
        parse_polynomial_json(multi)
    assert json.loads(polynomial_to_json(p))[0].keys() == {"exponents", "coeff"}


coeffs = st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@st.composite
def polynomials(draw, max_n=5, max_d=3):
    n = draw(st.integers(3, max_n))
    d = draw(st.integers(0, max_d))
    monos = all_monomials(n, d)
    chosen = draw(st.lists(st.sampled_from(monos), min_size=1, max_size=6, unique=True))
    return SparsePolynomial(n, {m: draw(coeffs) for m in chosen})


@settings(max_examples=40, deadline=None)
@given(p=polynomials(), seed=st.integers(0, 2**31))
def test_parseval_and_resum_property(p, seed):
    dec = harmonic_decompose(p)
    assert sum(dec.norms) == pytest.approx(sphere_norm_squared(p), rel=1e-9, abs=1e-12)
    x = unit_vectors(np.random.default_rng(seed), p.n, 20)
    assert np.allclose(dec.total().evaluate_many(x), p.evaluate_many(x), atol=1e-9 * max(1, p.max_abs_coeff()))


@settings(max_examples=30, deadline=None)
@given(p=polynomials(max_d=4), seed=st.integers(0, 2**31))
def test_rotation_invariance_property(p, seed):
    R = haar_rotation(p.n, make_rng(seed))
    assert sphere_norm_squared(rotate_polynomial(p, R)) == pytest.approx(sphere_norm_squared(p), rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(p=polynomials(max_d=4), seed=st.integers(0, 2**31))
def test_circle_root_bound_property(p, seed):
    rng = np.random.default_rng(seed)
    u = sample_uniform_sphere(p.n, rng)
    w = sample_tangent(u, rng)
    res = restrict_to_great_circle(p, u, w)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RootCountWarning)
            count = count_circle_roots(res)
    except IdenticallyZeroRestriction:
        return
    assert count <= 2 * p.degree
