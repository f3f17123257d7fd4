import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from similab.hermite import (
    BasisSpec,
    QuadratureRule,
    apply_similarity_operator,
    derivative_in_basis,
    eigenfunctions,
    eval_eigenfunction,
    gaussian,
    hermite_poly,
    multiply_by_xi,
    normalization,
    project_field,
    weighted_inner,
)


def test_hermite_poly_values():
    assert hermite_poly(0, 3.7) == 1.0
    assert hermite_poly(2, 1.0) == 0.0
    assert hermite_poly(3, 2.0) == pytest.approx(2.0, abs=1e-15)


def test_hermite_poly_rejects_negative():
    with pytest.raises(ValueError):
        hermite_poly(-1, 0.0)


@given(st.integers(0, 12), st.floats(-5, 5))
def test_hermite_poly_matches_numpy(k, z):
    ref = np.polynomial.hermite_e.hermeval(z, [0] * k + [1])
    assert hermite_poly(k, z) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_eigenfunction_values():
    assert eval_eigenfunction(1, 0.0) == 0.0
    assert eval_eigenfunction(0, 0.0) == pytest.approx((2 * math.sqrt(math.pi)) ** -0.5, rel=1e-14)
    assert eval_eigenfunction(0, 0.0) == pytest.approx(0.531126, abs=1e-6)


def test_eigenfunction_matches_definition():
    xi = np.linspace(-6, 6, 41)
    for k in range(8):
        direct = normalization(k) * hermite_poly(k, xi / math.sqrt(2)) * gaussian(xi)
        np.testing.assert_allclose(eval_eigenfunction(k, xi), direct, rtol=1e-12, atol=1e-300)


def test_eigenfunction_far_tail_underflows_without_error():
    vals = eigenfunctions(60, np.array([0.0, 40.0, 80.0]))
    assert np.all(np.isfinite(vals))
    assert vals[0, 2] == 0.0


def test_unit_weighted_norm_e2():
    rule = BasisSpec(4).rule
    assert weighted_inner(lambda x: eval_eigenfunction(2, x), lambda x: eval_eigenfunction(2, x), rule) == pytest.approx(1.0, abs=1e-12)


def test_weighted_inner_examples():
    rule = BasisSpec(6).rule
    e = lambda k: (lambda x: eval_eigenfunction(k, x))
    assert abs(weighted_inner(e(3), e(5), rule)) < 1e-12
    assert weighted_inner(e(4), e(4), rule) == pytest.approx(1.0, abs=1e-12)
    assert weighted_inner(np.zeros_like(rule.nodes), e(2), rule) == 0.0


def test_orthonormality_all_pairs():
    spec = BasisSpec(10)
    vals = spec.evaluate(spec.rule.nodes)
    gram = np.array([[weighted_inner(vals[j], vals[k], spec.rule) for k in range(11)] for j in range(11)])
    np.testing.assert_allclose(gram, np.eye(11), atol=1e-10)


def test_quadrature_rule_properties():
    rule = QuadratureRule.gauss(20)
    assert np.all(rule.weights > 0)
    assert np.all(np.diff(rule.nodes) > 0)
    np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=1e-12)
    # int xi^p exp(-xi^2/4) = 2^(p+1) Gamma((p+1)/2) for even p
    for p in range(0, 2 * 20, 2):
        exact = 2.0 ** (p + 1) * math.gamma((p + 1) / 2)
        assert rule.integrate(lambda x: x**p) == pytest.approx(exact, rel=1e-10)


def test_basis_spec_invariants():
    with pytest.raises(ValueError):
        BasisSpec(0)
    with pytest.raises(ValueError):
        BasisSpec(4, quad_order=10)
    assert BasisSpec(4).quad_order == 16


def test_project_gaussian_and_units(xi_grid):
    spec = BasisSpec(6)
    a = 1.7
    c = project_field(xi_grid, a * gaussian(xi_grid), spec).coeffs
    assert c[0] == pytest.approx(a / normalization(0), rel=1e-12)
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-12)
    e = spec.evaluate(xi_grid)
    np.testing.assert_allclose(project_field(xi_grid, e[2], spec).coeffs, np.eye(7)[2], atol=1e-12)
    mix = project_field(xi_grid, e[0] + 0.5 * e[3], spec).coeffs
    np.testing.assert_allclose(mix, [1, 0, 0, 0.5, 0, 0, 0], atol=1e-12)


def test_project_warns_on_undecayed_field():
    xi = np.linspace(-5, 5, 201)
    with pytest.warns(RuntimeWarning, match="not decayed"):
        proj = project_field(xi, np.ones_like(xi), BasisSpec(2))
    assert proj.warning is not None


@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9))
def test_project_reconstruct_identity(coeffs):
    xi = np.linspace(-25, 25, 2001)
    spec = BasisSpec(8)
    c = np.array(coeffs)
    np.testing.assert_allclose(project_field(xi, spec.reconstruct(c, xi), spec).coeffs, c, atol=1e-10)


@given(st.integers(0, 10), st.floats(-8, 8))
def test_parity(k, x):
    assert eval_eigenfunction(k, -x) == pytest.approx((-1) ** k * eval_eigenfunction(k, x), rel=1e-14, abs=1e-300)


def test_derivative_examples_in_plain_hermite_basis():
    d1 = derivative_in_basis([1.0], 1, normalized=False)
    np.testing.assert_allclose(d1, [0.0, -1 / math.sqrt(2)])
    d2 = derivative_in_basis([0.0, 1.0], 2, normalized=False)
    np.testing.assert_allclose(d2, [0.0, 0.0, 0.0, 0.5])
    np.testing.assert_array_equal(derivative_in_basis(np.zeros(4), 1), np.zeros(5))
    with pytest.raises(ValueError):
        derivative_in_basis([1.0], 3)


@pytest.mark.parametrize("order", [1, 2])
def test_derivative_matches_finite_differences(order):
    xi = np.linspace(-15, 15, 6001)
    h = xi[1] - xi[0]
    spec = BasisSpec(10)
    c = np.array([0.3, -0.2, 0.5, 0.1, 0.0, 0.2, 0.0])
    u = spec.reconstruct(c, xi)
    fd = np.gradient(u, h) if order == 1 else np.gradient(np.gradient(u, h), h)
    dc = derivative_in_basis(c, order)
    np.testing.assert_allclose(spec.reconstruct(dc, xi), fd, atol=2e-5)


def test_multiply_by_xi_matches_nodal():
    xi = np.linspace(-20, 20, 4001)
    spec = BasisSpec(8)
    c = np.array([0.4, 0.1, -0.3, 0.2, 0.05])
    np.testing.assert_allclose(spec.reconstruct(multiply_by_xi(c), xi), xi * spec.reconstruct(c, xi), atol=1e-12)


def test_eigen_relation_in_coefficients():
    K = 10
    for k in range(K - 1):
        unit = np.eye(K + 1)[k]
        Lc = apply_similarity_operator(unit)[: K + 1]
        expect = -0.5 * k * unit
        np.testing.assert_allclose(Lc, expect, atol=1e-8)
