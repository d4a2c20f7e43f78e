import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from wickito.hermite import (
    HermiteBasis,
    eigenvalue_power_sum,
    eval_hermite,
    hermite_functions,
    hermite_moments,
    normalized_hermite_polynomials,
    weighted_norm,
)
from wickito.quadrature import QuadratureError

X = sp.Symbol("x")


def rodrigues(n):
    # e_n from H_n = (-1)^n e^{x^2} d^n/dx^n e^{-x^2}
    Hn = sp.simplify((-1) ** n * sp.exp(X ** 2) * sp.diff(sp.exp(-X ** 2), X, n))
    norm = 1 / sp.sqrt(2 ** n * sp.factorial(n) * sp.sqrt(sp.pi))
    return norm * Hn * sp.exp(-X ** 2 / 2)


@pytest.mark.parametrize("n", range(7))
def test_values_match_rodrigues(n):
    expr = rodrigues(n)
    f = sp.lambdify(X, expr, "numpy")
    d1 = sp.lambdify(X, sp.diff(expr, X), "numpy")
    d2 = sp.lambdify(X, sp.diff(expr, X, 2), "numpy")
    x = np.linspace(-6, 6, 37)
    assert np.allclose(eval_hermite(n, x), f(x), atol=1e-13)
    assert np.allclose(eval_hermite(n, x, 1), d1(x), atol=1e-12)
    assert np.allclose(eval_hermite(n, x, 2), d2(x), atol=1e-11)


def test_e0_closed_form():
    x = np.array([-1.0, 0.0, 2.5])
    assert np.allclose(hermite_functions(1, x)[0], np.pi ** -0.25 * np.exp(-x * x / 2), rtol=1e-15)


def test_orthonormal_by_adaptive_quadrature():
    for j, k in [(0, 0), (3, 3), (7, 7), (2, 5), (4, 6), (10, 12)]:
        val, _ = quad(lambda x: eval_hermite(j, x) * eval_hermite(k, x), -np.inf, np.inf, limit=200)
        assert val == pytest.approx(float(j == k), abs=1e-9)


def test_gram_identity_large_order():
    G = HermiteBasis(120).gram()
    assert np.max(np.abs(G - np.eye(120))) < 1e-10


def test_no_overflow_far_out():
    x = np.array([-60.0, -38.0, 38.0, 60.0])
    E = hermite_functions(2000, x)
    assert np.all(np.isfinite(E))
    # Cramer-type bound |e_k| <= pi^{-1/4}
    assert np.max(np.abs(hermite_functions(500, np.linspace(-40, 40, 801)))) <= np.pi ** -0.25 + 1e-12


def test_polynomial_part():
    x = np.linspace(-3, 3, 13)
    P = normalized_hermite_polynomials(5, x)
    assert np.allclose(P, hermite_functions(5, x) * np.exp(x * x / 2), rtol=1e-12)


@given(st.integers(1, 300), st.integers(1, 50), st.integers(0, 2 ** 32 - 1))
def test_moments_equal_dense_sum(K, n, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-30, 30, n)
    w = r.normal(size=n)
    dense = hermite_functions(K, x) @ w
    assert np.allclose(hermite_moments(K, x, w), dense, atol=1e-13 * max(1.0, np.abs(w).sum()))


@given(st.integers(1, 40), st.floats(-9, 9))
def test_ladder_matches_finite_difference(K, x):
    h = 1e-5
    fd = (hermite_functions(K, np.array([x + h])) - hermite_functions(K, np.array([x - h]))) / (2 * h)
    assert np.allclose(hermite_functions(K, np.array([x]), 1), fd, atol=1e-7)


def test_second_derivative_is_harmonic_oscillator():
    # e_k'' = (x^2 - (2k + 1)) e_k
    x = np.linspace(-5, 5, 41)
    E = hermite_functions(30, x)
    k = np.arange(30)[:, None]
    assert np.allclose(hermite_functions(30, x, 2), (x * x - (2 * k + 1)) * E, atol=1e-10)


def test_weighted_norm_formula_and_flag():
    c = np.array([1.0, -2.0, 0.5])
    manual = math.sqrt(1 * 2 ** 2 + 4 * 4 ** 2 + 0.25 * 6 ** 2)
    assert weighted_norm(c, 1) == pytest.approx(manual)
    assert weighted_norm(c, 0) == pytest.approx(math.sqrt(5.25))
    assert weighted_norm(c, 1, with_flag=True) == (pytest.approx(manual), True)
    assert weighted_norm(c, -1, with_flag=True)[1] is False


def test_eigenvalue_power_sum_limit():
    # sum (2k+2)^-2 = pi^2 / 24
    assert eigenvalue_power_sum(1, 200000) == pytest.approx(np.pi ** 2 / 24, abs=1e-5)


def test_project_indicator_on_support():
    c = HermiteBasis(12).project(lambda u: np.ones_like(u), support=(0.0, 1.0))
    ref = [quad(lambda x, k=k: eval_hermite(k, x), 0, 1)[0] for k in range(12)]
    assert np.allclose(c, ref, atol=1e-10)


def test_project_gaussian_on_line():
    # e_0 itself has coefficients (1, 0, 0, ...)
    c = HermiteBasis(16).project(lambda x: np.pi ** -0.25 * np.exp(-x * x / 2))
    assert c[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(c[1:])) < 1e-12


def test_project_refinement_failure_is_reported():
    with pytest.raises(QuadratureError):
        HermiteBasis(8).project(lambda x: np.exp(x * x / 2.2) * np.cos(40 * x))


def test_order_validation():
    with pytest.raises(ValueError):
        HermiteBasis(0)
    with pytest.raises(ValueError):
        eval_hermite(-1, 0.0)
