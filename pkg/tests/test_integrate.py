import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from wickito.hermite import eval_hermite
from wickito.integrate import (
    IntegrandSpec,
    compensator,
    forward_riemann,
    partial_variances,
    sde_wick_exp,
    wick_riemann,
    wiener_integral,
    write_integral_samples,
)
from wickito.library import named_integrand
from wickito.procmodel import BrownianMotion, FractionalBM, VGamma, VGammaKernel
from wickito.reports import mc_mean, read_csv
from wickito.simulate import GridSpec, sample_paths


@pytest.mark.parametrize("model", [FractionalBM(0.3), FractionalBM(0.7), VGamma(VGammaKernel.power(0.75))],
                         ids=["fbm0.3", "fbm0.7", "vgamma"])
def test_indicator_integral_is_coefficient_difference(model):
    Z = wiener_integral(model, lambda s: np.ones_like(s), (0.0, 1.0), K=48)
    diff = model.coeffs([1.0], 48)[0] - model.coeffs([0.0], 48)[0]
    assert np.allclose(Z.coeffs, diff, atol=1e-11)
    assert Z.mean == 0.0


def test_brownian_cosine_coefficients_by_quadrature():
    Z = wiener_integral(BrownianMotion(), np.cos, (0.0, 1.0), K=20)
    ref = [quad(lambda s, k=k: math.cos(s) * eval_hermite(k, s), 0, 1)[0] for k in range(20)]
    assert np.allclose(Z.coeffs, ref, atol=1e-13)


def test_brownian_isometry_with_many_modes():
    # Var = int_0^1 cos^2 = 1/2 + sin(2)/4
    Z = wiener_integral(BrownianMotion(), np.cos, (0.0, 1.0), K=2 ** 14)
    exact = 0.5 + math.sin(2.0) / 4
    pv = partial_variances(Z, [256, 2048, 2 ** 14])
    assert pv[256] < pv[2048] < pv[2 ** 14] < exact
    assert exact - pv[2 ** 14] < 5e-3


def test_wiener_integral_errors():
    with pytest.raises(ValueError):
        wiener_integral(BrownianMotion(), np.cos, (1.0, 0.0))
    with pytest.raises(ArithmeticError, match="k=0"):
        wiener_integral(BrownianMotion(), lambda s: np.full_like(s, np.nan), (0.0, 1.0), K=4)


def test_constant_integrand_telescopes():
    ens = sample_paths(FractionalBM(0.3), GridSpec(1.0, 64), 50, seed=1)
    one = named_integrand("1")
    assert np.allclose(wick_riemann(ens, one), ens.paths[:, -1] - ens.paths[:, 0], atol=1e-13)


def test_deterministic_integrand_needs_no_compensator():
    ens = sample_paths(FractionalBM(0.7), GridSpec(1.0, 64), 50, seed=1)
    t_spec = named_integrand("t")
    assert np.array_equal(wick_riemann(ens, t_spec), forward_riemann(ens, t_spec))


def test_brownian_compensator_is_zero():
    ens = sample_paths(BrownianMotion(), GridSpec(1.0, 32), 5, seed=0, sampler="cholesky")
    assert np.all(compensator(ens, covariance="model") == 0.0)


@given(st.floats(0.05, 0.95), st.integers(1, 200))
def test_fbm_compensator_sum_closed_form(H, n):
    # sum_i R(t_i, t_{i+1}) - R(t_i) = (T^{2H} - n h^{2H}) / 2 on a uniform grid
    ens = sample_paths(FractionalBM(H), GridSpec(1.0, n), 1, seed=0, sampler="cholesky")
    total = math.fsum(compensator(ens, covariance="model"))
    assert total == pytest.approx(0.5 * (1.0 - n * (1.0 / n) ** (2 * H)), abs=1e-12)


@pytest.mark.parametrize("name", ["x", "x^2", "sin"])
def test_wick_riemann_sums_are_centered(name):
    ens = sample_paths(FractionalBM(0.3), GridSpec(1.0, 128), 20000, seed=12, K=64)
    mean, se = mc_mean(wick_riemann(ens, named_integrand(name)))
    assert abs(mean) < 4 * se


def test_forward_sums_are_not_centered_for_fbm():
    ens = sample_paths(FractionalBM(0.8), GridSpec(1.0, 128), 20000, seed=12, sampler="cholesky")
    mean, se = mc_mean(forward_riemann(ens, named_integrand("x")))
    assert mean > 10 * se


def test_integrand_spec_broadcasts():
    spec = IntegrandSpec(lambda t, x: 2.0, lambda t, x: 0.0)
    x = np.zeros((3, 4))
    assert spec.values(0.0, x).shape == (3, 4)
    assert spec.slopes(0.0, x).shape == (3, 4)


def test_samples_csv(tmp_path):
    write_integral_samples(tmp_path / "s.csv", [0.5, -1.0])
    header, rows = read_csv(tmp_path / "s.csv")
    assert header == ["path_id", "value"] and rows == [["0", "0.5"], ["1", "-1.0"]]


def test_sde_moments_and_thread_independence():
    alpha = lambda s: 0.3 * np.ones_like(s)  # noqa: E731
    beta = lambda s: 0.5 * np.cos(s)  # noqa: E731
    a = sde_wick_exp(FractionalBM(0.7), alpha, beta, 1.0, 2.0, M=20000, seed=3, threads=1)
    b = sde_wick_exp(FractionalBM(0.7), alpha, beta, 1.0, 2.0, M=20000, seed=3, threads=3)
    assert np.array_equal(a.values, b.values)
    assert a.alpha_integral == pytest.approx(0.3)
    assert a.report["mean"]["target"] == pytest.approx(2.0 * math.exp(0.3))
    assert a.report["passed"]


def test_sde_rejects_random_initial_value():
    with pytest.raises(TypeError):
        sde_wick_exp(BrownianMotion(), np.ones_like, np.ones_like, 1.0, lambda: 1.0, M=10)
    with pytest.raises(TypeError):
        sde_wick_exp(BrownianMotion(), np.ones_like, np.ones_like, 1.0, np.ones(3), M=10)
