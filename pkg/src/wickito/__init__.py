"""Gaussian processes in white noise space, built on Hermite expansions of
their covariance kernels, with Monte Carlo checks of Wick-Itô calculus."""

from .chaos import ChaosVector, Delta, FunctionType, TestFunction, hida_norm_generalized
from .hermite import HermiteBasis, hermite_functions, hermite_moments
from .integrate import IntegrandSpec, sde_wick_exp, wick_riemann, wiener_integral
from .localtime import LevelGrid, expected_hist, local_time_hist, local_time_mean, l2_diagnostic
from .procmodel import BrownianBridge, BrownianMotion, FractionalBM, MultifractionalBM, VGamma, VGammaKernel
from .simulate import GridSpec, PathEnsemble, sample_paths, truncation_defect
from .verify import RunKnobs, compare_ito_wick, verify_ito, verify_tanaka

__version__ = "0.1.0"

__all__ = [
    "BrownianBridge", "BrownianMotion", "ChaosVector", "Delta", "FractionalBM", "FunctionType", "GridSpec",
    "HermiteBasis", "IntegrandSpec", "LevelGrid", "MultifractionalBM", "PathEnsemble", "RunKnobs",
    "TestFunction", "VGamma", "VGammaKernel", "compare_ito_wick", "expected_hist", "hermite_functions",
    "hermite_moments", "hida_norm_generalized", "l2_diagnostic", "local_time_hist", "local_time_mean",
    "sample_paths", "sde_wick_exp", "truncation_defect", "verify_ito", "verify_tanaka", "wick_riemann",
    "wiener_integral",
]
