"""Finite surrogate of the Hida test-function / distribution machinery.

Only the constant and first chaos are held as coefficients; higher chaos
objects appear as pathwise samples built from Gaussian coordinates with known
covariances (``U <> V = UV - E[UV]`` for centered first-chaos U, V).
"""

from dataclasses import dataclass, field
from math import lgamma, log, pi, sqrt

import numpy as np
from scipy.special import roots_hermite

from .hermite import hermite_functions, normalized_hermite_polynomials, weighted_norm
from .quadrature import gaussian_expectation_rule


@dataclass(frozen=True)
class ChaosVector:
    """``const + sum_k coeffs[k] <., e_k>``."""

    const: float
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    @property
    def mean(self):
        return float(self.const)

    @property
    def variance(self):
        return float(np.dot(self.coeffs, self.coeffs))

    def sample(self, coords):
        """Values for draws ``coords`` of shape ``(M, >= K)``."""
        Z = np.asarray(coords, dtype=float)
        return self.const + Z[..., : self.coeffs.size] @ self.coeffs

    def s_transform(self, eta):
        e = _eta_coeffs(eta)
        K = min(e.size, self.coeffs.size)
        return float(self.const + np.dot(self.coeffs[:K], e[:K]))

    def hida_norm(self, p):
        """``||.||_{-p}``; for a pure first-chaos vector this is ``|F|_{-p}``."""
        return sqrt(self.const ** 2 + weighted_norm(self.coeffs, -p) ** 2)


@dataclass(frozen=True)
class TestFunction:
    """``eta = sum eta_k e_k`` with a recorded geometric envelope ``C rho^k``."""

    coeffs: np.ndarray
    rho: float = 0.9
    C: float = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError("test-function coefficients must be finite")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("decay rate rho must lie in (0, 1)")
        object.__setattr__(self, "coeffs", c)
        k = np.arange(c.size)
        object.__setattr__(self, "C", float(np.max(np.abs(c) / self.rho ** k)) if c.size else 0.0)

    def norm(self, p):
        return weighted_norm(self.coeffs, p)


def _eta_coeffs(eta):
    return eta.coeffs if isinstance(eta, TestFunction) else np.asarray(eta, dtype=float)


@dataclass(frozen=True)
class Delta:
    """Dirac distribution at ``level``."""

    level: float = 0.0


@dataclass(frozen=True)
class FunctionType:
    """Tempered distribution of function type (``f`` must accept arrays)."""

    f: object
    label: str = "f"


def _variance_at(model, t):
    R = float(model.variance(t))
    if R <= 0.0:
        raise ValueError(f"R_t = 0 at t={t}: generalized functionals are undefined there")
    return R


def heat_kernel(t, x):
    """``(2 pi t)^(-1/2) exp(-x^2 / (2t))``, zero for t = 0."""
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros_like(x)
    return np.exp(-x * x / (2.0 * t)) / sqrt(2.0 * pi * t)


def s_transform(obj, eta, model=None, t=None, nodes=120):
    """S-transform at the test function ``eta``.

    ``obj`` is a :class:`ChaosVector` or a generalized-functional descriptor
    (:class:`Delta` or :class:`FunctionType`) of ``G_t`` for the given model.
    """
    if isinstance(obj, ChaosVector):
        return obj.s_transform(eta)
    if model is None or t is None:
        raise ValueError("generalized functionals need a model and a time")
    R = _variance_at(model, t)
    e = _eta_coeffs(eta)
    shift = float(model.coeffs([t], e.size)[0] @ e) if e.size else 0.0
    if isinstance(obj, Delta):
        return float(heat_kernel(R, obj.level - shift))
    if isinstance(obj, FunctionType):
        z, p = gaussian_expectation_rule(nodes)
        return float(np.dot(p, obj.f(shift + sqrt(R) * z)))
    raise TypeError(f"unsupported object {obj!r}")


def wick_pair_sample(u, v, cov_uv):
    """Pathwise ``U <> V = UV - E[UV]`` for centered jointly Gaussian U, V."""
    return np.asarray(u) * np.asarray(v) - cov_uv


def wick_exp_sample(c, m, z):
    """``exp(c + <m, z> - |m|^2 / 2)``; population mean ``exp(c)``."""
    m = np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.exp(c + z[..., : m.size] @ m - 0.5 * np.dot(m, m))


def xi_function(k, x, R):
    """``xi_{t,k}(x) = pi^(1/4) (k!)^(1/2) R^(k/2) exp(-x^2/(4R)) e_k(x / sqrt(2R))``."""
    x = np.asarray(x, dtype=float)
    y = x / sqrt(2.0 * R)
    scale = np.exp(0.25 * log(pi) + 0.5 * lgamma(k + 1.0) + 0.5 * k * log(R))
    return scale * np.exp(-0.5 * y * y) * hermite_functions(k + 1, y)[k]


def xi_pairings(F, R, N, nodes=160):
    """``<F, xi_{t,k}>`` for k < N given ``R = R_t``."""
    k = np.arange(N, dtype=float)
    if isinstance(F, Delta):
        return np.array([float(xi_function(int(j), F.level, R)) for j in range(N)])
    if isinstance(F, FunctionType):
        # x = sqrt(2R) y: integrand becomes F * normalized Hermite polynomial * exp(-y^2)
        y, w = roots_hermite(int(nodes))
        P = normalized_hermite_polynomials(N, y)
        raw = P @ (w * F.f(sqrt(2.0 * R) * y))
        logscale = 0.5 * np.log(2.0 * R) + 0.25 * log(pi) + 0.5 * np.array([lgamma(j + 1.0) for j in k]) + 0.5 * k * log(R)
        return raw * np.exp(logscale)
    raise TypeError(f"unsupported descriptor {F!r}")


def xi_pairing(F, t, k, model, nodes=160):
    return float(xi_pairings(F, _variance_at(model, t), k + 1, nodes)[k])


@dataclass
class GeneralizedNorm:
    norm_sq: float
    tail_bound: float
    terms: np.ndarray
    decaying: bool
    p: int
    t: float


def hida_norm_generalized(F, t, p, model, K=64, N=12, nodes=160):
    """Truncated chaos series for ``||F(G_t)||_{-p}^2`` and a geometric tail bound.

    Term k is ``(2 pi R)^-1 (k!)^-1 R^(-2k) <F, xi_k>^2 a^k`` with
    ``a = sum_j c_j(t)^2 (2j + 2)^(-2p)``.
    """
    R = _variance_at(model, t)
    c = model.coeffs([t], K)[0]
    j = np.arange(K, dtype=float)
    a = float(np.sum(c * c * (2.0 * j + 2.0) ** (-2.0 * p)))
    pair = xi_pairings(F, R, N, nodes)
    k = np.arange(N, dtype=float)
    log_fact = np.array([lgamma(i + 1.0) for i in k])
    with np.errstate(divide="ignore"):
        log_terms = np.log(pair * pair) - log_fact + k * (np.log(a) - 2.0 * log(R))
    terms = np.exp(log_terms) / (2.0 * pi * R)
    nz = np.flatnonzero(terms > 1e-300 * max(terms.max(), 1e-300))
    decaying, tail = True, 0.0
    if nz.size >= 2 and nz[-1] >= N // 2:
        i1, i0 = nz[-1], nz[-2]
        ratio = (terms[i1] / terms[i0]) ** (1.0 / (i1 - i0))
        decaying = ratio < 1.0
        tail = terms[i1] * ratio / (1.0 - ratio) if decaying else float("inf")
    return GeneralizedNorm(float(np.sum(terms)), float(tail), terms, bool(decaying), int(p), float(t))


def bound_constant(F, t, p, model, K=64, N=12):
    """Empirical ``D_p``: norm divided by ``max(R^-2p, R^2p) R^-1/2 |F|_{-p}^2``."""
    R = _variance_at(model, t)
    if isinstance(F, Delta):
        FK = hermite_functions(K, np.array([F.level]))[:, 0]
    else:
        raise TypeError("bound_constant is implemented for Delta descriptors")
    value = hida_norm_generalized(F, t, p, model, K, N).norm_sq
    return value / (max(R ** (-2 * p), R ** (2 * p)) * R ** -0.5 * weighted_norm(FK, -p) ** 2)
