"""Fixed quadrature rules shared by the process models and integrators.

All rules return ``(nodes, weights)`` arrays so callers can evaluate many
integrands (one per Hermite index) with a single matrix product.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite, roots_jacobi, roots_legendre


class QuadratureError(RuntimeError):
    """Raised when successive refinements of a quadrature disagree."""


@lru_cache(maxsize=64)
def _legendre(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def _jacobi(n, beta):
    # weight (1 + x)**beta on [-1, 1]
    x, w = roots_jacobi(n, 0.0, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, n):
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_legendre(a, b, panels, n=16):
    """Gauss-Legendre rule on ``panels`` equal sub-intervals of ``[a, b]``."""
    panels = max(int(panels), 1)
    edges = np.linspace(a, b, panels + 1)
    x, w = _legendre(int(n))
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def breakpoint_legendre(points, panel_width, n=16):
    """Composite Gauss-Legendre rule honouring every breakpoint in ``points``."""
    points = np.unique(np.asarray(points, dtype=float))
    xs, ws = [], []
    for a, b in zip(points[:-1], points[1:]):
        x, w = composite_legendre(a, b, int(np.ceil((b - a) / panel_width)), n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def jacobi_left(a, b, beta, n):
    """Rule for ``int_a^b (x - a)**beta g(x) dx``; weights exclude g only.

    The returned weights already contain the factor ``(x - a)**beta``, i.e.
    ``sum(w * g(x))`` approximates the integral for smooth ``g``.
    """
    if beta == 0.0:
        return gauss_legendre(a, b, n)
    x, w = _jacobi(int(n), float(beta))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), w * half ** (beta + 1.0)


def weighted_singular_rule(a, b, beta, panels=8, n=24):
    """Rule for ``int_a^b (x - a)**beta g(x) dx`` with smooth ``g``.

    The first of ``panels`` equal panels uses Gauss-Jacobi with the exact
    algebraic weight, the others Gauss-Legendre.  The algebraic factor is
    folded into the weights everywhere, so ``sum(w * g(x))`` is the integral.
    """
    if b <= a:
        return np.empty(0), np.empty(0)
    panels = max(int(panels), 1)
    edges = a + (b - a) * np.linspace(0.0, 1.0, panels + 1)
    x0, w0 = jacobi_left(edges[0], edges[1], beta, n)
    xr, wr = composite_legendre(edges[1], b, panels - 1, n) if panels > 1 else (np.empty(0), np.empty(0))
    wr = wr * (xr - a) ** beta
    return np.concatenate([x0, xr]), np.concatenate([w0, wr])


@lru_cache(maxsize=32)
def gauss_hermite(n):
    """Gauss-Hermite nodes with weights multiplied back by ``exp(x**2)``.

    ``sum(w * f(x))`` then approximates ``int f`` over the real line and is
    exact for ``f = poly * exp(-x**2)`` with degree below ``2 n``.
    """
    x, w = roots_hermite(int(n))
    w = np.exp(np.log(w) + x * x)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def gaussian_expectation_rule(n):
    """Nodes ``z`` and probabilities ``p`` with ``E[F(N(0,1))] ~ sum p F(z)``."""
    y, w = roots_hermite(int(n))
    z = np.sqrt(2.0) * y
    p = w / np.sqrt(np.pi)
    z.setflags(write=False)
    p.setflags(write=False)
    return z, p
