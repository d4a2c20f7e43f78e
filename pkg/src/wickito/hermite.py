"""Hermite functions, projections onto them, and the weighted norms |.|_p.

The Hermite functions

    e_k(x) = (-1)^k pi^(-1/4) (2^k k!)^(-1/2) exp(x^2/2) d^k/dx^k exp(-x^2)

form an orthonormal basis of L^2(R) and are the eigenfunctions of
``A = -d^2/dx^2 + x^2 + 1`` with eigenvalues ``2k + 2``.  They are evaluated
by the three-term recurrence with running rescaling, so neither factorials
nor ``exp(-x^2/2)`` underflow limit the usable range of ``k`` and ``x``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .quadrature import QuadratureError, gauss_hermite

_PI_QUARTER = np.pi ** -0.25
_RESCALE = 1e280
_LOG_RESCALE = np.log(_RESCALE)


def _recurrence(K, x, gaussian=True):
    """Rows ``k = 0 .. K-1`` of e_k(x) (or e_k(x) exp(x^2/2) if not gaussian)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((K,) + x.shape)
    if K == 0:
        return out
    log_scale = np.zeros(x.shape)
    base = -0.5 * x * x if gaussian else np.zeros(x.shape)
    factor = np.exp(base)
    prev = np.zeros(x.shape)
    cur = np.full(x.shape, _PI_QUARTER)
    out[0] = cur * factor
    for k in range(K - 1):
        nxt = np.sqrt(2.0 / (k + 1)) * x * cur - np.sqrt(k / (k + 1.0)) * prev
        big = np.abs(nxt) > _RESCALE
        if big.any():
            nxt = np.where(big, nxt / _RESCALE, nxt)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = log_scale + big * _LOG_RESCALE
            factor = np.exp(base + log_scale)
        prev, cur = cur, nxt
        out[k + 1] = cur * factor
    return out


def _ladder(values):
    """Apply d/dx to a stack of rows f_k = e_k^(m); returns one row fewer."""
    L = values.shape[0]
    k = np.arange(L - 1, dtype=float).reshape((-1,) + (1,) * (values.ndim - 1))
    lower = np.zeros_like(values[:-1])
    lower[1:] = values[:-2]
    return np.sqrt(k / 2.0) * lower - np.sqrt((k + 1.0) / 2.0) * values[1:]


def hermite_functions(K, x, deriv=0):
    """Array of shape ``(K,) + x.shape`` holding ``e_k^(deriv)(x)``, k < K."""
    if deriv not in (0, 1, 2):
        raise ValueError("deriv must be 0, 1 or 2")
    values = _recurrence(K + deriv, x)
    for _ in range(deriv):
        values = _ladder(values)
    return values


def hermite_moments(K, x, w):
    """``sum_i w_i e_k(x_i)`` for k < K without storing the (K, n) table.

    Memory stays O(K + n), which makes orders in the hundreds of thousands
    practical for one-dimensional projections.
    """
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    out = np.empty(K)
    log_scale = np.zeros(x.shape)
    base = -0.5 * x * x
    factor = np.exp(base)
    prev = np.zeros(x.shape)
    cur = np.full(x.shape, _PI_QUARTER)
    wf = w * factor
    out[0] = cur @ wf
    for k in range(K - 1):
        nxt = np.sqrt(2.0 / (k + 1)) * x * cur - np.sqrt(k / (k + 1.0)) * prev
        big = np.abs(nxt) > _RESCALE
        if big.any():
            nxt = np.where(big, nxt / _RESCALE, nxt)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = log_scale + big * _LOG_RESCALE
            wf = w * np.exp(base + log_scale)
        prev, cur = cur, nxt
        out[k + 1] = cur @ wf
    return out


def normalized_hermite_polynomials(K, x):
    """``exp(x^2/2) e_k(x)`` for k < K, i.e. the orthonormal Hermite polynomials."""
    return _recurrence(K, x, gaussian=False)


def eval_hermite(k, x, deriv_order=0):
    """Value of the ``deriv_order``-th derivative of e_k at ``x``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    res = hermite_functions(k + 1, x, deriv_order)[k]
    return float(res) if np.ndim(res) == 0 else res


def weighted_norm(coeffs, p, with_flag=False):
    """Truncated ``|f|_p = (sum (2k+2)^(2p) <f, e_k>^2)^(1/2)``.

    For ``p > 0`` the truncated value only bounds the true norm from below;
    ``with_flag=True`` returns ``(value, is_lower_bound)``.
    """
    c = np.asarray(coeffs, dtype=float)
    k = np.arange(c.shape[-1], dtype=float)
    value = float(np.sqrt(np.sum((2.0 * k + 2.0) ** (2.0 * p) * c * c)))
    if with_flag:
        return value, p > 0
    return value


def eigenvalue_power_sum(n, K):
    """Partial sum ``sum_{k<K} (2k+2)^(-2n)`` (converges for n > 1/2)."""
    k = np.arange(K, dtype=float)
    return float(np.sum((2.0 * k + 2.0) ** (-2.0 * n)))


@dataclass(frozen=True)
class HermiteBasis:
    """Truncated Hermite system ``e_0 .. e_{order-1}``.

    Parameters
    ----------
    order : int
        Number of basis functions K retained.
    gh_nodes : int or None
        Gauss-Hermite nodes for whole-line inner products (default
        ``max(2 * order + 20, 100)``, capped at 300).
    tol : float
        Absolute tolerance for projections.
    """

    order: int = 64
    gh_nodes: int | None = None
    tol: float = 1e-9

    def __post_init__(self):
        if int(self.order) < 1:
            raise ValueError("order must be at least 1")

    @property
    def quadrature_nodes(self):
        if self.gh_nodes is not None:
            return int(self.gh_nodes)
        return min(300, max(2 * self.order + 20, 100))

    @property
    def eigenvalues(self):
        return 2.0 * np.arange(self.order) + 2.0

    def evaluate(self, x, deriv=0):
        return hermite_functions(self.order, x, deriv)

    def _project_line(self, f, n):
        x, w = gauss_hermite(n)
        return self.evaluate(x) @ (w * np.asarray(f(x), dtype=float))

    def project(self, f, support=None, check=True):
        """Coefficients ``<f, e_k>`` for k < order.

        ``f`` must accept numpy arrays.  With ``support=(a, b)`` the integral
        runs over that interval by adaptive Gauss-Kronrod; otherwise
        Gauss-Hermite over the whole line, which suits Gaussian-decaying f.
        """
        if support is not None:
            a, b = map(float, support)
            K = self.order
            res, err, info = quad_vec(
                lambda u: hermite_functions(K, u) * f(u),
                a, b, epsabs=self.tol, epsrel=0.0, limit=20000, full_output=True,
            )
            if info.status != 0 or err > 10 * self.tol * K:
                raise QuadratureError(
                    f"projection on [{a}, {b}] did not converge (error estimate {err:.3g})"
                )
            return np.asarray(res)
        n = self.quadrature_nodes
        coeffs = self._project_line(f, n)
        if check:
            finer = self._project_line(f, min(n + n // 2, 340))
            gap = float(np.max(np.abs(finer - coeffs)))
            if gap > max(self.tol, 1e-7):
                raise QuadratureError(f"Gauss-Hermite refinement moved coefficients by {gap:.3g}")
        return coeffs

    def gram(self):
        """Quadrature Gram matrix ``<e_j, e_k>``; identity up to rounding."""
        x, w = gauss_hermite(self.quadrature_nodes)
        E = self.evaluate(x)
        return (E * w) @ E.T

    def norm(self, coeffs, p=0):
        return weighted_norm(coeffs, p)
