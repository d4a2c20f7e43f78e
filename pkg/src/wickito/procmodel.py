"""Reference Gaussian processes ``G_t = <., g_t>`` through their Hermite coefficients.

Every model exposes ``c_k(t) = <g_t, e_k>`` and ``c'_k(t) = <g'_t, e_k>`` for
k < K together with closed-form variance and covariance.  Five families are
available: Brownian motion, Brownian bridge on [0, 1], fractional Brownian
motion, normalized multifractional Brownian motion and the Volterra process
``int_0^t eps(t - u) dB_u`` with ``eps = sqrt((gamma^2)')``.
"""

from functools import lru_cache
from math import gamma as gamma_fn
from math import pi, sin, sqrt

import numpy as np
from scipy.special import erf

from .hermite import hermite_functions, hermite_moments
from .quadrature import composite_legendre, jacobi_left, weighted_singular_rule

_PI_QUARTER = pi ** -0.25


def hurst_constant(x):
    """``c_x = (2 pi / (Gamma(2x + 1) sin(pi x)))^(1/2)`` for x in (0, 1)."""
    return sqrt(2.0 * pi / (gamma_fn(2.0 * x + 1.0) * sin(pi * x)))


def fbm_covariance(t, s, H):
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H))


def _as_times(t):
    t = np.asarray(t, dtype=float)
    return np.atleast_1d(t), t.ndim == 0


class ProcessModel:
    """Base class; subclasses implement the coefficient tables."""

    family = "abstract"
    #: Sobolev index q with |g'_t|_{-q} locally integrable (recorded, not minimal)
    assumption_q = None

    def __init__(self, domain=(0.0, np.inf)):
        lo, hi = map(float, domain)
        if not lo < hi:
            raise ValueError(f"empty domain {domain!r}")
        self.domain = (lo, hi)

    # -- validation -------------------------------------------------------
    def check_times(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(~np.isfinite(t)) or np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise ValueError(f"times outside the domain [{lo}, {hi}] of {self.family}")
        return t

    def check_diff_times(self, t):
        return self.check_times(t)

    # -- coefficient interface -------------------------------------------
    def coeffs(self, t, K):
        """Array ``(len(t), K)`` of c_k(t)."""
        raise NotImplementedError

    def coeff_derivs(self, t, K):
        """Array ``(len(t), K)`` of c'_k(t)."""
        raise NotImplementedError

    def derivative_moments(self, s, w, K):
        """``sum_i w_i c'_k(s_i)`` for k < K, evaluated in memory-bounded chunks."""
        s = np.asarray(s, dtype=float)
        w = np.asarray(w, dtype=float)
        out = np.zeros(K)
        step = max(1, (1 << 22) // max(K, 1))
        for a in range(0, s.size, step):
            out += w[a:a + step] @ self.coeff_derivs(s[a:a + step], K)
        return out

    def coeff(self, t, k):
        return float(self.coeffs([t], k + 1)[0, k])

    def coeff_deriv(self, t, k):
        return float(self.coeff_derivs([t], k + 1)[0, k])

    def variance(self, t):
        raise NotImplementedError

    def covariance(self, t, s):
        raise NotImplementedError

    def increment_variance(self, t, s):
        """``E[(G_t - G_s)^2]``; subclasses avoid the cancellation near t = s."""
        return self.variance(t) + self.variance(s) - 2.0 * self.covariance(t, s)

    def truncated_covariance(self, t, s, K):
        """``sum_{k<K} c_k(t) c_k(s)`` on the outer product of ``t`` and ``s``."""
        return self.coeffs(t, K) @ self.coeffs(s, K).T

    def gram(self, t):
        t = np.asarray(t, dtype=float)
        return self.covariance(t[:, None], t[None, :])

    def describe(self):
        return {"family": self.family, "domain": list(self.domain)}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "family")
        return f"{type(self).__name__}({params})"


# ---------------------------------------------------------------------------
# Brownian motion and bridge
# ---------------------------------------------------------------------------


def indicator_coeffs(t, K):
    """``int_0^t e_k(u) du`` for k < K by the integrated ladder relation.

    Integrating ``e'_k = sqrt(k/2) e_{k-1} - sqrt((k+1)/2) e_{k+1}`` gives a
    forward recurrence whose homogeneous factor ``sqrt(k/(k+1))`` is below one,
    so errors do not grow with k.
    """
    t, _ = _as_times(t)
    out = np.empty((t.size, K))
    E_t = hermite_functions(K, t)
    E_0 = hermite_functions(K, np.zeros(1))[:, 0]
    out[:, 0] = _PI_QUARTER * sqrt(pi / 2.0) * erf(t / sqrt(2.0))
    if K > 1:
        out[:, 1] = sqrt(2.0) * _PI_QUARTER * (1.0 - np.exp(-0.5 * t * t))
    for k in range(1, K - 1):
        out[:, k + 1] = sqrt(k / (k + 1.0)) * out[:, k - 1] - sqrt(2.0 / (k + 1.0)) * (E_t[k] - E_0[k])
    return out


class BrownianMotion(ProcessModel):
    family = "bm"
    assumption_q = 1

    def coeffs(self, t, K):
        t, _ = _as_times(self.check_times(t))
        return indicator_coeffs(t, K)

    def coeff_derivs(self, t, K):
        t, _ = _as_times(self.check_diff_times(t))
        return hermite_functions(K, t).T

    def derivative_moments(self, s, w, K):
        s = self.check_diff_times(s)
        return hermite_moments(K, s, w)

    def variance(self, t):
        return np.abs(np.asarray(t, dtype=float))

    def covariance(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        same = np.sign(t) * np.sign(s) > 0
        return np.where(same, np.sign(t) * np.minimum(np.abs(t), np.abs(s)), 0.0)

    def increment_variance(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        same = np.sign(t) * np.sign(s) >= 0
        return np.where(same, np.abs(t - s), np.abs(t) + np.abs(s))


class BrownianBridge(ProcessModel):
    family = "bridge"
    assumption_q = 1

    def __init__(self):
        super().__init__((0.0, 1.0))

    def coeffs(self, t, K):
        t, _ = _as_times(self.check_times(t))
        return indicator_coeffs(t, K) - t[:, None] * indicator_coeffs([1.0], K)

    def coeff_derivs(self, t, K):
        t, _ = _as_times(self.check_diff_times(t))
        return hermite_functions(K, t).T - indicator_coeffs([1.0], K)

    def derivative_moments(self, s, w, K):
        s = self.check_diff_times(s)
        return hermite_moments(K, s, w) - float(np.sum(w)) * indicator_coeffs([1.0], K)[0]

    def variance(self, t):
        t = np.asarray(t, dtype=float)
        return t * (1.0 - t)

    def covariance(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return np.minimum(t, s) - t * s

    def increment_variance(self, t, s):
        d = np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float))
        return d - d * d

    def describe(self):
        return {"family": self.family}


# ---------------------------------------------------------------------------
# Fractional and multifractional Brownian motion (Fourier-domain coefficients)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=128)
def _fourier_rule(H, K, t_max):
    """Nodes on (0, L] and weights including ``y**(1/2 - H)``, plus e_k(y)."""
    L = sqrt(2.0 * K + 1.0) + 12.0
    width = min(0.5, 2.0 / max(t_max, 1e-12))
    panels = int(np.ceil(L / width))
    y, w = weighted_singular_rule(0.0, L, 0.5 - H, panels=panels, n=20)
    E = hermite_functions(K, y)
    for arr in (y, w, E):
        arr.setflags(write=False)
    return y, w, E


def _parity_signs(K):
    k = np.arange(K)
    even = k % 2 == 0
    sign = np.where(even, (-1.0) ** (k // 2), (-1.0) ** ((k - 1) // 2))
    return even, sign


def fbm_fourier_coeffs(t, H, K, deriv=False):
    """``<M_H 1_[0,t], e_k>`` (or its t-derivative) by Fourier-domain quadrature.

    Uses ``hat(e_k) = sqrt(2 pi) (-i)^k e_k`` so the coefficient reduces to a
    one-sided integral of ``y^(1/2-H)`` times a smooth kernel against e_k.
    """
    t, _ = _as_times(t)
    t_max = float(np.max(np.abs(t))) if t.size else 1.0
    y, w, E = _fourier_rule(float(H), int(K), round(max(t_max, 1.0), 6))
    ty = t[:, None] * y[None, :]
    if deriv:
        even_kernel = np.cos(ty)
        odd_kernel = np.sin(ty)
    else:
        even_kernel = np.sin(ty) / y
        odd_kernel = 2.0 * np.sin(0.5 * ty) ** 2 / y
    even, sign = _parity_signs(K)
    out = np.empty((t.size, K))
    out[:, even] = (even_kernel * w) @ E[even].T
    out[:, ~even] = (odd_kernel * w) @ E[~even].T
    return out * (sign * 2.0 / hurst_constant(H))


class FractionalBM(ProcessModel):
    family = "fbm"
    assumption_q = 2

    def __init__(self, H, domain=(0.0, np.inf)):
        H = float(H)
        if not 0.0 < H < 1.0:
            raise ValueError(f"Hurst index H={H} outside (0, 1)")
        super().__init__(domain)
        self.H = H

    def coeffs(self, t, K):
        t, _ = _as_times(self.check_times(t))
        return fbm_fourier_coeffs(t, self.H, K)

    def coeff_derivs(self, t, K):
        t, _ = _as_times(self.check_diff_times(t))
        return fbm_fourier_coeffs(t, self.H, K, deriv=True)

    def variance(self, t):
        return np.abs(np.asarray(t, dtype=float)) ** (2 * self.H)

    def covariance(self, t, s):
        return fbm_covariance(t, s, self.H)

    def increment_variance(self, t, s):
        return np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)) ** (2 * self.H)

    def describe(self):
        return {"family": self.family, "H": self.H, "domain": list(self.domain)}


class MultifractionalBM(ProcessModel):
    """Normalized mBm ``<., M_{h(t)} 1_[0,t]>``.

    ``h`` maps times into (0, 1) and must be differentiable; derivative
    coefficients come from Richardson-extrapolated central differences of the
    coefficient table with step ``fd_step``.
    """

    family = "mbm"
    assumption_q = 2

    def __init__(self, h, domain=(0.0, np.inf), fd_step=1e-4, label=None):
        super().__init__(domain)
        self.h = h
        self.fd_step = float(fd_step)
        self.label = label
        probe = np.linspace(self.domain[0], min(self.domain[1], self.domain[0] + 10.0), 101)
        hv = np.asarray(h(probe), dtype=float)
        if np.any(hv <= 0.0) or np.any(hv >= 1.0):
            raise ValueError("h must take values in (0, 1)")

    def _hurst(self, t):
        return np.broadcast_to(np.asarray(self.h(t), dtype=float), np.shape(t))

    def coeffs(self, t, K):
        t, _ = _as_times(self.check_times(t))
        return self._raw_coeffs(t, K)

    def _raw_coeffs(self, t, K):
        out = np.empty((t.size, K))
        hs = self._hurst(t)
        for i, (ti, hi) in enumerate(zip(t, hs)):
            out[i] = fbm_fourier_coeffs([ti], float(hi), K)[0]
        return out

    def coeff_derivs(self, t, K):
        t, _ = _as_times(self.check_diff_times(t))
        step = self.fd_step

        def central(d):
            return (self._raw_coeffs(t + d, K) - self._raw_coeffs(t - d, K)) / (2.0 * d)

        return (4.0 * central(0.5 * step) - central(step)) / 3.0

    def variance(self, t):
        t = np.asarray(t, dtype=float)
        return np.abs(t) ** (2.0 * self._hurst(t))

    def covariance(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        ht, hs = self._hurst(t), self._hurst(s)
        hm = 0.5 * (ht + hs)
        c = np.vectorize(hurst_constant)
        factor = c(hm) ** 2 / (c(ht) * c(hs))
        return factor * 0.5 * (np.abs(t) ** (2 * hm) + np.abs(s) ** (2 * hm) - np.abs(t - s) ** (2 * hm))

    def describe(self):
        return {"family": self.family, "h": self.label or repr(self.h), "domain": list(self.domain)}


# ---------------------------------------------------------------------------
# Volterra process V_gamma
# ---------------------------------------------------------------------------


class VGammaKernel:
    """Kernel data ``eps = sqrt((gamma^2)')`` with its primitives E and calE.

    ``eps_exponent`` is the algebraic order beta of eps at 0+
    (``eps(v) ~ v**beta``); quadratures fold ``v**beta`` into Gauss-Jacobi
    weights and only ever evaluate ``eps(v) / v**beta``.
    """

    def __init__(self, gamma, eps, eps_exponent=0.0, E=None, calE=None, label=None):
        self.gamma = gamma
        self.eps = eps
        self.beta = float(eps_exponent)
        if self.beta <= -1.0:
            raise ValueError("eps must be integrable at 0 (exponent > -1)")
        self._E = E
        self._calE = calE
        self.label = label

    @classmethod
    def power(cls, H):
        """``gamma(r) = r**H``, so ``eps(r) = sqrt(2H) r**(H - 1/2)``."""
        H = float(H)
        if H <= 0.0:
            raise ValueError("power kernel needs H > 0")
        a = sqrt(2.0 * H)
        b = H - 0.5
        return cls(
            gamma=lambda r: np.asarray(r, dtype=float) ** H,
            eps=lambda r: a * np.asarray(r, dtype=float) ** b,
            eps_exponent=b,
            E=lambda x: a * np.asarray(x, dtype=float) ** (b + 1.0) / (b + 1.0),
            calE=lambda x: a * np.asarray(x, dtype=float) ** (b + 2.0) / ((b + 1.0) * (b + 2.0)),
            label={"kind": "power", "H": H},
        )

    def eps_regular(self, v):
        v = np.asarray(v, dtype=float)
        return self.eps(v) / v ** self.beta if self.beta else self.eps(v)

    def E(self, x):
        if self._E is not None:
            return np.asarray(self._E(x), dtype=float)
        x = np.asarray(x, dtype=float)
        s, w = jacobi_left(0.0, 1.0, self.beta, 40)
        xs = x[..., None] * s
        return x ** (self.beta + 1.0) * (self.eps_regular(xs) @ w)

    def calE(self, x):
        if self._calE is not None:
            return np.asarray(self._calE(x), dtype=float)
        x = np.asarray(x, dtype=float)
        b1 = self.beta + 1.0
        s, w = jacobi_left(0.0, 1.0, b1, 40)
        xs = x[..., None] * s
        with np.errstate(invalid="ignore", divide="ignore"):
            reg = np.where(xs > 0, self.E(xs) / xs ** b1, 0.0)
        return x ** (b1 + 1.0) * (reg @ w)


class VGamma(ProcessModel):
    """``G_t = int_0^t eps(t - u) dB_u`` with variance ``gamma(t)^2``."""

    family = "vgamma"
    assumption_q = 3

    def __init__(self, kernel, domain=(0.0, np.inf), panel_width=None, nodes=20):
        if domain[0] < 0:
            raise ValueError("vgamma lives on [0, inf)")
        super().__init__(domain)
        self.kernel = kernel
        self.panel_width = panel_width
        self.nodes = int(nodes)

    def check_diff_times(self, t):
        t = self.check_times(t)
        if np.any(np.asarray(t) <= 0.0):
            raise ValueError("vgamma is differentiable only for t > 0")
        eps_t = self.kernel.eps(np.asarray(t, dtype=float))
        if not np.all(np.isfinite(eps_t)):
            raise ValueError("eps(t) is not finite at a requested time")
        return t

    def _rule(self, t, K):
        width = self.panel_width or min(0.25, 1.5 / sqrt(2.0 * K + 1.0))
        return weighted_singular_rule(0.0, t, self.kernel.beta, panels=int(np.ceil(t / width)), n=self.nodes)

    def coeffs(self, t, K):
        t, _ = _as_times(self.check_times(t))
        out = np.zeros((t.size, K))
        for i, ti in enumerate(t):
            if ti == 0.0:
                continue
            v, w = self._rule(ti, K)
            out[i] = hermite_functions(K, ti - v) @ (w * self.kernel.eps_regular(v))
        return out

    def coeff_derivs(self, t, K):
        """Pairing of ``F_t - (G_t)' + (H_t)''`` with e_k (time derivative of g_t)."""
        t, _ = _as_times(self.check_diff_times(t))
        ker = self.kernel
        beta = ker.beta
        out = np.empty((t.size, K))
        E0 = hermite_functions(K, np.zeros(1))[:, 0]
        D0 = hermite_functions(K, np.zeros(1), 1)[:, 0]
        for i, ti in enumerate(t):
            v, w = self._rule(ti, K)
            u = ti - v
            vb = v ** beta if beta else 1.0
            Ev, cEv = ker.E(v), ker.calE(v)
            g1 = ker.eps_regular(v)
            g2 = (ti - v) * ker.eps_regular(v) - Ev / vb
            g3 = (v * Ev - cEv) / vb
            e0 = hermite_functions(K, u)
            e1 = hermite_functions(K, u, 1)
            e2 = hermite_functions(K, u, 2)
            integral = e0 @ (w * g1) + e1 @ (w * g2) + e2 @ (w * g3)
            Et, cEt = float(ker.E(ti)), float(ker.calE(ti))
            point = E0 * (float(ker.eps(ti)) - Et / ti) + D0 * (Et - cEt / ti)
            out[i] = integral / ti + point
        return out

    def variance(self, t):
        return np.asarray(self.kernel.gamma(np.asarray(t, dtype=float)), dtype=float) ** 2

    def covariance(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            out[idx] = self._cov_pair(float(t[idx]), float(s[idx]))
        return out

    def increment_variance(self, t, s):
        """``gamma^2(|t-s|) + int_0^m (eps(d + v) - eps(v))^2 dv`` with m = min, d = |t-s|."""
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        m = np.minimum(t, s).ravel()
        d = np.abs(t - s).ravel()
        out = np.zeros(m.size)
        live = np.flatnonzero(d > 0)
        out[live] = self.variance(d[live])
        tail = live[m[live] > 0]
        step = 2048
        for a in range(0, tail.size, step):
            idx = tail[a:a + step]
            out[idx] += self._increment_tail(m[idx], d[idx])
        return out.reshape(t.shape)

    def _increment_tail(self, m, d):
        # dyadic panels towards v = 0, reaching well below the scale d
        levels = int(np.clip(np.ceil(np.log2(np.max(m / d))) + 30, 30, 90))
        x, w = composite_legendre(0.0, 1.0, 1, 16)
        frac = np.concatenate([2.0 ** -levels * x] + [2.0 ** -j * (1.0 + x) for j in range(levels, 0, -1)])
        wts = np.concatenate([2.0 ** -levels * w] + [2.0 ** -j * w for j in range(levels, 0, -1)])
        v = m[:, None] * frac[None, :]
        eps = self.kernel.eps
        vals = (eps(d[:, None] + v) - eps(v)) ** 2
        return m * (vals @ wts)

    def _cov_pair(self, t, s):
        m, d = min(t, s), abs(t - s)
        if m <= 0.0:
            return 0.0
        if d == 0.0:
            return float(self.variance(t))
        # substitute v = m - u; eps(v) singular at 0, eps(d + v) nearly so when d is small
        ker = self.kernel
        levels = int(np.clip(np.ceil(np.log2(max(m / d, 1.0))) + 4, 4, 60))
        edges = m * 2.0 ** -np.arange(levels, -1, -1, dtype=float)
        x0, w0 = jacobi_left(0.0, edges[0], ker.beta, 16)
        xs, ws = [x0], [w0]
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = composite_legendre(a, b, 1, 16)
            xs.append(x)
            ws.append(w * x ** ker.beta)
        v = np.concatenate(xs)
        w = np.concatenate(ws)
        return float(np.sum(w * ker.eps_regular(v) * ker.eps(d + v)))

    def describe(self):
        return {"family": self.family, "gamma": self.kernel.label or "custom", "domain": list(self.domain)}


# ---------------------------------------------------------------------------
# Numerical spot checks of the coefficient data
# ---------------------------------------------------------------------------


def coefficient_integral_check(model, a, b, K, panels=64, n=16):
    """Relative gap between ``c_k(b) - c_k(a)`` and ``int_a^b c'_k``, per k."""
    s, w = composite_legendre(a, b, panels, n)
    integral = w @ model.coeff_derivs(s, K)
    diff = model.coeffs([b], K)[0] - model.coeffs([a], K)[0]
    scale = max(float(np.max(np.abs(diff))), 1e-300)
    return np.abs(integral - diff) / scale


def continuity_jumps(model, a, b, K, n):
    """Max over k of the largest jump of t -> c_k(t) on an n-step grid."""
    t = np.linspace(a, b, n + 1)
    C = model.coeffs(t, K)
    return float(np.max(np.abs(np.diff(C, axis=0))))
