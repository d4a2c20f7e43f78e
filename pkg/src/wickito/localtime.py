"""Local times, occupation formulas and the L^2(lambda x mu) diagnostic.

Local times are estimated with the box kernel: on a uniform level grid with
bin half-width eps,

    hat l(y_j) = (1 / 2 eps) sum_i 1{G_{t_i} in bin j} w_i

with ``w_i = t_{i+1} - t_i`` (plain) or ``R_{t_{i+1}} - R_{t_i}`` (weighted).
Bins partition the level axis, so total-mass and occupation identities hold
per path up to rounding.
"""

from dataclasses import dataclass
from math import log, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .quadrature import composite_legendre, gauss_legendre, jacobi_left
from .reports import mc_mean, write_csv


class DivergenceError(ArithmeticError):
    """An integral required by a closed-form formula does not converge."""


@dataclass(frozen=True)
class LevelGrid:
    """``n`` bins of width ``2 eps`` covering ``[lo, hi)``."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.hi > self.lo or self.n < 1:
            raise ValueError("level grid needs lo < hi and n >= 1")

    @property
    def eps(self):
        return (self.hi - self.lo) / (2.0 * self.n)

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.n + 1)

    @property
    def centers(self):
        return self.lo + (2.0 * np.arange(self.n) + 1.0) * self.eps

    def index(self, x):
        return np.floor((np.asarray(x, dtype=float) - self.lo) / (2.0 * self.eps)).astype(np.int64)

    @classmethod
    def with_half_width(cls, eps, span, center=0.0):
        """Bins of half-width ``eps``, one centred on ``center``, covering ``center +- span``."""
        n = int(np.ceil(span / (2.0 * eps) - 0.5)) + 1
        return cls(center - (2 * n - 1) * eps, center + (2 * n - 1) * eps, 2 * n - 1)


def default_levels(ensemble, T=None, n=64):
    """64 bins over ``+-4 sqrt(max R)``, widened if a sample falls outside."""
    ens = ensemble if T is None else ensemble.restrict(T)
    span = 4.0 * sqrt(float(np.max(ens.R)))
    reach = float(np.max(np.abs(ens.paths[:, :-1]))) if ens.paths.size else 0.0
    span = max(span, reach * (1.0 + 1e-9) + 1e-12)
    return LevelGrid(-span, span, n)


@dataclass
class LocalTimeEstimate:
    levels: LevelGrid
    values: np.ndarray
    mode: str
    T: float
    mass: np.ndarray

    @property
    def eps(self):
        return self.levels.eps

    @property
    def centers(self):
        return self.levels.centers

    def total_mass(self):
        return 2.0 * self.eps * np.sum(self.values, axis=1)

    def mean(self, level):
        j = int(self.levels.index(level))
        return mc_mean(self.values[:, j])

    def l2_integral(self):
        """Per-path ``int hat l(a)^2 da`` (bins are disjoint)."""
        return 2.0 * self.eps * np.sum(self.values ** 2, axis=1)


def _weights(ens, mode, covariance):
    if mode == "plain":
        return np.diff(ens.grid)
    if mode == "weighted":
        R, _ = ens.covariance_source(covariance)
        w = np.diff(R)
        if not np.all(np.isfinite(w)):
            raise ValueError("weighted local time needs R of bounded variation on the grid")
        return w
    raise ValueError(f"unknown mode {mode!r}")


def _binned(G, w, levels):
    """Per-path sums of ``w_i`` over the bins hit by ``G[:, i]``."""
    M, n = G.shape
    idx = levels.index(G)
    inside = (idx >= 0) & (idx < levels.n)
    flat = (np.arange(M)[:, None] * levels.n + idx)[inside]
    weights = np.broadcast_to(w, G.shape)[inside]
    return np.bincount(flat, weights=weights, minlength=M * levels.n).reshape(M, levels.n)


def local_time_hist(ensemble, T=None, levels=None, mode="plain", covariance="model"):
    """Box-kernel local times of every path at the bin centres of ``levels``."""
    ens = ensemble if T is None else ensemble.restrict(T)
    if levels is None:
        levels = default_levels(ens)
    w = _weights(ens, mode, covariance)
    G = ens.paths[:, :-1]
    sums = _binned(G, w, levels)
    mass = np.broadcast_to(w, G.shape).sum(axis=1)
    return LocalTimeEstimate(levels, sums / (2.0 * levels.eps), mode, float(ens.grid[-1]), mass)


def expected_hist(model, grid, levels, mode="plain", variance=None, weights=None):
    """Exact expectation of the box-kernel estimator on a grid, for every bin.

    ``sum_i w_i P(G_{t_i} in bin) / (2 eps)`` with Gaussian bin probabilities;
    the oracle for Monte Carlo means at finite eps and n.  Pass ``variance``
    (e.g. ``ensemble.R``) to use the law of a truncated ensemble instead, and
    ``weights`` to override the per-step weights implied by ``mode``.
    """
    t = np.asarray(grid, dtype=float)
    R = model.variance(t) if variance is None else np.asarray(variance, dtype=float)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    else:
        w = np.diff(t) if mode == "plain" else np.diff(R)
    sd = np.sqrt(R[:-1])[:, None]
    edges = levels.edges[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cdf = np.where(sd > 0, ndtr(edges / np.where(sd > 0, sd, 1.0)), (edges >= 0).astype(float))
    probs = np.diff(cdf, axis=1)
    return (w @ probs) / (2.0 * levels.eps)


def bin_averages(Phi, levels, nodes=8):
    """``(1 / 2 eps) int_bin Phi`` for every bin."""
    x, w = composite_legendre(levels.lo, levels.hi, levels.n, nodes)
    vals = np.asarray(Phi(x), dtype=float) * w
    return vals.reshape(levels.n, nodes).sum(axis=1) / (2.0 * levels.eps)


def occupation_check(ensemble, Phi, T=None, mode="plain", levels=None, covariance="model", averages=None):
    """Per-path ``|sum_i Phi(G_i) w_i - sum_j 2 eps hat l_j bar Phi_j|``.

    ``averages`` overrides the bin averages ``bar Phi_j`` (use it for
    bin-measurable Phi, whose averages are known exactly).
    """
    ens = ensemble if T is None else ensemble.restrict(T)
    est = local_time_hist(ens, None, levels, mode, covariance)
    w = _weights(ens, mode, covariance)
    lhs = np.sum(np.asarray(Phi(ens.paths[:, :-1]), dtype=float) * w, axis=1)
    bar = bin_averages(Phi, est.levels) if averages is None else np.asarray(averages, dtype=float)
    rhs = 2.0 * est.eps * (est.values @ bar)
    return np.abs(lhs - rhs)


def bin_indicator(levels, j):
    """Indicator of bin ``j`` using the estimator's own bin assignment."""
    return lambda x: (levels.index(x) == j).astype(float)


# ---------------------------------------------------------------------------
# Closed-form means
# ---------------------------------------------------------------------------


def local_exponent(model, t0=0.0, probe=1e-6):
    """Exponent h with ``R(t0 + s) - R(t0) ~ s^(2h)`` as s -> 0+ (two-point estimate)."""
    a = float(model.increment_variance(t0 + probe, t0))
    b = float(model.increment_variance(t0 + 2.0 * probe, t0))
    if a <= 0.0 or b <= 0.0:
        return float("inf")
    return log(b / a) / (2.0 * log(2.0))


def weighted_mean_at_variance(a, RT):
    """``int_0^RT (2 pi r)^(-1/2) exp(-a^2 / 2r) dr``: the weighted mean for terminal variance RT."""
    a = float(a)
    if a == 0.0:
        return sqrt(2.0 * RT / pi)
    f = lambda r: np.exp(-a * a / (2.0 * r)) / np.sqrt(2.0 * pi * r) if r > 0 else 0.0
    return quad(f, 0.0, RT, epsabs=1e-13, epsrel=1e-11, limit=200)[0]


def local_time_mean(model, a, T, mode="plain", t0=0.0):
    """``E[l_T(a)] = int_0^T (2 pi R_s)^(-1/2) exp(-a^2 / 2 R_s) ds``.

    Weighted mode integrates against ``dR_s``; by the chain rule that is the
    same integral in ``r = R_s`` from 0 to ``R_T``.
    """
    a = float(a)
    T = float(T)

    def density(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-a * a / (2.0 * r)) / np.sqrt(2.0 * pi * r)
        return np.where(r > 0, out, 0.0 if a != 0.0 else np.inf)

    if mode == "weighted":
        return weighted_mean_at_variance(a, float(model.variance(T)))
    if mode != "plain":
        raise ValueError(f"unknown mode {mode!r}")
    if a == 0.0:
        h = local_exponent(model, t0)
        if not h < 1.0 - 1e-6:
            raise DivergenceError(f"R_s^(-1/2) is not integrable at s=0 (local exponent {h:.3g})")
        # fold the s^-h singularity into Gauss-Jacobi weights on a dyadic mesh
        return _power_singular_integral(lambda s: density(model.variance(s)), t0, t0 + T, h)
    res = quad(lambda s: float(density(model.variance(s))), t0, t0 + T,
               epsabs=1e-13, epsrel=1e-11, limit=400, full_output=1)
    if len(res) > 3:
        raise DivergenceError(f"mean integral did not converge: {res[3]}")
    return res[0]


def _power_singular_integral(g, a, b, h, levels=40, n=16):
    """``int_a^b g(s) ds`` for ``g ~ (s - a)^(-h)`` at ``a``."""
    L = b - a
    edges = a + L * 2.0 ** -np.arange(levels, -1, -1, dtype=float)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, n)
        total += float(np.sum(w * g(x)))
    x, w = jacobi_left(a, edges[0], -h, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        total += float(np.sum(w * g(x) * (x - a) ** h))
    return total


# ---------------------------------------------------------------------------
# L^2 diagnostic
# ---------------------------------------------------------------------------


@dataclass
class L2Diagnostic:
    quadrature: float
    mc: float | None
    mc_stderr: float | None
    exponent: float
    bracket: tuple | None = None

    @property
    def ratio(self):
        return None if self.mc is None else self.mc / self.quadrature


def _diagonal_exponent(model, T):
    t = np.array([0.25, 0.5, 0.75, 1.0]) * T
    hs = []
    for ti in t:
        a = float(model.increment_variance(ti, ti - 1e-7 * T))
        b = float(model.increment_variance(ti, ti - 2e-7 * T))
        hs.append(log(b / a) / (2.0 * log(2.0)))
    return float(max(hs))


def l2_double_integral(model, T, levels=40, n=16, inner_levels=8):
    """``int int_{[0,T]^2} (2 pi Delta(t, s))^(-1/2) dt ds`` via ``u = t - s``.

    The outer integral in u is split dyadically towards the diagonal with a
    Gauss-Jacobi panel carrying the local power at the end; the inner one
    runs over ``s in [0, T - u]`` with grading towards s = 0.
    """
    T = float(T)
    h = _diagonal_exponent(model, T)
    if not h < 1.0 - 1e-6:
        raise DivergenceError(f"Delta(t, s)^(-1/2) is not integrable near the diagonal (exponent {h:.3g})")
    s_edges_unit = np.concatenate([[0.0], 2.0 ** -np.arange(inner_levels, -1, -1, dtype=float)])
    xi, wi = _graded_unit_rule(s_edges_unit, 8)

    def g(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty(u.shape)
        for i, ui in enumerate(u):
            span = T - ui
            s = span * xi
            D = model.increment_variance(s + ui, s)
            out[i] = span * float(np.sum(wi / np.sqrt(2.0 * pi * D)))
        return out

    return 2.0 * _power_singular_integral(g, 0.0, T, h, levels, n)


def _graded_unit_rule(edges, n):
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(a, b, n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def stationary_bracket(model, T):
    """Bounds from ``R_|t-s| <= Delta <= 2 R_|t-s|``: ``(lower, upper)`` on the double integral."""
    T = float(T)
    h = local_exponent(model)
    if not h < 1.0 - 1e-6:
        raise DivergenceError("R_u^(-1/2) is not integrable at u=0")
    full = 2.0 * _power_singular_integral(
        lambda u: (T - u) / np.sqrt(2.0 * pi * model.variance(u)), 0.0, T, h)
    return full / sqrt(2.0), full


def l2_diagnostic(model, T, ensemble=None, eps=0.05, mode="plain", covariance="model"):
    """Quadrature value of the double integral and, given an ensemble, the
    MC estimate of ``int E[hat l_T(a)^2] da`` with bins of half-width eps."""
    value = l2_double_integral(model, T)
    mc = se = None
    if ensemble is not None:
        ens = ensemble.restrict(T)
        reach = float(np.max(np.abs(ens.paths))) + 2.0 * eps
        est = local_time_hist(ens, None, LevelGrid.with_half_width(eps, reach), mode, covariance)
        mc, se = mc_mean(est.l2_integral())
    bracket = stationary_bracket(model, T) if model.family == "vgamma" else None
    return L2Diagnostic(value, mc, se, _diagonal_exponent(model, T), bracket)


# ---------------------------------------------------------------------------
# Integration by parts for the weighted local time
# ---------------------------------------------------------------------------


def _fd(f, t, h):
    return (f(t + h) - f(t - h)) / (2.0 * h)


def integration_by_parts_gap(ensemble, T=None, levels=None, dR=None, d2R=None):
    """Relative sup-gap between the weighted estimate and
    ``hat l_T R'(T) - int_0^T hat l_s R''(s) ds`` (both per path, per level).

    ``dR``/``d2R`` default to central differences of the model variance.
    """
    ens = ensemble if T is None else ensemble.restrict(T)
    model = ens.model
    t = ens.grid
    Tend = float(t[-1])
    if dR is None:
        dR = lambda s: _fd(model.variance, np.asarray(s, dtype=float), 1e-6)
    if d2R is None:
        d2R = lambda s: _fd(dR, np.asarray(s, dtype=float), 1e-4 * np.asarray(s, dtype=float))
    if levels is None:
        levels = default_levels(ens)
    weighted = local_time_hist(ens, None, levels, "weighted", "model").values
    # sum_i hat l_{t_i} R''(m_i) dt_i regrouped by the time step k at which mass enters
    mid = 0.5 * (t[:-1] + t[1:])
    curv = d2R(mid) * np.diff(t)
    later = np.concatenate([np.cumsum(curv[::-1])[::-1][1:], [0.0]]) + 0.5 * curv
    w = np.diff(t) * (float(dR(Tend)) - later)
    ibp = _binned(ens.paths[:, :-1], w, levels) / (2.0 * levels.eps)
    scale = np.max(np.abs(weighted), axis=1)
    return np.max(np.abs(weighted - ibp), axis=1) / np.where(scale > 0, scale, 1.0)


def write_local_time_csv(path, estimate):
    """Columns ``path_id, level, value``."""
    y = estimate.centers
    V = estimate.values
    return write_csv(path, ["path_id", "level", "value"],
                     ((m, y[j], V[m, j]) for m in range(V.shape[0]) for j in range(V.shape[1])))
