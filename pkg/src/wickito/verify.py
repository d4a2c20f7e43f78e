"""Monte Carlo checks of the Itô formula, the Tanaka formula and the Itô/Wick gap.

Each rung of a refinement ladder samples the model afresh with the same seed.
Hermite ensembles share their Gaussian coordinates across rungs, so successive
rungs discretize the same realizations.

Per path, the Itô residual is

    r = f(T, G_T) - f(t_0, G_0) - sum f_t(t_{i+1}, G_{i+1}) dt_i
        - WickRiemann(f_x) - 1/2 sum f_xx(t_i, G_i) dR_i

The time integral uses right endpoints: together with the left-point Wick sum
this makes ``f = t x`` telescope exactly.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .integrate import IntegrandSpec, compensator, forward_riemann, wick_riemann
from .localtime import LevelGrid, local_time_hist, local_time_mean, weighted_mean_at_variance
from .reports import VerificationReport, l2_norm_estimate, mc_mean, write_csv, write_json
from .simulate import GridSpec, sample_paths

DEFAULT_LADDER = (64, 128, 256, 512)


@dataclass(frozen=True)
class RunKnobs:
    """Monte Carlo and discretization settings shared by the verifiers."""

    paths: int = 10_000
    seed: int = 0
    ladder: tuple = DEFAULT_LADDER
    sampler: str = "hermite"
    K: int = 64
    covariance: str = "ensemble"
    spacing: str = "uniform"
    threads: int = 1
    tolerance: float = 0.05

    def ensemble(self, model, T, n):
        grid = GridSpec(float(T), int(n), self.spacing, t0=model.domain[0])
        return sample_paths(model, grid, self.paths, self.seed, self.sampler, self.K, self.threads)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _ladder_ok(table):
    """Finest rung no worse than the previous one, up to 2 combined standard errors
    (and rounding, for identities that hold exactly)."""
    if len(table) < 2:
        return True
    a, b = table[-2], table[-1]
    slack = 2.0 * sqrt(a["relative_stderr"] ** 2 + b["relative_stderr"] ** 2) + 1e-12
    return b["relative"] <= a["relative"] + slack


def growth_check(fn, ensemble):
    """``(ok, lam_bound, worst_ratio)`` for the growth tag of ``fn`` on the sampled range."""
    C, lam = fn.growth
    R, _ = ensemble.covariance_source("model")
    lam_bound = 1.0 / (4.0 * float(np.max(R)))
    t = ensemble.grid
    G = ensemble.paths
    env = C * np.exp(lam * G * G)
    worst = 0.0
    for g in (fn.f, fn.ft, fn.fx, fn.fxx):
        vals = np.abs(np.broadcast_to(np.asarray(g(t[None, :], G), dtype=float), G.shape))
        worst = max(worst, float(np.max(vals / env)))
    return bool(lam < lam_bound and worst <= 1.0 + 1e-12), lam_bound, worst


def ito_residual(ensemble, fn, covariance="ensemble"):
    """Per-path residual of the discretized Itô formula for ``fn``."""
    t = ensemble.grid
    G = ensemble.paths
    R, _ = ensemble.covariance_source(covariance)
    lhs = np.asarray(fn.f(t[-1], G[:, -1]), dtype=float) - np.asarray(fn.f(t[0], G[:, 0]), dtype=float)
    dt_term = np.sum(np.broadcast_to(np.asarray(fn.ft(t[None, 1:], G[:, 1:]), dtype=float), G[:, 1:].shape)
                     * np.diff(t), axis=1)
    ito = wick_riemann(ensemble, fn.integrand(), covariance=covariance)
    curv = np.broadcast_to(np.asarray(fn.fxx(t[None, :-1], G[:, :-1]), dtype=float), G[:, :-1].shape)
    dR_term = 0.5 * np.sum(curv * np.diff(R), axis=1)
    return lhs - dt_term - ito - dR_term


def _rung(n, resid, scale, extra=None):
    l2, se = l2_norm_estimate(resid)
    row = {"n_steps": int(n), "residual_l2": l2, "stderr": se,
           "relative": l2 / scale if scale > 0 else l2, "relative_stderr": se / scale if scale > 0 else se}
    if extra:
        row.update(extra)
    return row


def verify_ito(model, fn, T, knobs=RunKnobs()):
    """Relative L^2 residual of the Itô formula on a grid-refinement ladder.

    The relative scale is ``||f(T, G_T)||_{L^2}`` at the finest rung.
    """
    table, last = [], None
    for n in knobs.ladder:
        ens = knobs.ensemble(model, T, n)
        table.append((n, ito_residual(ens, fn, knobs.covariance)))
        last = ens
    scale = l2_norm_estimate(np.asarray(fn.f(last.grid[-1], last.paths[:, -1]), dtype=float))[0]
    rows = [_rung(n, r, scale) for n, r in table]
    growth_ok, lam_bound, worst = growth_check(fn, last)
    monotone = _ladder_ok(rows)
    rel = rows[-1]["relative"]
    passed = bool(rel < knobs.tolerance and monotone and growth_ok)
    return VerificationReport(
        identity=f"ito[{fn.label}]", residual_l2=rel, stderr=rows[-1]["relative_stderr"],
        tolerance=knobs.tolerance, passed=passed, n_steps=int(knobs.ladder[-1]), n_paths=knobs.paths,
        K=knobs.K if knobs.sampler == "hermite" else None, convergence_table=rows,
        details={"model": model.describe(), "knobs": knobs.as_dict(), "scale": scale,
                 "ladder_monotone": monotone, "growth_ok": growth_ok, "lambda_bound": lam_bound,
                 "growth_ratio": worst, "growth": list(fn.growth)},
    )


def square_identity(model, T, knobs=RunKnobs()):
    """``int_0^T G d<>G`` against ``(G_T^2 - R_T) / 2`` on the ladder.

    The residual is relative to ``||(G_T^2 - R_T) / 2||_{L^2}``; ``R_T`` comes
    from the same covariance source as the compensator.
    """
    x = IntegrandSpec(lambda t, x: x, lambda t, x: np.ones(np.shape(x)), (1.4, 0.1), "x")
    rows, scale = [], None
    for n in knobs.ladder:
        ens = knobs.ensemble(model, T, n)
        R, _ = ens.covariance_source(knobs.covariance)
        target = 0.5 * (ens.paths[:, -1] ** 2 - R[-1])
        if scale is None or n == knobs.ladder[-1]:
            scale = l2_norm_estimate(target)[0]
        rows.append((n, wick_riemann(ens, x, covariance=knobs.covariance) - target, target))
    table = [_rung(n, r, scale, {"target_mean": mc_mean(tg)[0]}) for n, r, tg in rows]
    monotone = _ladder_ok(table)
    rel = table[-1]["relative"]
    return VerificationReport(
        identity="int G d<>G = (G_T^2 - R_T)/2", residual_l2=rel, stderr=table[-1]["relative_stderr"],
        tolerance=knobs.tolerance, passed=bool(rel < knobs.tolerance and monotone),
        n_steps=int(knobs.ladder[-1]), n_paths=knobs.paths,
        K=knobs.K if knobs.sampler == "hermite" else None, convergence_table=table,
        details={"model": model.describe(), "knobs": knobs.as_dict(), "ladder_monotone": monotone,
                 "scale": scale},
    )


def _z(estimate, target, se, floor=1e-6):
    # a degenerate sample (zero spread) is judged on an absolute floor instead
    if se > 0:
        return (estimate - target) / se
    return 0.0 if abs(estimate - target) <= floor else float("inf")


def verify_tanaka(model, c, T, eps_ladder=(0.2, 0.1, 0.05, 0.02), knobs=RunKnobs(), z_limit=3.0):
    """Mollified Tanaka formula with the weighted-local-time cross-check.

    Rung j pairs ``eps_ladder[j]`` with ``knobs.ladder[j]`` steps.  For each rung
    the report lists the Itô residual of ``sqrt((x-c)^2 + eps^2)``, the
    curvature term ``1/2 int f''_eps(G) dR`` and the weighted local time at c
    with bin half-width eps.  The two delta-term estimates must agree in mean
    at the finest rung; their pathwise L^2 distance is reported only, since
    it need not vanish for band-limited surrogate paths.
    """
    from .library import mollified_abs

    if len(eps_ladder) != len(knobs.ladder):
        raise ValueError("eps_ladder and the step ladder must have the same length")
    rows = []
    scale = None
    final_est = None
    for eps, n in zip(eps_ladder, knobs.ladder):
        ens = knobs.ensemble(model, T, n)
        fn = mollified_abs(c, eps)
        R, _ = ens.covariance_source(knobs.covariance)
        curv = 0.5 * np.sum(fn.fxx(None, ens.paths[:, :-1]) * np.diff(R), axis=1)
        if not np.all(np.isfinite(curv)):
            raise ArithmeticError("mollified curvature term diverged")
        reach = float(np.max(np.abs(ens.paths))) + abs(c) + 2 * eps
        lv = LevelGrid.with_half_width(eps, reach, center=c)
        est = local_time_hist(ens, None, lv, "weighted", knobs.covariance)
        lt = est.values[:, int(lv.index(c))]
        resid = ito_residual(ens, fn, knobs.covariance)
        if scale is None or n == knobs.ladder[-1]:
            scale = l2_norm_estimate(fn.f(None, ens.paths[:, -1]))[0]
        gap, gap_se = l2_norm_estimate(curv - lt)
        (cm, cs), (lm, ls) = mc_mean(curv), mc_mean(lt)
        row = _rung(n, resid, scale, {
            "eps": eps, "curvature_mean": cm, "curvature_stderr": cs, "local_time_mean": lm,
            "local_time_stderr": ls, "mean_gap": abs(cm - lm), "mean_gap_stderr": sqrt(cs * cs + ls * ls),
            "delta_gap_l2": gap, "delta_gap_stderr": gap_se,
        })
        rows.append(row)
        final_est = ens
    R_T = float(final_est.covariance_source(knobs.covariance)[0][-1])
    target_model = local_time_mean(model, c, T, "weighted")
    target_law = weighted_mean_at_variance(c, R_T)
    lt_mean, lt_se = rows[-1]["local_time_mean"], rows[-1]["local_time_stderr"]
    z = _z(lt_mean, target_law, lt_se)
    z_model = _z(lt_mean, target_model, lt_se)
    monotone = _ladder_ok(rows)
    gap_down = rows[-1]["mean_gap"] <= rows[0]["mean_gap"]
    agree = rows[-1]["mean_gap"] <= z_limit * rows[-1]["mean_gap_stderr"] + 1e-4
    rel = rows[-1]["relative"]
    passed = bool(rel < knobs.tolerance and monotone and gap_down and agree and abs(z) < z_limit)
    return VerificationReport(
        identity=f"tanaka[c={c}]", residual_l2=rel, stderr=rows[-1]["relative_stderr"],
        tolerance=knobs.tolerance, passed=passed, n_steps=int(knobs.ladder[-1]), n_paths=knobs.paths,
        K=knobs.K if knobs.sampler == "hermite" else None, convergence_table=rows,
        details={"model": model.describe(), "knobs": knobs.as_dict(), "level": c,
                 "weighted_local_time_mean": lt_mean, "weighted_local_time_stderr": lt_se,
                 "target": target_law, "z_score": z, "target_model": target_model,
                 "z_score_model": z_model, "sampled_R_T": R_T,
                 "ladder_monotone": monotone, "mean_gap_decreasing": gap_down,
                 "delta_term_agrees": agree},
    )


def compare_ito_wick(model, spec, T, n=512, knobs=RunKnobs(), covariance="model"):
    """Forward Riemann sum minus Wick-Riemann sum, per path.

    The difference is ``sum_i phi_x(t_i, G_i) (R(t_i, t_{i+1}) - R(t_i))``:
    identically zero for martingale increments.
    """
    ens = knobs.ensemble(model, T, n)
    diff = forward_riemann(ens, spec) - wick_riemann(ens, spec, covariance=covariance)
    mean, se = mc_mean(diff)
    l2, l2_se = l2_norm_estimate(diff)
    comp = compensator(ens, covariance=covariance)
    return {
        "identity": f"forward - wick [{spec.label}]", "model": model.describe(), "n_steps": int(n),
        "n_paths": knobs.paths, "covariance": covariance, "mean": mean, "stderr": se,
        "l2": l2, "l2_stderr": l2_se, "max_abs": float(np.max(np.abs(diff))),
        "compensator_sum": float(np.sum(comp)), "exact_zero": bool(np.all(diff == 0.0)),
        "samples": diff,
    }


def write_report(path, report, config=None):
    payload = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    payload.pop("samples", None)
    if config is not None:
        payload["config"] = config
    return write_json(path, payload)


def write_ladder_csv(path, report):
    """Convergence ladder with columns ``n_steps, residual_l2, stderr, relative``."""
    rows = ((r["n_steps"], r["residual_l2"], r["stderr"], r["relative"]) for r in report.convergence_table)
    return write_csv(path, ["n_steps", "residual_l2", "stderr", "relative"], rows)
