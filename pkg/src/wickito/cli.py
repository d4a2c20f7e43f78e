"""Command-line front end.

A run is described by one JSON document (``--config``); the common scalar
flags override it.  Every JSON report embeds the resolved configuration and a
``schema_version``.  Exit status: 0 when every pass flag is true, 1 when a
verification fails, 2 on configuration errors.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import chaos, hermite, integrate, localtime, procmodel, simulate, verify
from .library import FUNCTION_NAMES, INTEGRAND_NAMES, named_function, named_integrand
from .reports import mc_mean, write_coeff_table, write_csv, write_json

COMMANDS = ("basis-check", "covcheck", "simulate", "wiener", "integrate", "verify-ito", "verify-tanaka",
            "compare", "localtime", "occupation", "l2-diag", "sde")

CSV_HELP = """CSV outputs (all under --out):
  basis-check    hermite_coeffs.csv      k, value          (projection of 1_[0,1])
  covcheck       coefficients.csv        t, k, c, c_prime
                 defects.csv             t, K, defect
                 norms.csv               t, p, norm_sq, tail_bound   (delta_0(G_t))
  simulate       paths.csv               path_id, t, value
                 coords.csv              path_id, k, z     (with task.dump_coords)
  wiener         wiener_coeffs.csv       k, value
  integrate      integral_samples.csv    path_id, value
  verify-ito     ladder.csv              n_steps, residual_l2, stderr, relative
  verify-tanaka  ladder.csv              n_steps, residual_l2, stderr, relative
  compare        difference_samples.csv  path_id, value
  localtime      local_times.csv         path_id, level, value
  occupation     residuals.csv           path_id, value
  l2-diag        (JSON only)
  sde            sde_samples.csv         path_id, value
"""


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HurstProfile(Strict):
    kind: Literal["constant", "linear"] = "linear"
    h0: float = 0.3
    h1: float = 0.7

    @field_validator("h0", "h1")
    @classmethod
    def _unit(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"Hurst value {v} outside (0, 1)")
        return v

    def build(self):
        if self.kind == "constant":
            h0 = self.h0
            return lambda t: np.full(np.shape(t), h0)
        h0, h1 = self.h0, self.h1
        return lambda t: h0 + (h1 - h0) * np.clip(np.asarray(t, dtype=float), 0.0, 1.0)


class ModelConfig(Strict):
    family: Literal["bm", "bridge", "fbm", "mbm", "vgamma"] = "bm"
    H: float | None = None
    h: HurstProfile | None = None
    gamma_power: float | None = None

    @field_validator("H")
    @classmethod
    def _hurst(cls, v):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"Hurst index H={v} outside (0, 1)")
        return v

    @field_validator("gamma_power")
    @classmethod
    def _power(cls, v):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"gamma power {v} outside (0, 1)")
        return v

    @model_validator(mode="after")
    def _needs(self):
        if self.family == "fbm" and self.H is None:
            raise ValueError("fbm needs H")
        if self.family == "mbm" and self.h is None:
            self.h = HurstProfile()
        if self.family == "vgamma" and self.gamma_power is None:
            self.gamma_power = 0.75
        return self

    def build(self):
        if self.family == "bm":
            return procmodel.BrownianMotion()
        if self.family == "bridge":
            return procmodel.BrownianBridge()
        if self.family == "fbm":
            return procmodel.FractionalBM(self.H)
        if self.family == "mbm":
            return procmodel.MultifractionalBM(self.h.build(), label=self.h.model_dump())
        return procmodel.VGamma(procmodel.VGammaKernel.power(self.gamma_power))


class GridConfig(Strict):
    T: float = Field(1.0, gt=0)
    steps: int = Field(512, ge=1)
    spacing: Literal["uniform", "geometric"] = "uniform"


class MCConfig(Strict):
    paths: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    threads: int = Field(1, ge=1)
    sampler: Literal["hermite", "cholesky"] = "hermite"
    covariance: Literal["ensemble", "model"] = "ensemble"


class TaskConfig(Strict):
    function: str = "x^2"
    integrand: str = "x"
    ladder: list[int] = [64, 128, 256, 512]
    eps_ladder: list[float] = [0.2, 0.1, 0.05, 0.02]
    level: float = 0.0
    levels: list[float] = [-0.5, 0.0, 0.5]
    eps: float = Field(0.05, gt=0)
    mode: Literal["plain", "weighted"] = "plain"
    phi: Literal["one", "x^2", "abs", "bin"] = "x^2"
    wiener_f: Literal["one", "cos", "exp(-t)"] = "one"
    interval: list[float] = [0.0, 1.0]
    times: list[float] = [0.25, 0.5, 0.75, 1.0]
    orders: list[int] = [16, 32, 64, 128]
    golden: str | None = None
    alpha: float = 0.0
    beta: float = 1.0
    x0: float = 1.0
    dump_coords: bool = False

    @field_validator("function")
    @classmethod
    def _fn(cls, v):
        if v not in FUNCTION_NAMES:
            raise ValueError(f"unknown function {v!r}; choose from {', '.join(FUNCTION_NAMES)}")
        return v

    @field_validator("integrand")
    @classmethod
    def _ig(cls, v):
        if v not in INTEGRAND_NAMES:
            raise ValueError(f"unknown integrand {v!r}; choose from {', '.join(INTEGRAND_NAMES)}")
        return v


class RunConfig(Strict):
    command: Literal[COMMANDS]
    model: ModelConfig = ModelConfig()
    grid: GridConfig = GridConfig()
    mc: MCConfig = MCConfig()
    hermite_order: int = Field(64, ge=1)
    tolerance: float = Field(0.05, gt=0)
    out: str = "wickito-out"
    task: TaskConfig = TaskConfig()


# ---------------------------------------------------------------------------


def _knobs(cfg, ladder=None):
    return verify.RunKnobs(paths=cfg.mc.paths, seed=cfg.mc.seed, ladder=tuple(ladder or cfg.task.ladder),
                           sampler=cfg.mc.sampler, K=cfg.hermite_order, covariance=cfg.mc.covariance,
                           spacing=cfg.grid.spacing, threads=cfg.mc.threads, tolerance=cfg.tolerance)


def _ensemble(cfg, model):
    grid = simulate.GridSpec(cfg.grid.T, cfg.grid.steps, cfg.grid.spacing, t0=model.domain[0])
    return simulate.sample_paths(model, grid, cfg.mc.paths, cfg.mc.seed, cfg.mc.sampler,
                                 cfg.hermite_order, cfg.mc.threads)


def _samples_csv(path, values):
    return write_csv(path, ["path_id", "value"], enumerate(np.asarray(values, dtype=float)))


def run_basis_check(cfg, model, out):
    K = cfg.hermite_order
    basis = hermite.HermiteBasis(max(K, 40))
    G = basis.gram()[:40, :40]
    orth = float(np.max(np.abs(G - np.eye(40))))
    sups = []
    for k in range(min(K, 60)):
        x = np.linspace(-2 * np.sqrt(k + 1), 2 * np.sqrt(k + 1), 4001)
        sups.append(float(np.max(np.abs(hermite.hermite_functions(k + 1, x)[k]))) * (k + 1) ** (1 / 12))
    x = np.linspace(-9.5, 9.5, 381)
    h = 1e-5
    d1 = hermite.hermite_functions(40, x, 1)
    fd = (hermite.hermite_functions(40, x + h) - hermite.hermite_functions(40, x - h)) / (2 * h)
    scale = np.max(np.abs(d1), axis=1, keepdims=True)
    ladder_err = float(np.max(np.abs(d1 - fd) / scale))
    half = len(sups) // 2
    bounded = max(sups[half:]) <= max(sups[:half]) * (1 + 1e-9) if half else True
    coeffs = basis.project(lambda u: np.ones_like(u), support=(0.0, 1.0))
    write_coeff_table(out / "hermite_coeffs.csv", coeffs[:K] if K <= basis.order else coeffs)
    passed = orth < 1e-8 and ladder_err < 1e-6 and bounded
    return {"identity": "hermite basis", "K": K, "orthonormality_error": orth,
            "ladder_relative_error": ladder_err, "sup_times_k_pow": sups, "bound_not_growing": bounded,
            "passed": bool(passed)}


def _golden_gap(path, table):
    from .reports import read_csv

    header, rows = read_csv(path)
    if header != ["t", "k", "c", "c_prime"]:
        raise ValueError(f"golden table {path} has header {header}")
    ref = {(float(r[0]), int(r[1])): float(r[2]) for r in rows}
    gaps = [abs(ref[(t, k)] - c) for t, k, c, _ in table if (t, k) in ref]
    if not gaps:
        raise ValueError("golden table shares no (t, k) entries with this run")
    return max(gaps)


def run_covcheck(cfg, model, out):
    K = cfg.hermite_order
    t = np.asarray(cfg.task.times, dtype=float)
    C = model.coeffs(t, K)
    dt = t[t > model.domain[0]] if model.family == "vgamma" else t
    Cp = np.full_like(C, np.nan)
    if dt.size:
        Cp[np.isin(t, dt)] = model.coeff_derivs(dt, K)
    table = [(float(t[i]), k, float(C[i, k]), float(Cp[i, k])) for i in range(t.size) for k in range(K)]
    write_csv(out / "coefficients.csv", ["t", "k", "c", "c_prime"], table)
    cov_err = float(np.max(np.abs(C @ C.T - model.gram(t))))
    orders = sorted(set(cfg.task.orders) | {K})
    defects = {Ko: simulate.truncation_defect(model, t, Ko) for Ko in orders}
    write_csv(out / "defects.csv", ["t", "K", "defect"],
              ((t[i], Ko, defects[Ko][i]) for Ko in orders for i in range(t.size)))
    stacked = np.array([defects[Ko] for Ko in orders])
    bessel_ok = bool(stacked.min() >= -1e-8)
    monotone = bool(np.all(np.diff(stacked, axis=0) <= 1e-12))
    norm_rows = []
    for ti in t:
        if model.variance(ti) <= 0:
            continue
        for p in (0, 1, 2):
            res = chaos.hida_norm_generalized(chaos.Delta(0.0), float(ti), p, model, K)
            norm_rows.append((float(ti), p, res.norm_sq, res.tail_bound))
    write_csv(out / "norms.csv", ["t", "p", "norm_sq", "tail_bound"], norm_rows)
    report = {"identity": "sum_k c_k(t) c_k(s) = R(t, s)", "K": K, "max_covariance_error": cov_err,
              "defects": {str(k): v for k, v in defects.items()}, "bessel_ok": bessel_ok,
              "defect_monotone": monotone}
    passed = bessel_ok and monotone
    if cfg.task.golden:
        gap = _golden_gap(cfg.task.golden, table)
        report["golden_max_gap"] = gap
        passed = passed and gap < 1e-6
    report["passed"] = bool(passed)
    return report


def run_simulate(cfg, model, out):
    ens = _ensemble(cfg, model)
    simulate.write_ensemble_csv(out / "paths.csv", ens, out / "coords.csv" if cfg.task.dump_coords else None)
    var_T, se = mc_mean(ens.paths[:, -1] ** 2)
    R_T = float(ens.R[-1])
    rel, ok = (simulate.defect_gate(model, ens.grid[1:], cfg.hermite_order) if cfg.mc.sampler == "hermite"
               else (0.0, True))
    return {"identity": "sample variance at T", "sampler": cfg.mc.sampler, "sample_second_moment": var_T,
            "stderr": se, "law_variance": R_T, "model_variance": float(model.variance(ens.grid[-1])),
            "relative_defect": rel, "defect_gate_ok": ok, "passed": bool(abs(var_T - R_T) < 4 * se)}


_WIENER_F = {
    "one": lambda s: np.ones_like(s),
    "cos": np.cos,
    "exp(-t)": lambda s: np.exp(-s),
}


def run_wiener(cfg, model, out):
    a, b = cfg.task.interval
    Z = integrate.wiener_integral(model, _WIENER_F[cfg.task.wiener_f], (a, b), cfg.hermite_order)
    write_coeff_table(out / "wiener_coeffs.csv", Z.coeffs)
    report = {"identity": "Wiener integral variance", "f": cfg.task.wiener_f, "interval": [a, b],
              "K": cfg.hermite_order, "variance": Z.variance}
    passed = bool(np.isfinite(Z.variance))
    if cfg.task.wiener_f == "one":
        # for f = 1 coefficient k equals c_k(b) - c_k(a); the truncation gap is reported, not gated
        C = model.coeffs([a, b], cfg.hermite_order)
        series = float(np.sum((C[1] - C[0]) ** 2))
        target = float(model.increment_variance(b, a))
        report.update(series_variance=series, quadrature_gap=abs(Z.variance - series), target=target,
                      truncation_gap=target - Z.variance)
        passed = passed and abs(Z.variance - series) < 1e-8 * max(series, 1.0)
    report["passed"] = passed
    return report


def run_integrate(cfg, model, out):
    ens = _ensemble(cfg, model)
    spec = named_integrand(cfg.task.integrand, cfg.grid.T)
    vals = integrate.wick_riemann(ens, spec, covariance=cfg.mc.covariance)
    _samples_csv(out / "integral_samples.csv", vals)
    mean, se = mc_mean(vals)
    z = mean / se if se > 0 else 0.0
    return {"identity": "E[int phi d<>G] = 0", "integrand": spec.label, "growth": list(spec.growth),
            "mean": mean, "stderr": se, "z_score": z, "passed": bool(abs(z) < 3.0)}


def run_verify_ito(cfg, model, out):
    rep = verify.verify_ito(model, named_function(cfg.task.function, cfg.grid.T), cfg.grid.T, _knobs(cfg))
    verify.write_ladder_csv(out / "ladder.csv", rep)
    return rep.to_dict()


def run_verify_tanaka(cfg, model, out):
    rep = verify.verify_tanaka(model, cfg.task.level, cfg.grid.T, tuple(cfg.task.eps_ladder), _knobs(cfg))
    verify.write_ladder_csv(out / "ladder.csv", rep)
    return rep.to_dict()


def run_compare(cfg, model, out):
    res = verify.compare_ito_wick(model, named_integrand(cfg.task.integrand, cfg.grid.T), cfg.grid.T,
                                  cfg.grid.steps, _knobs(cfg), covariance=cfg.mc.covariance)
    _samples_csv(out / "difference_samples.csv", res.pop("samples"))
    res["passed"] = True
    return res


def run_localtime(cfg, model, out):
    ens = _ensemble(cfg, model)
    reach = float(np.max(np.abs(ens.paths))) + 2 * cfg.task.eps
    levels = localtime.LevelGrid.with_half_width(cfg.task.eps, reach)
    est = localtime.local_time_hist(ens, None, levels, cfg.task.mode, cfg.mc.covariance)
    localtime.write_local_time_csv(out / "local_times.csv", est)
    weights = localtime._weights(ens, cfg.task.mode, cfg.mc.covariance)
    oracle = localtime.expected_hist(model, ens.grid, levels, cfg.task.mode, variance=ens.R, weights=weights)
    rows, passed = [], True
    for a in cfg.task.levels:
        j = int(levels.index(a))
        mean, se = mc_mean(est.values[:, j])
        try:
            closed = localtime.local_time_mean(model, a, cfg.grid.T, cfg.task.mode)
        except localtime.DivergenceError as exc:
            closed = f"divergent: {exc}"
        z = (mean - oracle[j]) / se if se > 0 else 0.0
        passed = passed and abs(z) < 3.0
        rows.append({"level": a, "bin_center": float(levels.centers[j]), "mean": mean, "stderr": se,
                     "binned_expectation": float(oracle[j]), "z_score": z, "closed_form": closed})
    mass_gap = float(np.max(np.abs(est.total_mass() - est.mass)))
    passed = passed and mass_gap < 1e-9 * max(1.0, float(np.max(np.abs(est.mass))))
    return {"identity": "local time means", "mode": cfg.task.mode, "eps": cfg.task.eps, "levels": rows,
            "total_mass_gap": mass_gap, "passed": bool(passed)}


def run_occupation(cfg, model, out):
    ens = _ensemble(cfg, model)
    reach = float(np.max(np.abs(ens.paths))) + 2 * cfg.task.eps
    levels = localtime.LevelGrid.with_half_width(cfg.task.eps, reach)
    averages = None
    if cfg.task.phi == "bin":
        j = int(levels.index(0.0))
        Phi = localtime.bin_indicator(levels, j)
        averages = (np.arange(levels.n) == j).astype(float)
    else:
        Phi = {"one": lambda x: np.ones_like(x), "x^2": np.square, "abs": np.abs}[cfg.task.phi]
        if cfg.task.phi == "one":
            averages = np.ones(levels.n)
    res = localtime.occupation_check(ens, Phi, None, cfg.task.mode, levels, cfg.mc.covariance, averages)
    _samples_csv(out / "residuals.csv", res)
    exact = cfg.task.phi in ("bin", "one")
    worst = float(np.max(res))
    passed = worst < 1e-12 if exact else worst < 2.0 * cfg.task.eps * cfg.grid.T * (reach + 1.0)
    return {"identity": "occupation formula", "phi": cfg.task.phi, "mode": cfg.task.mode,
            "eps": cfg.task.eps, "max_residual": worst, "mean_residual": float(np.mean(res)),
            "exact_expected": exact, "passed": bool(passed)}


def run_l2_diag(cfg, model, out):
    # the quadrature describes the exact law, so the MC half samples it exactly
    exact = cfg.model_copy(update={"mc": cfg.mc.model_copy(update={"sampler": "cholesky"})})
    ens = _ensemble(exact, model) if cfg.mc.paths > 1 else None
    d = localtime.l2_diagnostic(model, cfg.grid.T, ens, cfg.task.eps, cfg.task.mode, cfg.mc.covariance)
    report = {"identity": "int int (2 pi Delta)^(-1/2)", "quadrature": d.quadrature, "mc": d.mc,
              "mc_stderr": d.mc_stderr, "ratio": d.ratio, "diagonal_exponent": d.exponent,
              "bracket": d.bracket}
    passed = d.ratio is None or abs(d.ratio - 1.0) < 0.15
    report["passed"] = bool(passed)
    return report


def run_sde(cfg, model, out):
    a, b = cfg.task.alpha, cfg.task.beta
    res = integrate.sde_wick_exp(model, lambda s: np.full(np.shape(s), a), lambda s: np.full(np.shape(s), b),
                                 cfg.grid.T, cfg.task.x0, cfg.mc.paths, cfg.mc.seed, cfg.hermite_order,
                                 cfg.mc.threads)
    _samples_csv(out / "sde_samples.csv", res.values)
    return {"identity": "wick-exponential SDE", **res.report}


RUNNERS = {
    "basis-check": run_basis_check, "covcheck": run_covcheck, "simulate": run_simulate,
    "wiener": run_wiener, "integrate": run_integrate, "verify-ito": run_verify_ito,
    "verify-tanaka": run_verify_tanaka, "compare": run_compare, "localtime": run_localtime,
    "occupation": run_occupation, "l2-diag": run_l2_diag, "sde": run_sde,
}


def build_parser():
    p = argparse.ArgumentParser(prog="wickito", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=CSV_HELP)
    p.add_argument("command", nargs="?", choices=COMMANDS, help="pipeline to run (overrides config)")
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--paths", type=int, help="Monte Carlo paths M")
    p.add_argument("--steps", type=int, help="grid steps n")
    p.add_argument("--hermite-order", type=int, help="Hermite truncation K")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    return p


def resolve_config(args):
    data = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    if args.command:
        data["command"] = args.command
    mc = dict(data.get("mc", {}))
    grid = dict(data.get("grid", {}))
    for flag, key, block in (("seed", "seed", mc), ("paths", "paths", mc), ("threads", "threads", mc),
                             ("steps", "steps", grid)):
        val = getattr(args, flag)
        if val is not None:
            block[key] = val
    if mc:
        data["mc"] = mc
    if grid:
        data["grid"] = grid
    if args.hermite_order is not None:
        data["hermite_order"] = args.hermite_order
    if args.out is not None:
        data["out"] = args.out
    return RunConfig.model_validate(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        model = cfg.model.build()
    except (ValidationError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = RUNNERS[cfg.command](cfg, model, out)
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        write_json(out / "report.json", {"command": cfg.command, "error": str(exc), "passed": False,
                                         "config": cfg.model_dump(mode="json")})
        return 1
    report["config"] = cfg.model_dump(mode="json")
    write_json(out / "report.json", report)
    passed = bool(report.get("passed", False))
    print(f"{cfg.command}: {'PASS' if passed else 'FAIL'} -> {out / 'report.json'}", file=sys.stderr)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
