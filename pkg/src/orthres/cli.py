"""Experiment runner.

JSON configs in, artifacts out: {prefix}.csv (sweep rows), {prefix}.json
(full trace + provenance), {prefix}.curves.tsv (plot-ready series) and
{prefix}.timing.json (wallclock, kept out of the deterministic report so
identical config + seed reproduces the report bit for bit).

Exit codes: 0 success, 2 invariant/solver violation, 3 config error.
"""

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__, bsde, forward
from .mollify import (CATALOG as TERMINAL_CATALOG,
                      from_catalog as terminal_from_catalog,
                      l2_gap, lipschitz_scan,
                      mollify as gaussian_mollify)
from .errors import ConfigError, OrthresError, NodeCapExceeded
from .ftree import predictable_bracket
from .gkw import residual_sweep
from .models import KINDS, ModelConfig, build, node_cap

EXPERIMENTS = ("residual_sweep", "vanishing_N", "dual_check", "cascade",
               "comparison_campaign", "mollify_sweep", "regularity_scan")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelConfig
    output: str
    F_id: str = None
    F_params: dict = field(default_factory=dict)
    driver_id: str = None
    driver_params: dict = field(default_factory=dict)
    coeffs_id: str = None
    coeffs_params: dict = field(default_factory=dict)
    x0: float = 0.0
    K_list: list = field(default_factory=list)
    eps_list: list = field(default_factory=list)
    p_list: list = field(default_factory=list)
    n_list: list = field(default_factory=list)
    seed: int = 0
    seeds: int = 100
    tolerances: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def terminal_map(self):
        if self.F_id is None:
            raise ConfigError("this experiment needs an F block")
        return terminal_from_catalog(self.F_id, **self.F_params)

    def driver(self):
        if self.driver_id is None:
            raise ConfigError("this experiment needs a driver block")
        return bsde.driver_from_catalog(self.driver_id, **self.driver_params)

    def coeffs(self):
        if self.coeffs_id is None:
            return None
        return forward.from_catalog(self.coeffs_id, **self.coeffs_params)


NEEDS = {
    "residual_sweep": ("F", "K_list"),
    "vanishing_N": ("F", "driver", "K_list", "eps_list"),
    "dual_check": ("F", "driver", "K_list", "p_list"),
    "cascade": ("F", "driver"),
    "comparison_campaign": (),
    "mollify_sweep": ("F", "eps_list"),
    "regularity_scan": ("F", "driver"),
}


def parse_config(raw):
    """Validate a decoded JSON dict into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, "
                          f"got {exp!r}")
    mraw = raw.get("model")
    if not isinstance(mraw, dict) or "kind" not in mraw:
        raise ConfigError("config needs a model object with a kind")
    if mraw["kind"] not in KINDS:
        raise ConfigError(f"unknown model kind {mraw['kind']!r}")
    try:
        model = ModelConfig(kind=mraw["kind"], K=int(mraw.get("K", 8)),
                            d=int(mraw.get("d", 1)),
                            T=float(mraw.get("T", 1.0)),
                            params=dict(mraw.get("params", {})))
    except OrthresError as e:
        raise ConfigError(str(e))
    output = raw.get("output")
    if not output or not isinstance(output, str):
        raise ConfigError("config needs an output path prefix")

    cfg = ExperimentConfig(experiment=exp, model=model, output=output,
                           raw=raw)
    fr = raw.get("F")
    if fr is not None:
        cfg.F_id = fr.get("id")
        cfg.F_params = dict(fr.get("params", {}))
        if cfg.F_id not in TERMINAL_CATALOG:
            raise ConfigError(f"unknown terminal map id {cfg.F_id!r}")
    dr = raw.get("driver")
    if dr is not None:
        cfg.driver_id = dr.get("id")
        cfg.driver_params = dict(dr.get("params", {}))
        if cfg.driver_id not in bsde.DRIVER_CATALOG:
            raise ConfigError(f"unknown driver id {cfg.driver_id!r}")
    cr = raw.get("coeffs")
    if cr is not None:
        cfg.coeffs_id = cr.get("id")
        cfg.coeffs_params = dict(cr.get("params", {}))
        cfg.x0 = float(cr.get("x0", 0.0))
        if cfg.coeffs_id not in forward.CATALOG:
            raise ConfigError(f"unknown coefficient id {cfg.coeffs_id!r}")
    for name in ("K_list", "eps_list", "p_list", "n_list"):
        vals = raw.get(name, [])
        if not isinstance(vals, list) or any(
                not isinstance(v, (int, float)) or v <= 0 for v in vals):
            raise ConfigError(f"{name} must be a list of positive numbers")
        setattr(cfg, name, list(vals))
    cfg.seed = int(raw.get("seed", 0))
    cfg.seeds = int(raw.get("seeds", 100))
    if cfg.seeds < 1:
        raise ConfigError("seeds must be >= 1")
    cfg.tolerances = dict(raw.get("tolerances", {}))

    for need in NEEDS[exp]:
        block = {"F": cfg.F_id, "driver": cfg.driver_id}.get(
            need, getattr(cfg, need, None) or None)
        if not block:
            raise ConfigError(f"experiment {exp!r} requires {need}")
    try:
        cfg.terminal_map() if cfg.F_id else None
        cfg.driver() if cfg.driver_id else None
        cfg.coeffs()
    except (TypeError, KeyError, ValueError) as e:
        raise ConfigError(f"catalog construction failed: {e}")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}")
    return parse_config(raw)


# ---------------------------------------------------------------------------
# node-count estimates (pre-flight)
# ---------------------------------------------------------------------------

def estimate_nodes(kind, K, params=None):
    """Upper estimate of the node count for one built model."""
    params = params or {}
    recomb = bool(params.get("recombine", True))
    if kind == "binary":
        return (K + 1) * (K + 2) // 2 if recomb else 2 ** (K + 1) - 1
    if kind == "trinomial":
        return (K + 1) ** 2 if recomb else (3 ** (K + 1) - 1) // 2
    if kind == "compensated_jump":
        one_sided = float(params.get("lam_down",
                                     params.get("lam", 2.0))) == 0.0
        if not recomb:
            base = 2 if one_sided else 3
            return (base ** (K + 1) - 1) // (base - 1)
        if one_sided:
            return (K + 1) * (K + 2) // 2
        return (K + 1) * (K + 2) * (K + 3) // 6
    if kind == "time_changed":
        # merging is value-driven; report the no-merge upper bound
        return 2 ** (K + 1) - 1
    if kind == "product_noise":
        return (4 ** (K + 1) - 1) // 3
    raise ConfigError(f"unknown model kind {kind!r}")


def preflight(cfg):
    """Per-sweep-point node estimates; raises NodeCapExceeded over the cap."""
    cap = node_cap()
    Ks = [int(k) for k in cfg.K_list] or [cfg.model.K]
    plan = []
    for K in Ks:
        est = estimate_nodes(cfg.model.kind, K, cfg.model.params)
        plan.append({"K": K, "node_estimate": est, "over_cap": est > cap})
    worst = max(p["node_estimate"] for p in plan)
    if worst > cap:
        raise NodeCapExceeded(worst, cap)
    return plan


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------

def _with_coords(fn, **coords):
    try:
        return fn()
    except OrthresError as e:
        where = ", ".join(f"{k}={v}" for k, v in coords.items())
        e.args = (f"{e} [at {where}]",)
        raise


def _model_for_K(cfg):
    def config_for(K):
        return ModelConfig(kind=cfg.model.kind, K=int(K), d=cfg.model.d,
                           T=cfg.model.T, params=cfg.model.params)
    return config_for


def _run_residual_sweep(cfg):
    F = cfg.terminal_map()
    config_for = _model_for_K(cfg)
    rows, curves = [], {"bracketNN_T_vs_K": []}
    for K in cfg.K_list:
        sw = _with_coords(
            lambda: residual_sweep(config_for, lambda s: F(s), [int(K)]),
            model=cfg.model.kind, K=K)
        r = sw.rows[0]
        rows.append({"K": r.K, "n_nodes": r.n_nodes,
                     "bracketNN_T": r.bracketNN_T,
                     "normalized": r.normalized})
        curves["bracketNN_T_vs_K"].append((r.K, r.bracketNN_T))
    res = [r["bracketNN_T"] for r in rows]
    summary = {
        "strictly_decreasing": bool(all(b < a for a, b in zip(res, res[1:]))),
        "trend_statistic": float(np.mean(-np.diff(
            np.log(np.maximum(res, 1e-300))))) if len(res) > 1 else 0.0,
    }
    summary["verdict"] = ("PASS" if summary["strictly_decreasing"]
                          and summary["trend_statistic"] > 0 else "FAIL")
    return rows, curves, summary


def _run_vanishing_N(cfg):
    F = cfg.terminal_map()
    driver = cfg.driver()
    coeffs = cfg.coeffs()
    config_for = _model_for_K(cfg)
    report = bsde.VanishingNReport()
    for K in cfg.K_list:
        part = _with_coords(
            lambda: bsde.vanishing_N_experiment(
                config_for, coeffs, F, driver, cfg.eps_list, [int(K)],
                x0=cfg.x0),
            model=cfg.model.kind, K=K)
        report.rows.extend(part.rows)
    rows, curves = [], {}
    for r in report.rows:
        eps = None if math.isnan(r.eps) else r.eps
        rows.append({"K": r.K, "eps": "raw" if eps is None else eps,
                     "bracketNN_T": r.bracketNN_T, "y0": r.y0})
        name = "residual_vs_K_raw" if eps is None \
            else f"residual_vs_K_eps{eps:g}"
        curves.setdefault(name, []).append((r.K, r.bracketNN_T))
    raw_final, gaps = report.eps_gap_at_max_K()
    rel = {str(e): (g / raw_final if raw_final > 0 else g)
           for e, g in gaps.items()}
    summary = {
        "decreasing_in_K_raw": report.decreasing_in_K(),
        "raw_residual_at_max_K": raw_final,
        "eps_gap_at_max_K": {str(e): g for e, g in gaps.items()},
        "eps_relative_gap_at_max_K": rel,
    }
    summary["verdict"] = ("PASS" if summary["decreasing_in_K_raw"]
                          else "FAIL")
    return rows, curves, summary


def _run_dual_check(cfg):
    F = cfg.terminal_map()
    driver = cfg.driver()
    if driver.klass != "quadratic":
        raise ConfigError("dual_check needs a quadratic-class driver")
    config_for = _model_for_K(cfg)
    rows, curves = [], {}
    for p in cfg.p_list:
        for K in cfg.K_list:
            def point():
                built = build(config_for(K))
                tree, M = built.tree, built.M
                clock = predictable_bracket(tree, M)
                lo, hi = tree.level_slice(tree.K)
                zeta = np.asarray(F(M.values[lo:hi]), dtype=float)
                trunc = bsde.truncated_driver(float(p), driver.growth,
                                              driver.eta)
                sol = bsde.solve_lipschitz(tree, M, clock, None, zeta, trunc)
                dv = bsde.dual_value(tree, M, clock, zeta, driver.growth,
                                     float(p), eta=driver.eta)
                return (sol.Y0, float(np.ravel(dv.value.values)[0]),
                        dv.floored_fraction)
            primal, dual, fl = _with_coords(point, model=cfg.model.kind,
                                            K=K, p=p)
            rows.append({"p": p, "K": K, "primal_Y0": primal,
                         "dual_Y0": dual, "gap": abs(primal - dual),
                         "floored_fraction": fl})
            curves.setdefault(f"gap_vs_K_p{p:g}", []).append(
                (K, abs(primal - dual)))
    summary = {}
    for p in cfg.p_list:
        gaps = [r["gap"] for r in rows if r["p"] == p]
        summary[f"p{p:g}"] = {
            "decreasing": bool(all(b < a for a, b in zip(gaps, gaps[1:]))),
            "final_gap": gaps[-1],
        }
    summary["verdict"] = ("PASS" if all(
        v["decreasing"] for k, v in summary.items() if k != "verdict")
        else "FAIL")
    return rows, curves, summary


def _run_cascade(cfg):
    F = cfg.terminal_map()
    driver = cfg.driver()
    if driver.klass != "quadratic":
        raise ConfigError("cascade needs a quadratic-class driver")

    def point():
        built = build(cfg.model)
        tree, M = built.tree, built.M
        clock = predictable_bracket(tree, M)
        coeffs = cfg.coeffs()
        X = None
        if coeffs is not None:
            X = forward.euler_forward(tree, M, clock, coeffs,
                                      np.atleast_1d(cfg.x0))
        zeta = bsde._terminal_values(tree, M, X, F)
        kw = {}
        if cfg.p_list:
            kw["p_list"] = tuple(cfg.p_list)
        if cfg.n_list:
            kw["n_list"] = tuple(cfg.n_list)
        return bsde.solve_quadratic(tree, M, clock, X, zeta, driver, **kw)
    sol = _with_coords(point, model=cfg.model.kind, K=cfg.model.K)
    trace = sol.diagnostics["cascade_trace"]
    rows = [dict(s) for s in trace.stages]
    curves = {"y_sup_vs_stage": [(i, s["y_sup"])
                                 for i, s in enumerate(trace.stages)]}
    summary = {
        "Y0": sol.Y0,
        "y_sup": sol.diagnostics["y_sup"],
        "bracketNN_T": sol.bracketNN_T,
        "monotone_violation_n": trace.monotone_violation_n,
        "monotone_violation_p": trace.monotone_violation_p,
        "verdict": "PASS" if max(trace.monotone_violation_n,
                                 trace.monotone_violation_p) <= 1e-8
        else "FAIL",
    }
    return rows, curves, summary


def _random_lipschitz_pair(rng, mterm):
    """Ordered terminal data and ordered affine drivers for one seed."""
    a = rng.uniform(-1, 1)
    c = rng.uniform(0.2, 1.5)
    zeta2 = a * np.clip(mterm, -c, c) + rng.uniform(-0.5, 0.5)
    zeta1 = zeta2 + rng.uniform(0.0, 1.0)
    ky, kz = rng.uniform(-0.8, 0.8), rng.uniform(-1.0, 1.0)
    c2 = rng.uniform(-0.5, 0.5)
    gap = rng.uniform(0.0, 1.0)

    def make(c0):
        return bsde.DriverSpec(
            id=f"affine_{c0:g}", klass="lipschitz",
            f=lambda t, x, m, y, z, ky=ky, kz=kz, c0=c0: ky * y + kz * z + c0,
            growth={"a": abs(c0), "b": abs(ky), "gamma": 0.0},
            eta=abs(c0), lip_y=abs(ky), lip_z=abs(kz))
    return zeta1, zeta2, make(c2 + gap), make(c2)


def _run_comparison_campaign(cfg):
    built = build(cfg.model)
    tree, M = built.tree, built.M
    clock = predictable_bracket(tree, M)
    lo, hi = tree.level_slice(tree.K)
    mterm = M.scalar[lo:hi]
    tol = float(cfg.tolerances.get("tol_cmp", 1e-11))
    rows = []
    worst = 0.0
    for i in range(cfg.seeds):
        rng = np.random.default_rng(cfg.seed + i)
        zeta1, zeta2, f1, f2 = _random_lipschitz_pair(rng, mterm)

        def point():
            s1 = bsde.solve_lipschitz(tree, M, clock, None, zeta1, f1)
            s2 = bsde.solve_lipschitz(tree, M, clock, None, zeta2, f2)
            return bsde.compare(s1, s2, tol_cmp=tol)
        verdict = _with_coords(point, model=cfg.model.kind, seed=cfg.seed + i)
        worst = max(worst, verdict.worst_violation)
        rows.append({"seed": cfg.seed + i,
                     "applicable": verdict.applicable,
                     "ok": verdict.ok,
                     "violation": verdict.worst_violation})
    curves = {"violation_vs_seed": [(r["seed"], r["violation"])
                                    for r in rows]}
    summary = {"n_seeds": cfg.seeds, "worst_violation": worst,
               "all_ok": bool(all(r["ok"] for r in rows)),
               "verdict": "PASS" if all(r["ok"] for r in rows) else "FAIL"}
    return rows, curves, summary


def _run_mollify_sweep(cfg):
    F = cfg.terminal_map()
    built = build(cfg.model)
    tree, M = built.tree, built.M
    scan_lo = float(cfg.tolerances.get("scan_lo", -2.0))
    scan_hi = float(cfg.tolerances.get("scan_hi", 2.0))
    spacing = float(cfg.tolerances.get("scan_spacing", 1e-4))
    rows, curves = [], {"lipschitz_vs_eps": [], "l2_gap_vs_eps": []}
    for eps in cfg.eps_list:
        def point():
            Fe = gaussian_mollify(F, float(eps))
            lip = lipschitz_scan(Fe, scan_lo, scan_hi, spacing)
            gap = l2_gap(tree, M, F, Fe)
            return lip, gap
        lip, gap = _with_coords(point, F=cfg.F_id, eps=eps)
        rows.append({"eps": eps, "lipschitz_constant": lip, "l2_gap": gap})
        curves["lipschitz_vs_eps"].append((eps, lip))
        curves["l2_gap_vs_eps"].append((eps, gap))
    lips = np.array([r["lipschitz_constant"] for r in rows])
    eps = np.array([r["eps"] for r in rows])
    slope = float(np.polyfit(np.log(eps), np.log(lips), 1)[0]) \
        if len(rows) > 1 and np.all(lips > 0) else 0.0
    summary = {"loglog_slope": slope,
               "gap_nonincreasing": bool(np.all(np.diff(
                   [r["l2_gap"] for r in rows]) <= 1e-15))}
    summary["verdict"] = "PASS" if summary["gap_nonincreasing"] else "FAIL"
    return rows, curves, summary


def _run_regularity_scan(cfg):
    F = cfg.terminal_map()
    driver = cfg.driver()
    coeffs = cfg.coeffs()
    t_idx = int(cfg.tolerances.get("t_idx", 0))
    lo = float(cfg.tolerances.get("m_lo", -1.0))
    hi = float(cfg.tolerances.get("m_hi", 1.0))
    count = int(cfg.tolerances.get("m_count", 21))
    m_grid = np.linspace(lo, hi, count)

    def point():
        built = build(cfg.model)
        return bsde.regularity_scan(
            built.tree, built.M, t_idx, m_grid, F, driver,
            coeffs=coeffs, x_value=np.atleast_1d(cfg.x0)
            if coeffs is not None else None)
    scan = _with_coords(point, model=cfg.model.kind, K=cfg.model.K,
                        t_idx=t_idx)
    rows = [{"m": float(m), "u": float(u)}
            for m, u in zip(scan.grid, scan.u)]
    curves = {"u_vs_m": [(r["m"], r["u"]) for r in rows]}
    summary = {"sup_u": scan.sup_u, "inf_u": scan.inf_u,
               "max_first_diff": scan.max_first_diff,
               "max_second_diff": scan.max_second_diff,
               "verdict": "PASS"}
    return rows, curves, summary


RUNNERS = {
    "residual_sweep": _run_residual_sweep,
    "vanishing_N": _run_vanishing_N,
    "dual_check": _run_dual_check,
    "cascade": _run_cascade,
    "comparison_campaign": _run_comparison_campaign,
    "mollify_sweep": _run_mollify_sweep,
    "regularity_scan": _run_regularity_scan,
}


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_reports(cfg, rows, curves, summary, wallclock_s):
    h = cfg.config_hash
    cols = list(rows[0].keys()) if rows else []
    lines = [",".join(cols + ["config_hash"])]
    for r in rows:
        lines.append(",".join([_fmt(r[c]) for c in cols] + [h]))
    _atomic_write(cfg.output + ".csv", "\n".join(lines) + "\n")

    report = {
        "config": cfg.raw,
        "config_sha256": h,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "orthres": __version__,
        },
        "experiment": cfg.experiment,
        "rows": rows,
        "summary": summary,
    }
    _atomic_write(cfg.output + ".json",
                  json.dumps(report, sort_keys=True, indent=2,
                             default=_fmt) + "\n")

    tsv = []
    for name in sorted(curves):
        tsv.append(f"# {name}")
        for x, y in curves[name]:
            tsv.append(f"{_fmt(x)}\t{_fmt(y)}")
        tsv.append("")
    _atomic_write(cfg.output + ".curves.tsv", "\n".join(tsv) + "\n")

    _atomic_write(cfg.output + ".timing.json",
                  json.dumps({"wallclock_s": wallclock_s,
                              "config_sha256": h}) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args):
    cfg = load_config(args.config)
    preflight(cfg)
    t0 = time.perf_counter()
    rows, curves, summary = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - t0
    write_reports(cfg, rows, curves, summary, wall)
    print(f"{cfg.experiment}: {len(rows)} rows -> {cfg.output}.csv "
          f"[{summary.get('verdict', 'DONE')}]")
    return 0


def cmd_verify(args):
    cfg = load_config(args.config)
    cap = node_cap()
    Ks = [int(k) for k in cfg.K_list] or [cfg.model.K]
    print(f"experiment: {cfg.experiment}")
    print(f"model: {cfg.model.kind} (T={cfg.model.T}, "
          f"params={cfg.model.params})")
    if cfg.F_id:
        print(f"terminal map: {cfg.F_id} {cfg.F_params}")
    if cfg.driver_id:
        print(f"driver: {cfg.driver_id} {cfg.driver_params}")
    print(f"node cap: {cap}")
    print(f"{'K':>6} {'node estimate':>14}  status")
    over = False
    for K in Ks:
        est = estimate_nodes(cfg.model.kind, K, cfg.model.params)
        flag = "OVER CAP" if est > cap else "ok"
        over = over or est > cap
        print(f"{K:>6} {est:>14}  {flag}")
    if over:
        print("warning: at least one sweep point exceeds the node cap; "
              "run would abort (raise ORTHRES_NODE_CAP to proceed)")
    return 0


def cmd_catalog(args):
    print("models:")
    for k in KINDS:
        print(f"  {k}")
    print("terminal maps:")
    for k in sorted(TERMINAL_CATALOG):
        print(f"  {k}")
    print("drivers:")
    for k in sorted(bsde.DRIVER_CATALOG):
        print(f"  {k}")
    print("forward coefficients:")
    for k in sorted(forward.CATALOG):
        print(f"  {k}")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="orthres",
        description="scenario-tree experiments for martingale representation "
                    "and quadratic BSDEs")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to JSON config")
    p_run.set_defaults(fn=cmd_run)
    p_ver = sub.add_parser("verify", help="validate a config and print the "
                                          "execution plan")
    p_ver.add_argument("config", help="path to JSON config")
    p_ver.set_defaults(fn=cmd_verify)
    p_cat = sub.add_parser("catalog", help="list available catalog ids")
    p_cat.set_defaults(fn=cmd_catalog)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except OrthresError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
