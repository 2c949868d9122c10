"""Command-line harness: one JSON config in, deterministic JSON/CSV reports out.

Exit codes: 0 success, 1 a hard invariant failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

DEFAULTS = {
    "eps": [1e-3],
    "mu": 1.0,
    "kappa": 1.0,
    "rho": 1.0,
    "profile": {"family": "exp-approach", "params": [0.5, 1.0, 0.1], "path": None},
    "grid": {"y_max": 30.0, "node_count": 16000, "layer_fraction": 0.5},
    "modes": 4,
    "eta": 1.0,
    "tolerances": {"linear_residual": 1e-6, "fixed_point": 1e-10, "max_iter": 50,
                   "nonlinear_residual": 1e-8, "conjugate": 1e-12},
    "forcing": {"family": "smooth-modes", "amplitude": 1.0},
    "nonlinear": {"alpha": 1.0, "C": 1.0, "fraction_of_admissible": 0.5, "delta1": None, "amplitude_scan_steps": 4},
    "weight": {"samples": 200},
    "mms": {"modes": [1, 4, 16], "node_counts": [2000, 4000, 8000, 16000, 32000], "y_max": 12.0,
            "order": 2.0, "order_tol": 0.2},
    "sweep": {"eps": [2.0**-k for k in range(6, 17)], "families": ["smooth-modes"], "max_growth_slope": 0.05},
    "seed": 0,
    "threads": 1,
    "output": "mhdlayer-out",
}


class ConfigError(ValueError):
    pass


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def validate_config(cfg):
    eps = cfg["eps"]
    if not isinstance(eps, list) or not eps:
        raise ConfigError("eps must be a non-empty list")
    if any(not isinstance(e, (int, float)) or not 0 < e < 1 for e in eps):
        raise ConfigError("every eps must lie in (0, 1)")
    if len(set(eps)) != len(eps):
        raise ConfigError("eps values must be distinct")
    for k in ("mu", "kappa", "rho", "eta"):
        if not isinstance(cfg[k], (int, float)) or cfg[k] <= 0:
            raise ConfigError(f"{k} must be positive")
    if not isinstance(cfg["modes"], int) or cfg["modes"] < 1:
        raise ConfigError("modes must be a positive integer")
    g = cfg["grid"]
    if g["node_count"] < 64 or g["y_max"] < 10 or not 0 < g["layer_fraction"] < 1:
        raise ConfigError("grid needs node_count >= 64, y_max >= 10 and layer_fraction in (0, 1)")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    nl = cfg["nonlinear"]
    if not 0 < nl["alpha"] < 2 or not nl["C"] > 0:
        raise ConfigError("nonlinear needs alpha in (0, 2) and C > 0")
    if nl["delta1"] is not None and not nl["delta1"] > 0:
        raise ConfigError("nonlinear.delta1 must be positive or null")
    if not isinstance(nl["amplitude_scan_steps"], int) or nl["amplitude_scan_steps"] < 0:
        raise ConfigError("nonlinear.amplitude_scan_steps must be a non-negative integer")
    from .forcing import FORCING_FAMILIES
    fams = [cfg["forcing"]["family"]] + list(cfg["sweep"]["families"])
    for f in fams:
        if f not in FORCING_FAMILIES:
            raise ConfigError(f"unknown forcing family {f!r}")
    return cfg


def load_config(path=None, seed=None, threads=None, out=None):
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
            user = json.loads(text)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    if out is not None:
        cfg["output"] = out
    return validate_config(cfg)


# ---------------------------------------------------------------- helpers

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


def _setup(cfg, eps, node_count=None, y_max=None):
    from .grid import build_grid
    from .linear import Physics
    from .profiles import build_profile
    g = cfg["grid"]
    grid = build_grid(eps, y_max or g["y_max"], node_count or g["node_count"], g["layer_fraction"])
    pc = cfg["profile"]
    prof = build_profile(pc["family"], pc["params"], grid, pc["path"])
    return grid, prof, Physics(cfg["mu"], cfg["kappa"], cfg["rho"])


def _pool_map(cfg, fn, items):
    if cfg["threads"] == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(cfg["threads"]) as ex:
        return list(ex.map(fn, items))


def _report(command, cfg, results, ok, **extra):
    return {"schema_version": SCHEMA_VERSION, "command": command, "all_pass": bool(ok),
            "config": {k: v for k, v in cfg.items() if k not in ("output", "threads")}, "results": results,
            **extra}


# ---------------------------------------------------------------- commands

def cmd_profile_check(cfg, out: Path):
    from .profiles import validate_assumptions
    results = []
    for eps in cfg["eps"]:
        _, prof, _ = _setup(cfg, eps)
        results.append({"eps": eps, **validate_assumptions(prof).to_dict()})
    ok = all(r["all_pass"] for r in results)
    write_json(out / "profile-check.json", _report("profile-check", cfg, results, ok))
    return ok


def cmd_weight_check(cfg, out: Path):
    from .forcing import random_smooth
    from .weight import build_weight, check_weight_bounds, interpolation_check, log_weight_bound_check, weighted_hardy_check
    results = []
    for i, eps in enumerate(cfg["eps"]):
        grid, prof, _ = _setup(cfg, eps)
        w = build_weight(prof)
        lz = check_weight_bounds(w)
        rng = np.random.default_rng([cfg["seed"], i])
        interp, hardy, logw = [], [], []
        for _ in range(cfg["weight"]["samples"]):
            f = random_smooth(grid.y, rng, eps)
            interp.append(interpolation_check(f, w))
            hardy.append(weighted_hardy_check(f, w, cfg["eta"]))
            logw.append(log_weight_bound_check(f, w, cfg["eta"]))
        results.append({"eps": eps, "weight_items": lz, "C0": lz["C0"],
                        "interpolation_max": max(interp), "hardy_max": max(hardy), "log_weight_max": max(logw)})
    C0 = [r["C0"] for r in results]
    spread = (max(C0) - min(C0)) / min(C0)
    ok = all(r["weight_items"]["all_pass"] and r["interpolation_max"] <= 1 for r in results)
    write_json(out / "weight-check.json", _report("weight-check", cfg, results, ok, C0_relative_spread=spread))
    return ok


def _write_mode_dump(path, grid, field, n):
    W = field.mode(n)
    cols = [grid.y] + [part(W[c]) for c in range(4) for part in (np.real, np.imag)]
    header = "# y Re_u Im_u Re_v Im_v Re_h Im_h Re_g Im_g  (mode %d)" % n
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header[2:])


def cmd_linear_solve(cfg, out: Path):
    from .forcing import forcing_family
    from .linear import LinearSolver, ModeForcing
    from .norms import ESTIMATE_TAGS, estimate_ratio, linear_estimate_ratio, x_norm
    from .transform import to_good_unknowns
    from .weight import build_weight
    tol = cfg["tolerances"]
    results = []
    for eps in cfg["eps"]:
        grid, prof, ph = _setup(cfg, eps)
        w = build_weight(prof)
        fc = cfg["forcing"]
        F = forcing_family(fc["family"], grid, cfg["modes"], ph.rho, fc["amplitude"], cfg["seed"])
        lf = LinearSolver(prof, ph, cfg["modes"], cfg["threads"], tol["linear_residual"]).solve(F)
        ratios = []
        for n, sol in lf.solutions.items():
            if not np.any(F.mode(n)):
                continue
            gu = to_good_unknowns(sol, prof)
            mf = ModeForcing.from_array(n, ph.rho, F.mode(n))
            ratios += [estimate_ratio(t, gu, prof, w, mf, ph.mu, ph.kappa, cfg["eta"]).to_dict()
                       for t in ESTIMATE_TAGS[:-1]]
        ratios.append(linear_estimate_ratio(lf.field, F, w, cfg["eta"]).to_dict())
        conj = lf.field.conjugate_defect()
        _write_mode_dump(out / f"linear-solution-eps{eps:.6g}.dat", grid, lf.field, 1)
        results.append({"eps": eps, "residuals": lf.meta["residuals"], "verified": lf.meta["verified"],
                        "x_norm": x_norm(lf.field, w).to_dict(), "estimate_ratios": ratios,
                        "conjugate_defect": conj, "pass": lf.meta["verified"] and conj <= tol["conjugate"]})
    ok = all(r["pass"] for r in results)
    write_json(out / "linear-solve.json", _report("linear-solve", cfg, results, ok))
    return ok


def cmd_mms_convergence(cfg, out: Path):
    from .linear import Physics
    from .manufactured import mms_study
    m = cfg["mms"]
    ph = Physics(cfg["mu"], cfg["kappa"], cfg["rho"])
    pc = cfg["profile"]
    cases = [(n, eps) for n in m["modes"] for eps in cfg["eps"]]
    studies = _pool_map(cfg, lambda c: mms_study(c[0], c[1], tuple(m["node_counts"]), m["y_max"], pc["family"],
                                                   pc["params"], ph), cases)
    rows, summary = [], []
    for (n, eps), st in zip(cases, studies):
        for r in st["rows"]:
            rows.append((n, eps, r["N"], r["h_max"], r["error"], r["max_residual"]))
        final = st["rows"][-1]["max_residual"]
        ok = abs(st["fitted_order"] - m["order"]) <= m["order_tol"] and final < cfg["tolerances"]["linear_residual"]
        summary.append({"n": n, "eps": eps, "fitted_order": st["fitted_order"],
                        "pairwise_orders": st["pairwise_orders"], "final_residual": final, "pass": ok})
    write_csv(out / "mms-convergence.csv", ["n", "eps", "N", "h_max", "error", "max_residual"], rows)
    ok = all(s["pass"] for s in summary)
    write_json(out / "mms-convergence.json", _report("mms-convergence", cfg, summary, ok))
    return ok


def cmd_nonlinear_solve(cfg, out: Path):
    from .forcing import forcing_family
    from .nonlinear import (NonContractionError, admissible_forcing_size, fixed_point_solve,
                            largest_contracting_amplitude, smallness_parameter, nonlinear_estimate_ratio)
    from .norms import forcing_size
    from .weight import build_weight
    tol, nl = cfg["tolerances"], cfg["nonlinear"]
    results, rows = [], []
    for eps in cfg["eps"]:
        grid, prof, ph = _setup(cfg, eps)
        w = build_weight(prof)
        fc = cfg["forcing"]
        F = forcing_family(fc["family"], grid, cfg["modes"], ph.rho, fc["amplitude"], cfg["seed"])
        size = forcing_size(F, w)
        frac = nl["fraction_of_admissible"]
        if frac is not None and size > 0:
            F = F * (frac * admissible_forcing_size(eps, nl["alpha"], nl["C"], cfg["eta"]) / size)
        rec = {"eps": eps}
        try:
            st = fixed_point_solve(F, prof, ph, w, tol["fixed_point"], tol["max_iter"], cfg["threads"],
                                   nl["alpha"], nl["C"], cfg["eta"])
            error = None
        except NonContractionError as e:
            st, error = e.state, str(e)
        for row in st.history_rows():
            rows.append((eps,) + tuple(row))
        rec.update(converged=st.converged, iterations=st.iteration, contraction_ratios=st.contraction_ratios,
                   contraction_estimate=st.contraction_estimate,
                   final_residuals=st.final_residuals, max_residual=st.max_residual,
                   normal_mean_defect=max(st.normal_mean_defect or [0.0]),
                   conjugate_defect=st.field.conjugate_defect(), nonlinear_estimate_ratio=nonlinear_estimate_ratio(st.field, F, w,
                                                                                              cfg["eta"]),
                   forcing_size=st.meta["forcing_size"], admissible_size=st.meta["admissible_size"], error=error)
        small = smallness_parameter(prof, ph)
        rec.update(smallness=small, delta1=nl["delta1"],
                   smallness_ok=None if nl["delta1"] is None else bool(small <= nl["delta1"]))
        if error is not None and rec["smallness_ok"]:
            rec["note"] = "contraction failed although rho (Mbar + Mbar^4) <= delta1"
        if nl["amplitude_scan_steps"] > 0:
            rec["amplitude_scan"] = largest_contracting_amplitude(
                F, prof, ph, w, steps=nl["amplitude_scan_steps"], tol=tol["fixed_point"], max_iter=tol["max_iter"],
                threads=cfg["threads"], alpha=nl["alpha"], C=nl["C"], eta=cfg["eta"])
        rec["pass"] = bool(st.converged and error is None and st.max_residual < tol["nonlinear_residual"]
                           and rec["normal_mean_defect"] == 0.0 and rec["conjugate_defect"] <= tol["conjugate"])
        results.append(rec)
    write_csv(out / "nonlinear-history.csv", ["eps", "iter", "x_norm", "contraction_ratio", "residual"], rows)
    ok = all(r["pass"] for r in results)
    write_json(out / "nonlinear-solve.json", _report("nonlinear-solve", cfg, results, ok))
    return ok


def _sweep_point(cfg, eps, family):
    from .forcing import forcing_family
    from .linear import LinearSolver, ModeForcing
    from .norms import ESTIMATE_TAGS, estimate_ratio, linear_estimate_ratio
    from .transform import to_good_unknowns
    from .weight import build_weight
    grid, prof, ph = _setup(cfg, eps)
    w = build_weight(prof)
    F = forcing_family(family, grid, cfg["modes"], ph.rho, cfg["forcing"]["amplitude"], cfg["seed"])
    lf = LinearSolver(prof, ph, cfg["modes"], 1, cfg["tolerances"]["linear_residual"]).solve(F)
    rows = []
    for n, sol in lf.solutions.items():
        if not np.any(F.mode(n)):
            continue
        gu = to_good_unknowns(sol, prof)
        mf = ModeForcing.from_array(n, ph.rho, F.mode(n))
        for t in ESTIMATE_TAGS[:-1]:
            r = estimate_ratio(t, gu, prof, w, mf, ph.mu, ph.kappa, cfg["eta"])
            rows.append((family, eps, n, t, r.lhs, r.rhs, r.ratio))
    r = linear_estimate_ratio(lf.field, F, w, cfg["eta"])
    rows.append((family, eps, 0, r.estimate, r.lhs, r.rhs, r.ratio))
    worst = max((max(v.values()) for v in lf.meta["residuals"].values()), default=0.0)
    return rows, worst


def cmd_sweep(cfg, out: Path):
    from .norms import scaling_fit
    sw = cfg["sweep"]
    points = [(eps, fam) for fam in sw["families"] for eps in sw["eps"]]
    got = _pool_map(cfg, lambda pt: _sweep_point(cfg, *pt), points)
    rows = [r for rs, _ in got for r in rs]
    write_csv(out / "sweep.csv", ["family", "eps", "n", "lemma", "lhs", "rhs", "ratio"], rows)
    fits = {}
    keys = sorted({(r[0], r[2], r[3]) for r in rows})
    for fam, n, tag in keys:
        samples = [(r[1], r[6]) for r in rows if (r[0], r[2], r[3]) == (fam, n, tag) and r[6] > 0]
        if len(samples) >= 2:
            fits[f"{fam}/{tag}/n={n}"] = scaling_fit(samples)
    lin = {k: v for k, v in fits.items() if "/linear-X/" in k}
    ok = all(v["growth_slope"] <= sw["max_growth_slope"] for v in lin.values())
    residual = max(res for _, res in got)
    write_json(out / "sweep-fits.json", _report("sweep", cfg, fits, ok, max_linear_residual=residual,
                                                  linear_growth_slopes={k: v["growth_slope"] for k, v in lin.items()}))
    return ok


COMMANDS = {
    "profile-check": cmd_profile_check,
    "weight-check": cmd_weight_check,
    "linear-solve": cmd_linear_solve,
    "mms-convergence": cmd_mms_convergence,
    "nonlinear-solve": cmd_nonlinear_solve,
    "sweep": cmd_sweep,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="mhdlayer", description="MHD boundary-layer stability laboratory.")
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file; missing keys take the defaults")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.print_defaults:
        print(json.dumps(DEFAULTS, indent=2, sort_keys=True))
        return 0
    if args.command is None:
        print("error: a command is required (see --help)", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed, args.threads, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    from .grid import InvalidParameter
    from .profiles import AssumptionViolation
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        ok = COMMANDS[args.command](cfg, out)
    except (InvalidParameter, AssumptionViolation) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'PASS' if ok else 'FAIL'} (reports in {out})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
