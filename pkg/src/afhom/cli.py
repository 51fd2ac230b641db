"""Command-line front end: ``afhom <task> --config PATH [--threads K] [--seed S] [--out DIR]``.

Exit codes: 0 success, 2 validation failure (bad config, failed checks),
3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cellsolver import SolveOptions, solve_compact, solve_periodic, solve_relaxed
from .errors import AfhomError, ConfigError, ConstantRankViolation
from .fields import Grid, PeriodicField, write_afh1, write_csv_slice
from .integrand import RandomCheckerboard, integrand_from_json, verify_growth, verify_plip
from .operator import check_constant_rank, operator_from_json, projector, spectral, symbol

log = logging.getLogger("afhom")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
REQUIRED = object()
TASKS = ("project", "cell", "homog", "recon", "gamma", "qcx", "stoch", "validate")
TOP_KEYS = {"task", "operator", "integrand", "seed", "output", "solver", "params"}

PARAMS = {
    "project": {"n": 16, "side": 1.0, "radius": 8, "probe_budget": 1000, "dump_fields": False},
    "cell": {"xi": REQUIRED, "n": 32, "side": 1.0, "center": None, "kind": "all", "margin": 0.125,
             "eta": 1.0, "dump_fields": False},
    "homog": {"xi": REQUIRED, "k": 16.0, "k_list": None, "radii": [1, 2, 4, 8], "centers": None,
              "density": 8.0, "margin_cells": 1, "tol_center": 1e-2, "n_cap": 128, "xi_box": None,
              "resolution": 3},
    "recon": {"x": REQUIRED, "xi": REQUIRED, "rhos": [0.25, 0.125, 0.0625], "n": 16, "margin": 0.125,
              "tol": 5e-3},
    "gamma": {"xi": REQUIRED, "k_list": [1, 2, 4, 8], "side": 1.0, "density": 8.0, "fhom_value": None,
              "fhom_k": 1e5, "fhom_radii": [2, 4, 8], "tol": 2e-2},
    "qcx": {"xi": REQUIRED, "trials": 1000, "n": 16, "envelope_n": 32, "convex_half_width": None,
            "convex_resolution": 81, "dump_fields": False},
    "stoch": {"xi": REQUIRED, "k": 16.0, "radii": [2, 4, 8], "centers": None, "seeds": 8, "density": 8.0,
              "covariance_pairs": 0, "covariance_side": 1, "partitions": 0, "partition_side": 2},
    "validate": {"samples": 2000, "probe_budget": 1000},
}
SOLVER_KEYS = {f.name for f in dataclasses.fields(SolveOptions)}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _check_type(key, value, default):
    if default is REQUIRED or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a finite number, got {value!r}")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
    return value


def resolve_config(cfg: dict, task: str = None, seed: int = None) -> dict:
    """Validate ``cfg`` against the schema and fill defaults; raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(cfg) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"config: unknown key(s) {unknown}; allowed: {sorted(TOP_KEYS)}")
    t = cfg.get("task", task)
    if t is None:
        raise ConfigError("config.task: missing (one of " + ", ".join(TASKS) + ")")
    if t not in TASKS:
        raise ConfigError(f"config.task: unknown task {t!r}; expected one of {list(TASKS)}")
    if task is not None and t != task:
        raise ConfigError(f"config.task: config says {t!r} but the subcommand is {task!r}")
    out = {"task": t}
    s = cfg.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise ConfigError(f"config.seed: expected a non-negative integer, got {s!r}")
    out["seed"] = s
    if "operator" not in cfg:
        raise ConfigError("config.operator: missing")
    op = operator_from_json(cfg["operator"])
    out["operator"] = op.to_json()
    if t != "project":
        if "integrand" not in cfg:
            raise ConfigError("config.integrand: missing")
        integrand_from_json(cfg["integrand"])
    out["integrand"] = cfg.get("integrand")
    solver = cfg.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("config.solver: expected an object")
    bad = sorted(set(solver) - SOLVER_KEYS)
    if bad:
        raise ConfigError(f"config.solver: unknown key(s) {bad}; allowed: {sorted(SOLVER_KEYS)}")
    defaults = SolveOptions()
    resolved_solver = {}
    for k in sorted(SOLVER_KEYS - {"seed"}):
        d = getattr(defaults, k)
        resolved_solver[k] = _check_type(f"solver.{k}", solver.get(k, d), d)
    if "seed" in solver:
        raise ConfigError("config.solver.seed: use the top-level seed")
    try:
        SolveOptions(**{k: v for k, v in resolved_solver.items()})
    except TypeError as exc:
        raise ConfigError(f"config.solver: {exc}") from None
    out["solver"] = resolved_solver
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("config.params: expected an object")
    schema = PARAMS[t]
    bad = sorted(set(params) - set(schema))
    if bad:
        raise ConfigError(f"config.params: unknown key(s) {bad} for task {t!r}; allowed: {sorted(schema)}")
    rp = {}
    for k, d in schema.items():
        if k not in params:
            if d is REQUIRED:
                raise ConfigError(f"config.params.{k}: required for task {t!r}")
            rp[k] = d
        else:
            rp[k] = _check_type(f"params.{k}", params[k], d)
    out["params"] = rp
    out["output"] = cfg.get("output", "out")
    if not isinstance(out["output"], str):
        raise ConfigError("config.output: expected a path string")
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _xi(p, d, key="xi"):
    xi = p[key]
    if not isinstance(xi, list) or len(xi) != d or not all(isinstance(v, (int, float)) for v in xi):
        raise ConfigError(f"params.{key}: expected a list of {d} numbers")
    return np.asarray(xi, float)


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, PeriodicField):
        return None
    return obj


def dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def projector_identities(op, radius: int = 8, proj=projector) -> dict:
    """Worst errors of ``P^2 = P``, ``A(w) P = 0`` and ``trace P = d - r`` over ``0 < |w|_inf <= radius``."""
    r = check_constant_rank(op, probe_budget=16, radius=min(radius, 2))
    axes = [np.arange(-radius, radius + 1)] * op.N
    ws = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, op.N)
    ws = ws[np.any(ws != 0, axis=1)].astype(float)
    worst = {"idempotence": (0.0, None), "annihilation": (0.0, None), "trace": (0.0, None)}
    for w in ws:
        P = proj(op, w)
        A = symbol(op, w)
        errs = {"idempotence": float(np.max(np.abs(P @ P - P))),
                "annihilation": float(np.max(np.abs(A @ P))),
                "trace": abs(float(np.trace(P)) - (op.d - r))}
        for k, e in errs.items():
            if e > worst[k][0]:
                worst[k] = (e, w.tolist())
    return {"rank": r, **{k: {"max_error": v[0], "witness": v[1]} for k, v in worst.items()}}


def _task_project(op, f, p, opts, ctx):
    try:
        rank = check_constant_rank(op, p["probe_budget"], p["radius"], seed=ctx["seed"])
    except ConstantRankViolation as exc:
        return {"constant_rank": {"passed": False, "message": str(exc),
                                  "witnesses": [[list(map(float, w)), r] for w, r in exc.witnesses]},
                "passed": False}, EXIT_INVALID
    rep = projector_identities(op, p["radius"])
    rep["constant_rank"] = {"passed": True, "rank": rank}
    grid = Grid(p["n"], op.N, side=p["side"])
    so = spectral(op, grid.n, grid.side)
    rng = np.random.default_rng(ctx["seed"])
    u = rng.standard_normal((op.d,) + grid.shape)
    pu = so.project(u)
    rep["field"] = {"n": grid.n, "residual_after_projection": float(np.linalg.norm(so.apply(pu)) /
                                                                     max(np.linalg.norm(pu), 1e-300)),
                    "idempotence": float(np.max(np.abs(so.project(pu) - pu)))}
    if p["dump_fields"]:
        write_afh1(ctx["out"] / "projected.afh1", PeriodicField(grid, pu))
    rep["passed"] = bool(rep["constant_rank"]["passed"] and max(
        rep[k]["max_error"] for k in ("idempotence", "annihilation", "trace")) <= 1e-12)
    return rep, (EXIT_OK if rep["passed"] else EXIT_INVALID)


def _task_cell(op, f, p, opts, ctx):
    xi = _xi(p, op.d)
    if p["kind"] not in ("periodic", "compact", "relaxed", "all"):
        raise ConfigError("params.kind: expected periodic, compact, relaxed or all")
    center = p["center"]
    if center is not None and (not isinstance(center, list) or len(center) != op.N):
        raise ConfigError(f"params.center: expected a list of {op.N} numbers")
    grid = Grid(p["n"], op.N, tuple(center) if center else None, p["side"])
    kinds = ["periodic", "compact", "relaxed"] if p["kind"] == "all" else [p["kind"]]
    out, code = {}, EXIT_OK
    for kind in kinds:
        if kind == "periodic":
            s = solve_periodic(op, f, xi, grid, opts)
        elif kind == "compact":
            s = solve_compact(op, f, xi, grid, p["margin"], opts)
        else:
            s = solve_relaxed(op, f, xi, grid, p["eta"], p["margin"], opts)
        out[kind] = s.to_json()
        if s.status == "infeasible":
            code = EXIT_SOLVER
        if p["dump_fields"]:
            write_afh1(ctx["out"] / f"{kind}_minimizer.afh1", s.minimizer)
            if op.N >= 2:
                write_csv_slice(ctx["out"] / f"{kind}_minimizer.csv", s.minimizer)
    if len(kinds) == 1:
        out["normalized"] = out[kinds[0]]["normalized"]
        out["value"] = out[kinds[0]]["value"]
    return out, code


def _task_homog(op, f, p, opts, ctx):
    from .homog import fhom_at, fhom_sup, tabulate_fhom
    xi = _xi(p, op.d)
    kw = dict(radii=p["radii"], centers=p["centers"], density=p["density"], opts=opts, n_cap=p["n_cap"],
              margin_cells=p["margin_cells"], tol_center=p["tol_center"], workers=ctx["threads"])
    rows = []
    if p["k_list"]:
        sup = fhom_sup(op, f, xi, k_list=p["k_list"], **kw)
        ests = sup.pop("estimates")
        out = {"limit": sup["value"], "sup": sup, "estimates": [e.to_json() for e in ests]}
        for e in ests:
            rows.extend(e.rows())
        est = ests[-1]
    else:
        est = fhom_at(op, f, xi, k=p["k"], **kw)
        out = {"limit": est.limit, "estimate": est.to_json()}
        rows.extend(est.rows())
    out["spread"] = est.spread
    out["diagnostics"] = {"relative_spread": est.relative_spread, "center_independent": est.center_independent,
                          "failures": est.failures}
    header = [f"xi{i}" for i in range(op.d)] + ["k"] + [f"center{i}" for i in range(op.N)] + ["r", "normalized_value"]
    _write_csv(ctx["out"] / "homog.csv", header, rows)
    if p["xi_box"] is not None:
        box = p["xi_box"]
        if not (isinstance(box, list) and len(box) == op.d and all(isinstance(b, list) and len(b) == 2 for b in box)):
            raise ConfigError(f"params.xi_box: expected {op.d} pairs [lo, hi]")
        table = tabulate_fhom(op, f, box, p["resolution"], k=p["k"], radii=p["radii"],
                              centers=p["centers"], density=p["density"], opts=opts, workers=ctx["threads"])
        out["table"] = table.to_json()
        _write_csv(ctx["out"] / "fhom_table.csv", [f"xi{i}" for i in range(op.d)] + ["fhom"],
                   [list(node) + [v] for node, v in zip(table.nodes(), table.values.ravel())])
    code = EXIT_SOLVER if est.failures else EXIT_OK
    return out, code


def _task_recon(op, f, p, opts, ctx):
    from .homog import small_cube_reconstruction
    x = p["x"]
    if not isinstance(x, list) or len(x) != op.N:
        raise ConfigError(f"params.x: expected a list of {op.N} numbers")
    rep = small_cube_reconstruction(op, f, x, _xi(p, op.d), p["rhos"], p["n"], p["margin"], opts, p["tol"])
    return rep, EXIT_OK


def _task_gamma(op, f, p, opts, ctx):
    from .homog import gamma_inequality_check
    grid = Grid(2, op.N, side=p["side"])
    rep = gamma_inequality_check(op, f, _xi(p, op.d), grid, p["k_list"], p["fhom_value"], p["density"], opts,
                                 p["tol"], p["fhom_k"], p["fhom_radii"])
    return rep, EXIT_OK


def _task_qcx(op, f, p, opts, ctx):
    from .homog import aqc_envelope_solution, aqc_test, convex_envelope
    xi = _xi(p, op.d)
    test = aqc_test(op, f, xi, p["trials"], p["n"], ctx["seed"])
    sol = aqc_envelope_solution(op, f, xi, p["envelope_n"], opts)
    fx = float(f.eval(np.zeros(op.N), xi))
    out = {"jensen": {k: v for k, v in test.items() if k != "witness"}, "envelope": sol.normalized,
           "f_xi": fx, "relaxation": fx - sol.normalized, "envelope_solution": sol.to_json()}
    if op.d <= 2:
        hw = p["convex_half_width"] or 3.0 * (1.0 + float(np.max(np.abs(xi))))
        out["convex_envelope"] = convex_envelope(f, xi, hw, p["convex_resolution"])
    if p["dump_fields"]:
        write_afh1(ctx["out"] / "envelope_witness.afh1", sol.minimizer)
        if test["witness"] is not None:
            write_afh1(ctx["out"] / "jensen_witness.afh1", test["witness"])
    return out, EXIT_OK


def _task_stoch(op, f, p, opts, ctx):
    from .stochastic import covariance_test, distinct_limits, ergodic_limit, random_partition, subadditivity_test
    xi = _xi(p, op.d)
    seeds = p["seeds"]
    seeds = list(range(ctx["seed"], ctx["seed"] + seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    est = ergodic_limit(op, f, xi, p["k"], p["radii"], p["centers"], seeds, p["density"], opts,
                        workers=ctx["threads"])
    mean = est.mean[-1]
    out = {"mean": mean, "std": est.std[-1], "per_omega_limits": est.per_omega_limits,
           "ergodic_flag": est.ergodic_flag, "distinct_limits": distinct_limits(est.per_omega_limits),
           "estimate": est.to_json()}
    header = ["seed"] + [f"xi{i}" for i in range(op.d)] + ["r"] + [f"center{i}" for i in range(op.N)] + ["normalized"]
    _write_csv(ctx["out"] / "stoch.csv", header, est.rows())
    rng = np.random.default_rng(ctx["seed"])
    eta = 1.0 / p["k"]
    if p["covariance_pairs"]:
        cov = []
        for _ in range(p["covariance_pairs"]):
            s = int(rng.integers(0, 2 ** 31))
            z = rng.integers(-20, 21, size=op.N).tolist()
            cov.append(covariance_test(op, f, s, xi, eta, (0,) * op.N, p["covariance_side"], [z],
                                       p["density"], opts)["rows"][0] | {"seed": s})
        out["covariance"] = {"pairs": cov, "passed": all(c["passed"] for c in cov)}
    if p["partitions"]:
        subs = []
        for _ in range(p["partitions"]):
            part = random_partition(p["partition_side"], op.N, rng)
            subs.append(subadditivity_test(op, f, seeds[0], xi, eta, (0,) * op.N, p["partition_side"], part,
                                           p["density"], opts))
        out["subadditivity"] = {"tests": subs, "passed": all(s["passed"] for s in subs)}
    code = EXIT_SOLVER if est.dropped else EXIT_OK
    return out, code


def _task_validate(op, f, p, opts, ctx):
    rep = {}
    try:
        rep["constant_rank"] = {"passed": True, "rank": check_constant_rank(op, p["probe_budget"], seed=ctx["seed"])}
    except ConstantRankViolation as exc:
        rep["constant_rank"] = {"passed": False, "message": str(exc)}
    g = f
    if isinstance(f, RandomCheckerboard) and f.state is None:
        from .integrand import sample_random
        g = sample_random(f, ctx["seed"])
    rep["growth"] = verify_growth(g, p["samples"], op.N, op.d, ctx["seed"]).to_json()
    rep["plip"] = verify_plip(g, p["samples"], op.N, op.d, ctx["seed"]).to_json()
    rep["passed"] = bool(rep["constant_rank"]["passed"] and rep["growth"]["passed"] and rep["plip"]["passed"])
    return rep, (EXIT_OK if rep["passed"] else EXIT_INVALID)


RUNNERS = {"project": _task_project, "cell": _task_cell, "homog": _task_homog, "recon": _task_recon,
           "gamma": _task_gamma, "qcx": _task_qcx, "stoch": _task_stoch, "validate": _task_validate}


def threads_from(arg) -> int:
    if arg is not None:
        if arg < 1:
            raise ConfigError("--threads must be >= 1")
        return arg
    env = os.environ.get("AFH_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise ConfigError(f"AFH_THREADS: expected an integer, got {env!r}") from None
        if k < 1:
            raise ConfigError("AFH_THREADS must be >= 1")
        return k
    return os.cpu_count() or 1


def run(config, task: str = None, out: str = None, seed: int = None, threads: int = None) -> int:
    """Execute one experiment; ``config`` is a path or an already-parsed dict."""
    t0 = time.perf_counter()
    try:
        raw = load_config(config) if not isinstance(config, dict) else config
        cfg = resolve_config(raw, task, seed)
        k = threads_from(threads)
        out_dir = Path(out if out is not None else cfg["output"])
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    op = operator_from_json(cfg["operator"])
    f = integrand_from_json(cfg["integrand"]) if cfg["integrand"] is not None else None
    opts = SolveOptions(seed=cfg["seed"], **cfg["solver"])
    ctx = {"out": out_dir, "seed": cfg["seed"], "threads": k}
    manifest = {"config": cfg, "resolved_solver": dataclasses.asdict(opts), "version": __version__,
                "numpy": np.__version__, "seed": cfg["seed"], "threads": k}
    try:
        result, code = RUNNERS[cfg["task"]](op, f, cfg["params"], opts, ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        dump_json(out_dir / "manifest.json", manifest | {"status": "invalid", "error": str(exc)})
        return EXIT_INVALID
    except AfhomError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        dump_json(out_dir / "manifest.json", manifest | {"status": "solver_failure", "error": str(exc)})
        return EXIT_SOLVER
    summary = {"task": cfg["task"], "seed": cfg["seed"], "result": result, "exit_code": code}
    dump_json(out_dir / "summary.json", summary)
    manifest["status"] = "ok" if code == EXIT_OK else "failed"
    manifest["elapsed_seconds"] = round(time.perf_counter() - t0, 3)
    manifest["files"] = sorted(p.name for p in out_dir.iterdir() if p.name != "manifest.json")
    dump_json(out_dir / "manifest.json", manifest)
    return code


# ---------------------------------------------------------------------------
# self check
# ---------------------------------------------------------------------------

def selfcheck(proj=projector, verbose: bool = True) -> list:
    """Fast invariant suite; returns ``[(name, passed, detail), ...]``."""
    from .integrand import Laminate, RandomCheckerboard as RC
    from .operator import curl2d, curl3d, divergence, row_divergence
    from .stochastic import covariance_test
    results = []

    def record(name, passed, detail=""):
        results.append((name, bool(passed), detail))
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}" + (f": {detail}" if detail and not passed else ""))

    for op in (divergence(2), divergence(3), curl2d(), curl3d(), row_divergence()):
        rep = projector_identities(op, 4, proj)
        for key in ("idempotence", "annihilation", "trace"):
            e = rep[key]["max_error"]
            record(f"projector {key} [{op.name}, N={op.N}]", e <= 1e-12,
                   f"error {e:.3e} at w={rep[key]['witness']}")
    rng = np.random.default_rng(0)
    so = spectral(divergence(2), 16, 1.0)
    u = rng.standard_normal((2, 16, 16))
    err = float(np.max(np.abs(so.ifft(so.fft(u)) - u)))
    record("fft round trip", err <= 1e-12, f"error {err:.3e}")
    try:
        Grid(12, 2)
        record("non-power-of-two grid rejected", False, "Grid(12, 2) was accepted")
    except ConfigError as exc:
        record("non-power-of-two grid rejected", "power of two" in str(exc), str(exc))
    cov = covariance_test(divergence(2), RC(), 7, (0.0, 1.0), 1 / 16, (0, 0), 1, [(1, 0), (-2, 3)])
    record("covariance identity", cov["passed"], str(cov["rows"]))
    op, f, g = divergence(2), Laminate(), Grid(16, 2)
    opts = SolveOptions(restarts=0)
    m = solve_periodic(op, f, (0.0, 1.0), g, opts).normalized
    mc = solve_compact(op, f, (0.0, 1.0), g, 0.125, opts).normalized
    record("ordering M <= M_c on 16^2 laminate", m <= mc + 1e-6, f"M={m} M_c={mc}")
    eta = [solve_relaxed(op, f, (0.0, 1.0), g, e, 0.125, opts).normalized for e in (0.01, 1.0, 100.0)]
    record("relaxed minima non-increasing in eta", eta[0] >= eta[1] - 1e-6 and eta[1] >= eta[2] - 1e-6, str(eta))
    return results


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="afhom", description="Cell problems and homogenized integrands "
                                 "for A-free constrained integral functionals.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run",) + TASKS:
        sp = sub.add_parser(name, help="run the task named in the config" if name == "run" else f"run task {name!r}")
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--threads", type=int, default=None, metavar="K")
        sp.add_argument("--seed", type=int, default=None, metavar="S")
        sp.add_argument("--out", default=None, metavar="DIR")
        sp.add_argument("-v", "--verbose", action="store_true")
    sc = sub.add_parser("selfcheck", help="fast invariant suite")
    sc.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "selfcheck":
        res = selfcheck()
        failed = [r for r in res if not r[1]]
        print(f"{len(res) - len(failed)}/{len(res)} invariants passed")
        return EXIT_OK if not failed else EXIT_INVALID
    task = None if args.command == "run" else args.command
    return run(args.config, task, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
