"""Command-line entry point: config parsing, subcommand dispatch, artifacts.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 property-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .coupling import picard_solve
from .errors import NumericalError, UsageError
from .optimizer import LinearF0, QuarticDriver, TableF0, ZeroF0, unconstrained_interval
from .pde import Grid1D, default_grid, feynman_kac_check, write_surface_csv
from .properties import (
    DeterministicSpec,
    check_dynamic_consistency,
    check_monotonicity,
    check_subadditivity,
    check_translation_invariance,
    martingale_diagnostics,
    theta_expectation,
)
from .scenarios import build_application_spec, run_application, run_counterexample
from .sde import (
    ConstantTerminal,
    LinearTerminal,
    ProblemSpec,
    QuadraticTerminal,
    TimeGrid,
    write_paths_csv,
)
from .uncertainty import AffineTheta, AmbiguityMap, ConstantTheta, IntervalUnion


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _reject_unknown(section: dict, allowed: set[str], context: str) -> None:
    for key in section:
        if key not in allowed:
            raise UsageError(f"unknown field '{key}' in {context}")


def _build_theta_rule(cfg: dict):
    _reject_unknown(cfg, {"kind", "value", "alpha", "beta", "bounds"}, "theta_rule")
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        return ConstantTheta(float(cfg.get("value", 0.0)))
    if kind == "affine":
        lo, hi = cfg["bounds"]
        return AffineTheta(float(cfg.get("alpha", 0.0)), float(cfg.get("beta", 0.0)), float(lo), float(hi))
    raise UsageError(f"unknown theta_rule kind '{kind}'")


def build_ambiguity(cfg: dict) -> AmbiguityMap:
    _reject_unknown(cfg, {"intervals", "theta_rule", "endpoint_shifts"}, "ambiguity")
    base = IntervalUnion(tuple((float(lo), float(hi)) for lo, hi in cfg["intervals"]))
    shifts = tuple(float(s) for s in cfg.get("endpoint_shifts", ()))
    rule = _build_theta_rule(cfg.get("theta_rule", {}))
    return AmbiguityMap(base=base, endpoint_shifts=shifts, theta_rule=rule)


def _build_f0(cfg: dict):
    _reject_unknown(cfg, {"kind", "slope", "ys", "values"}, "f0")
    kind = cfg.get("kind", "zero")
    if kind == "zero":
        return ZeroF0()
    if kind == "linear":
        return LinearF0(float(cfg["slope"]))
    if kind == "table":
        return TableF0(np.asarray(cfg["ys"], float), np.asarray(cfg["values"], float))
    raise UsageError(f"unknown f0 kind '{kind}'")


def _build_terminal(cfg: dict):
    _reject_unknown(cfg, {"kind", "coeffs", "value"}, "terminal")
    kind = cfg.get("kind", "linear")
    if kind == "linear":
        return LinearTerminal(np.asarray(cfg.get("coeffs", [1.0]), float))
    if kind == "quadratic":
        return QuadraticTerminal()
    if kind == "constant":
        return ConstantTerminal(float(cfg["value"]))
    raise UsageError(f"unknown terminal kind '{kind}'")


def build_problem(cfg: dict) -> ProblemSpec:
    allowed = {
        "kind", "C0", "C1", "sigma", "x0", "T", "kappa", "w0", "f0", "terminal", "ambiguity",
    }
    _reject_unknown(cfg, allowed, "problem")
    if cfg.get("kind", "application") != "application":
        raise UsageError(f"unknown problem kind '{cfg.get('kind')}'")
    return build_application_spec(
        C0=np.asarray(cfg["C0"], float),
        C1=np.asarray(cfg["C1"], float),
        sigma=np.asarray(cfg["sigma"], float),
        kappa=float(cfg.get("kappa", 1.0)),
        w0=float(cfg.get("w0", 0.0)),
        f0=_build_f0(cfg.get("f0", {})),
        ambiguity=build_ambiguity(cfg["ambiguity"]),
        x0=np.asarray(cfg["x0"], float),
        horizon=float(cfg["T"]),
        terminal=_build_terminal(cfg.get("terminal", {})),
    )


def _solver_params(cfg: dict, args) -> dict:
    _reject_unknown(
        cfg, {"particles", "steps", "seed", "tol", "max_iter", "beta", "damping", "threads"},
        "solver",
    )
    params = {
        "particles": int(cfg.get("particles", 10_000)),
        "steps": int(cfg.get("steps", 100)),
        "seed": int(cfg.get("seed", 0)),
        "tol": float(cfg.get("tol", 1e-6)),
        "max_iter": int(cfg.get("max_iter", 50)),
        "beta": float(cfg.get("beta", 1.0)),
        "damping": float(cfg.get("damping", 1.0)),
        "threads": cfg.get("threads"),
    }
    for name in ("particles", "steps", "seed", "tol", "max_iter", "threads"):
        flag = getattr(args, name, None)
        if flag is not None:
            params[name] = flag
    return params


def _load_config(path: str | None) -> dict:
    if path is None:
        raise UsageError("--config is required for this subcommand")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    with open(p, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    _reject_unknown(cfg, {"problem", "solver"}, "config")
    spec = build_problem(cfg["problem"])
    params = _solver_params(cfg.get("solver", {}), args)
    grid = TimeGrid(spec.horizon, params["steps"])
    t0 = time.perf_counter()
    sol, report = picard_solve(
        spec, grid, params["particles"], seed=params["seed"], tol=params["tol"],
        max_iter=params["max_iter"], beta=params["beta"], damping=params["damping"],
        threads=params["threads"],
    )
    wall = time.perf_counter() - t0
    out = _out_dir(args)
    write_paths_csv(out / "paths.csv", sol)
    _write_json(out / "summary.json", {
        "Y0": sol.y0,
        "iterations": report.iterations,
        "converged": report.converged,
        "seed": params["seed"],
        "wall_time_s": wall,
    })
    _write_json(out / "picard_report.json", report.to_dict())
    print(
        f"solve: Y0={sol.y0:.6f} iterations={report.iterations} "
        f"converged={report.converged} out={out}"
    )
    return 0


def _cmd_counterexample(args) -> int:
    report = run_counterexample(
        args.lam, args.gamma, c=args.c, horizon=args.T, n_steps=args.steps or 1000
    )
    print(
        f"counterexample: gap={report.subadditivity_gap:+.6f} "
        f"e_plus={report.e_plus:.6f} e_minus={report.e_minus:.6f} "
        f"curvature={report.curvature_analytic:.6f}"
    )
    if args.out is not None:
        out = _out_dir(args)
        _write_json(out / "counterexample_report.json", report.to_dict())
    return 0


def _cmd_application(args) -> int:
    cfg = _load_config(args.config)
    _reject_unknown(cfg, {"problem", "solver"}, "config")
    problem = cfg["problem"]
    spec = build_problem(problem)
    params = _solver_params(cfg.get("solver", {}), args)
    base = spec.ambiguity.realize_at(spec.ambiguity.theta_bounds[0])
    report = run_application(
        C0=spec.drift.C0, C1=spec.drift.C1, sigma=spec.volatility.matrix,
        kappa=spec.driver.kappa, w0=spec.driver.w0, f0=spec.driver.f0,
        control_set=base, x0=spec.x0, horizon=spec.horizon,
        n_particles=params["particles"], n_steps=params["steps"], seed=params["seed"],
        terminal=spec.terminal, tol=params["tol"], max_iter=params["max_iter"],
    )
    out = _out_dir(args)
    write_paths_csv(out / "paths_nonconvex.csv", report.solution_nonconvex)
    write_paths_csv(out / "paths_hull.csv", report.solution_hull)
    _write_json(out / "comparison_report.json", report.to_dict())
    print(
        f"application: controls {report.control_nonconvex:g} vs {report.control_hull:g}, "
        f"multipliers {report.multiplier_nonconvex:g} vs {report.multiplier_hull:g}, "
        f"Y0 {report.y0_nonconvex:.6f} vs {report.y0_hull:.6f}"
    )
    return 0


def _cmd_pde_check(args) -> int:
    cfg = _load_config(args.config)
    _reject_unknown(cfg, {"problem", "solver", "pde"}, "config")
    spec = build_problem(cfg["problem"])
    params = _solver_params(cfg.get("solver", {}), args)
    pde_cfg = cfg.get("pde", {})
    _reject_unknown(pde_cfg, {"nx", "nt", "x_min", "x_max", "cfl"}, "pde")
    grid = TimeGrid(spec.horizon, params["steps"])
    sol, _ = picard_solve(
        spec, grid, params["particles"], seed=params["seed"], tol=params["tol"],
        max_iter=params["max_iter"],
    )
    if {"nx", "nt", "x_min", "x_max"} <= set(pde_cfg):
        grid1d = Grid1D(
            float(pde_cfg["x_min"]), float(pde_cfg["x_max"]),
            int(pde_cfg["nx"]), int(pde_cfg["nt"]),
        )
    else:
        grid1d = default_grid(spec, nx=int(pde_cfg.get("nx", 201)), cfl=float(pde_cfg.get("cfl", 0.45)))
    report = feynman_kac_check(spec, grid1d, grid, sol)
    out = _out_dir(args)
    _write_json(out / "feynman_kac_report.json", report.to_dict())
    write_surface_csv(out / "value_surface.csv", grid1d, spec.horizon, report.surface)
    print(
        f"pde-check: v0={report.v0:.6f} Y0={report.y0:.6f} "
        f"relative_gap={report.relative_gap:.4%}"
    )
    return 0


def _cmd_properties(args) -> int:
    cfg = _load_config(args.config)
    _reject_unknown(cfg, {"counterexample", "problem", "solver"}, "config")
    results: dict[str, dict] = {}
    failures = []

    if "counterexample" in cfg:
        ce = cfg["counterexample"]
        _reject_unknown(ce, {"lambda", "gamma", "c", "T", "steps", "split"}, "counterexample")
        lam, gamma = float(ce["lambda"]), float(ce["gamma"])
        c = float(ce.get("c", 0.1))
        horizon = float(ce.get("T", 1.0))
        steps = int(ce.get("steps", 1000))
        split = float(ce.get("split", horizon / 2))
        driver = QuarticDriver(lam, gamma)
        spec = DeterministicSpec(driver, unconstrained_interval(driver, 1.0), horizon)
        grid = TimeGrid(horizon, steps)

        disc = check_dynamic_consistency(spec, grid, c, split)
        results["dynamic_consistency"] = {"discrepancy": disc, "passed": disc <= 1e-8}
        mono = check_monotonicity(spec, grid, c, -c)
        results["monotonicity"] = {"margin": mono.margin, "passed": not mono.violated}
        sub = check_subadditivity(spec, c, grid)
        results["subadditivity_violation"] = {"gap": sub.gap, "passed": sub.violated}
        defect = check_translation_invariance(spec, 0.0, c, grid)
        results["translation_defect"] = {"defect": defect, "passed": abs(defect) > 1e-6}
        _, det_sol = theta_expectation(spec, grid, xi=c)
        mart = martingale_diagnostics(spec, grid, det_sol)
        results["martingale_drift"] = {
            "max_drift": mart.martingale_drift,
            "passed": mart.martingale_drift is not None and mart.martingale_drift <= 1e-8,
        }

    if "problem" in cfg:
        spec = build_problem(cfg["problem"])
        params = _solver_params(cfg.get("solver", {}), args)
        grid = TimeGrid(spec.horizon, params["steps"])
        sol, _ = picard_solve(
            spec, grid, params["particles"], seed=params["seed"], tol=params["tol"],
            max_iter=params["max_iter"],
        )
        mart = martingale_diagnostics(spec, grid, sol)
        results["martingale_zscores"] = {
            "within_three_fraction": mart.within_three_fraction,
            "max_abs_driver": mart.max_abs_driver,
            "passed": (mart.within_three_fraction or 0.0) >= 0.95,
        }

    if not results:
        raise UsageError("the properties config needs a 'counterexample' or 'problem' section")
    failures = [name for name, res in results.items() if not res["passed"]]
    if args.out is not None:
        out = _out_dir(args)
        _write_json(out / "property_report.json", {"results": results, "failures": failures})
    status = "ok" if not failures else f"FAILED: {', '.join(failures)}"
    print(f"properties: {len(results) - len(failures)}/{len(results)} checks passed ({status})")
    return 0 if not failures else 3


def _build_parser() -> _Parser:
    parser = _Parser(prog="theta-fbsde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="noise seed (default 0)")
        p.add_argument("--particles", type=int, default=None, help="particle count (default 10000)")
        p.add_argument("--steps", type=int, default=None, help="time steps (default 100)")
        p.add_argument("--out", type=str, default="./out", help="output directory")
        p.add_argument("--tol", type=float, default=None, help="fixed-point tolerance (default 1e-6)")
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None, help="iteration budget (default 50)")
        p.add_argument(
            "--threads", type=int, default=None,
            help="worker threads for the per-particle argmax fallback (default 1)",
        )

    p_solve = sub.add_parser("solve", help="solve a configured coupled system")
    add_common(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_ce = sub.add_parser("counterexample", help="deterministic quartic diagnostics")
    add_common(p_ce)
    p_ce.add_argument("--lambda", dest="lam", type=float, required=True)
    p_ce.add_argument("--gamma", type=float, required=True)
    p_ce.add_argument("--c", type=float, default=0.1)
    p_ce.add_argument("--T", type=float, default=1.0)
    p_ce.set_defaults(func=_cmd_counterexample, out=None)

    p_app = sub.add_parser("application", help="non-convex vs convexified comparison")
    add_common(p_app)
    p_app.set_defaults(func=_cmd_application)

    p_pde = sub.add_parser("pde-check", help="grid solver cross-check of a particle run")
    add_common(p_pde)
    p_pde.set_defaults(func=_cmd_pde_check)

    p_prop = sub.add_parser("properties", help="run the property checkers")
    add_common(p_prop)
    p_prop.set_defaults(func=_cmd_properties)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"error: missing required config field {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
