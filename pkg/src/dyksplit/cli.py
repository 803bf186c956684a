"""Command-line front end: solve, validate, compare, oracle.

Exit codes: 0 success (solve: the gap rule fired), 1 configuration or
schedule error, 2 iteration cap reached, 3 oracle reports infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import config as cfg_mod
from . import engine, oracle, schedule
from .state import gap_report

TRACE_COLUMNS = ("n", "w", "F", "v_diff", "gamma_n", "growth_monitor",
                 "cert_max_residual", "approx_flag")

_TRACE_HELP = """\
trace columns (fixed order):
  n                  cycle number (1-based)
  w                  sweep index (per-sweep rows) or the cycle's sweep count
  F                  dual objective after the row's last sweep (empty when
                     check_level=off skips per-sweep evaluation)
  v_diff             movement of the dual sum over the row's sweeps
  gamma_n            cycle certificate radius (last row of each cycle)
  growth_monitor     ||z||_F / sqrt(n) at the cycle end
  cert_max_residual  largest certificate distance to the iterate
  approx_flag        1 when a nested approximate tier ran in scope
"""


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise cfg_mod.ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise cfg_mod.ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return cfg_mod.RunConfig.from_dict(raw)


def _fmt(x):
    return "" if x is None else repr(float(x))


def _write_trace(path, fmt, rows, meta):
    if fmt == "csv":
        lines = []
        if meta.get("schedule_rewritten"):
            lines.append("# schedule auto-deferred: (B)-violating blocks"
                         " moved to cycle starts")
        lines.append(",".join(TRACE_COLUMNS))
        for row in rows:
            lines.append(",".join([
                str(row.n), str(row.w), _fmt(row.F), _fmt(row.v_diff),
                _fmt(row.gamma_n), _fmt(row.growth_monitor),
                _fmt(row.cert_max_residual), "1" if row.approx else "0"]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        payload = {"meta": meta, "rows": [{
            "n": row.n, "w": row.w, "F": row.F, "v_diff": row.v_diff,
            "inner_diffs": {str(j): v for j, v in row.inner_diffs.items()},
            "gamma_n": row.gamma_n, "growth_monitor": row.growth_monitor,
            "cert_max_residual": row.cert_max_residual,
            "approx_flag": row.approx} for row in rows]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")


def cmd_solve(args):
    cfg = _load_config(args.config)
    built = cfg_mod.build(cfg, seed_override=args.seed,
                          workers_override=args.workers)
    if built.mode == "product-reference":
        raise cfg_mod.ConfigError(
            "product-reference is a compare-only mode; use 'compare'")
    plan = built.plan
    analysis = schedule.validate(plan, built.spec.r, built.spec.m)
    rewritten = False
    for v in analysis.violations:
        print(f"schedule violation: {v.message}")
    if not (analysis.valid_A and analysis.valid_B):
        if args.auto_defer and analysis.valid_A:
            plan = schedule.rewrite_deferred(plan, built.spec.r, built.spec.m)
            rewritten = True
            moved = len(plan.pattern) - len(built.plan.pattern)
            print(f"schedule rewritten: {moved} deferred block sweep(s)"
                  f" prepended, one lead-in cycle added")
        else:
            _err("schedule is invalid; --auto-defer can move (B)-violating"
                 " blocks to the next cycle start" if analysis.valid_A else
                 "schedule is invalid: some index is never touched")
            return 1

    result = engine.run(built.spec, plan, built.params, z_init=built.z_init)
    report = gap_report(built.spec, result.state, result.x)

    if built.output.trace_path:
        rows = (result.sweep_rows if built.params.per_sweep_trace
                else result.cycle_rows)
        meta = {"stop_reason": result.stop_reason,
                "cycles": result.cycles_run,
                "F": result.F,
                "schedule_rewritten": rewritten,
                "any_approx": result.any_approx}
        _write_trace(built.output.trace_path, built.output.format, rows, meta)
        print(f"trace written to {built.output.trace_path}")

    print(f"cycles run: {result.cycles_run} (stop: {result.stop_reason})")
    print(f"dual objective: {result.F!r}")
    if np.isfinite(report.primal_value):
        print(f"primal value: {report.primal_value!r}"
              f" (gap {report.gap!r})")
    else:
        print("primal value: inf (iterate not yet feasible)")
    print(f"x: {[float(v) for v in result.x]!r}")
    return 0 if result.stop_reason == "gap" else 2


def cmd_validate(args):
    cfg = _load_config(args.config)
    built = cfg_mod.build(cfg, seed_override=args.seed)
    if built.plan is None:
        raise cfg_mod.ConfigError("product-reference has no schedule to validate")
    analysis = schedule.validate(built.plan, built.spec.r, built.spec.m)
    pat = analysis.pattern
    print(f"pattern: {len(built.plan.pattern)} sweep(s),"
          f" {len(built.plan.lead_in)} lead-in cycle(s)")
    print(f"last-touch sweeps p: { {i: pat.p[i] for i in sorted(pat.p)} }")
    print(f"matched outer solves q: { {i: pat.q[i] for i in sorted(pat.q)} }")
    for v in analysis.violations:
        print(f"violation: {v.message}")
    if not analysis.sqrt_growth_ok:
        print("advisory: growth condition not met (an outer set has more than"
              " one index or a block more than two); the sqrt-n growth"
              " monitor is not guaranteed")
    ok = analysis.valid_A and analysis.valid_B
    print("schedule valid" if ok else "schedule INVALID")
    return 0 if ok else 1


def _spec_signature(spec):
    sig = [spec.d, spec.r, tuple(spec.x0.tolist())]
    for t in spec.terms:
        fields = [type(t).__name__]
        if hasattr(t, "set"):
            s = t.set
            fields.append(type(s).__name__)
            for name in ("a", "b", "lo", "hi", "center", "radius", "matrix", "rhs"):
                if hasattr(s, name):
                    val = getattr(s, name)
                    fields.append(np.asarray(val).tolist()
                                  if hasattr(val, "tolist") else val)
        else:
            for name in ("weight", "center"):
                if hasattr(t, name):
                    val = getattr(t, name)
                    fields.append(np.asarray(val).tolist()
                                  if hasattr(val, "tolist") else val)
        sig.append(tuple(str(f) for f in fields))
    return tuple(str(s) for s in sig)


def _run_side(built, n_cycles):
    """Per-cycle prox duals and the final primal point for one compare side."""
    if built.mode == "product-reference":
        z0 = None if built.z_init is None else built.z_init[:built.spec.r]
        hist = engine.product_space_reference(built.spec, z_init=z0,
                                              n_cycles=n_cycles)
        x = built.spec.x0 - hist[-1].sum(axis=0) / built.spec.r
        return hist, x
    params = built.params
    params.max_iterations = n_cycles
    params.stop_gap = None
    result = engine.run(built.spec, built.plan, params, z_init=built.z_init)
    prox = [z[:built.spec.r].copy() for z in result.cycle_start_duals]
    return prox, result.x


def cmd_compare(args):
    built_a = cfg_mod.build(_load_config(args.config_a),
                            seed_override=args.seed,
                            workers_override=args.workers)
    built_b = cfg_mod.build(_load_config(args.config_b),
                            seed_override=args.seed,
                            workers_override=args.workers)
    if _spec_signature(built_a.spec) != _spec_signature(built_b.spec):
        raise cfg_mod.ConfigError("the two configs describe different problems")

    duals_a, x_a = _run_side(built_a, args.cycles)
    duals_b, x_b = _run_side(built_b, args.cycles)
    n_common = min(len(duals_a), len(duals_b))
    per_cycle = []
    for k in range(n_common):
        diff = duals_a[k] - duals_b[k]
        per_cycle.append(float(np.sqrt((diff * diff).sum(axis=1)).max()))
    max_dual = max(per_cycle)
    x_diff = float(np.linalg.norm(x_a - x_b))

    if args.report:
        print("cycle  max dual difference")
        for k, dv in enumerate(per_cycle):
            print(f"{k + 1:5d}  {dv!r}")
        print(f"final x difference: {x_diff!r}")
        return 0
    print(f"max dual difference over {n_common} cycle starts: {max_dual!r}")
    print(f"final x difference: {x_diff!r}")
    if max_dual <= 1e-9:
        print("equivalent to 1e-9")
        return 0
    print("NOT equivalent to 1e-9")
    return 1


def cmd_oracle(args):
    cfg = _load_config(args.config)
    built = cfg_mod.build(cfg, seed_override=args.seed)
    spec = built.spec
    x_star = None
    if not args.reference:
        try:
            inst = oracle.PolyhedralInstance.from_spec(spec)
        except ValueError:
            inst = None
        if inst is not None:
            x_star = oracle.qp_project(inst)
            if x_star is None:
                print("infeasible: the constraints have empty intersection")
                return 3
    if x_star is None:
        try:
            x_star = oracle.reference_solve(spec, tol=1e-10)
        except oracle.ConvergenceError as exc:
            _err(f"reference loop did not converge ({exc})")
            return 1
    alpha = (spec.m + 1) * spec.quad_value(x_star)
    print(f"x_star: {[float(v) for v in x_star]!r}")
    print(f"alpha: {alpha!r}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dyksplit",
        description="Dykstra-style splitting with flexible sweep schedules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser(
        "solve", help="run a config to convergence or the cycle cap",
        epilog=_TRACE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p_solve.add_argument("config")
    p_solve.add_argument("--auto-defer", action="store_true",
                         help="rewrite (B)-violating blocks into deferred"
                              " sweeps instead of refusing")
    p_solve.add_argument("--workers", type=int, default=None,
                         help="override solve.workers")
    p_solve.add_argument("--seed", type=int, default=None,
                         help="override the fixture generator seed")
    p_solve.set_defaults(func=cmd_solve)

    p_val = sub.add_parser("validate", help="analyze a schedule, print p/q"
                                            " maps and violations")
    p_val.add_argument("config")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(func=cmd_validate)

    p_cmp = sub.add_parser(
        "compare", help="run two configs on the same problem and compare"
                        " per-cycle duals")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    p_cmp.add_argument("--cycles", type=int, default=50)
    p_cmp.add_argument("--report", action="store_true",
                       help="print the per-cycle table and exit 0")
    p_cmp.add_argument("--workers", type=int, default=None)
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_orc = sub.add_parser(
        "oracle", help="ground-truth projection for the config's problem")
    p_orc.add_argument("config")
    p_orc.add_argument("--reference", action="store_true",
                       help="force the projection-loop reference solver")
    p_orc.add_argument("--seed", type=int, default=None)
    p_orc.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (cfg_mod.ConfigError, schedule.ScheduleStructureError,
            schedule.UnresolvableDeferralError,
            engine.InvalidScheduleError) as exc:
        _err(str(exc))
        return 1
    except engine.EngineInvariantError as exc:
        _err(f"engine invariant failed: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
