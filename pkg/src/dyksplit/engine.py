"""Sweep engine: dual block minimization driven by a cycle plan.

Each sweep jointly minimizes the dual objective over its outer index set
(complement frozen) and, independently, over each inner block (block sum
frozen).  Outer solves are routed through exact closed-form tiers whenever
the set contains at most one proximable index; anything richer falls back to
a nested coordinate loop and is flagged approximate.  All updates in a sweep
read the same snapshot of the duals and write disjoint rows, so thread counts
cannot change the result, only the wall time.

check_level:
  "off"    objective at cycle ends only, no per-sweep snapshots,
  "sweep"  per-sweep ascent and gain margins, freeze equalities, per-cycle
           convergence certificates,
  "full"   additionally a sequential replay of each sweep with per-subproblem
           gain checks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import schedule as sched
from .state import DualState, dual_objective_z, fenchel_residual
from .terms import DimensionMismatch

ASCENT_TOL = 1e-10        # plain monotonicity slack
SWEEP_GAIN_TOL = 1e-8     # slack on the quadratic-margin ascent inequality
CLAIM_TOL = 1e-8          # stationarity residual after exact solves
CERT_SLACK = 1e-9         # slack on the certificate distance bound

_INF = float("inf")


class EngineInvariantError(RuntimeError):
    """A runtime check (ascent, freeze, certificate, replay) failed."""


class NonFiniteStateError(EngineInvariantError):
    """The dual state picked up a NaN or infinity."""


class InvalidScheduleError(ValueError):
    """The plan fails the touch-pattern conditions and override is off."""


class ScheduleGrowthWarning(UserWarning):
    """The plan does not meet the growth condition; the monitor is advisory."""


@dataclass
class SolveParams:
    max_iterations: int = 1000
    stop_gap: float | None = None
    nested_bcm_sweeps: int = 64
    nested_tol: float = 1e-12
    workers: int = 1
    check_level: str = "sweep"
    allow_invalid_schedule: bool = False
    per_sweep_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.stop_gap is not None and self.stop_gap < 0.0:
            raise ValueError("stop_gap must be nonnegative when set")
        if self.nested_bcm_sweeps < 1:
            raise ValueError("nested_bcm_sweeps must be at least 1")
        if self.nested_tol <= 0.0:
            raise ValueError("nested_tol must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.check_level not in ("off", "sweep", "full"):
            raise ValueError("check_level must be off, sweep, or full")


@dataclass
class TraceRow:
    n: int
    w: int
    F: float | None
    v_diff: float
    inner_diffs: dict
    gamma_n: float | None
    growth_monitor: float | None
    cert_max_residual: float | None
    approx: bool


@dataclass
class Certificate:
    index: int
    point: np.ndarray
    residual: float
    fenchel: float


@dataclass
class RunResult:
    state: DualState
    x: np.ndarray
    F: float
    F_initial: float
    stop_reason: str
    cycles_run: int
    cycle_rows: list
    sweep_rows: list | None
    gamma: np.ndarray
    growth: np.ndarray
    F_per_cycle: np.ndarray
    sq_diff_cumsum: np.ndarray
    cycle_start_duals: list
    certificates: list | None
    any_approx: bool
    analysis: sched.ScheduleAnalysis


# ---------------------------------------------------------------------------
# subproblem solves (snapshot in, replacement rows out)
# ---------------------------------------------------------------------------

def _outer_rows(spec, z, outer0, params):
    """Joint dual minimizer over outer0 (0-based) against the frozen rest.

    Returns ({row: vector}, exact).  Tiers: empty set, single prox index,
    any all-quadratic set, one prox index plus quadratics (all exact), and
    a nested cyclic pass for two or more prox indices (approximate).
    """
    if outer0.size == 0:
        return {}, True
    r = spec.r
    total = z.sum(axis=0)
    prox0 = outer0[outer0 < r]
    quad0 = outer0[outer0 >= r]

    if prox0.size == 1 and quad0.size == 0:
        i = int(prox0[0])
        u = spec.x0 - (total - z[i])
        return {i: u - spec.terms[i].prox(u, 1.0)}, True

    if prox0.size == 0:
        k = quad0.size
        c = total - z[quad0].sum(axis=0)
        zeta = -c / (k + 1.0)
        return {int(j): zeta for j in quad0}, True

    if prox0.size == 1:
        i = int(prox0[0])
        k = quad0.size
        c = total - z[outer0].sum(axis=0)
        tau = k + 1.0
        # eliminate the copies: z_i minimizes h_i*(.) + ||. - u_bar||^2/(2 tau)
        u_bar = tau * spec.x0 - c
        x_hat = spec.terms[i].prox(u_bar / tau, 1.0 / tau)
        z_i = u_bar - tau * x_hat
        zeta = -(z_i + c) / tau
        rows = {i: z_i}
        rows.update({int(j): zeta for j in quad0})
        return rows, True

    # two or more prox indices: nested cyclic coordinate minimization
    work = z.copy()
    idx = [int(i) for i in outer0]
    for _ in range(params.nested_bcm_sweeps):
        delta = 0.0
        for i in idx:
            rest = work.sum(axis=0) - work[i]
            if i < r:
                u = spec.x0 - rest
                new = u - spec.terms[i].prox(u, 1.0)
            else:
                new = -0.5 * rest
            delta = max(delta, float(np.abs(new - work[i]).max()))
            work[i] = new
        if delta < params.nested_tol:
            break
    return {i: work[i].copy() for i in idx}, False


def _block_rows(spec, z, j0, prox0, all0, params):
    """Inner-block minimizer with the block sum held fixed.

    j0 is the governing quadratic row, prox0 the term rows, all0 both
    (all 0-based, sorted).  The governing row is always computed as the
    residual of the frozen sum.  Exact for a single term member.
    """
    bsum = z[all0].sum(axis=0)
    if prox0.size == 1:
        i = int(prox0[0])
        u = bsum + spec.x0
        z_i = u - spec.terms[i].prox(u, 1.0)
        return {i: z_i, j0: bsum - z_i}, True

    # several term members: cyclic pass on the reduced problem, with the
    # governing copy eliminated as bsum minus the member sum
    work = {int(i): z[i].copy() for i in prox0}
    for _ in range(params.nested_bcm_sweeps):
        delta = 0.0
        for i in work:
            rest = sum(work[k] for k in work if k != i)
            u = bsum - rest + spec.x0
            new = u - spec.terms[i].prox(u, 1.0)
            delta = max(delta, float(np.abs(new - work[i]).max()))
            work[i] = new
        if delta < params.nested_tol:
            break
    rows = dict(work)
    rows[j0] = bsum - sum(work.values())
    return rows, False


class _CSweep:
    """Compiled sweep: 0-based index arrays plus the 1-based originals."""

    __slots__ = ("outer0", "outer1", "blocks", "block_js")

    def __init__(self, sweep, r):
        self.outer1 = tuple(sorted(sweep.outer))
        self.outer0 = np.array([i - 1 for i in self.outer1], dtype=np.intp)
        self.blocks = []
        self.block_js = []
        for j in sorted(sweep.inner):
            members = sweep.inner[j]
            prox0 = np.array(sorted(i - 1 for i in members if i != j), dtype=np.intp)
            all0 = np.array(sorted(i - 1 for i in members), dtype=np.intp)
            self.blocks.append((j - 1, prox0, all0))
            self.block_js.append(j)


def _execute_sweep(spec, z, cs, params, executor):
    """Run one sweep against the snapshot z; returns (z_new, exact)."""
    tasks = []
    if cs.outer0.size:
        tasks.append(lambda: _outer_rows(spec, z, cs.outer0, params))
    for j0, prox0, all0 in cs.blocks:
        tasks.append(lambda j0=j0, p0=prox0, a0=all0:
                     _block_rows(spec, z, j0, p0, a0, params))
    if not tasks:
        return z, True
    if executor is not None and len(tasks) > 1:
        results = [f.result() for f in [executor.submit(t) for t in tasks]]
    else:
        results = [t() for t in tasks]
    z_new = z.copy()
    exact = True
    for rows, ok in results:
        exact = exact and ok
        for i0, vec in rows.items():
            z_new[i0] = vec
    return z_new, exact


# ---------------------------------------------------------------------------
# public single-step operations
# ---------------------------------------------------------------------------

def _check_indices(spec, indices):
    for i in indices:
        if not 1 <= i <= spec.n_duals:
            raise IndexError(f"dual index {i} out of range 1..{spec.n_duals}")


def solve_outer(spec, state, S, params=None):
    """Exactly-or-approximately minimize over the 1-based index set S in place."""
    params = params or SolveParams()
    S = sorted(set(int(i) for i in S))
    _check_indices(spec, S)
    outer0 = np.array([i - 1 for i in S], dtype=np.intp)
    rows, exact = _outer_rows(spec, state.z, outer0, params)
    for i0, vec in rows.items():
        state.z[i0] = vec
    return exact


def solve_inner_block(spec, state, j, members, params=None):
    """Minimize over block members with the block sum frozen, in place."""
    params = params or SolveParams()
    members = frozenset(int(i) for i in members)
    j = int(j)
    sweep = sched.SweepPlan(inner={j: members})
    sched._check_ranges([sweep], spec.r, spec.m, "ad-hoc block")
    prox0 = np.array(sorted(i - 1 for i in members if i != j), dtype=np.intp)
    all0 = np.array(sorted(i - 1 for i in members), dtype=np.intp)
    rows, exact = _block_rows(spec, state.z, j - 1, prox0, all0, params)
    for i0, vec in rows.items():
        state.z[i0] = vec
    return exact


def run_sweep(spec, state, sweep, params=None):
    """Execute one SweepPlan in place; returns movement diagnostics."""
    params = params or SolveParams()
    sched._check_ranges([sweep], spec.r, spec.m, "ad-hoc sweep")
    cs = _CSweep(sweep, spec.r)
    v_old = state.z.sum(axis=0)
    z_new, exact = _execute_sweep(spec, state.z, cs, params, None)
    v_diff = float(np.linalg.norm(z_new.sum(axis=0) - v_old))
    inner_diffs = {j: float(np.linalg.norm(z_new[j - 1] - state.z[j - 1]))
                   for j in cs.block_js}
    state.z = z_new
    state.w += 1
    return {"v_diff": v_diff, "inner_diffs": inner_diffs, "exact": exact}


# ---------------------------------------------------------------------------
# per-cycle checks
# ---------------------------------------------------------------------------

def _assert_freeze(c_analysis, snaps, n):
    """Bitwise freeze equalities implied by the touch pattern."""
    w_bar = len(snaps) - 1
    for i1, p in c_analysis.p.items():
        row = i1 - 1
        ref = snaps[p][row]
        for w in range(p + 1, w_bar + 1):
            if not np.array_equal(snaps[w][row], ref):
                raise EngineInvariantError(
                    f"cycle {n}: z_{i1} moved after its last touch"
                    f" (sweep {p} vs {w})")
    for i1, q in c_analysis.q.items():
        p = c_analysis.p[i1]
        for i2 in c_analysis.block_members[i1]:
            row = i2 - 1
            ref = snaps[q][row]
            for w in range(q + 1, p):
                if not np.array_equal(snaps[w][row], ref):
                    raise EngineInvariantError(
                        f"cycle {n}: block member z_{i2} moved inside the"
                        f" protected window ({q}..{p - 1})")


def certificate_points(spec, snaps, c_analysis):
    """Per-index primal certificates from one cycle's sweep snapshots.

    snaps[w] must be the duals after sweep w (snaps[0] the cycle start) and
    the analysis must be valid for this cycle.  For an index last touched by
    an outer solve at sweep p the point is x0 - v at that sweep; for a term
    index last touched inside a block the frozen-window mixed sum is used;
    for the governing quadratic index it is x0 + z_j at sweep p.
    """
    z_final = snaps[-1]
    x_final = spec.x0 - z_final.sum(axis=0)
    out = []
    for i1 in range(1, spec.n_duals + 1):
        p = c_analysis.p[i1]
        if i1 not in c_analysis.via_block:
            x_i = spec.x0 - snaps[p].sum(axis=0)
        elif i1 > spec.r:
            x_i = spec.x0 + snaps[p][i1 - 1]
        else:
            q = c_analysis.q[i1]
            members = c_analysis.block_members[i1]
            j1 = c_analysis.via_block[i1]
            part_rows = sorted(i2 - 1 for i2 in members if i2 != j1)
            part_p = snaps[p][part_rows].sum(axis=0)
            part_q = snaps[q][part_rows].sum(axis=0)
            x_i = spec.x0 - part_p - (snaps[q].sum(axis=0) - part_q)
        out.append(Certificate(
            index=i1,
            point=x_i,
            residual=float(np.linalg.norm(x_i - x_final)),
            fenchel=fenchel_residual(spec, z_final, i1, x_i)))
    return out


def _replay_check(spec, z_prev, z_par, cs, params, n, w):
    """check_level=full: sequential re-execution with per-subproblem margins."""
    z_seq = z_prev.copy()
    F_prev = dual_objective_z(spec, z_seq)
    steps = [("block", b) for b in cs.blocks]
    if cs.outer0.size:
        steps.append(("outer", None))
    for kind, blk in steps:
        if kind == "block":
            j0, prox0, all0 = blk
            old_j = z_seq[j0].copy()
            rows, exact = _block_rows(spec, z_seq, j0, prox0, all0, params)
            for i0, vec in rows.items():
                z_seq[i0] = vec
            margin = 0.5 * float(np.linalg.norm(z_seq[j0] - old_j)) ** 2
        else:
            v_old = z_seq.sum(axis=0)
            rows, exact = _outer_rows(spec, z_seq, cs.outer0, params)
            for i0, vec in rows.items():
                z_seq[i0] = vec
            margin = 0.5 * float(np.linalg.norm(z_seq.sum(axis=0) - v_old)) ** 2
        F_new = dual_objective_z(spec, z_seq)
        if exact and F_new < F_prev + margin - SWEEP_GAIN_TOL:
            raise EngineInvariantError(
                f"cycle {n} sweep {w}: a {kind} subproblem gained less than"
                f" its quadratic margin")
        F_prev = F_new
    scale = max(1.0, float(np.abs(z_par).max()))
    if float(np.abs(z_seq - z_par).max()) > 1e-9 * scale:
        raise EngineInvariantError(
            f"cycle {n} sweep {w}: sequential replay disagrees with the"
            f" snapshot execution")


# ---------------------------------------------------------------------------
# cycle loop
# ---------------------------------------------------------------------------

def run(spec, plan, params=None, z_init=None):
    """Run the cycle plan until the gap rule or the iteration cap fires.

    Parameters
    ----------
    spec : ProblemSpec
    plan : CyclePlan
        Validated before any work; (A)/(B) failures raise
        InvalidScheduleError unless params.allow_invalid_schedule.
    params : SolveParams
    z_init : array (r+m, d), optional
        Starting duals, zeros when omitted.  Passing the final duals of a
        previous run continues it (per-cycle bookkeeping restarts).
    """
    params = params or SolveParams()
    analysis = sched.validate(plan, spec.r, spec.m)
    valid = analysis.valid_A and analysis.valid_B
    if not valid and not params.allow_invalid_schedule:
        head = "; ".join(v.message for v in analysis.violations[:3])
        raise InvalidScheduleError(f"schedule is invalid: {head}")
    if not analysis.sqrt_growth_ok:
        warnings.warn(
            "schedule exceeds one index per outer set or two per block;"
            " the sqrt-n growth monitor is advisory only",
            ScheduleGrowthWarning, stacklevel=2)

    if z_init is None:
        z = np.zeros((spec.n_duals, spec.d))
    else:
        z = np.array(z_init, dtype=float)
        if z.shape != (spec.n_duals, spec.d):
            raise DimensionMismatch(
                f"z_init has shape {z.shape}, expected {(spec.n_duals, spec.d)}")
        if not np.isfinite(z).all():
            raise ValueError("z_init must be finite")

    compiled_pattern = [_CSweep(sw, spec.r) for sw in plan.pattern]
    compiled_lead = [[_CSweep(sw, spec.r) for sw in c] for c in plan.lead_in]

    check = params.check_level
    sweep_checks = check in ("sweep", "full")
    F_state = dual_objective_z(spec, z)
    F_initial = F_state

    cycle_rows = []
    sweep_rows = [] if params.per_sweep_trace else None
    gamma_list, growth_list, F_list, sq_list = [], [], [], []
    cycle_start_duals = [z.copy()]
    certificates = None
    any_approx = False
    stop_reason = "max_iterations"
    cycles_run = 0

    executor = (ThreadPoolExecutor(max_workers=params.workers)
                if params.workers > 1 else None)
    try:
        for n in range(1, params.max_iterations + 1):
            sweeps = (compiled_lead[n - 1] if n <= len(compiled_lead)
                      else compiled_pattern)
            c_analysis = analysis.for_cycle(plan, n)
            snaps = [z] if sweep_checks else None
            gamma_acc = 0.0
            sq_acc = 0.0
            v_acc = 0.0
            cycle_approx = False

            for w, cs in enumerate(sweeps, start=1):
                z_prev = z
                z, exact = _execute_sweep(spec, z_prev, cs, params, executor)
                if z is not z_prev and not np.isfinite(z).all():
                    cycle_rows.append(TraceRow(
                        n=n, w=w, F=float("nan"), v_diff=float("nan"),
                        inner_diffs={}, gamma_n=None, growth_monitor=None,
                        cert_max_residual=None, approx=not exact))
                    raise NonFiniteStateError(
                        f"non-finite duals after cycle {n} sweep {w}")
                v_diff = float(np.linalg.norm(
                    z.sum(axis=0) - z_prev.sum(axis=0)))
                inner_diffs = {
                    j: float(np.linalg.norm(z[j - 1] - z_prev[j - 1]))
                    for j in cs.block_js}
                inner_sq = sum(d * d for d in inner_diffs.values())
                gamma_acc += v_diff + sum(inner_diffs.values())
                sq_acc += v_diff * v_diff + inner_sq
                v_acc += v_diff
                cycle_approx = cycle_approx or not exact

                if sweep_checks:
                    F_new = dual_objective_z(spec, z)
                    if exact:
                        if F_new < F_state - ASCENT_TOL:
                            raise EngineInvariantError(
                                f"cycle {n} sweep {w}: dual objective"
                                f" decreased by {F_state - F_new:.3e}")
                        margin = 0.5 * v_diff * v_diff + 0.5 * inner_sq
                        if F_new < F_state + margin - SWEEP_GAIN_TOL:
                            raise EngineInvariantError(
                                f"cycle {n} sweep {w}: ascent fell short of"
                                f" the quadratic margin")
                        if cs.outer1:
                            x_now = spec.x0 - z.sum(axis=0)
                            for i1 in cs.outer1:
                                resid = fenchel_residual(spec, z, i1, x_now)
                                if resid > CLAIM_TOL:
                                    raise EngineInvariantError(
                                        f"cycle {n} sweep {w}: stationarity"
                                        f" residual {resid:.3e} at index {i1}")
                    if check == "full" and exact:
                        _replay_check(spec, z_prev, z, cs, params, n, w)
                    F_state = F_new
                    snaps.append(z)

                if sweep_rows is not None:
                    last = w == len(sweeps)
                    sweep_rows.append(TraceRow(
                        n=n, w=w, F=F_state if sweep_checks else None,
                        v_diff=v_diff, inner_diffs=inner_diffs,
                        gamma_n=gamma_acc if last else None,
                        growth_monitor=None, cert_max_residual=None,
                        approx=not exact))

            if not sweep_checks:
                F_state = dual_objective_z(spec, z)
            F_cycle = F_state
            if not any_approx and not cycle_approx and F_list:
                if F_cycle < F_list[-1] - ASCENT_TOL:
                    raise EngineInvariantError(
                        f"cycle {n}: end-of-cycle objective decreased")
            any_approx = any_approx or cycle_approx
            growth = float(np.linalg.norm(z)) / math.sqrt(n)

            cert_max = None
            if sweep_checks and valid:
                _assert_freeze(c_analysis, snaps, n)
                certificates = certificate_points(spec, snaps, c_analysis)
                cert_max = max(c.residual for c in certificates)
                if not cycle_approx:
                    for c in certificates:
                        if c.residual > gamma_acc + CERT_SLACK:
                            raise EngineInvariantError(
                                f"cycle {n}: certificate for index {c.index}"
                                f" is {c.residual:.3e} from the iterate,"
                                f" beyond gamma {gamma_acc:.3e}")
                        if c.fenchel > CLAIM_TOL:
                            raise EngineInvariantError(
                                f"cycle {n}: certificate for index {c.index}"
                                f" has Fenchel residual {c.fenchel:.3e}")

            gamma_list.append(gamma_acc)
            growth_list.append(growth)
            F_list.append(F_cycle)
            sq_list.append((sq_list[-1] if sq_list else 0.0) + sq_acc)
            cycle_rows.append(TraceRow(
                n=n, w=len(sweeps), F=F_cycle, v_diff=v_acc, inner_diffs={},
                gamma_n=gamma_acc, growth_monitor=growth,
                cert_max_residual=cert_max, approx=cycle_approx))
            cycle_start_duals.append(z.copy())
            if sweep_rows is not None and sweep_rows:
                tail = sweep_rows[-1]
                tail.growth_monitor = growth
                tail.cert_max_residual = cert_max
            cycles_run = n

            if params.stop_gap is not None:
                x_hat = spec.x0 - z.sum(axis=0)
                primal = spec.primal_value(x_hat)
                if (np.isfinite(primal) and np.isfinite(F_cycle)
                        and primal - F_cycle <= params.stop_gap):
                    stop_reason = "gap"
                    break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    state = DualState(z, n=cycles_run, w=len(plan.cycle(cycles_run)))
    return RunResult(
        state=state,
        x=spec.x0 - z.sum(axis=0),
        F=F_list[-1],
        F_initial=F_initial,
        stop_reason=stop_reason,
        cycles_run=cycles_run,
        cycle_rows=cycle_rows,
        sweep_rows=sweep_rows,
        gamma=np.array(gamma_list),
        growth=np.array(growth_list),
        F_per_cycle=np.array(F_list),
        sq_diff_cumsum=np.array(sq_list),
        cycle_start_duals=cycle_start_duals,
        certificates=certificates,
        any_approx=any_approx,
        analysis=analysis)


# ---------------------------------------------------------------------------
# literal simultaneous-projection reference
# ---------------------------------------------------------------------------

def product_space_reference(spec, z_init=None, n_cycles=50):
    """Plain averaged-projection Dykstra loop, kept separate from the engine.

    Works on the r indicator terms only; returns the list [z^1, ..., z^{N+1}]
    of (r, d) dual arrays, where z^{n+1} is the state after n loop bodies.
    The primal iterate at step n is x0 - mean(z^n, axis=0).
    """
    r, d = spec.r, spec.d
    for k, t in enumerate(spec.terms):
        if not hasattr(t, "set"):
            raise ValueError(
                f"the reference loop needs indicator terms; term {k + 1} is"
                f" {type(t).__name__}")
    if z_init is None:
        z = np.zeros((r, d))
    else:
        z = np.array(z_init, dtype=float)
        if z.shape != (r, d):
            raise DimensionMismatch(
                f"z_init has shape {z.shape}, expected {(r, d)}")
    history = [z.copy()]
    x = spec.x0 - z.sum(axis=0) / r
    for _ in range(n_cycles):
        projections = np.empty((r, d))
        for i in range(r):
            u = x + z[i]
            projections[i] = spec.terms[i].prox(u, 1.0)
            z[i] = u - projections[i]
        x = projections.sum(axis=0) / r
        history.append(z.copy())
    return history
