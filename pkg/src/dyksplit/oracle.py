"""Ground-truth solvers for desk-scale verification.

qp_project solves the projection onto a small polyhedron exactly by active-set
enumeration over the KKT systems; reference_solve is an independent primal
increment-form projection loop.  Neither shares code with the sweep engine on
purpose: they are the measuring sticks the engine is held against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .terms import AffineSubspace, Box, Halfspace, Hyperplane, Indicator

FEAS_TOL = 1e-9
MULT_TOL = 1e-9
MAX_CONSTRAINTS = 24


class ConvergenceError(RuntimeError):
    """The reference loop ran out of cycles; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class LinearConstraint:
    a: tuple
    b: float
    kind: str   # "le" or "eq"


class PolyhedralInstance:
    """Projection of x0 onto the intersection of small linear constraints."""

    def __init__(self, constraints, x0):
        self.x0 = np.asarray(x0, dtype=float).ravel()
        self.d = self.x0.size
        rows, rhs, kinds = [], [], []
        for c in constraints:
            a = np.asarray(c.a, dtype=float).ravel()
            if a.size != self.d:
                raise ValueError("constraint dimension mismatch")
            if c.kind not in ("le", "eq"):
                raise ValueError(f"unknown constraint kind {c.kind!r}")
            rows.append(a)
            rhs.append(float(c.b))
            kinds.append(c.kind)
        if not rows:
            raise ValueError("need at least one constraint")
        if len(rows) > MAX_CONSTRAINTS:
            raise ValueError(
                f"at most {MAX_CONSTRAINTS} constraints supported, got {len(rows)}")
        self.A = np.array(rows)
        self.b = np.array(rhs)
        self.kinds = tuple(kinds)

    @classmethod
    def from_spec(cls, spec):
        """Collect a spec's indicator terms into one constraint list."""
        constraints = []
        for k, t in enumerate(spec.terms, start=1):
            if not isinstance(t, Indicator):
                raise ValueError(f"term {k} is not an indicator")
            s = t.set
            if isinstance(s, Halfspace):
                constraints.append(LinearConstraint(tuple(s.a), s.b, "le"))
            elif isinstance(s, Hyperplane):
                constraints.append(LinearConstraint(tuple(s.a), s.b, "eq"))
            elif isinstance(s, AffineSubspace):
                for row, rhs in zip(s.matrix, s.rhs):
                    constraints.append(LinearConstraint(tuple(row), float(rhs), "eq"))
            elif isinstance(s, Box):
                for k2 in range(s.dim):
                    e = np.zeros(s.dim)
                    e[k2] = 1.0
                    constraints.append(LinearConstraint(tuple(e), float(s.hi[k2]), "le"))
                    constraints.append(LinearConstraint(tuple(-e), float(-s.lo[k2]), "le"))
            else:
                raise ValueError(f"term {k} set {type(s).__name__} is not polyhedral")
        return cls(constraints, spec.x0)


def _feasible(inst, x):
    vals = inst.A @ x - inst.b
    for v, kind in zip(vals, inst.kinds):
        if kind == "eq":
            if abs(v) > FEAS_TOL:
                return False
        elif v > FEAS_TOL:
            return False
    return True


def qp_project(inst):
    """Exact projection of inst.x0 onto the polyhedron, or None if infeasible.

    Enumerates candidate active sets (all equalities plus every subset of
    inequalities that can be independent), solves each KKT system, and
    returns the first candidate that is primal feasible with nonnegative
    inequality multipliers.  That candidate is the unique projection.
    """
    eq_rows = [k for k, kind in enumerate(inst.kinds) if kind == "eq"]
    le_rows = [k for k, kind in enumerate(inst.kinds) if kind == "le"]
    max_extra = inst.d - len(eq_rows)
    if max_extra < 0:
        raise ValueError("more equality constraints than dimensions")
    for size in range(0, min(len(le_rows), max_extra) + 1):
        for active in combinations(le_rows, size):
            sel = eq_rows + list(active)
            if not sel:
                if _feasible(inst, inst.x0):
                    return inst.x0.copy()
                continue
            M = inst.A[sel]
            if np.linalg.matrix_rank(M, tol=1e-10) < len(sel):
                continue
            rhs = inst.b[sel]
            try:
                mu = np.linalg.solve(M @ M.T, M @ inst.x0 - rhs)
            except np.linalg.LinAlgError:
                continue
            x = inst.x0 - M.T @ mu
            if not _feasible(inst, x):
                continue
            ineq_mu = mu[len(eq_rows):]
            if np.all(ineq_mu >= -MULT_TOL):
                return x
    return None


def reference_solve(spec, tol=1e-8, max_cycles=1_000_000):
    """Independent primal increment-form projection loop on the r indicators.

    Cycles the projections with per-set increments until the iterate moves
    less than tol * 1e-2 over a full cycle.  Raises ConvergenceError with the
    last residual when the cycle budget runs out.
    """
    for k, t in enumerate(spec.terms, start=1):
        if not isinstance(t, Indicator):
            raise ValueError(f"term {k} is not an indicator")
    sets = [t.set for t in spec.terms]
    x = spec.x0.copy()
    inc = [np.zeros(spec.d) for _ in sets]
    stop = tol * 1e-2
    last = float("inf")
    for _ in range(max_cycles):
        x_before = x.copy()
        for i, s in enumerate(sets):
            shifted = x + inc[i]
            y = s.project(shifted)
            inc[i] = shifted - y
            x = y
        last = float(np.linalg.norm(x - x_before))
        if last < stop:
            return x
    raise ConvergenceError(
        f"no convergence within {max_cycles} cycles,"
        f" last cycle moved {last:.3e}", residual=last)
