"""Deterministic random instances with a guaranteed common feasible point.

Each generator draws sets around a hidden interior point so the intersection
is nonempty with margin, then places x0 away from it.  Used by the test suite
and by the CLI's built-in fixture generator; everything is a pure function of
the seed.
"""

from __future__ import annotations

import numpy as np

from .schedule import CyclePlan, SweepPlan
from .state import ProblemSpec
from .terms import Halfspace, Indicator, L2Ball


def _unit(rng, d):
    v = rng.standard_normal(d)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
    return v / n


def random_halfspaces(seed, r, d, m=0, margin_lo=0.1, margin_hi=0.6):
    """r halfspaces sharing an interior point, x0 pushed outside."""
    rng = np.random.default_rng(seed)
    p = rng.uniform(-0.5, 0.5, size=d)
    terms = []
    for _ in range(r):
        a = _unit(rng, d)
        b = float(a @ p) + rng.uniform(margin_lo, margin_hi)
        terms.append(Indicator(Halfspace(a, b)))
    x0 = p + rng.uniform(1.5, 2.5) * _unit(rng, d)
    return ProblemSpec(x0, terms, m=m)


def random_balls(seed, r, d, m=0):
    """r Euclidean balls all containing a common point with slack."""
    rng = np.random.default_rng(seed)
    p = rng.uniform(-0.5, 0.5, size=d)
    terms = []
    for _ in range(r):
        center = p + rng.uniform(0.0, 0.8) * _unit(rng, d)
        radius = float(np.linalg.norm(center - p)) + rng.uniform(0.2, 0.8)
        terms.append(Indicator(L2Ball(center, radius)))
    x0 = p + rng.uniform(1.5, 2.5) * _unit(rng, d)
    return ProblemSpec(x0, terms, m=m)


def random_mixed(seed, r, d, m=0):
    """Halfspaces and balls interleaved around one interior point."""
    rng = np.random.default_rng(seed)
    p = rng.uniform(-0.5, 0.5, size=d)
    terms = []
    for k in range(r):
        if k % 2 == 0:
            a = _unit(rng, d)
            b = float(a @ p) + rng.uniform(0.1, 0.6)
            terms.append(Indicator(Halfspace(a, b)))
        else:
            center = p + rng.uniform(0.0, 0.8) * _unit(rng, d)
            radius = float(np.linalg.norm(center - p)) + rng.uniform(0.2, 0.8)
            terms.append(Indicator(L2Ball(center, radius)))
    x0 = p + rng.uniform(1.5, 2.5) * _unit(rng, d)
    return ProblemSpec(x0, terms, m=m)


_GENERATORS = {
    "halfspaces": random_halfspaces,
    "balls": random_balls,
    "mixed": random_mixed,
}


def generate(kind, r, d, seed, m=0):
    """Named entry point for the CLI generator section."""
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(
            f"unknown generator kind {kind!r},"
            f" expected one of {sorted(_GENERATORS)}") from None
    return gen(seed, r, d, m=m)


def mixed_block_schedule(r):
    """A valid custom plan with one inner block, for lifted problems (m = 1).

    Sweep 1 solves the shared copy r+1 outer, sweep 2 couples it to term 1
    in a two-point block (the copy's outer solve at sweep 1 is its matched
    earlier solve), and the remaining terms follow one per sweep.
    """
    if r < 2:
        raise ValueError("need r >= 2 so at least one term stays outer")
    j = r + 1
    sweeps = [SweepPlan(outer={j}), SweepPlan(inner={j: {1, j}})]
    sweeps.extend(SweepPlan(outer={i}) for i in range(2, r + 1))
    return CyclePlan(pattern=tuple(sweeps))
