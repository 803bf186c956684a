"""Run configuration: one self-contained JSON document per run.

Sections: problem (explicit terms or a seeded generator), splitting (m and
the schedule), solve (engine knobs), output (trace destination).  Parsing is
strict, unknown keys are errors, and from_dict(to_dict(cfg)) == cfg for every
valid config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from .engine import SolveParams
from .schedule import CyclePlan, SweepPlan, classic_dykstra_schedule, product_space_schedule
from .state import ProblemSpec
from .terms import (AffineSubspace, Box, Halfspace, Hyperplane, Indicator,
                    L1Norm, L2Ball, Quadratic)


class ConfigError(ValueError):
    """Bad run configuration."""


MODES = ("classic", "product", "custom", "product-reference")
FORMATS = ("csv", "json")


def _only_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass
class ProblemConfig:
    dim: int | None = None
    x0: list | None = None
    terms: list | None = None
    generator: dict | None = None

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("dim", "x0", "terms", "generator"), "problem")
        return cls(dim=d.get("dim"), x0=d.get("x0"),
                   terms=d.get("terms"), generator=d.get("generator"))

    def to_dict(self):
        return {"dim": self.dim, "x0": self.x0,
                "terms": self.terms, "generator": self.generator}


@dataclass
class ScheduleConfig:
    mode: str = "classic"
    cycles: dict | None = None

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("mode", "cycles"), "splitting.schedule")
        return cls(mode=d.get("mode", "classic"), cycles=d.get("cycles"))

    def to_dict(self):
        return {"mode": self.mode, "cycles": self.cycles}


@dataclass
class SplittingConfig:
    m: int | None = None
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("m", "schedule"), "splitting")
        return cls(m=d.get("m"),
                   schedule=ScheduleConfig.from_dict(d.get("schedule", {})))

    def to_dict(self):
        return {"m": self.m, "schedule": self.schedule.to_dict()}


@dataclass
class SolveConfig:
    max_iterations: int = 1000
    stop_gap: float | None = None
    nested_bcm_sweeps: int = 64
    nested_tol: float = 1e-12
    workers: int = 1
    check_level: str = "sweep"
    z_init: object = "zeros"

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("max_iterations", "stop_gap", "nested_bcm_sweeps",
                       "nested_tol", "workers", "check_level", "z_init"),
                   "solve")
        out = cls()
        for k, v in d.items():
            setattr(out, k, v)
        return out

    def to_dict(self):
        return {"max_iterations": self.max_iterations,
                "stop_gap": self.stop_gap,
                "nested_bcm_sweeps": self.nested_bcm_sweeps,
                "nested_tol": self.nested_tol,
                "workers": self.workers,
                "check_level": self.check_level,
                "z_init": self.z_init}


@dataclass
class OutputConfig:
    trace_path: str | None = None
    format: str = "csv"
    per_sweep: bool = False

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("trace_path", "format", "per_sweep"), "output")
        out = cls(trace_path=d.get("trace_path"),
                  format=d.get("format", "csv"),
                  per_sweep=bool(d.get("per_sweep", False)))
        if out.format not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}")
        return out

    def to_dict(self):
        return {"trace_path": self.trace_path, "format": self.format,
                "per_sweep": self.per_sweep}


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    splitting: SplittingConfig = field(default_factory=SplittingConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, d):
        _only_keys(d, ("problem", "splitting", "solve", "output"), "config")
        return cls(problem=ProblemConfig.from_dict(d.get("problem", {})),
                   splitting=SplittingConfig.from_dict(d.get("splitting", {})),
                   solve=SolveConfig.from_dict(d.get("solve", {})),
                   output=OutputConfig.from_dict(d.get("output", {})))

    def to_dict(self):
        return {"problem": self.problem.to_dict(),
                "splitting": self.splitting.to_dict(),
                "solve": self.solve.to_dict(),
                "output": self.output.to_dict()}


# ---------------------------------------------------------------------------
# building runtime objects
# ---------------------------------------------------------------------------

_TERM_KEYS = {
    "halfspace": ("a", "b"),
    "hyperplane": ("a", "b"),
    "box": ("lo", "hi"),
    "l2ball": ("center", "radius"),
    "affine": ("matrix", "rhs"),
    "l1": ("weight",),
    "quadratic": ("center", "weight"),
}


def term_from_dict(d, dim):
    if "kind" not in d:
        raise ConfigError("term without a kind")
    kind = d["kind"]
    if kind not in _TERM_KEYS:
        raise ConfigError(f"unknown term kind {kind!r},"
                          f" expected one of {sorted(_TERM_KEYS)}")
    _only_keys(d, ("kind",) + _TERM_KEYS[kind], f"term {kind}")
    missing = [k for k in _TERM_KEYS[kind] if k not in d]
    if missing:
        raise ConfigError(f"term {kind} missing keys {missing}")
    try:
        if kind == "halfspace":
            return Indicator(Halfspace(d["a"], d["b"]))
        if kind == "hyperplane":
            return Indicator(Hyperplane(d["a"], d["b"]))
        if kind == "box":
            return Indicator(Box(d["lo"], d["hi"]))
        if kind == "l2ball":
            return Indicator(L2Ball(d["center"], d["radius"]))
        if kind == "affine":
            return Indicator(AffineSubspace(d["matrix"], d["rhs"]))
        if kind == "l1":
            return L1Norm(dim, d["weight"])
        return Quadratic(d["center"], d["weight"])
    except ValueError as exc:
        raise ConfigError(f"bad {kind} term: {exc}") from exc


def sweep_from_dict(d):
    _only_keys(d, ("outer", "blocks"), "sweep")
    inner = {}
    for j, members in (d.get("blocks") or {}).items():
        inner[int(j)] = frozenset(int(i) for i in members)
    return SweepPlan(outer=frozenset(int(i) for i in d.get("outer") or ()),
                     inner=inner)


def sweep_to_dict(sweep):
    return {"outer": sorted(sweep.outer),
            "blocks": {str(j): sorted(b) for j, b in sorted(sweep.inner.items())}}


def plan_from_cycles(cycles):
    _only_keys(cycles, ("pattern", "lead_in"), "schedule.cycles")
    if not cycles.get("pattern"):
        raise ConfigError("custom schedule needs a nonempty pattern")
    pattern = tuple(sweep_from_dict(s) for s in cycles["pattern"])
    lead = tuple(tuple(sweep_from_dict(s) for s in c)
                 for c in cycles.get("lead_in") or ())
    return CyclePlan(pattern=pattern, lead_in=lead)


def plan_to_cycles(plan):
    return {"pattern": [sweep_to_dict(s) for s in plan.pattern],
            "lead_in": [[sweep_to_dict(s) for s in c] for c in plan.lead_in]}


@dataclass
class Built:
    spec: ProblemSpec
    plan: CyclePlan | None
    params: SolveParams
    mode: str
    output: OutputConfig
    z_init: np.ndarray | None


def _resolve_terms(pc, m, seed_override):
    if pc.generator is not None:
        if pc.terms is not None or pc.x0 is not None:
            raise ConfigError("problem.generator excludes explicit terms/x0")
        g = dict(pc.generator)
        _only_keys(g, ("kind", "r", "dim", "seed"), "problem.generator")
        for k in ("kind", "r", "dim"):
            if k not in g:
                raise ConfigError(f"problem.generator missing {k!r}")
        seed = seed_override if seed_override is not None else g.get("seed", 0)
        try:
            return fixtures.generate(g["kind"], int(g["r"]), int(g["dim"]),
                                     seed, m=m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if pc.x0 is None or pc.terms is None:
        raise ConfigError("problem needs x0 and terms (or a generator)")
    x0 = np.asarray(pc.x0, dtype=float).ravel()
    dim = pc.dim if pc.dim is not None else x0.size
    if x0.size != dim:
        raise ConfigError(f"x0 has length {x0.size}, dim says {dim}")
    terms = [term_from_dict(t, dim) for t in pc.terms]
    try:
        return ProblemSpec(x0, terms, m=m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build(cfg, seed_override=None, workers_override=None):
    """Turn a RunConfig into spec, plan, and engine params."""
    mode = cfg.splitting.schedule.mode
    if mode not in MODES:
        raise ConfigError(f"schedule.mode must be one of {MODES}")

    # the mode pins m before the spec is built
    m_cfg = cfg.splitting.m
    if mode == "classic":
        if m_cfg not in (None, 0):
            raise ConfigError("classic mode requires m = 0")
        m_probe = 0
    elif mode in ("product", "product-reference"):
        m_probe = None   # needs r first
    else:
        m_probe = int(m_cfg or 0)

    if m_probe is None:
        # build once with m = 0 to learn r, then rebuild lifted
        base = _resolve_terms(cfg.problem, 0, seed_override)
        r = base.r
        want = r - 1 if mode == "product" else 0
        if mode == "product" and m_cfg not in (None, r - 1):
            raise ConfigError(f"product mode forces m = r-1 = {r - 1}")
        spec = ProblemSpec(base.x0, base.terms, m=want)
    else:
        spec = _resolve_terms(cfg.problem, m_probe, seed_override)

    if mode in ("product", "product-reference"):
        for k, t in enumerate(spec.terms, start=1):
            if not isinstance(t, Indicator):
                raise ConfigError(
                    f"{mode} mode needs indicator terms, term {k} is not")

    if mode == "classic":
        plan = classic_dykstra_schedule(spec.r)
    elif mode == "product":
        if spec.r < 2:
            raise ConfigError("product mode needs r >= 2")
        plan = product_space_schedule(spec.r)
    elif mode == "custom":
        if cfg.splitting.schedule.cycles is None:
            raise ConfigError("custom mode needs schedule.cycles")
        plan = plan_from_cycles(cfg.splitting.schedule.cycles)
    else:
        plan = None

    sc = cfg.solve
    try:
        params = SolveParams(
            max_iterations=int(sc.max_iterations),
            stop_gap=None if sc.stop_gap is None else float(sc.stop_gap),
            nested_bcm_sweeps=int(sc.nested_bcm_sweeps),
            nested_tol=float(sc.nested_tol),
            workers=int(workers_override if workers_override is not None
                        else sc.workers),
            check_level=sc.check_level,
            per_sweep_trace=cfg.output.per_sweep)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if sc.z_init == "zeros" or sc.z_init is None:
        z_init = None
    else:
        z_init = np.asarray(sc.z_init, dtype=float)
        if z_init.shape != (spec.n_duals, spec.d):
            raise ConfigError(
                f"z_init has shape {z_init.shape},"
                f" expected {(spec.n_duals, spec.d)}")

    return Built(spec=spec, plan=plan, params=params, mode=mode,
                 output=cfg.output, z_init=z_init)
