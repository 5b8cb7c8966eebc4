"""Config-driven command line runner.

Every task produces rows ``(task, regime, input, quantity, value, cutoff_meta)``
which are printed as a table (or CSV) and optionally written to a CSV file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import catalog
from .extend import M_GRID, N_GRID, ROUTE_TOL, InconsistentRoutes, regularity_check
from .lp import NumericalBreakdown
from .measure_core import GeneralizedMeasure, RandomVariable, SampleSpace, Tail
from .minkowski import Grids, classify, gauge_norm, rho_abs
from .reference import (SingularMember, consistent_family, continuity_above_diagnostic, sensitivity_check,
                        strong_reference_check, weak_reference)
from .regimes import (AVaR, Entropic, Intersection, LinearDual, PricingFunctional, Regime, SecuritySpace,
                      validate_regime)
from .solver import BracketFailure, EmptyFamily, dual_risk, primal_risk
from .subgrad import NoMaximizer, regular_projection_check, subgradient

SCHEMA = "riskregime.run/1"
TASKS = ("risk", "dual", "norm", "classify", "extend", "subgrad", "reference", "diagnose", "examples")
FORMATS = ("table", "csv")
COLUMNS = ("task", "regime", "input", "quantity", "value", "cutoff_meta")
GRID_KEYS = ("k_grid", "tail_grid", "eps_grid", "m_grid", "n_grid")
K_MAX_RANGE = (1, 10 ** 7)
TOL_RANGE = (1e-15, 1e-1)
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    """The run configuration is malformed or out of range."""


@dataclass
class RunConfig:
    """One run: a regime (builtin or inline), a task, inputs and overrides."""

    task: Optional[str] = None
    builtin: Optional[str] = None
    regime: Optional[dict] = None
    inputs: Optional[dict] = None
    select: Optional[list] = None
    k_max: Optional[int] = None
    tol: Optional[float] = None
    grids: dict = field(default_factory=dict)
    f: str = "rho_tilde"
    tag: Optional[str] = None
    out: Optional[str] = None
    format: str = "table"
    schema: str = SCHEMA

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.schema != SCHEMA:
            raise ConfigError(f"schema must be {SCHEMA!r}, got {self.schema!r}")
        if self.task is None:
            raise ConfigError("missing required field 'task'")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
        if self.f not in ("rho_tilde", "eta"):
            raise ConfigError("f must be 'rho_tilde' or 'eta'")
        if self.task != "examples":
            if (self.builtin is None) == (self.regime is None):
                raise ConfigError("give exactly one of 'builtin' and 'regime'")
            if self.builtin is not None and self.builtin not in {**catalog.BUILTINS, **catalog.EXTRAS}:
                raise ConfigError(f"unknown builtin {self.builtin!r}")
            if self.regime is not None and not isinstance(self.regime, dict):
                raise ConfigError("'regime' must be an object")
            if self.regime is not None and self.task not in ("reference", "diagnose") and not self.inputs:
                raise ConfigError(f"task {self.task!r} on an inline regime needs 'inputs'")
        if self.inputs is not None and not isinstance(self.inputs, dict):
            raise ConfigError("'inputs' must be an object mapping names to variables")
        if self.select is not None and not (isinstance(self.select, list)
                                            and all(isinstance(s, str) for s in self.select)):
            raise ConfigError("'select' must be a list of input names")
        if self.k_max is not None:
            if isinstance(self.k_max, bool) or not isinstance(self.k_max, int) \
                    or not K_MAX_RANGE[0] <= self.k_max <= K_MAX_RANGE[1]:
                raise ConfigError(f"k_max must be an integer in [{K_MAX_RANGE[0]}, {K_MAX_RANGE[1]}]")
        if self.tol is not None:
            if isinstance(self.tol, bool) or not isinstance(self.tol, (int, float)) \
                    or not TOL_RANGE[0] <= self.tol <= TOL_RANGE[1]:
                raise ConfigError(f"tol must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]")
        if not isinstance(self.grids, dict):
            raise ConfigError("'grids' must be an object")
        for key, grid in self.grids.items():
            if key not in GRID_KEYS:
                raise ConfigError(f"unknown grid {key!r}; known: {', '.join(GRID_KEYS)}")
            if not isinstance(grid, list) or not 1 <= len(grid) <= 64 \
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in grid):
                raise ConfigError(f"grid {key!r} must be a list of 1 to 64 positive numbers")
            if key != "eps_grid" and any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"grid {key!r} must be increasing")


# inline regimes

RULES = {
    "identity": lambda q: np.asarray(q, float),
    "abs": lambda q: np.abs(np.asarray(q, float)),
    "square": lambda q: np.asarray(q, float) ** 2,
    "log": lambda q: np.log(np.maximum(np.abs(np.asarray(q, float)), 1.0)),
    "reciprocal": lambda q: 1.0 / np.maximum(np.abs(np.asarray(q, float)), 1.0),
}
RULE_TAILS = {"identity": (math.inf, -math.inf), "abs": (math.inf, math.inf), "square": (math.inf, math.inf),
              "log": (math.inf, math.inf), "reciprocal": (0.0, 0.0)}


def _keys(obj, where: str, required=(), optional=()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")
    return obj


def _numbers(values, where: str, size: Optional[int] = None) -> np.ndarray:
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                               for v in values):
        raise ConfigError(f"{where} must be a list of numbers")
    arr = np.asarray(values, dtype=float)
    if size is not None and arr.size != size:
        raise ConfigError(f"{where} needs {size} entries, got {arr.size}")
    return arr


def _space(obj) -> SampleSpace:
    o = _keys(obj, "space", ("kind", "size"))
    size = o["size"]
    if isinstance(size, bool) or not isinstance(size, int) or not 1 <= size <= 10 ** 5:
        raise ConfigError("space.size must be a positive integer")
    kinds = {"finite": SampleSpace.finite, "naturals": SampleSpace.naturals, "integers": SampleSpace.integers}
    if o["kind"] not in kinds:
        raise ConfigError(f"space.kind must be one of {', '.join(kinds)}")
    return kinds[o["kind"]](size)


def _tail(spec, space: SampleSpace, where: str) -> Optional[Tail]:
    if spec is None:
        return None
    if not space.embedded:
        raise ConfigError(f"{where}: tails need a countable space")
    if spec == "divergent":
        return Tail.divergent(space.two_sided)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Tail(float(spec), float(spec) if space.two_sided else None)
    if isinstance(spec, list) and len(spec) == 2 and space.two_sided:
        up, low = _numbers(spec, where)
        return Tail.limit2(up, low)
    raise ConfigError(f"{where}: tail must be null, a number, [upper, lower] or 'divergent'")


def _variable(obj, space: SampleSpace, where: str) -> RandomVariable:
    o = _keys(obj, where, (), ("values", "tail", "rule"))
    rule = o.get("rule")
    if rule is not None:
        if rule not in RULES:
            raise ConfigError(f"{where}: rule must be one of {', '.join(RULES)}")
        if not space.embedded:
            raise ConfigError(f"{where}: rules need a countable space")
        up, low = RULE_TAILS[rule]
        tail = _tail(o["tail"], space, where) if "tail" in o else Tail(up, low if space.two_sided else None)
        if "values" in o:
            raise ConfigError(f"{where}: give either 'values' or 'rule'")
        return RandomVariable.from_rule(space, RULES[rule], tail)
    if "values" not in o:
        raise ConfigError(f"{where}: 'values' or 'rule' is required")
    vals = _numbers(o["values"], f"{where}.values", space.size)
    return RandomVariable(space, vals, _tail(o.get("tail"), space, where))


def _measure(obj, space: SampleSpace, where: str) -> GeneralizedMeasure:
    if obj == "uniform":
        return GeneralizedMeasure.uniform(space)
    o = _keys(obj, where, ("weights",), ("tail_mass", "tag"))
    w = _numbers(o["weights"], f"{where}.weights", space.size)
    tm = o.get("tail_mass", 0.0)
    if isinstance(tm, bool) or not isinstance(tm, (int, float)):
        raise ConfigError(f"{where}.tail_mass must be a number")
    return GeneralizedMeasure(space, w, float(tm), tag=str(o.get("tag", "")) or None)


def _acceptance(obj, space: SampleSpace, where: str):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError(f"{where} needs a 'type'")
    kind = obj["type"]
    if kind == "linear":
        o = _keys(obj, where, ("type", "members"))
        if not isinstance(o["members"], list) or not o["members"]:
            raise ConfigError(f"{where}.members must be a nonempty list")
        fam = []
        for i, m in enumerate(o["members"]):
            mm = _keys(m, f"{where}.members[{i}]", ("measure",), ("penalty",))
            pen = mm.get("penalty", 0.0)
            if isinstance(pen, bool) or not isinstance(pen, (int, float)):
                raise ConfigError(f"{where}.members[{i}].penalty must be a number")
            fam.append((_measure(mm["measure"], space, f"{where}.members[{i}].measure"), float(pen)))
        return LinearDual(tuple(fam))
    if kind == "entropic":
        o = _keys(obj, where, ("type", "base", "beta"))
        return Entropic(_measure(o["base"], space, f"{where}.base"), float(o["beta"]))
    if kind == "avar":
        o = _keys(obj, where, ("type", "base", "alpha"))
        return AVaR(_measure(o["base"], space, f"{where}.base"), float(o["alpha"]))
    if kind == "intersection":
        o = _keys(obj, where, ("type", "members"))
        if not isinstance(o["members"], list) or not o["members"]:
            raise ConfigError(f"{where}.members must be a nonempty list")
        return Intersection(tuple(_acceptance(m, space, f"{where}.members[{i}]")
                                  for i, m in enumerate(o["members"])))
    raise ConfigError(f"{where}.type must be linear, entropic, avar or intersection")


def build_inline(regime: dict, inputs: Optional[dict]) -> catalog.Example:
    """Regime and inputs from the inline JSON description (see docs/config.md)."""
    o = _keys(regime, "regime", ("space", "acceptance", "securities", "prices"), ("model", "name"))
    space = _space(o["space"])
    acc = _acceptance(o["acceptance"], space, "regime.acceptance")
    if not isinstance(o["securities"], list) or not o["securities"]:
        raise ConfigError("regime.securities must be a nonempty list")
    basis = tuple(_variable(b, space, f"regime.securities[{i}]") for i, b in enumerate(o["securities"]))
    prices = _numbers(o["prices"], "regime.prices", len(basis))
    model = _measure(o["model"], space, "regime.model") if "model" in o else None
    r = Regime(acc, SecuritySpace(basis), PricingFunctional(tuple(prices)), str(o.get("name", "inline")), model)
    ins = {name: _variable(v, space, f"inputs.{name}") for name, v in sorted((inputs or {}).items())}
    return catalog.Example(r, ins)


# formatting

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _grid_meta(name, grid) -> str:
    g = tuple(grid)
    return f"{name}={format_value(g[0])}..{format_value(g[-1])}({len(g)})"


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def to_table(rows) -> str:
    text = [list(COLUMNS)] + [[format_value(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in text) for i in range(len(COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in text]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# tasks

@dataclass
class Plan:
    """A validated config resolved to concrete regimes and inputs."""

    config: RunConfig
    example: Optional[catalog.Example]
    refinements: dict = field(default_factory=dict)

    @property
    def regime(self) -> Regime:
        return self.example.regime

    def inputs(self) -> list:
        ins = self.example.inputs
        if self.config.select is not None:
            missing = [s for s in self.config.select if s not in ins]
            if missing:
                raise ConfigError(f"unknown input(s) {', '.join(missing)}; known: {', '.join(ins)}")
            return [(s, ins[s]) for s in self.config.select]
        return list(ins.items())

    @property
    def grids(self) -> Grids:
        g = {k: tuple(v) for k, v in self.config.grids.items() if k in ("k_grid", "tail_grid", "eps_grid")}
        return Grids(**g)

    @property
    def m_grid(self) -> tuple:
        return tuple(float(v) for v in self.config.grids.get("m_grid", M_GRID))

    @property
    def n_grid(self) -> tuple:
        return tuple(float(v) for v in self.config.grids.get("n_grid", N_GRID))


def plan(cfg: RunConfig) -> Plan:
    if cfg.task == "examples":
        return Plan(cfg, None)
    if cfg.builtin is not None:
        ex = catalog.get_builtin(cfg.builtin).build()
        if cfg.inputs:
            raise ConfigError("builtin runs take their own inputs; use 'select' to pick some")
    else:
        ex = build_inline(cfg.regime, cfg.inputs)
    if cfg.k_max is not None:
        ex = catalog.Example(ex.regime.with_k_max(cfg.k_max), ex.inputs, ex.extras)
    refinements = {}
    if cfg.builtin == "example6.3" and cfg.task == "classify":
        for e in catalog.example_6_3_refinements((8, 9)):
            rr = e.regime if cfg.k_max is None else e.regime.with_k_max(cfg.k_max)
            for name, X in e.inputs.items():
                refinements.setdefault(name, []).append((rr, X))
    return Plan(cfg, ex, refinements)


def _k_meta(r: Regime) -> str:
    fam = consistent_family(r)
    if fam.indexed:
        return f"k_max={fam.indexed[0].k_max}"
    return ""


def _join(*parts) -> str:
    return ";".join(p for p in parts if p)


def task_risk(p: Plan):
    r = p.regime
    for name, X in p.inputs():
        rep = primal_risk(r, X)
        yield ("risk", r.name, name, "rho", rep.value,
               _join(f"method={rep.method}", _k_meta(r)))


def task_dual(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    for name, X in p.inputs():
        rep = dual_risk(r, X, fam)
        yield ("dual", r.name, name, "rho_tilde", rep.value,
               _join(f"argmax={rep.certificate.label}", _k_meta(r),
                     "cutoff-limited" if rep.cutoff_limited else ""))


def task_norm(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    for name, X in p.inputs():
        yield ("norm", r.name, name, "rho_abs", rho_abs(r, X, consistent=fam), _k_meta(r))
        yield ("norm", r.name, name, "gauge_norm", gauge_norm(r, X, 1.0, fam), _join("c=1", _k_meta(r)))


def task_classify(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    tol = p.config.tol if p.config.tol is not None else 1e-6
    for name, X in p.inputs():
        rep = classify(r, X, p.grids, p.refinements.get(name, ()), fam, tol)
        meta = _join(_grid_meta("k_grid", p.grids.k_grid), _grid_meta("tail_grid", p.grids.tail_grid),
                     f"refinements={rep.cutoffs['refinements']}")
        for q, v in rep.as_dict().items():
            yield ("classify", r.name, name, f"in_{q}", v, meta)


def task_extend(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    tol = p.config.tol if p.config.tol is not None else ROUTE_TOL
    meta = _join(_grid_meta("m_grid", p.m_grid), _grid_meta("n_grid", p.n_grid), _k_meta(r))
    for name, X in p.inputs():
        rep = regularity_check(r, X, p.grids, p.m_grid, p.n_grid, fam, tol)
        for q in ("rho_tilde", "xi", "eta", "gap"):
            yield ("extend", r.name, name, q, getattr(rep, q), meta)
        yield ("extend", r.name, name, "verdict", rep.verdict, meta)


def task_subgrad(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    f = p.config.f
    tol = p.config.tol if p.config.tol is not None else 1e-8
    for name, X in p.inputs():
        try:
            rep = subgradient(r, X, f, fam, p.n_grid, tol)
        except NoMaximizer as exc:
            yield ("subgrad", r.name, name, f"{f}:maximizer", "none", _join(str(exc), _k_meta(r)))
            continue
        meta = _join(f"probes={rep.probes}", f"n_star={format_value(rep.point_of_evaluation)}"
                     if rep.point_of_evaluation is not None else "", _k_meta(r))
        yield ("subgrad", r.name, name, f, rep.value, meta)
        for m in rep.maximizers:
            yield ("subgrad", r.name, name, f"maximizer:{m.label}", m.gap, f"kind={m.kind}")
        yield ("subgrad", r.name, name, "probe_violations", rep.probe_violations, meta)
        if rep.escape is not None:
            yield ("subgrad", r.name, name, "escape", rep.escape.verdict,
                   "argmax=" + ",".join(str(k) for k in rep.escape.argmax))
        if rep.note:
            yield ("subgrad", r.name, name, "note", rep.note, "")
        proj = regular_projection_check(r, X, rep, fam, p.n_grid)
        for label, verdict in proj.verdicts:
            yield ("subgrad", r.name, name, f"projection:{label}", verdict, "")
        yield ("subgrad", r.name, name, "tail_condition", proj.tail_condition, "")
        if f == "eta":
            yield ("subgrad", r.name, name, "negative_part_action", proj.negative_part_action, "")


def _diagnostic_rows(task, r, rep, what):
    yield (task, r.name, "", what, rep.verdict, rep.narrative)
    for w, v in rep.witnesses:
        yield (task, r.name, "", f"{what}:witness:{w}", v, "")


def task_reference(p: Plan):
    r = p.regime
    fam = consistent_family(r)
    try:
        wr = weak_reference(fam)
        yield ("reference", r.name, "", "weak_reference:scale", wr.scale, wr.verification)
        yield ("reference", r.name, "", "weak_reference:penalty", wr.penalty, wr.verification)
    except (SingularMember, EmptyFamily) as exc:
        yield ("reference", r.name, "", "weak_reference", "unavailable", str(exc))
    yield from _diagnostic_rows("reference", r, sensitivity_check(r, fam), "sensitivity")
    strong = strong_reference_check(r, fam)
    yield from _diagnostic_rows("reference", r, strong, "strong_reference")
    yield ("reference", r.name, "", "coherent", strong.data["coherent"], "")


def task_diagnose(p: Plan):
    r = p.regime
    v = validate_regime(r)
    yield ("diagnose", r.name, "", f"validation:{v.check}", v.valid, v.detail)
    yield from _diagnostic_rows("diagnose", r, continuity_above_diagnostic(r), "continuity_above")
    zero = RandomVariable.constant(r.space, 0.0)
    yield ("diagnose", r.name, "", "rho_zero", primal_risk(r, zero).value, _k_meta(r))


def task_examples(p: Plan):
    for b in catalog.list_examples(p.config.tag):
        yield ("examples", b.name, ",".join(b.tags), b.summary, b.reproduces, "")


TASK_RUNNERS = {
    "risk": task_risk, "dual": task_dual, "norm": task_norm, "classify": task_classify,
    "extend": task_extend, "subgrad": task_subgrad, "reference": task_reference,
    "diagnose": task_diagnose, "examples": task_examples,
}

VALIDATION_ERRORS = (ValueError, KeyError, IndexError, TypeError)
NUMERICAL_ERRORS = (BracketFailure, NumericalBreakdown, InconsistentRoutes, ArithmeticError)


def execute(cfg: RunConfig) -> list:
    """Rows of a validated config; raises on failure."""
    p = plan(cfg)
    return list(TASK_RUNNERS[cfg.task](p))


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute a run; write the table or CSV to ``stdout`` and CSV to ``cfg.out``."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg.validate()
        rows = execute(cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except VALIDATION_ERRORS as exc:
        print(f"invalid run: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INVALID
    text = to_csv(rows)
    stdout.write(text if cfg.format == "csv" else to_table(rows))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskregime", description="Risk measures for acceptance regimes.")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--builtin", help="builtin regime name (see --task examples)")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--kmax", type=int, help="cutoff for countable scenario families")
    ap.add_argument("--tol", type=float, help="tolerance for the task's comparisons")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--format", choices=FORMATS, help="standard output format")
    ap.add_argument("--tag", help="tag filter for the examples task")
    ap.add_argument("--f", dest="f", choices=("rho_tilde", "eta"), help="function for the subgrad task")
    return ap


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "schema" not in data:
            raise ConfigError("config is missing the 'schema' field")
    overrides = {"builtin": args.builtin, "task": args.task, "k_max": args.kmax, "tol": args.tol,
                 "out": args.out, "format": args.format, "tag": args.tag, "f": args.f}
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    if not args.config and data.get("task") is None and not any(v is not None for v in overrides.values()):
        data["task"] = "examples"
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
