"""Subgradients of the extended risk measures and their regular/singular split."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .extend import N_GRID, eta, tail_continuity_test
from .measure_core import INF, GeneralizedMeasure, RandomVariable, TailUndefined, Truncation, integrate, truncate
from .reference import consistent_family
from .regimes import Regime
from .solver import dual_candidates, dual_risk, indexed_candidates

TOL_SG = 1e-8
PROBE_TOL = 1e-7


class NoMaximizer(RuntimeError):
    """The dual supremum is not attained within the cutoff and no limit is available."""

    def __init__(self, message: str, best_index=None):
        super().__init__(message)
        self.best_index = best_index


@dataclass(frozen=True)
class Maximizer:
    """A scenario (or limit functional) attaining the dual value.

    ``pairing`` is the linear action on positions; for ordinary scenarios it
    is integration.  ``singular`` is the part of the pairing not carried by
    atom weights.
    """

    label: str
    kind: str
    penalty: float
    gap: float
    pairing: Callable[[RandomVariable], float]
    regular: GeneralizedMeasure
    measure: Optional[GeneralizedMeasure] = None

    def singular(self, Y: RandomVariable) -> float:
        return self.pairing(Y) - integrate(self.regular, Y)

    def functional(self, n_star: Optional[float] = None) -> Callable[[RandomVariable], float]:
        """Action on positions when the negative part is cut at ``n_star``.

        The atom part stays linear; the singular part sees ``Y+`` and
        ``min(Y-, n_star)``.  Without a cut this is just ``pairing``.
        """
        if n_star is None:
            return self.pairing

        def act(Y):
            return (integrate(self.regular, Y) + self.singular(Y.positive_part())
                    - self.singular(Y.negative_part().clip(upper=n_star)))
        return act


@dataclass
class SubgradientReport:
    f: str
    value: float
    maximizers: list
    probes: int = 0
    probe_violations: int = 0
    worst_violation: float = 0.0
    point_of_evaluation: Optional[float] = None
    note: str = ""
    escape: Optional["EscapeReport"] = None
    metadata: dict = field(default_factory=dict)


def _evaluator(f: str, r: Regime, fam, n_grid):
    if f == "rho_tilde":
        return lambda Y: dual_risk(r, Y, fam).value
    if f == "eta":
        return lambda Y: eta(r, Y, n_grid, consistent=fam, cross_check=False).value
    raise ValueError(f"unknown function {f!r}")


def _limit_functional(spec, U, p0, space):
    """Pairing, penalty and atom weights of the limit of a countable family."""
    oracle = spec.asymptotic_oracle
    zero = RandomVariable.constant(space, 0.0)
    o0 = oracle(zero)
    c = p0 / (oracle(U) - o0)

    def pairing(Y):
        v = oracle(Y)
        if v is None:
            raise TailUndefined("limit functional undefined at this position")
        return c * (v - o0)

    weights = np.zeros(space.size)
    for i, a in enumerate(space.atoms):
        weights[i] = max(pairing(RandomVariable.indicator(space, [a])), 0.0)
    return pairing, -c * o0, GeneralizedMeasure(space, weights, tag="limit:regular")


def _maximizers(r, Y, fam, value, tol_sg):
    cands, meta = dual_candidates(r, Y, fam)
    out = []
    limit_spec = next((s for s in fam.indexed if s.asymptotic_oracle is not None), None)
    for c in cands:
        gap = value - c.value
        if not gap <= tol_sg:
            continue
        if c.label == "singular-limit":
            U, p0 = fam.unit
            pairing, pen, reg = _limit_functional(limit_spec, U, p0, r.space)
            out.append(Maximizer("singular-limit", "singular-limit", pen, gap, pairing, reg))
        elif c.measure is not None:
            mu = c.measure
            kind = "regular" if mu.is_regular else "tail-mass"
            out.append(Maximizer(c.label, kind, c.penalty, gap, (lambda Z, m=mu: integrate(m, Z)),
                                 mu.regular_part(), mu))
    if not out:
        raise NoMaximizer("no scenario attains the dual value", meta.get("argmax_k"))
    if meta.get("cutoff_limited") and meta.get("argmax_k") == meta.get("k_max"):
        raise NoMaximizer("supremum still increasing at the cutoff", meta.get("argmax_k"))
    return out


def probe_set(X: RandomVariable, count: int = 100, seed: int = 0) -> list:
    """Deterministic probe positions around X.

    Coordinate bumps, scaled copies, truncations, tail indicators, and
    random bounded perturbations to fill up to ``count``.
    """
    rng = np.random.default_rng(seed)
    space = X.space
    probes = []
    atoms = list(space.atoms)
    picks = atoms if len(atoms) <= 15 else [atoms[i] for i in rng.choice(len(atoms), 15, replace=False)]
    for a in picks:
        ind = RandomVariable.indicator(space, [a])
        for h in (0.5, -2.0):
            probes.append(X + ind * h)
    for s in (0.0, 0.25, 0.5, 0.9, 1.1, 1.5, 2.0):
        probes.append(X * s)
    for m, n in ((1, 1), (2, 8), (8, 2), (16, 16), (64, 1)):
        probes.append(truncate(X, Truncation(n, m)))
    for t in (1.0, 4.0, 16.0):
        piece = X.tail_piece(t).clip(upper=INF)
        for c in (0.5, 1.0):
            probes.append(X + piece.map(lambda v, c=c: np.where(np.asarray(v) != 0, c, 0.0)))
    while len(probes) < count:
        z = rng.normal(size=space.size) * rng.choice([0.1, 1.0, 5.0])
        tail = None
        if space.embedded:
            tail = X.tail.map(lambda s: 0.0) if X.tail is not None else None
        probes.append(X + RandomVariable(space, z, tail))
    return probes


def _violations(f_value, f_probes, pairing, base_point, probes):
    """Count probes breaking ``f(Y) >= f(X) + l(Y) - l(X)``."""
    lx = pairing(base_point)
    bad, worst, used = 0, 0.0, 0
    for Y, fy in zip(probes, f_probes):
        if fy == INF:
            used += 1
            continue
        try:
            ly = pairing(Y)
        except TailUndefined:
            continue
        if not math.isfinite(ly):
            continue
        used += 1
        slack = fy - f_value - (ly - lx)
        if slack < -PROBE_TOL:
            bad += 1
            worst = min(worst, slack)
    return bad, worst, used


def subgradient(r: Regime, X: RandomVariable, f: str = "rho_tilde", consistent=None,
                n_grid: Sequence[float] = N_GRID, tol_sg: float = TOL_SG, n_probes: int = 100,
                seed: int = 0) -> SubgradientReport:
    """Scenarios attaining ``f(X)`` together with a probe validation of the inequality.

    For ``eta`` the maximizers are read at ``(-n*) v X`` where ``n*`` is the
    smallest truncation level attaining the infimum, and their singular parts
    see negative parts only up to ``n*``.
    """
    fam = consistent if consistent is not None else consistent_family(r)
    f_eval = _evaluator(f, r, fam, n_grid)
    note = ""
    if not any(dual_risk(r, X.positive_part() * (1.0 + 2.0 ** -i), fam).value < INF for i in range(1, 21)):
        note = "existence not guaranteed: no finite (1 + eps) X+ found"
    if f == "eta":
        rep = eta(r, X, n_grid, consistent=fam, cross_check=False)
        value, n_star = rep.value, rep.metadata["argmin_n"]
        point = X.clip(lower=-n_star)
    else:
        value, n_star, point = dual_risk(r, X, fam).value, None, X
    maxs = _maximizers(r, point, fam, value, tol_sg)
    probes = probe_set(X, n_probes, seed)
    f_probes = [f_eval(Y) for Y in probes]
    total_bad, worst, used = 0, 0.0, 0
    for m in maxs:
        bad, w, used = _violations(value, f_probes, m.functional(n_star), X, probes)
        total_bad += bad
        worst = min(worst, w)
    meta = {"n_star": n_star, "probes_used": used, "probe_points": probes, "probe_values": f_probes}
    escape = None
    if fam.indexed:
        top = fam.indexed[0].k_max
        schedule = [k for k in (2 ** i for i in range(6, 31)) if k < top] + [top]
        escape = escape_diagnostic(r, X, schedule, f, fam, n_grid, n_star)
    return SubgradientReport(f, value, maxs, len(probes), total_bad, worst, n_star, note, escape, meta)


@dataclass
class ProjectionReport:
    verdicts: list
    tail_condition: bool
    regular_violations: int
    regular_gap: float
    negative_part_action: float
    metadata: dict = field(default_factory=dict)


def regular_projection_check(r: Regime, X: RandomVariable, report: SubgradientReport, consistent=None,
                             n_grid: Sequence[float] = N_GRID, s_grid=tuple(2.0 ** -i for i in range(0, 7)),
                             n_probes: int = 100, seed: int = 0) -> ProjectionReport:
    """Split each maximizer into its atom part and the rest, and test the atom part alone.

    Probes and their values are reused from ``report`` when it carries them.

    The tail condition is tail continuity of ``f`` at X along ``s X+`` for
    some s; when it holds the atom part must be a subgradient on its own.
    The action of the singular part on the negative part of X is recorded;
    for ``eta`` the negative part enters through its truncation at ``n*``.
    """
    fam = consistent if consistent is not None else consistent_family(r)
    n_star = report.point_of_evaluation
    tail_ok = False
    for s in s_grid:
        tc = tail_continuity_test(report.f, r, X, X.positive_part() * s, consistent=fam, n_grid=n_grid)
        if tc.converged:
            tail_ok = True
            break
    probes = report.metadata.get("probe_points")
    f_probes = report.metadata.get("probe_values")
    if probes is None:
        f_eval = _evaluator(report.f, r, fam, n_grid)
        probes = probe_set(X, n_probes, seed)
        f_probes = [f_eval(Y) for Y in probes]
    neg = X.negative_part()
    if n_star is not None:
        neg = neg.clip(upper=n_star)
    verdicts, bad_total, gap, lam_neg = [], 0, 0.0, 0.0
    for m in report.maximizers:
        if m.kind == "regular":
            verdicts.append((m.label, "regular"))
            continue
        reg = m.regular
        pairing = lambda Y, reg=reg: integrate(reg, Y)
        bad, _, _ = _violations(report.value, f_probes, pairing, X, probes)
        bad_total += bad
        g = abs(report.value - (pairing(X) - m.penalty))
        gap = max(gap, g)
        try:
            lam_neg = max(lam_neg, abs(m.singular(neg)))
        except TailUndefined:
            lam_neg = math.nan
        ok = bad == 0 and g <= PROBE_TOL
        verdicts.append((m.label, "regular part is a subgradient" if ok else "regular part fails"))
    return ProjectionReport(verdicts, tail_ok, bad_total, gap, lam_neg, {"s_grid": tuple(s_grid)})


@dataclass(frozen=True)
class EscapeReport:
    schedule: tuple
    argmax: tuple
    verdict: str


def escape_diagnostic(r: Regime, X: RandomVariable, k_schedule: Sequence[int], f: str = "rho_tilde",
                      consistent=None, n_grid: Sequence[float] = N_GRID,
                      n_star: Optional[float] = None) -> EscapeReport:
    """Track the maximizing index of a countable family as the cutoff grows.

    Ties go to the smallest index.  ``"escapes"`` means the maximizer sits at
    the cutoff every time; ``"stabilizes"`` means it stops moving below it.
    """
    fam = consistent if consistent is not None else consistent_family(r)
    if not fam.indexed:
        return EscapeReport(tuple(k_schedule), (), "stabilizes")
    Y = X
    if f == "eta":
        if n_star is None:
            n_star = eta(r, X, n_grid, consistent=fam, cross_check=False).metadata["argmin_n"]
        Y = X.clip(lower=-n_star)
    spec = fam.indexed[0]
    U, p0 = fam.unit
    ks = []
    for K in k_schedule:
        vals, _ = indexed_candidates(spec.with_k_max(int(K)), Y, U, p0)
        ks.append(int(np.argmax(vals)) + 1)
    if all(k == K for k, K in zip(ks, k_schedule)):
        verdict = "escapes"
    elif len(ks) >= 2 and ks[-1] == ks[-2] and ks[-1] < k_schedule[-1]:
        verdict = "stabilizes"
    else:
        verdict = "undetermined"
    return EscapeReport(tuple(int(k) for k in k_schedule), tuple(ks), verdict)
