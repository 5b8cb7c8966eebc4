"""Scenario families, pricing consistency and reference-probability diagnostics."""
from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, LPProblem, lp_solve
from .measure_core import (INF, GeneralizedMeasure, RandomVariable, integrate, measure_relations, mix)
from .regimes import (AVaR, Entropic, IndexedDual, LinearDual, PricingFunctional, Regime,
                      SecuritySpace, UnsupportedCombination, flatten)
from .solver import EmptyFamily, Unsupported, primal_risk, sigma_A

TOL_0 = 1e-10
K_CAP = 2 ** 30
CONSISTENCY_TOL = 1e-10
MAX_SUBSETS = 20000
# exact support-function penalties cost one LP over all generators per vertex
SIGMA_BUDGET = 50000


class SingularMember(ValueError):
    """A scenario with tail mass cannot enter a countably additive reference."""


@dataclass(frozen=True, eq=False)
class ScenarioFamily:
    """Scenarios with penalties: an explicit list plus countable and parametric parts.

    ``unit`` holds ``(U, p(U))`` once the family has been made pricing
    consistent; countable and parametric members are then rescaled on the fly
    so that they price U correctly.  ``rays`` are members that give U zero
    mass: adding them to a consistent scenario keeps it consistent.
    """

    members: tuple = ()
    source: str = "raw"
    indexed: tuple = ()
    parametric: tuple = ()
    unit: Optional[tuple] = None
    acceptance: object = None
    rays: tuple = ()
    coefficients: tuple = ()
    segment: bool = False

    @property
    def has_rays(self) -> bool:
        return bool(self.rays)

    @property
    def is_finite(self) -> bool:
        return not self.indexed and not self.parametric

    def ray_excess(self, X: RandomVariable) -> float:
        """Best excess ``sum t_i (integral of X - alpha_i)`` over unit-mass ray combinations."""
        if not self.rays:
            return -INF
        mus = [m for m, _, _ in self.rays]
        rows = np.array([r for _, _, r in self.rays])
        gain = np.array([integrate(m, X) - a for m, a, _ in self.rays])
        if (gain == INF).any():
            return INF
        A = np.vstack([rows.T, np.ones(len(mus))[None, :]])
        b = np.concatenate([np.zeros(rows.shape[1]), [1.0]])
        res = lp_solve(LPProblem(gain, A_eq=A, b_eq=b, sense="max"))
        return res.optimum if res.status == OPTIMAL else -INF


@dataclass(frozen=True)
class DiagnosticReport:
    verdict: str
    witnesses: list
    narrative: str
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.witnesses:
            self.witnesses.append(("vacuous", 0.0))

    def rows(self) -> list:
        return [(self.verdict, str(w), v) for w, v in self.witnesses]


def raw_family(spec) -> ScenarioFamily:
    """The generators describing an acceptance specification."""
    members, indexed, parametric = [], [], []
    for leaf in flatten(spec):
        if isinstance(leaf, LinearDual):
            members.extend(leaf.family)
        elif isinstance(leaf, IndexedDual):
            indexed.append(leaf)
        elif isinstance(leaf, (Entropic, AVaR)):
            parametric.append(leaf)
    return ScenarioFamily(tuple(members), "raw", tuple(indexed), tuple(parametric), None, spec)


def _vertices(M: np.ndarray, p: np.ndarray, candidates: Sequence[int]):
    """Basic feasible solutions of ``M[c]^T t = p, t >= 0`` over subsets of candidates."""
    d = M.shape[1]
    n = len(candidates)
    scale = max(1.0, float(np.abs(p).max()))
    total = sum(math.comb(n, s) for s in range(1, min(d, n) + 1))
    found = {}
    if total <= MAX_SUBSETS:
        for size in range(1, min(d, n) + 1):
            for sub in itertools.combinations(candidates, size):
                B = M[list(sub)].T
                if np.linalg.matrix_rank(B) < size:
                    continue
                t, *_ = np.linalg.lstsq(B, p, rcond=None)
                if np.abs(B @ t - p).max() > CONSISTENCY_TOL * scale:
                    continue
                if (t <= 1e-14).any():
                    continue
                found[sub] = t
        return found
    # too many supports to enumerate: collect LP vertices under varied objectives
    rng = np.random.default_rng(0)
    Mc = M[list(candidates)]
    for trial in range(64):
        c = rng.normal(size=n) if trial else np.zeros(n)
        res = lp_solve(LPProblem(c, A_eq=Mc.T, b_eq=p))
        if res.status != OPTIMAL:
            break
        t = res.argument
        sub = tuple(candidates[i] for i in np.flatnonzero(t > 1e-14))
        found[sub] = t[t > 1e-14]
    return found


def pricing_consistent(raw: ScenarioFamily, S: SecuritySpace, p: PricingFunctional) -> ScenarioFamily:
    """Members of the cone spanned by ``raw`` whose action on S equals p."""
    prices = np.array(p.prices)
    U = S.unit
    p0 = prices[S.positive_index]
    if (raw.indexed or raw.parametric) and S.dim > 1:
        raise UnsupportedCombination("countable or parametric families need dim S = 1")
    members = list(raw.members)
    out, coeffs, rays = [], [], []
    if members:
        M = np.array([[integrate(mu, B) for B in S.basis] for mu, _ in members])
        u = M[:, S.positive_index]
        cand = [i for i in range(len(members)) if u[i] > 0]
        rays = [(members[i][0], members[i][1], M[i]) for i in range(len(members)) if u[i] <= 0]
        verts = sorted(_vertices(M, prices, cand).items())
        linear = None
        if all(isinstance(l, LinearDual) for l in flatten(raw.acceptance)) \
                and len(verts) * len(members) <= SIGMA_BUDGET:
            linear = LinearDual(tuple(members))
        for sub, t in verts:
            mu = mix(list(t), [members[i][0] for i in sub], tag="+".join(
                members[i][0].tag or f"m{i}" for i in sub))
            bound = float(sum(ti * members[i][1] for ti, i in zip(t, sub)))
            pen = bound
            if linear is not None:
                pen = min(bound, sigma_A(linear, mu))
            full = np.zeros(len(members))
            full[list(sub)] = t
            out.append((mu, pen))
            coeffs.append(tuple(full))
    unit = (U, p0) if S.dim == 1 else None
    if S.dim == 1 and (raw.indexed or raw.parametric):
        unit = (U, p0)
    if not out and not raw.indexed and not raw.parametric:
        raise EmptyFamily("no combination of scenarios extends the pricing functional")
    segment = len(members) <= 2 and len(out) == 2
    return ScenarioFamily(tuple(out), "pricing-consistent", raw.indexed, raw.parametric, unit,
                          raw.acceptance, tuple(rays), tuple(coeffs), segment)


_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def consistent_family(r: Regime) -> ScenarioFamily:
    """Pricing-consistent family of a regime, cached per regime object."""
    fam = _CACHE.get(r)
    if fam is None:
        fam = pricing_consistent(raw_family(r.acceptance), r.securities, r.pricing)
        _CACHE[r] = fam
    return fam


# reference measures

REPRESENTABLE_CAP = 4096


def _representable_members(spec: IndexedDual, cap: int = REPRESENTABLE_CAP):
    """Members ``mu_k`` that live on the window, stopping at the first that does not."""
    out = []
    for k in range(1, min(spec.k_max, cap) + 1):
        try:
            out.append(spec.member(k))
        except (IndexError, KeyError, ValueError):
            break
    return out


def _all_members(family: ScenarioFamily, rescale: bool = True) -> list:
    """Explicit ``(mu, alpha, label)`` triples, including window members of countable parts."""
    out = [(mu, a, mu.tag or f"member[{i}]") for i, (mu, a) in enumerate(family.members)]
    for spec in family.indexed:
        for k, (mu, a) in enumerate(_representable_members(spec), start=1):
            c = 1.0
            if rescale and family.unit is not None:
                U, p0 = family.unit
                u = integrate(mu, U)
                if u <= 0:
                    continue
                c = p0 / u
            out.append((mu.scaled(c), a * c, mu.tag or f"{spec.label}[{k}]"))
    for spec in family.parametric:
        off = 0.0 if spec.shift is None else integrate(spec.base, spec.shift)
        out.append((spec.base, off, f"{type(spec).__name__.lower()}-base"))
    return out


@dataclass(frozen=True)
class WeakReference:
    probability: GeneralizedMeasure
    scale: float
    penalty: float
    verification: str


def weak_reference(family: ScenarioFamily) -> WeakReference:
    """Normalized mixture ``sum_l 2^-l mu_l`` of the family members.

    The weights are floored at ``2^-1000`` so that every member still charges
    its atoms in floating point.
    """
    items = _all_members(family)
    if not items:
        raise EmptyFamily("cannot build a reference from an empty family")
    for mu, _, label in items:
        if not mu.is_regular:
            raise SingularMember(f"member {label} carries tail mass")
    items = [it for it in items if it[0].mass > 0]
    if not items:
        raise EmptyFamily("every member is the zero measure")
    w = np.array([2.0 ** -min(l, 1000) for l in range(1, len(items) + 1)])
    w /= w.sum()
    nu = mix(list(w), [mu for mu, _, _ in items], tag="weak-reference")
    bound = float(sum(wi * a for wi, (_, a, _) in zip(w, items)))
    P = nu.normalized()
    scale = nu.mass
    penalty, how = bound, "convexity bound"
    if isinstance(family.acceptance, LinearDual):
        try:
            penalty = sigma_A(family.acceptance, nu)
            how = "support function"
        except Unsupported:
            pass
    if not math.isfinite(penalty):
        how = "penalty unverified"
    return WeakReference(P, scale, penalty, how)


def _reference(r: Regime, family: ScenarioFamily, reference: Optional[GeneralizedMeasure]):
    if reference is not None:
        return reference
    if r.model is not None:
        return r.model
    return weak_reference(family).probability


def _indexed_charges(spec: IndexedDual, space, atoms: np.ndarray) -> np.ndarray:
    charged = np.zeros(atoms.size, dtype=bool)
    for j, a in enumerate(atoms):
        ind = RandomVariable.indicator(space, [space.atoms[a]])
        charged[j] = spec.integral_vector(ind).max() > 0
    return charged


def sensitivity_check(r: Regime, consistent: ScenarioFamily,
                      reference: Optional[GeneralizedMeasure] = None) -> DiagnosticReport:
    """Every atom the reference charges must be charged by some consistent scenario."""
    P = _reference(r, consistent, reference)
    atoms = np.flatnonzero(P.weights > 0)
    charged = np.zeros(r.space.size, dtype=bool)
    for mu, _ in consistent.members:
        charged |= mu.weights > 0
    for spec in consistent.parametric:
        charged |= spec.base.weights > 0
    for spec in consistent.indexed:
        for mu, _ in _representable_members(spec):
            charged |= mu.weights > 0
    todo = atoms[~charged[atoms]]
    for spec in consistent.indexed:
        if todo.size == 0:
            break
        hit = _indexed_charges(spec, r.space, todo)
        charged[todo[hit]] = True
        todo = todo[~hit]
    missing = [a for a in atoms if not charged[a]]
    if missing:
        wit = [(r.space.atoms[a], float(P.weights[a])) for a in missing]
        return DiagnosticReport("not sensitive", wit,
                                "via dual charging criterion: some reference-charged atoms are "
                                "never charged by a consistent scenario",
                                {"uncharged": [r.space.atoms[a] for a in missing]})
    wit = [(r.space.atoms[a], float(P.weights[a])) for a in atoms[:5]]
    return DiagnosticReport("sensitive", wit,
                            "via dual charging criterion: every reference-charged atom is charged",
                            {"uncharged": []})


def _zero_penalty(consistent: ScenarioFamily, tol_0: float):
    """Zero-penalty members and whether every listed penalty vanishes."""
    items = _all_members(consistent)
    e0 = [(mu, a, lab) for mu, a, lab in items if a <= tol_0]
    coherent = all(a <= tol_0 for _, a, _ in items)
    for spec in consistent.parametric:
        if isinstance(spec, Entropic):
            coherent = False
    for spec in consistent.indexed:
        if spec.penalty_vector().max() > tol_0:
            coherent = False
    return e0, coherent


def strong_reference_check(r: Regime, consistent: ScenarioFamily,
                           reference: Optional[GeneralizedMeasure] = None, tol_0: float = TOL_0,
                           k_cap: int = K_CAP, scan_atoms: Optional[Sequence] = None
                           ) -> DiagnosticReport:
    """Zero-penalty scenarios against the reference: is some (or every) one equivalent to it?"""
    P = _reference(r, consistent, reference)
    e0, coherent = _zero_penalty(consistent, tol_0)
    # zero-penalty scenarios living inside the reference's support form a face of E0;
    # some member of E0 is equivalent to the reference iff their blend is
    inside = [mu for mu, _, _ in e0 if measure_relations(mu, P).a_ll_b]
    P_nonempty = False
    if inside:
        w = np.array([2.0 ** -min(l, 1000) for l in range(1, len(inside) + 1)])
        blend = mix(list(w / w.sum()), inside, tag="E0-mixture")
        P_nonempty = measure_relations(blend, P).equivalent
    equivalent = [lab for mu, _, lab in e0 if measure_relations(mu, P).equivalent]

    # scan k = 1, 2, 4, ... for rho(-k 1_a) < 0 on every reference-charged atom.
    # Atoms too light to move rho past the tolerance are set aside, and a
    # positively homogeneous rho only needs k = 1.
    atoms = np.flatnonzero(P.weights > 0)
    if scan_atoms is not None:
        atoms = np.array([r.space.index_of(a) for a in scan_atoms], dtype=int)
    light = [r.space.atoms[a] for a in atoms if P.weights[a] <= 10 * tol_0]
    atoms = [a for a in atoms if P.weights[a] > 10 * tol_0]
    top = 1 if coherent else k_cap
    scan = {}
    for a in atoms:
        ind = RandomVariable.indicator(r.space, [r.space.atoms[a]])
        k = 1
        hit = None
        while k <= top:
            val = primal_risk(r, ind * (-float(k))).value
            if val < -tol_0:
                hit = (k, val)
                break
            k *= 2
        scan[r.space.atoms[a]] = hit
    scan_ok = all(v is not None for v in scan.values())
    witnesses = [("E0", float(len(e0)))] + [(f"E0:{lab}", 0.0) for _, _, lab in e0[:10]]
    fails = [a for a, v in scan.items() if v is None]
    witnesses += [(f"fail:{a}", 0.0) for a in fails[:10]]
    if len(fails) > 10:
        witnesses.append(("fail:count", float(len(fails))))
    if scan_ok:
        verdict = "E0 = P"
    elif P_nonempty:
        verdict = "P nonempty, E0 != P"
    else:
        verdict = "P empty"
    data = {
        "E0": [lab for _, _, lab in e0],
        "P_nonempty": P_nonempty,
        "equivalent_members": equivalent,
        "coherent": coherent,
        "atom_scan": scan,
        "scan_ok": scan_ok,
        "unscanned_light_atoms": light,
        "scan_cap": top,
    }
    narrative = (f"{len(e0)} zero-penalty scenario(s); "
                 f"{'some' if P_nonempty else 'no'} zero-penalty scenario is equivalent to the reference; "
                 f"atom scan {'succeeded' if scan_ok else 'failed'} up to k = {top}"
                 + (f"; {len(light)} atom(s) below mass {10 * tol_0:g} not scanned" if light else ""))
    return DiagnosticReport(verdict, witnesses, narrative, data)


def continuity_above_diagnostic(r: Regime) -> DiagnosticReport:
    """Decide continuity from above from the generators of the acceptance set."""
    raw = raw_family(r.acceptance)
    singular = [(lab, mu.mass) for mu, _, lab in _all_members(raw, rescale=False) if not mu.is_regular]
    if not singular:
        return DiagnosticReport("continuous from above", [("generators", 0.0)],
                                "every generator is countably additive")
    if r.securities.dim == 1:
        return DiagnosticReport("not continuous from above", singular,
                                "a generator carries tail mass and the security space is one-dimensional")
    fam = pricing_consistent(raw, r.securities, r.pricing)
    surviving = [(mu.tag, mu.mass) for mu, _ in fam.members if not mu.is_regular]
    if surviving:
        return DiagnosticReport("not continuous from above", surviving,
                                "a pricing-consistent scenario carries tail mass")
    return DiagnosticReport("continuous from above", [(mu.tag, mu.mass) for mu, _ in fam.members],
                            "tail-mass generators are eliminated by pricing consistency",
                            {"survivors": [mu.tag for mu, _ in fam.members]})
