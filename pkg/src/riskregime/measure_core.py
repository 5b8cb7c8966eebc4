"""Sample spaces, random variables with tail declarations and generalized measures.

A space is a finite list of atoms. Atoms may carry an integer embedding, in
which case the space stands for the ``|omega| <= N`` window of N or Z and
random variables may declare how they behave beyond the window.  Measures
carry nonnegative atom weights plus an optional mass "at infinity" which acts
on the declared tail limits (a finite stand-in for purely finitely additive
functionals such as Banach-Mazur limits).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

INF = math.inf


class SpaceMismatch(ValueError):
    """Objects living on different sample spaces were combined."""


class TailUndefined(ValueError):
    """A tail value was needed but none (or no finite one) is declared."""


class NegativeCoefficient(ValueError):
    """A conic combination received a negative coefficient."""


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Ordered atoms with an optional injective integer embedding.

    ``embedding`` holds one integer per atom, or ``None`` for atoms that do not
    sit on the integer lattice (for instance grid points discretizing a
    continuous law).  ``truncation_index`` marks the space as the window
    ``|embedding| <= N`` of a countable space.
    """

    atoms: tuple
    embedding: Optional[tuple] = None
    truncation_index: Optional[int] = None
    _index: dict = field(init=False, repr=False, compare=False)
    _lattice: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom labels must be unique")
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(atoms)})
        if self.embedding is not None:
            emb = tuple(None if e is None else int(e) for e in self.embedding)
            if len(emb) != len(atoms):
                raise ValueError("embedding length must match the atom count")
            ints = [e for e in emb if e is not None]
            if len(set(ints)) != len(ints):
                raise ValueError("embedding must be injective")
            object.__setattr__(self, "embedding", emb)
            pos = np.array([i for i, e in enumerate(emb) if e is not None], dtype=int)
            keys = np.array([emb[i] for i in pos], dtype=np.int64)
            order = np.argsort(keys)
            object.__setattr__(self, "_lattice", (keys[order], pos[order]))
        else:
            object.__setattr__(self, "_lattice", (np.empty(0, np.int64), np.empty(0, int)))
        if self.truncation_index is not None:
            if self.embedding is None:
                raise ValueError("a truncation index needs an embedding")
            if self.truncation_index <= 0:
                raise ValueError("truncation index must be positive")
            if any(e is not None and abs(e) > self.truncation_index for e in self.embedding):
                raise ValueError("embedded atoms must lie inside the truncation window")

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, SampleSpace):
            return NotImplemented
        return (self.atoms == other.atoms and self.embedding == other.embedding
                and self.truncation_index == other.truncation_index)

    def __hash__(self):
        return hash((len(self.atoms), self.atoms[:4], self.truncation_index))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def embedded(self) -> bool:
        return self.embedding is not None

    @property
    def two_sided(self) -> bool:
        return self.embedding is not None and any(e is not None and e < 0 for e in self.embedding)

    def index_of(self, label) -> int:
        return self._index[label]

    def lattice_positions(self, points: np.ndarray) -> np.ndarray:
        """Atom index for each integer point, or -1 where the point is not an atom."""
        keys, pos = self._lattice
        points = np.asarray(points, dtype=np.int64)
        if keys.size == 0:
            return np.full(points.shape, -1, dtype=int)
        loc = np.clip(np.searchsorted(keys, points), 0, keys.size - 1)
        hit = keys[loc] == points
        return np.where(hit, pos[loc], -1)

    def index_of_point(self, point: int) -> int:
        idx = int(self.lattice_positions(np.array([point]))[0])
        if idx < 0:
            raise KeyError(f"{point} is not an atom of the window")
        return idx

    def embedded_mask(self) -> np.ndarray:
        if self.embedding is None:
            return np.zeros(self.size, dtype=bool)
        return np.array([e is not None for e in self.embedding])

    @classmethod
    def finite(cls, n: int, prefix: str = "w") -> "SampleSpace":
        return cls(tuple(f"{prefix}{i + 1}" for i in range(n)))

    @classmethod
    def naturals(cls, n: int) -> "SampleSpace":
        """Window {1, ..., n} of the natural numbers."""
        pts = tuple(range(1, n + 1))
        return cls(pts, pts, n)

    @classmethod
    def integers(cls, n: int) -> "SampleSpace":
        """Window {-n, ..., n} of the integers."""
        pts = tuple(range(-n, n + 1))
        return cls(pts, pts, n)


def same_space(a: SampleSpace, b: SampleSpace) -> bool:
    return a is b or a == b


@dataclass(frozen=True)
class Tail:
    """Limits of a random variable beyond the window.

    ``upper`` is the limit as the embedding goes to +infinity, ``lower`` the
    limit towards -infinity (two-sided spaces only).  Either may be infinite,
    which declares divergence in that direction.
    """

    upper: float
    lower: Optional[float] = None

    @classmethod
    def limit(cls, value: float) -> "Tail":
        return cls(float(value))

    @classmethod
    def limit2(cls, upper: float, lower: float) -> "Tail":
        return cls(float(upper), float(lower))

    @classmethod
    def divergent(cls, two_sided: bool = False) -> "Tail":
        """Tail of an increasing unbounded variable such as the identity."""
        return cls(INF, -INF if two_sided else None)

    @property
    def kind(self) -> str:
        sides = [self.upper] if self.lower is None else [self.upper, self.lower]
        if any(math.isinf(s) for s in sides):
            return "Divergent"
        return "Limit" if self.lower is None else "Limit2"

    @property
    def sides(self) -> tuple:
        return (self.upper,) if self.lower is None else (self.upper, self.lower)

    def map(self, f: Callable[[float], float]) -> "Tail":
        lower = None if self.lower is None else float(f(self.lower))
        return Tail(float(f(self.upper)), lower)


def _safe_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product with the measure-theoretic convention 0 * inf = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    return np.where((a == 0) | (b == 0), 0.0, out)


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Loss profile on a sample space.

    ``rule``, when present, evaluates the generating function at arbitrary
    integer points; it must agree with ``values`` on embedded atoms.  Without a
    rule, points beyond the window take the declared tail limit.
    """

    space: SampleSpace
    values: np.ndarray
    tail: Optional[Tail] = None
    rule: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} values, got shape {vals.shape}")
        if np.isnan(vals).any() or np.isinf(vals).any():
            raise ValueError("atom values must be finite reals")
        object.__setattr__(self, "values", vals)
        if self.tail is not None:
            if not self.space.embedded:
                raise ValueError("a tail needs an embedded space")
            two = self.space.two_sided
            if two and self.tail.lower is None:
                object.__setattr__(self, "tail", Tail(self.tail.upper, self.tail.upper))
            elif not two and self.tail.lower is not None:
                raise ValueError("one-sided space takes a one-sided tail")

    # construction helpers
    @classmethod
    def constant(cls, space: SampleSpace, c: float) -> "RandomVariable":
        tail = None
        if space.embedded:
            tail = Tail(c, c if space.two_sided else None)
        return cls(space, np.full(space.size, float(c)), tail, lambda p: np.full(np.shape(p), float(c)))

    @classmethod
    def indicator(cls, space: SampleSpace, labels: Iterable) -> "RandomVariable":
        v = np.zeros(space.size)
        pts = []
        for lab in labels:
            i = space.index_of(lab)
            v[i] = 1.0
            if space.embedding is not None and space.embedding[i] is not None:
                pts.append(space.embedding[i])
        tail = None
        if space.embedded:
            tail = Tail(0.0, 0.0 if space.two_sided else None)
        marked = np.array(sorted(pts), dtype=np.int64)
        return cls(space, v, tail, lambda p: np.isin(np.asarray(p), marked).astype(float))

    @classmethod
    def from_rule(cls, space: SampleSpace, rule: Callable[[np.ndarray], np.ndarray],
                  tail: Optional[Tail] = None, off_lattice: Optional[Sequence[float]] = None
                  ) -> "RandomVariable":
        """Evaluate ``rule`` on the embedded atoms; other atoms take ``off_lattice``."""
        if not space.embedded:
            raise ValueError("rules need an embedded space")
        mask = space.embedded_mask()
        vals = np.zeros(space.size)
        pts = np.array([e for e in space.embedding if e is not None], dtype=np.int64)
        vals[mask] = np.asarray(rule(pts), dtype=float)
        if off_lattice is not None:
            vals[~mask] = np.asarray(off_lattice, dtype=float)
        return cls(space, vals, tail, rule)

    @property
    def is_bounded(self) -> bool:
        return self.tail is None or all(math.isfinite(s) for s in self.tail.sides)

    def sup_abs(self) -> float:
        m = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if self.tail is not None:
            m = max(m, *(abs(s) for s in self.tail.sides))
        return m

    def at(self, points) -> np.ndarray:
        """Values at integer points of the underlying countable space."""
        points = np.asarray(points, dtype=np.int64)
        if self.rule is not None:
            return np.asarray(self.rule(points), dtype=float) * np.ones(points.shape)
        if not self.space.embedded:
            raise TailUndefined("variable has no embedding")
        idx = self.space.lattice_positions(points)
        out = np.empty(points.shape, dtype=float)
        inside = idx >= 0
        out[inside] = self.values[idx[inside]]
        outside = ~inside
        if outside.any():
            if self.tail is None:
                raise TailUndefined("points outside the window need a tail declaration")
            up = points > 0
            lower = self.tail.lower if self.tail.lower is not None else self.tail.upper
            fill = np.where(up, self.tail.upper, lower)
            if not np.isfinite(fill[outside]).all():
                raise TailUndefined("divergent tail without a generating rule")
            out[outside] = fill[outside]
        return out

    # pointwise algebra
    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "RandomVariable":
        """Apply a continuous nondecreasing or nonincreasing pointwise map."""
        tail = None
        if self.tail is not None:
            tail = self.tail.map(lambda s: float(f(np.array(s))))
        rule = None
        if self.rule is not None:
            base = self.rule
            rule = lambda p: f(np.asarray(base(p), dtype=float))
        return RandomVariable(self.space, f(self.values), tail, rule)

    def clip(self, lower: float = -INF, upper: float = INF) -> "RandomVariable":
        return self.map(lambda v: np.clip(v, lower, upper))

    def abs(self) -> "RandomVariable":
        return self.map(np.abs)

    def positive_part(self) -> "RandomVariable":
        return self.map(lambda v: np.maximum(v, 0.0))

    def negative_part(self) -> "RandomVariable":
        return self.map(lambda v: np.maximum(-v, 0.0))

    def tail_piece(self, threshold: float, strict: bool = False) -> "RandomVariable":
        """``X * 1{X >= threshold}`` (or ``X > threshold`` when strict)."""
        def cut(v):
            v = np.asarray(v, dtype=float)
            keep = v > threshold if strict else v >= threshold
            return np.where(keep, v, 0.0)
        return self.map(cut)

    def scale(self, c: float) -> "RandomVariable":
        c = float(c)
        return self.map(lambda v: _safe_mul(c, v))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.scale(1.0 / c)

    def __add__(self, other):
        if isinstance(other, RandomVariable):
            if not same_space(self.space, other.space):
                raise SpaceMismatch("cannot add variables on different spaces")
            tail = None
            if self.tail is not None and other.tail is not None:
                sides = []
                for a, b in zip(self.tail.sides, other.tail.sides):
                    if math.isinf(a) and math.isinf(b) and a != b:
                        raise TailUndefined("tails diverge in opposite directions")
                    sides.append(a + b)
                tail = Tail(sides[0], sides[1] if len(sides) > 1 else None)
            rule = None
            if self.rule is not None and other.rule is not None:
                f, g = self.rule, other.rule
                rule = lambda p: np.asarray(f(p), dtype=float) + np.asarray(g(p), dtype=float)
            elif tail is not None and (self.rule is not None or other.rule is not None):
                f, g = self, other
                rule = lambda p: f.at(p) + g.at(p)
            return RandomVariable(self.space, self.values + other.values, tail, rule)
        c = float(other)
        return self.map(lambda v: np.asarray(v, dtype=float) + c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, RandomVariable):
            return self + (-other)
        return self + (-float(other))

    def __rsub__(self, other):
        return (-self) + other

    def maximum(self, other: "RandomVariable") -> "RandomVariable":
        """Pointwise maximum; tails combine sidewise."""
        if not same_space(self.space, other.space):
            raise SpaceMismatch("cannot combine variables on different spaces")
        tail = None
        if self.tail is not None and other.tail is not None:
            s = [max(a, b) for a, b in zip(self.tail.sides, other.tail.sides)]
            tail = Tail(s[0], s[1] if len(s) > 1 else None)
        rule = None
        if tail is not None:
            f, g = self, other
            rule = lambda p: np.maximum(f.at(p), g.at(p))
        return RandomVariable(self.space, np.maximum(self.values, other.values), tail, rule)

    def with_values(self, values) -> "RandomVariable":
        """Same tail, new window values; the generating rule is dropped."""
        return RandomVariable(self.space, values, self.tail)


@dataclass(frozen=True)
class Truncation:
    """Clamp to ``[-lower, upper]``."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower < 0 or self.upper < 0:
            raise ValueError("truncation levels must be nonnegative")


def truncate(X: RandomVariable, t: Truncation) -> RandomVariable:
    """Pointwise ``(-n) v X ^ m``; declared tails are clamped the same way."""
    return X.clip(-t.lower, t.upper)


@dataclass(frozen=True, eq=False)
class GeneralizedMeasure:
    """Nonnegative atom weights plus mass acting on tail limits.

    ``tail_mass`` is ``(upper, lower)``; one-sided spaces only use the first.
    """

    space: SampleSpace
    weights: np.ndarray
    tail_mass: tuple = (0.0, 0.0)
    tag: str = ""

    def __post_init__(self):
        w = _readonly(self.weights)
        if w.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} weights, got shape {w.shape}")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)
        tm = self.tail_mass
        if np.isscalar(tm):
            tm = (float(tm), 0.0)
        tm = (float(tm[0]), float(tm[1]) if len(tm) > 1 else 0.0)
        if min(tm) < 0 or not all(math.isfinite(s) for s in tm):
            raise ValueError("tail mass must be finite and nonnegative")
        if max(tm) > 0 and not self.space.embedded:
            raise ValueError("tail mass needs an embedded space")
        if tm[1] > 0 and not self.space.two_sided:
            raise ValueError("lower tail mass needs a two-sided space")
        object.__setattr__(self, "tail_mass", tm)

    @property
    def mass(self) -> float:
        return float(self.weights.sum()) + self.tail_mass[0] + self.tail_mass[1]

    @property
    def is_regular(self) -> bool:
        return self.tail_mass == (0.0, 0.0)

    def regular_part(self) -> "GeneralizedMeasure":
        return GeneralizedMeasure(self.space, self.weights, (0.0, 0.0), self.tag + ":regular")

    def singular_part(self) -> "GeneralizedMeasure":
        return GeneralizedMeasure(self.space, np.zeros(self.space.size), self.tail_mass,
                                  self.tag + ":singular")

    def support(self) -> tuple:
        """Charged atoms and charged tail sides, as boolean arrays."""
        return self.weights > 0, np.array(self.tail_mass) > 0

    def normalized(self) -> "GeneralizedMeasure":
        m = self.mass
        if m <= 0:
            raise ValueError("cannot normalize the zero measure")
        return GeneralizedMeasure(self.space, self.weights / m,
                                  (self.tail_mass[0] / m, self.tail_mass[1] / m), self.tag)

    def scaled(self, c: float) -> "GeneralizedMeasure":
        if c < 0:
            raise NegativeCoefficient("scaling factor must be nonnegative")
        return GeneralizedMeasure(self.space, self.weights * c,
                                  (self.tail_mass[0] * c, self.tail_mass[1] * c), self.tag)

    def density_against(self, base: "GeneralizedMeasure") -> np.ndarray:
        """Atomwise ratio of weights; atoms uncharged by ``base`` give inf where charged here."""
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(base.weights > 0, self.weights / np.where(base.weights > 0, base.weights, 1.0),
                         np.where(self.weights > 0, INF, 0.0))
        return d

    @classmethod
    def dirac(cls, space: SampleSpace, label, mass: float = 1.0) -> "GeneralizedMeasure":
        w = np.zeros(space.size)
        w[space.index_of(label)] = mass
        return cls(space, w, tag=f"delta[{label}]")

    @classmethod
    def uniform(cls, space: SampleSpace) -> "GeneralizedMeasure":
        return cls(space, np.full(space.size, 1.0 / space.size), tag="uniform")


def integrate(mu: GeneralizedMeasure, X: RandomVariable) -> float:
    """Pairing of a generalized measure with a random variable.

    Tail mass acts on the declared limits; a divergent tail met by positive
    tail mass on the same side gives an infinite value.
    """
    if not same_space(mu.space, X.space):
        raise SpaceMismatch("measure and variable live on different spaces")
    total = float(np.dot(mu.weights, X.values))
    s_up, s_low = mu.tail_mass
    if s_up == 0 and s_low == 0:
        return total
    if X.tail is None:
        raise TailUndefined("tail mass needs a declared tail on the integrand")
    parts = []
    if s_up > 0:
        parts.append(s_up * X.tail.upper)
    if s_low > 0:
        parts.append(s_low * X.tail.lower)
    if any(p == INF for p in parts) and any(p == -INF for p in parts):
        raise TailUndefined("opposite divergent tails under tail mass")
    return total + sum(parts)


@dataclass(frozen=True)
class Relations:
    a_ll_b: bool
    b_ll_a: bool

    @property
    def equivalent(self) -> bool:
        return self.a_ll_b and self.b_ll_a


def measure_relations(a: GeneralizedMeasure, b: GeneralizedMeasure) -> Relations:
    """Absolute continuity both ways, read off the supports (tail sides count as atoms)."""
    if not same_space(a.space, b.space):
        raise SpaceMismatch("measures live on different spaces")
    sa = np.concatenate([a.weights > 0, np.array(a.tail_mass) > 0])
    sb = np.concatenate([b.weights > 0, np.array(b.tail_mass) > 0])
    return Relations(bool(np.all(~sa | sb)), bool(np.all(~sb | sa)))


def mix(coeffs: Sequence[float], measures: Sequence[GeneralizedMeasure], tag: str = "mix"
        ) -> GeneralizedMeasure:
    """Conic combination of measures on a common space."""
    if len(coeffs) != len(measures) or not measures:
        raise ValueError("need equally many coefficients and measures (at least one)")
    space = measures[0].space
    w = np.zeros(space.size)
    up = low = 0.0
    for c, m in zip(coeffs, measures):
        if c < 0:
            raise NegativeCoefficient(f"coefficient {c} is negative")
        if not same_space(m.space, space):
            raise SpaceMismatch("measures live on different spaces")
        if c == 0:
            continue
        w = w + c * m.weights
        up += c * m.tail_mass[0]
        low += c * m.tail_mass[1]
    return GeneralizedMeasure(space, w, (up, low), tag)
