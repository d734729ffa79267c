"""Sheaves of pseudometric spaces on finite posets.

Assignments are plain dicts mapping poset elements to points. Restrictions
are supplied on (at least) the Hasse edges; every other strict relation
gets the composite along a Hasse path, and functoriality is checked on
sample points at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DegenerateDomain,
    NotASection,
    NotGlobal,
    SignatureMismatch,
    SupportMismatch,
    UnknownElement,
)
from .poset import OrderMap, Poset, is_order_preserving
from .space import EXHAUSTIVE_LIMIT, Space, StalkMap, distance, estimate_lipschitz

__all__ = [
    "Sheaf",
    "SheafMorphism",
    "consistency_radius",
    "local_consistency_radius",
    "assignment_distance",
    "is_global_section",
    "apply_morphism",
    "morphism_defect",
    "section_bound_check",
    "morphism_bound_check",
    "restriction_lipschitz",
    "component_lipschitz",
    "sections",
    "random_assignment",
]

SECTION_TOL = 1e-9


class Sheaf:
    """A sheaf on a finite poset.

    Parameters
    ----------
    base : Poset
    stalks : mapping element -> Space
    restrictions : mapping (x, y) -> StalkMap
        Must cover every Hasse edge. Entries for composite relations are
        used as given (and checked against the composites).
    check : bool
        Verify domains/codomains and functoriality on sample points.
    """

    def __init__(self, base: Poset, stalks: Mapping, restrictions: Mapping, check: bool = True,
                 check_samples: int = 64, name: str = ""):
        self.base = base
        self.name = name
        missing = [x for x in base.elements if x not in stalks]
        if missing:
            raise UnknownElement(f"no stalk for {missing[:3]}")
        self.stalks = {x: stalks[x] for x in base.elements}
        maps = {}
        for (x, y), m in restrictions.items():
            if (x, y) not in base.relation or x == y:
                raise UnknownElement(f"({x!r}, {y!r}) is not a strict relation of the base")
            maps[(x, y)] = m
        for edge in base.hasse_edges:
            if edge not in maps:
                raise UnknownElement(f"no restriction on Hasse edge {edge}")
        for x, y in base.strict_pairs:
            if (x, y) not in maps:
                path = base.hasse_path(x, y)
                m = maps[(path[0], path[1])]
                for a, b in zip(path[1:], path[2:]):
                    m = m.then(maps[(a, b)])
                maps[(x, y)] = m
        self.restrictions = maps
        self.pairs = base.strict_pairs
        self._incident = {x: [] for x in base.elements}
        for pair in self.pairs:
            self._incident[pair[0]].append(pair)
            self._incident[pair[1]].append(pair)
        if check:
            self._check(check_samples)

    def __repr__(self):
        return f"Sheaf({self.name or 'anon'}, {len(self.base)} elements, {len(self.pairs)} strict relations)"

    def _check(self, samples: int):
        for (x, y), m in self.restrictions.items():
            if m.domain.dim != self.stalks[x].dim or m.codomain.dim != self.stalks[y].dim:
                raise SignatureMismatch(f"restriction {x} <= {y} does not match the stalk dimensions")
        rng = np.random.default_rng(0)
        for x, y in self.pairs:
            for z in self.base.up_set(y):
                if z == y:
                    continue
                direct = self.restrictions[(x, z)]
                first, second = self.restrictions[(x, y)], self.restrictions[(y, z)]
                for p in _sample_points(self.stalks[x], samples, rng):
                    if distance(direct(p), second(first(p))) > SECTION_TOL:
                        raise ValueError(f"restrictions along {x} <= {y} <= {z} do not compose")

    def restriction(self, x, y) -> StalkMap:
        if x == y:
            return StalkMap.identity(self.stalks[x])
        try:
            return self.restrictions[(x, y)]
        except KeyError:
            raise UnknownElement(f"{x!r} is not below {y!r}") from None

    def incident_pairs(self, x) -> list:
        return self._incident[x]

    def n_relations(self) -> int:
        """Count of related pairs, reflexive ones included."""
        return self.base.n_relations()

    def residual(self, a: Mapping, x, y) -> float:
        """Stalk distance between ``a[y]`` and the restriction of ``a[x]``."""
        return distance(a[y], self.restrictions[(x, y)](a[x]))


def _sample_points(space: Space, count: int, rng) -> list:
    if space.is_finite:
        pts = space.points
        if len(pts) <= max(count, 1):
            return list(pts)
        idx = rng.choice(len(pts), size=count, replace=False)
        return [pts[i] for i in sorted(idx)]
    return [space.sample(rng) for _ in range(count)]


def _require_global(s: Sheaf, a: Mapping):
    missing = [x for x in s.base.elements if x not in a]
    if missing:
        raise NotGlobal(f"assignment misses {len(missing)} element(s), e.g. {missing[0]!r}")


def consistency_radius(s: Sheaf, a: Mapping) -> float:
    """Root-sum-square of all restriction residuals of a global assignment.

    The sum runs over every related pair; reflexive pairs contribute zero
    and are skipped.
    """
    _require_global(s, a)
    total = 0.0
    for x, y in s.pairs:
        r = s.residual(a, x, y)
        total += r * r
    return math.sqrt(total)


def local_consistency_radius(s: Sheaf, a: Mapping, sub: Iterable) -> float:
    sub = set(sub)
    for x in sub:
        if x not in s.base:
            raise UnknownElement(x)
        if x not in a:
            raise SupportMismatch(f"assignment has no value at {x!r}")
    total = 0.0
    for x, y in s.pairs:
        if x in sub and y in sub:
            r = s.residual(a, x, y)
            total += r * r
    return math.sqrt(total)


def assignment_distance(s: Sheaf, a: Mapping, b: Mapping, elements: Iterable | None = None) -> float:
    """Euclidean aggregation of stalk-wise distances over the shared support."""
    if elements is None:
        if set(a) != set(b):
            raise SupportMismatch("assignments have different supports")
        elements = [x for x in s.base.elements if x in a]
    total = 0.0
    for x in elements:
        if x not in a or x not in b:
            raise SupportMismatch(f"missing value at {x!r}")
        d = distance(a[x], b[x])
        total += d * d
    return math.sqrt(total)


def is_global_section(s: Sheaf, a: Mapping, tol: float = SECTION_TOL) -> bool:
    _require_global(s, a)
    if math.isinf(tol):
        return True
    return all(s.residual(a, x, y) <= tol for x, y in s.pairs)


def sections(s: Sheaf, tol: float = SECTION_TOL) -> Iterator[dict]:
    """Enumerate all global sections of a sheaf with finite stalks.

    Backtracking over elements from the top of the poset down, pruning as
    soon as an assigned pair disagrees.
    """
    for x in s.base.elements:
        if not s.stalks[x].is_finite:
            raise DegenerateDomain(f"stalk at {x!r} is not finite")
    order = sorted(s.base.elements, key=lambda x: (len(s.base.up_set(x)), s.base.index(x)))
    pos = {x: i for i, x in enumerate(order)}
    # pairs checked once both ends are assigned, keyed by the later one
    checks = {x: [] for x in order}
    for x, y in s.pairs:
        checks[order[max(pos[x], pos[y])]].append((x, y))
    a = {}

    def rec(i):
        if i == len(order):
            yield dict(a)
            return
        x = order[i]
        for p in s.stalks[x].points:
            a[x] = p
            if all(s.residual(a, u, w) <= tol for u, w in checks[x]):
                yield from rec(i + 1)
        a.pop(x, None)

    yield from rec(0)


def random_assignment(s: Sheaf, rng: np.random.Generator, elements: Iterable | None = None) -> dict:
    elements = s.base.elements if elements is None else elements
    return {x: s.stalks[x].sample(rng) for x in elements}


@dataclass(frozen=True, eq=False)
class SheafMorphism:
    """Morphism ``source -> target`` along an order map from the target base to the source base.

    ``components[x]`` maps ``source.stalks[base_map(x)]`` into ``target.stalks[x]``.
    """

    source: Sheaf
    target: Sheaf
    base_map: OrderMap
    components: Mapping = field(default_factory=dict)
    defect_bound: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.base_map.source is not self.target.base and set(self.base_map.source.elements) != set(self.target.base.elements):
            raise SignatureMismatch("base map must start at the target base")
        if not is_order_preserving(self.base_map):
            raise ValueError("base map is not order preserving")
        for x in self.target.base.elements:
            if x not in self.components:
                raise UnknownElement(f"no component at {x!r}")
            m = self.components[x]
            if m.domain.dim != self.source.stalks[self.base_map(x)].dim or m.codomain.dim != self.target.stalks[x].dim:
                raise SignatureMismatch(f"component at {x!r} has the wrong domain or codomain")

    def with_defect(self, eps: float) -> SheafMorphism:
        return SheafMorphism(self.source, self.target, self.base_map, self.components, eps, self.name)


def apply_morphism(m: SheafMorphism, a: Mapping) -> dict:
    out = {}
    for x in m.target.base.elements:
        fx = m.base_map(x)
        if fx not in a:
            raise SupportMismatch(f"assignment has no value at {fx!r}")
        out[x] = m.components[x](a[fx])
    return out


def morphism_defect(m: SheafMorphism, samples: int = 256, seed: int = 0) -> float:
    """Largest commutativity gap over related target pairs and source stalk points.

    Finite source stalks are scanned exhaustively (up to the enumeration
    limit); other stalks are sampled.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x, y in m.target.pairs:
        fx, fy = m.base_map(x), m.base_map(y)
        stalk = m.source.stalks[fx]
        if stalk.is_finite:
            if not stalk.points:
                raise DegenerateDomain(f"empty stalk at {fx!r}")
            pts = stalk.points if len(stalk.points) <= EXHAUSTIVE_LIMIT else _sample_points(stalk, samples, rng)
        else:
            pts = [stalk.sample(rng) for _ in range(samples)]
        down = m.target.restriction(x, y)
        up = m.source.restriction(fx, fy)
        mx, my = m.components[x], m.components[y]
        for z in pts:
            worst = max(worst, distance(down(mx(z)), my(up(z))))
    return worst


def restriction_lipschitz(s: Sheaf, sample_pairs: int = 2000) -> float:
    """Largest Lipschitz constant over the restriction maps (declared or estimated)."""
    k = 0.0
    for (x, y), r in s.restrictions.items():
        try:
            k = max(k, estimate_lipschitz(r, sample_pairs, s.stalks[x]))
        except DegenerateDomain:
            continue
    return k


def component_lipschitz(m: SheafMorphism, sample_pairs: int = 2000) -> float:
    k = 0.0
    for x, c in m.components.items():
        try:
            k = max(k, estimate_lipschitz(c, sample_pairs, m.source.stalks[m.base_map(x)]))
        except DegenerateDomain:
            continue
    return k


def section_bound_check(s: Sheaf, sec: Mapping, a: Mapping, K: float) -> tuple[float, float]:
    """``(c(a), (1 + K) d(sec, a))`` for a global section ``sec``.

    With ``K`` bounding every restriction's Lipschitz constant the first
    entry is expected not to exceed the second. Note the right-hand side
    counts each element once while the left counts it once per relation, so
    an element lying above many others can break the inequality for
    adversarial perturbations.
    """
    if not is_global_section(s, sec, SECTION_TOL):
        raise NotASection("reference assignment is not a global section")
    return consistency_radius(s, a), (1.0 + K) * assignment_distance(s, sec, a)


def morphism_bound_check(m: SheafMorphism, a: Mapping, K: float, eps: float) -> tuple[float, float]:
    """``(c(m(a)), K c(a) + C eps)`` where ``C`` squared counts the target's related pairs."""
    b = apply_morphism(m, a)
    C = math.sqrt(m.target.n_relations())
    return consistency_radius(m.target, b), K * consistency_radius(m.source, a) + C * eps
