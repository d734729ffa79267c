"""Stalk spaces: finite products of real and Boolean coordinates with the Euclidean metric.

A point is a 1-D float array. Boolean coordinates hold exactly 0.0 or 1.0
and embed in the reals for distance purposes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegenerateDomain, IndexOutOfRange, SignatureMismatch

__all__ = [
    "REAL",
    "BOOL",
    "Space",
    "StalkMap",
    "as_point",
    "distance",
    "product",
    "projection",
    "estimate_lipschitz",
    "spectral_norm",
]

REAL = "real"
BOOL = "bool"

# exhaustive evaluation of finite sets up to this many points
EXHAUSTIVE_LIMIT = 65536


def as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def distance(x, y) -> float:
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return math.sqrt(float(np.dot(d, d)))


def _key(x) -> tuple:
    return tuple(float(c) for c in np.asarray(x, dtype=float).ravel())


@dataclass(frozen=True, eq=False)
class Space:
    """A stalk space.

    Parameters
    ----------
    signature : tuple of str
        One tag per coordinate, ``"real"`` or ``"bool"``.
    points : tuple of arrays, optional
        Explicit finite feasible set. When given, membership is exact.
    predicate : callable, optional
        Membership test for infinite feasible sets.
    sampler : callable, optional
        ``sampler(rng) -> point`` drawing from the feasible set.
    bounds : (lo, hi), optional
        Coordinate-wise box used for initialization and default sampling.
    """

    signature: tuple
    points: tuple | None = None
    predicate: Callable | None = None
    sampler: Callable | None = None
    bounds: tuple | None = None
    name: str = ""

    def __post_init__(self):
        sig = tuple(self.signature)
        for tag in sig:
            if tag not in (REAL, BOOL):
                raise SignatureMismatch(f"unknown coordinate tag {tag!r}")
        object.__setattr__(self, "signature", sig)
        if self.points is not None:
            pts = tuple(as_point(p).reshape(len(sig)) if len(sig) else np.zeros(0) for p in self.points)
            for p in pts:
                self._check_signature(p)
            object.__setattr__(self, "points", pts)
            object.__setattr__(self, "_members", frozenset(_key(p) for p in pts))
        if self.bounds is not None:
            lo, hi = self.bounds
            object.__setattr__(self, "bounds", (as_point(lo), as_point(hi)))

    # -- constructors -----------------------------------------------------
    @classmethod
    def real(cls, dim: int = 1, bounds=None, name: str = "") -> Space:
        return cls((REAL,) * dim, bounds=bounds, name=name)

    @classmethod
    def boolean(cls, dim: int = 1, name: str = "") -> Space:
        pts = [np.array(bits, dtype=float) for bits in itertools.product((0.0, 1.0), repeat=dim)]
        return cls((BOOL,) * dim, points=tuple(pts), name=name)

    @classmethod
    def finite(cls, points: Iterable, signature: Sequence[str] | None = None, name: str = "") -> Space:
        pts = [as_point(p) for p in points]
        if signature is None:
            if not pts:
                raise DegenerateDomain("cannot infer a signature from an empty point list")
            signature = (REAL,) * len(pts[0])
        # drop duplicates, keep first-seen order
        seen, unique = set(), []
        for p in pts:
            k = _key(p)
            if k not in seen:
                seen.add(k)
                unique.append(p)
        return cls(tuple(signature), points=tuple(unique), name=name)

    @classmethod
    def zero(cls) -> Space:
        """The one-point space of dimension 0."""
        return cls((), points=(np.zeros(0),), name="0")

    # -- basic queries ----------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.signature)

    @property
    def is_finite(self) -> bool:
        return self.points is not None

    def __len__(self):
        if self.points is None:
            raise TypeError("space has no finite feasible set")
        return len(self.points)

    def distance(self, x, y) -> float:
        return distance(x, y)

    def _check_signature(self, x):
        if x.shape != (self.dim,):
            raise SignatureMismatch(f"point of shape {x.shape} in space of dimension {self.dim}")
        for tag, c in zip(self.signature, x):
            if tag == BOOL and c not in (0.0, 1.0):
                raise SignatureMismatch(f"boolean coordinate holds {c}")

    def check(self, x) -> np.ndarray:
        x = as_point(x) if self.dim else np.zeros(0)
        self._check_signature(x)
        return x

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.dim,):
            return False
        if self.points is not None:
            return _key(x) in self._members
        for tag, c in zip(self.signature, x):
            if tag == BOOL and c not in (0.0, 1.0):
                return False
        if self.bounds is not None:
            lo, hi = self.bounds
            if np.any(x < lo) or np.any(x > hi):
                return False
        if self.predicate is not None:
            return bool(self.predicate(x))
        return True

    def enumerate(self) -> tuple:
        if self.points is None:
            raise DegenerateDomain("space has no finite feasible set to enumerate")
        return self.points

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.points is not None:
            if not self.points:
                raise DegenerateDomain("empty feasible set")
            return self.points[int(rng.integers(len(self.points)))]
        if self.sampler is not None:
            return as_point(self.sampler(rng))
        out = np.empty(self.dim)
        for i, tag in enumerate(self.signature):
            if tag == BOOL:
                out[i] = float(rng.integers(2))
            elif self.bounds is not None:
                out[i] = rng.uniform(self.bounds[0][i], self.bounds[1][i])
            else:
                out[i] = rng.normal()
        return out

    def domain_points(self, count: int = 1000, seed: int = 0) -> tuple[list, bool]:
        """Points to evaluate sup-norms over, and whether the list is exhaustive."""
        if self.points is not None and len(self.points) <= EXHAUSTIVE_LIMIT:
            return list(self.points), True
        rng = np.random.default_rng(seed)
        return [self.sample(rng) for _ in range(count)], False

    def box(self):
        """Coordinate bounds, derived from the points for finite spaces."""
        if self.bounds is not None:
            return self.bounds
        if self.points:
            arr = np.array(self.points).reshape(len(self.points), self.dim)
            return arr.min(axis=0), arr.max(axis=0)
        return None

    def subspace(self, points=None, predicate=None, sampler=None, name: str = "") -> Space:
        return Space(self.signature, points=points, predicate=predicate, sampler=sampler,
                     bounds=self.bounds if points is None else None, name=name or self.name)

    def __repr__(self):
        size = f", {len(self.points)} points" if self.points is not None else ""
        return f"Space({self.name or 'anon'}, signature={self.signature}{size})"


def product(spaces: Sequence[Space], name: str = "") -> Space:
    """Cartesian product with the Euclidean metric on the concatenated coordinates."""
    spaces = list(spaces)
    if not spaces:
        raise ValueError("product of an empty list of spaces")
    signature = tuple(tag for s in spaces for tag in s.signature)
    if all(s.is_finite for s in spaces):
        n = math.prod(len(s.points) for s in spaces)
        if n <= EXHAUSTIVE_LIMIT:
            pts = [np.concatenate(combo) if combo else np.zeros(0)
                   for combo in itertools.product(*(s.points for s in spaces))]
            return Space(signature, points=tuple(pts), name=name)

    cuts = np.cumsum([0] + [s.dim for s in spaces])

    def contains(x):
        return all(s.contains(x[cuts[i]:cuts[i + 1]]) for i, s in enumerate(spaces))

    def sampler(rng):
        return np.concatenate([s.sample(rng) for s in spaces])

    boxes = [s.box() for s in spaces]
    bounds = None
    if all(b is not None for b in boxes):
        bounds = (np.concatenate([b[0] for b in boxes]), np.concatenate([b[1] for b in boxes]))
    return Space(signature, predicate=contains, sampler=sampler, bounds=bounds, name=name)


@dataclass(frozen=True, eq=False)
class StalkMap:
    """A map between stalk spaces with an optional declared Lipschitz constant.

    ``lipschitz`` is treated as exact whenever it is set.
    """

    domain: Space
    codomain: Space
    fn: Callable
    lipschitz: float | None = None
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        out = self.fn(np.asarray(x, dtype=float))
        return np.atleast_1d(np.asarray(out, dtype=float)) if self.codomain.dim else np.zeros(0)

    def then(self, after: StalkMap, name: str = "") -> StalkMap:
        """The composite ``after ∘ self``."""
        if after.domain.dim != self.codomain.dim:
            raise SignatureMismatch("composition of incompatible maps")
        k = None
        if self.lipschitz is not None and after.lipschitz is not None:
            k = self.lipschitz * after.lipschitz
        first, second = self.fn, after.fn
        return StalkMap(self.domain, after.codomain, lambda x: second(np.atleast_1d(first(x))),
                        lipschitz=k, name=name or f"{after.name}∘{self.name}")

    def restrict(self, domain: Space) -> StalkMap:
        """Same rule on a smaller domain; the declared constant stays valid."""
        return StalkMap(domain, self.codomain, self.fn, self.lipschitz, self.name)

    @classmethod
    def identity(cls, space: Space) -> StalkMap:
        return cls(space, space, lambda x: x, lipschitz=1.0, name="id")

    @classmethod
    def constant(cls, domain: Space, codomain: Space, value) -> StalkMap:
        value = as_point(value) if codomain.dim else np.zeros(0)
        return cls(domain, codomain, lambda x: value, lipschitz=0.0, name="const")

    @classmethod
    def affine(cls, domain: Space, codomain: Space, matrix, offset=None, name: str = "") -> StalkMap:
        """``x -> matrix @ x + offset`` with its exact Lipschitz constant."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        offset = np.zeros(matrix.shape[0]) if offset is None else as_point(offset)
        if matrix.shape != (codomain.dim, domain.dim):
            raise SignatureMismatch(f"matrix shape {matrix.shape} for map R^{domain.dim} -> R^{codomain.dim}")
        return cls(domain, codomain, lambda x: matrix @ x + offset,
                   lipschitz=spectral_norm(matrix), name=name or "affine")


def projection(space: Space, coord_indices: Sequence[int], codomain: Space | None = None) -> StalkMap:
    idx = list(coord_indices)
    for i in idx:
        if not 0 <= i < space.dim:
            raise IndexOutOfRange(f"coordinate {i} outside a space of dimension {space.dim}")
    if codomain is None:
        codomain = Space(tuple(space.signature[i] for i in idx))
    elif codomain.dim != len(idx):
        raise SignatureMismatch("projection codomain has the wrong dimension")
    sel = np.array(idx, dtype=int)
    return StalkMap(space, codomain, lambda x: x[sel], lipschitz=1.0, name=f"pr{idx}")


def spectral_norm(matrix, iterations: int = 200, tol: float = 1e-12) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    The start vector is deterministic (all ones, then coordinate vectors if
    that happens to be orthogonal to the top singular direction).
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.size == 0 or not np.any(m):
        return 0.0
    gram = m.T @ m
    n = gram.shape[0]
    starts = [np.ones(n)] + [np.eye(n)[i] for i in range(n)]
    best = 0.0
    for x in starts:
        x = x / np.linalg.norm(x)
        lam = 0.0
        for _ in range(iterations):
            y = gram @ x
            ny = np.linalg.norm(y)
            if ny == 0.0:
                break
            x = y / ny
            new = float(x @ gram @ x)
            if abs(new - lam) <= tol * max(1.0, abs(new)):
                lam = new
                break
            lam = new
        best = max(best, lam)
        if best > 0.0:
            break
    return math.sqrt(max(best, 0.0))


def estimate_lipschitz(m: StalkMap, sample_pairs: int = 2000, domain_points: Space | Sequence | None = None,
                       seed: int = 0) -> float:
    """Lipschitz constant of ``m``: the declared one, else a pair-sampled lower bound.

    On a finite domain small enough to enumerate all pairs, every pair is
    used and the result is exact.
    """
    if m.lipschitz is not None:
        return float(m.lipschitz)
    src = m.domain if domain_points is None else domain_points
    rng = np.random.default_rng(seed)
    if isinstance(src, Space):
        if src.is_finite:
            pts = list(src.points)
        else:
            pts = [src.sample(rng) for _ in range(2 * sample_pairs)]
    else:
        pts = [as_point(p) for p in src]
    n = len(pts)
    values = [m(p) for p in pts]
    n_all = n * (n - 1) // 2
    if n_all <= max(sample_pairs, 20000):
        pairs = itertools.combinations(range(n), 2)
    else:
        idx = rng.integers(n, size=(sample_pairs, 2))
        pairs = ((int(i), int(j)) for i, j in idx)
    best, found = 0.0, False
    for i, j in pairs:
        d = distance(pts[i], pts[j])
        if d == 0.0:
            continue
        found = True
        best = max(best, distance(values[i], values[j]) / d)
    if not found:
        raise DegenerateDomain("no pair of distinct sample points")
    return best
