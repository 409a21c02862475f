#!/usr/bin/env python3
"""
Finite metric spaces and subset utilities.

Every comparison is made on integer *keys*: the distance itself for matrix,
L1/Linf lattice, product and tree geometries, and the squared distance for L2
lattices. A threshold r is converted to a key once, exactly, so no tolerance
ever enters an invariant check.
"""

import bisect
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from sklearn.metrics import pairwise_distances

from coarsetk.errors import BudgetExceeded, SpaceError

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]

NORMS = ("l1", "linf", "l2")
_SKLEARN_METRIC = {"l1": "cityblock", "linf": "chebyshev", "l2": "sqeuclidean"}

# rows per block when scanning pairwise keys
ROW_CHUNK = 256
EXHAUSTIVE_TRIPLE_LIMIT = 1000
SAMPLED_TRIPLES = 200_000
# squared keys below this bound keep (a - b - c)^2 and 4bc inside int64
SAFE_SQUARED_KEY = 1 << 30
KEY_LIMIT = int(np.iinfo(np.int64).max)


def exact(value: Number) -> Fraction:
    """Exact rational form of a threshold (floats are taken at their binary value)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"threshold must be finite, got {value}")
        return Fraction(float(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"unsupported threshold type: {type(value).__name__}")


def as_number(value: Fraction) -> Number:
    """Collapse integral fractions to int."""
    value = exact(value)
    return int(value) if value.denominator == 1 else value


@dataclass(frozen=True)
class PointSet:
    """Sorted set of point indices of one space."""

    space_id: str
    members: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, index) -> bool:
        position = bisect.bisect_left(self.members, int(index))
        return position < len(self.members) and self.members[position] == int(index)

    @property
    def _lookup(self):
        return frozenset(self.members)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def issubset(self, other: "PointSet") -> bool:
        return self._lookup.issubset(other._lookup)


@dataclass(frozen=True)
class MetricViolation:
    """First failed metric axiom found by ``validate_metric``."""

    axiom: str
    points: Tuple[int, ...]
    values: Tuple[int, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"axiom": self.axiom, "points": list(self.points), "values": list(self.values)}


@dataclass(frozen=True)
class WindowGrid:
    """Axis-aligned windows of a lattice: the maximal diameter-bounded subsets."""

    shape: Tuple[int, ...]
    starts: Tuple[np.ndarray, ...]
    widths: Tuple[int, ...]

    @property
    def count(self) -> int:
        return int(np.prod([len(s) for s in self.starts]))

    def corners(self) -> Iterable[Tuple[int, ...]]:
        return itertools.product(*[s.tolist() for s in self.starts])

    def members(self, corner: Sequence[int]) -> np.ndarray:
        ranges = [np.arange(c, c + w) for c, w in zip(corner, self.widths)]
        grid = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index([g.ravel() for g in grid], self.shape).astype(np.int64)


# ---------------------------------------------------------------------------
# geometries
# ---------------------------------------------------------------------------

class Geometry:
    """Key oracle of a finite metric space."""

    kind = "abstract"
    squared = False
    size = 0

    def submatrix(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diameter_key(self, members: np.ndarray) -> int:
        if len(members) < 2:
            return 0
        best = 0
        for start in range(0, len(members), ROW_CHUNK):
            block = self.submatrix(members[start:start + ROW_CHUNK], members)
            best = max(best, int(block.max()))
        return best

    def pair_keys(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Elementwise keys of the pairs (left[k], right[k])."""
        return np.asarray([self.submatrix([i], [j])[0, 0] for i, j in zip(left, right)], dtype=np.int64)

    def realized_keys(self) -> np.ndarray:
        raise NotImplementedError

    def window_grid(self, key: int) -> Optional[WindowGrid]:
        return None

    def to_json(self) -> Dict[str, Any]:
        raise NotImplementedError


class ExplicitMatrix(Geometry):
    """Symmetric nonnegative integer matrix."""

    kind = "matrix"

    def __init__(self, matrix):
        array = np.asarray(matrix)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise SpaceError(f"distance matrix must be square, got shape {array.shape}")
        if array.dtype.kind == "f":
            if not np.all(np.isfinite(array)) or not np.all(array == np.round(array)):
                raise SpaceError("distance matrix entries must be integers")
        elif array.dtype.kind not in "iub":
            raise SpaceError(f"unsupported matrix dtype {array.dtype}")
        self.matrix = array.astype(np.int64)
        self.matrix.setflags(write=False)
        self.size = self.matrix.shape[0]

    def submatrix(self, rows, cols):
        return self.matrix[np.ix_(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))]

    def pair_keys(self, left, right):
        return self.matrix[np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64)]

    def realized_keys(self):
        return np.unique(self.matrix)

    def to_json(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


class Lattice(Geometry):
    """Integer box in Z^m with an L1, Linf or L2 norm."""

    kind = "lattice"

    def __init__(self, box: Sequence[Sequence[int]], norm: str = "l1"):
        norm = norm.lower()
        if norm not in NORMS:
            raise SpaceError(f"unknown norm {norm!r}; expected one of {NORMS}")
        self.box = tuple((int(lo), int(hi)) for lo, hi in box)
        if not self.box:
            raise SpaceError("lattice box needs at least one axis")
        for lo, hi in self.box:
            if hi < lo:
                raise SpaceError(f"empty lattice axis [{lo}, {hi}]")
        self.norm = norm
        self.squared = norm == "l2"
        self.dim = len(self.box)
        self.shape = tuple(hi - lo + 1 for lo, hi in self.box)
        ranges = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in self.box]
        grid = np.meshgrid(*ranges, indexing="ij")
        self.coords = np.stack([g.ravel() for g in grid], axis=1)
        self.coords.setflags(write=False)
        self.size = self.coords.shape[0]

    def labels(self) -> List[str]:
        if self.dim == 1:
            return [str(int(x)) for x in self.coords[:, 0]]
        return ["(" + ",".join(str(int(v)) for v in row) + ")" for row in self.coords]

    def index_of(self, point: Sequence[int]) -> int:
        offset = [int(p) - lo for p, (lo, _) in zip(point, self.box)]
        if len(offset) != self.dim or any(o < 0 or o >= s for o, s in zip(offset, self.shape)):
            raise SpaceError(f"point {tuple(point)} outside lattice box {self.box}")
        return int(np.ravel_multi_index(offset, self.shape))

    def submatrix(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) == 0 or len(cols) == 0:
            return np.zeros((len(rows), len(cols)), dtype=np.int64)
        values = pairwise_distances(
            self.coords[rows].astype(np.float64),
            self.coords[cols].astype(np.float64),
            metric=_SKLEARN_METRIC[self.norm],
        )
        return np.rint(values).astype(np.int64)

    def pair_keys(self, left, right):
        diff = np.abs(self.coords[np.asarray(left, dtype=np.int64)] - self.coords[np.asarray(right, dtype=np.int64)])
        if self.norm == "l1":
            return diff.sum(axis=1)
        if self.norm == "linf":
            return diff.max(axis=1)
        return (diff * diff).sum(axis=1)

    def diameter_key(self, members):
        if len(members) < 2:
            return 0
        pts = self.coords[np.asarray(members, dtype=np.int64)]
        if self.norm == "linf":
            return int(np.ptp(pts, axis=0).max())
        if self.norm == "l1":
            # max over sign patterns of the spread of the signed coordinate sum
            best = 0
            for signs in itertools.product((1, -1), repeat=self.dim - 1):
                projection = pts @ np.array((1,) + signs, dtype=np.int64)
                best = max(best, int(np.ptp(projection)))
            return best
        if self.dim == 1:
            return int(np.ptp(pts[:, 0])) ** 2
        return super().diameter_key(np.asarray(members, dtype=np.int64))

    def realized_keys(self):
        spans = [hi - lo for lo, hi in self.box]
        if self.norm == "linf":
            return np.arange(0, max(spans) + 1, dtype=np.int64)
        if self.norm == "l1":
            return np.arange(0, sum(spans) + 1, dtype=np.int64)
        values = np.zeros(1, dtype=np.int64)
        for span in spans:
            squares = np.arange(0, span + 1, dtype=np.int64) ** 2
            values = np.unique(np.add.outer(values, squares).ravel())
        return values

    def window_grid(self, key):
        if not (self.norm == "linf" or self.dim == 1):
            return None
        side = math.isqrt(key) if self.squared else int(key)
        starts, widths = [], []
        for length in self.shape:
            if side + 1 >= length:
                starts.append(np.zeros(1, dtype=np.int64))
                widths.append(length)
            else:
                starts.append(np.arange(0, length - side, dtype=np.int64))
                widths.append(side + 1)
        return WindowGrid(self.shape, tuple(starts), tuple(widths))

    def to_json(self):
        return {"kind": self.kind, "box": [list(axis) for axis in self.box], "norm": self.norm}


class Product(Geometry):
    """Max-metric product of two spaces; (x, y) has index x * |Y| + y."""

    kind = "product"

    def __init__(self, left: "FiniteMetricSpace", right: "FiniteMetricSpace"):
        if left.squared or right.squared:
            raise SpaceError("max-metric products need unsquared keys; L2 lattice factors are not supported")
        self.left = left
        self.right = right
        self.size = left.size * right.size

    def split(self, indices) -> Tuple[np.ndarray, np.ndarray]:
        indices = np.asarray(indices, dtype=np.int64)
        return indices // self.right.size, indices % self.right.size

    def submatrix(self, rows, cols):
        rl, rr = self.split(rows)
        cl, cr = self.split(cols)
        return np.maximum(self.left.submatrix(rl, cl), self.right.submatrix(rr, cr))

    def pair_keys(self, left, right):
        ll, lr = self.split(left)
        rl, rr = self.split(right)
        return np.maximum(self.left.geometry.pair_keys(ll, rl), self.right.geometry.pair_keys(lr, rr))

    def diameter_key(self, members):
        if len(members) < 2:
            return 0
        xs, ys = self.split(members)
        return max(self.left.diameter_key(np.unique(xs)), self.right.diameter_key(np.unique(ys)))

    def realized_keys(self):
        return np.union1d(self.left.realized_keys(), self.right.realized_keys())

    def to_json(self):
        return {"kind": self.kind, "factors": [self.left.to_json(), self.right.to_json()]}


class Tree(Geometry):
    """
    Leveled tree over leaves 0..n-1.

    ``ancestors[l][v]`` is the level-l node above leaf v; level 0 is the
    identity and the last level is a single root. Two distinct leaves are at
    distance ``base ** p`` where p is the first level on which they share a node.
    """

    kind = "tree"

    def __init__(self, ancestors, base: int):
        table = np.asarray(ancestors, dtype=np.int64)
        if table.ndim != 2 or table.shape[1] == 0:
            raise SpaceError("tree ancestors must be a non-empty levels x leaves table")
        if not np.array_equal(np.unique(table[0]), np.arange(table.shape[1])):
            raise SpaceError("tree level 0 must list every leaf once")
        if len(np.unique(table[-1])) != 1:
            raise SpaceError("tree top level must be a single root")
        if int(base) < 2:
            raise SpaceError(f"tree base must be an integer >= 2, got {base}")
        top = table.shape[0] - 1
        if int(base) ** top > KEY_LIMIT:
            raise SpaceError(f"tree distance {base}^{top} does not fit an int64 key",
                             details={"base": int(base), "levels": top + 1})
        self.ancestors = table
        self.ancestors.setflags(write=False)
        self.base = int(base)
        self.top = top
        self.size = table.shape[1]

    def meet_levels(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        levels = np.full((len(rows), len(cols)), self.top, dtype=np.int64)
        for level in range(self.top - 1, -1, -1):
            row_nodes = self.ancestors[level][rows]
            col_nodes = self.ancestors[level][cols]
            levels[row_nodes[:, None] == col_nodes[None, :]] = level
        return levels

    def submatrix(self, rows, cols):
        levels = self.meet_levels(rows, cols)
        keys = np.power(np.int64(self.base), levels, dtype=np.int64)
        keys[levels == 0] = 0
        return keys

    def pair_keys(self, left, right):
        left = np.asarray(left, dtype=np.int64)
        right = np.asarray(right, dtype=np.int64)
        levels = np.full(len(left), self.top, dtype=np.int64)
        for level in range(self.top - 1, -1, -1):
            levels[self.ancestors[level][left] == self.ancestors[level][right]] = level
        keys = np.power(np.int64(self.base), levels, dtype=np.int64)
        keys[levels == 0] = 0
        return keys

    def diameter_key(self, members):
        if len(members) < 2:
            return 0
        members = np.asarray(members, dtype=np.int64)
        for level in range(self.top + 1):
            if len(np.unique(self.ancestors[level][members])) == 1:
                return 0 if level == 0 else self.base ** level
        raise SpaceError("tree without a common root")

    def realized_keys(self):
        keys = [0]
        for level in range(1, self.top + 1):
            if len(np.unique(self.ancestors[level])) < len(np.unique(self.ancestors[level - 1])):
                keys.append(self.base ** level)
        return np.asarray(keys, dtype=np.int64)

    def level_for_key(self, key: int) -> int:
        """Largest level whose distance base**level does not exceed ``key``."""
        level = 0
        while level < self.top and self.base ** (level + 1) <= key:
            level += 1
        return level

    def classes(self, level: int) -> List[np.ndarray]:
        nodes = self.ancestors[level]
        order = np.argsort(nodes, kind="stable")
        _, starts = np.unique(nodes[order], return_index=True)
        return [np.sort(group) for group in np.split(order, starts[1:])]

    def to_json(self):
        return {"kind": self.kind, "base": self.base, "ancestors": self.ancestors.tolist()}


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

class FiniteMetricSpace:
    """
    Indexed finite point set with a deterministic metric.

    Spaces are immutable after construction and safe to share between threads.
    ``scale_cap`` (R_max) truncates every "for every r" quantifier; it defaults
    to the diameter.
    """

    def __init__(self, space_id: str, geometry: Geometry,
                 labels: Optional[Sequence[str]] = None, scale_cap: Optional[Number] = None):
        if not space_id:
            raise SpaceError("space id must be a non-empty string")
        if geometry.size == 0:
            raise SpaceError("a space needs at least one point")
        self.id = str(space_id)
        self.geometry = geometry
        if labels is None:
            labels = geometry.labels() if isinstance(geometry, Lattice) else [str(i) for i in range(geometry.size)]
        self.labels = [str(label) for label in labels]
        if len(self.labels) != geometry.size:
            raise SpaceError(f"{len(self.labels)} labels for {geometry.size} points")
        self._label_index = {label: i for i, label in enumerate(self.labels)}
        self._realized = None
        self.scale_cap = as_number(exact(scale_cap)) if scale_cap is not None else self.diameter_all()
        logger.debug(f"Space {self.id}: {self.size} points, geometry={geometry.kind}, R_max={self.scale_cap}")

    # construction -----------------------------------------------------------

    @classmethod
    def lattice(cls, space_id: str, box: Sequence[Sequence[int]], norm: str = "l1",
                scale_cap: Optional[Number] = None) -> "FiniteMetricSpace":
        """Integer box ``[lo_1, hi_1] x ... x [lo_m, hi_m]`` with the given norm."""
        return cls(space_id, Lattice(box, norm), scale_cap=scale_cap)

    @classmethod
    def from_matrix(cls, space_id: str, matrix, labels: Optional[Sequence[str]] = None,
                    scale_cap: Optional[Number] = None, validate: bool = True) -> "FiniteMetricSpace":
        """
        Space from an explicit distance matrix.

        Raises:
            SpaceError: if validation finds a metric-axiom violation (the
                counterexample is in ``details``)
        """
        space = cls(space_id, ExplicitMatrix(matrix), labels=labels, scale_cap=scale_cap)
        if validate:
            violation = validate_metric(space)
            if violation is not None:
                raise SpaceError(
                    f"space {space_id} violates the {violation.axiom} axiom at points {violation.points}",
                    details=violation.to_dict(),
                )
        return space

    @classmethod
    def from_points(cls, space_id: str, points, norm: str = "l1",
                    scale_cap: Optional[Number] = None) -> "FiniteMetricSpace":
        """Explicit space spanned by arbitrary integer points (distances from the norm)."""
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        norm = norm.lower()
        if norm not in ("l1", "linf"):
            raise SpaceError("point clouds support the l1 and linf norms")
        matrix = np.rint(pairwise_distances(pts.astype(np.float64), metric=_SKLEARN_METRIC[norm]))
        labels = [str(int(p[0])) if pts.shape[1] == 1 else "(" + ",".join(str(int(v)) for v in p) + ")"
                  for p in pts]
        if len(set(labels)) != len(labels):
            raise SpaceError("point cloud contains duplicate points")
        return cls(space_id, ExplicitMatrix(matrix.astype(np.int64)), labels=labels, scale_cap=scale_cap)

    @classmethod
    def product(cls, left: "FiniteMetricSpace", right: "FiniteMetricSpace",
                space_id: Optional[str] = None, scale_cap: Optional[Number] = None) -> "FiniteMetricSpace":
        """Max-metric product X x Y."""
        labels = [f"({a},{b})" for a in left.labels for b in right.labels]
        return cls(space_id or f"{left.id}x{right.id}", Product(left, right), labels=labels, scale_cap=scale_cap)

    @classmethod
    def tree(cls, space_id: str, ancestors, base: int, labels: Optional[Sequence[str]] = None,
             scale_cap: Optional[Number] = None) -> "FiniteMetricSpace":
        return cls(space_id, Tree(ancestors, base), labels=labels, scale_cap=scale_cap)

    # basic accessors ----------------------------------------------------------

    @property
    def size(self) -> int:
        return self.geometry.size

    @property
    def squared(self) -> bool:
        return self.geometry.squared

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(id={self.id!r}, size={self.size}, kind={self.geometry.kind})"

    def check_index(self, index) -> int:
        index = int(index)
        if index < 0 or index >= self.size:
            raise SpaceError(f"point index {index} outside space {self.id} of size {self.size}")
        return index

    def index_of(self, label: str) -> int:
        try:
            return self._label_index[str(label)]
        except KeyError:
            raise SpaceError(f"no point labelled {label!r} in space {self.id}")

    def point_set(self, members: Iterable[int]) -> PointSet:
        values = np.unique(np.asarray(members if isinstance(members, np.ndarray) else list(members), dtype=np.int64))
        if len(values) and (values[0] < 0 or values[-1] >= self.size):
            bad = int(values[0]) if values[0] < 0 else int(values[-1])
            raise SpaceError(f"point index {bad} outside space {self.id} of size {self.size}")
        return PointSet(self.id, tuple(int(v) for v in values))

    def all_points(self) -> PointSet:
        return PointSet(self.id, tuple(range(self.size)))

    def _members(self, A: PointSet) -> np.ndarray:
        if A.space_id != self.id:
            raise SpaceError(f"point set belongs to unknown space id {A.space_id!r} (expected {self.id!r})")
        return A.array

    # keys and thresholds -------------------------------------------------------

    def closed_key(self, r: Number) -> int:
        """Largest key k with ``d <= r`` equivalent to ``key <= k``."""
        value = exact(r)
        if self.squared:
            value = value * value if value >= 0 else value
        return math.floor(value)

    def open_key(self, r: Number) -> int:
        """Largest key k with ``d < r`` equivalent to ``key <= k``."""
        value = exact(r)
        if self.squared:
            value = value * value if value >= 0 else value
        return math.ceil(value) - 1

    def key_to_distance(self, key) -> Number:
        key = int(key)
        if not self.squared:
            return key
        root = math.isqrt(key)
        return root if root * root == key else math.sqrt(key)

    def submatrix(self, rows, cols) -> np.ndarray:
        return self.geometry.submatrix(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))

    def row(self, index: int) -> np.ndarray:
        index = self.check_index(index)
        return self.submatrix([index], np.arange(self.size))[0]

    def distance(self, i: int, j: int) -> Number:
        i, j = self.check_index(i), self.check_index(j)
        return self.key_to_distance(self.submatrix([i], [j])[0, 0])

    # subset geometry -----------------------------------------------------------

    def diameter_key(self, members) -> int:
        members = np.asarray(members, dtype=np.int64)
        return int(self.geometry.diameter_key(members)) if len(members) > 1 else 0

    def diameter(self, A: PointSet) -> Number:
        """Max pairwise distance of A; 0 for singletons and for the empty set."""
        return self.key_to_distance(self.diameter_key(self._members(A)))

    def diameter_all(self) -> Number:
        return self.key_to_distance(self.diameter_key(np.arange(self.size)))

    def ball(self, x: int, r: Number, closed: bool = True) -> PointSet:
        """B(x, r) with ``d < r`` (open) or B̄(x, r) with ``d <= r`` (closed)."""
        if exact(r) < 0:
            raise ValueError(f"ball radius must be nonnegative, got {r}")
        key = self.closed_key(r) if closed else self.open_key(r)
        inside = np.nonzero(self.row(x) <= key)[0]
        return PointSet(self.id, tuple(int(i) for i in inside))

    def neighborhood(self, A: PointSet, t: Number, closed: bool = False) -> PointSet:
        """
        Points within t of A: ``d < t`` by default, ``d <= t`` when closed.

        ``neighborhood(A, 0)`` is A itself.
        """
        members = self._members(A)
        if exact(t) < 0:
            raise ValueError(f"neighborhood radius must be nonnegative, got {t}")
        key = self.closed_key(t) if closed else self.open_key(t)
        if len(members) == 0 or key < 0:
            return A
        return PointSet(self.id, tuple(int(i) for i in self.neighborhood_indices(members, key)))

    def neighborhood_indices(self, members: np.ndarray, key: int) -> np.ndarray:
        reached = np.zeros(self.size, dtype=bool)
        reached[members] = True
        everything = np.arange(self.size)
        for start in range(0, len(members), ROW_CHUNK):
            block = self.submatrix(members[start:start + ROW_CHUNK], everything)
            reached |= (block <= key).any(axis=0)
        return np.nonzero(reached)[0]

    # scale grids -----------------------------------------------------------------

    def realized_keys(self) -> np.ndarray:
        if self._realized is None:
            self._realized = np.asarray(self.geometry.realized_keys(), dtype=np.int64)
        return self._realized

    def realized_distances(self) -> List[Number]:
        """Sorted distinct pairwise distances (0 included)."""
        return [self.key_to_distance(k) for k in self.realized_keys()]

    def threshold_graph(self, key: int, members: Optional[np.ndarray] = None) -> nx.Graph:
        """Graph on ``members`` with an edge iff the pair's key is at most ``key``."""
        nodes = np.arange(self.size) if members is None else np.asarray(members, dtype=np.int64)
        graph = nx.Graph()
        graph.add_nodes_from(int(v) for v in nodes)
        for start in range(0, len(nodes), ROW_CHUNK):
            block = self.submatrix(nodes[start:start + ROW_CHUNK], nodes)
            rows, cols = np.nonzero(block <= key)
            rows = rows + start
            keep = rows < cols
            graph.add_edges_from(zip(nodes[rows[keep]].tolist(), nodes[cols[keep]].tolist()))
        return graph

    def bounded_subsets(self, r: Number, budget: Optional[int] = None) -> List[np.ndarray]:
        """Inclusion-maximal subsets of diameter at most r."""
        return self.bounded_subsets_key(self.closed_key(r), budget)

    def bounded_subsets_key(self, key: int, budget: Optional[int] = None) -> List[np.ndarray]:
        """
        Inclusion-maximal subsets whose pairwise keys are at most ``key``.

        Lattice windows, product sets and tree classes are produced directly;
        any other geometry goes through Bron-Kerbosch on the threshold graph.

        Raises:
            BudgetExceeded: more than ``budget`` subsets would be produced; the
                subsets found so far are attached as ``partial``
        """
        budget = budget if budget is not None else 10 ** 6
        if key < 0:
            return [np.asarray([i], dtype=np.int64) for i in range(self.size)]
        geometry = self.geometry

        grid = geometry.window_grid(key)
        if grid is not None:
            if grid.count > budget:
                raise BudgetExceeded(f"{grid.count} windows exceed the clique budget {budget}",
                                     partial=[grid.members(c) for c in itertools.islice(grid.corners(), budget)])
            return [grid.members(corner) for corner in grid.corners()]

        if isinstance(geometry, Tree):
            return geometry.classes(geometry.level_for_key(key))

        if isinstance(geometry, Product):
            left = geometry.left.bounded_subsets_key(key, budget)
            right = geometry.right.bounded_subsets_key(key, budget)
            count = len(left) * len(right)
            width = geometry.right.size
            combined = (np.sort((a[:, None] * width + b[None, :]).ravel()) for a in left for b in right)
            if count > budget:
                raise BudgetExceeded(f"{count} product sets exceed the clique budget {budget}",
                                     partial=list(itertools.islice(combined, budget)))
            return list(combined)

        return maximal_cliques(self.threshold_graph(key), budget)

    def to_json(self) -> Dict[str, Any]:
        data = {"id": self.id, "geometry": self.geometry.to_json(), "scale_cap": _json_number(self.scale_cap)}
        if not isinstance(self.geometry, Lattice):
            data["labels"] = list(self.labels)
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any], validate: bool = True) -> "FiniteMetricSpace":
        geometry = data.get("geometry") or {}
        kind = geometry.get("kind")
        scale_cap = data.get("scale_cap")
        if isinstance(scale_cap, str):
            scale_cap = Fraction(scale_cap)
        labels = data.get("labels")
        if kind == "matrix":
            return cls.from_matrix(data["id"], geometry["matrix"], labels=labels,
                                   scale_cap=scale_cap, validate=validate)
        if kind == "lattice":
            return cls.lattice(data["id"], geometry["box"], geometry.get("norm", "l1"), scale_cap=scale_cap)
        if kind == "product":
            left, right = (cls.from_json(factor, validate) for factor in geometry["factors"])
            return cls.product(left, right, space_id=data["id"], scale_cap=scale_cap)
        if kind == "tree":
            return cls.tree(data["id"], geometry["ancestors"], geometry["base"], labels=labels, scale_cap=scale_cap)
        raise SpaceError(f"unknown geometry kind {kind!r}")


def _json_number(value: Number):
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return value


def maximal_cliques(graph: nx.Graph, budget: int) -> List[np.ndarray]:
    """
    Maximal cliques of ``graph`` as sorted index arrays, in a deterministic order.

    Raises:
        BudgetExceeded: when more than ``budget`` cliques are enumerated
    """
    cliques = []
    for clique in nx.find_cliques(graph):
        cliques.append(np.sort(np.asarray(clique, dtype=np.int64)))
        if len(cliques) > budget:
            raise BudgetExceeded(f"clique enumeration exceeded the budget of {budget}",
                                 partial=cliques[:budget])
    cliques.sort(key=lambda c: tuple(c.tolist()))
    return cliques


def _breaks_triangle(d_ij, d_ik, d_kj, squared: bool) -> np.ndarray:
    """
    Mask of d(i, j) > d(i, k) + d(k, j), exact on integer keys.

    Under l2 the keys are squares and sqrt(a) > sqrt(b) + sqrt(c) holds iff
    a > b + c and (a - b - c)^2 > 4bc.
    """
    if not squared:
        return d_ij > d_ik + d_kj
    d_ij, d_ik, d_kj = (np.array(a, dtype=np.int64) for a in np.broadcast_arrays(d_ij, d_ik, d_kj))
    excess = d_ij - d_ik - d_kj
    mask = excess > 0
    largest = max(int(d_ij.max(initial=0)), int(d_ik.max(initial=0)), int(d_kj.max(initial=0)))
    if largest < SAFE_SQUARED_KEY:
        return mask & (excess * excess > 4 * d_ik * d_kj)
    for index in zip(*np.nonzero(mask)):
        if int(excess[index]) ** 2 <= 4 * int(d_ik[index]) * int(d_kj[index]):
            mask[index] = False
    return mask


def validate_metric(space: FiniteMetricSpace, seed: int = 0) -> Optional[MetricViolation]:
    """
    Check the metric axioms; exhaustive up to 10³ points, seeded sample above.

    Returns:
        The first violation found, or None
    """
    n = space.size
    if isinstance(space.geometry, ExplicitMatrix):
        matrix = space.geometry.matrix
    elif n <= EXHAUSTIVE_TRIPLE_LIMIT:
        matrix = space.submatrix(np.arange(n), np.arange(n))
    else:
        matrix = None

    if matrix is not None:
        diagonal = np.nonzero(np.diag(matrix) != 0)[0]
        if len(diagonal):
            i = int(diagonal[0])
            return MetricViolation("zero-diagonal", (i, i), (int(matrix[i, i]),))
        asym = np.argwhere(matrix != matrix.T)
        if len(asym):
            i, j = (int(v) for v in asym[0])
            return MetricViolation("symmetry", (i, j), (int(matrix[i, j]), int(matrix[j, i])))
        off = matrix + np.eye(n, dtype=np.int64)
        nonpos = np.argwhere(off <= 0)
        if len(nonpos):
            i, j = (int(v) for v in nonpos[0])
            return MetricViolation("positivity", (i, j), (int(matrix[i, j]),))

    if n <= EXHAUSTIVE_TRIPLE_LIMIT and matrix is not None:
        for k in range(n):
            bad = np.argwhere(_breaks_triangle(matrix, matrix[:, k][:, None], matrix[k, :][None, :], space.squared))
            if len(bad):
                i, j = (int(v) for v in bad[0])
                return MetricViolation("triangle", (i, j, k),
                                       (int(matrix[i, j]), int(matrix[i, k]), int(matrix[k, j])))
        return None

    rng = np.random.default_rng(seed)
    triples = rng.integers(0, n, size=(SAMPLED_TRIPLES, 3))
    logger.info(f"Space {space.id}: sampling {SAMPLED_TRIPLES} triples for the metric axioms")
    for start in range(0, SAMPLED_TRIPLES, 4096):
        chunk = triples[start:start + 4096]
        d_ij = space.geometry.pair_keys(chunk[:, 0], chunk[:, 1])
        d_ik = space.geometry.pair_keys(chunk[:, 0], chunk[:, 2])
        d_kj = space.geometry.pair_keys(chunk[:, 2], chunk[:, 1])
        bad = np.nonzero(_breaks_triangle(d_ij, d_ik, d_kj, space.squared))[0]
        if len(bad):
            i, j, k = (int(v) for v in chunk[bad[0]])
            return MetricViolation("triangle", (i, j, k), (int(d_ij[bad[0]]), int(d_ik[bad[0]]), int(d_kj[bad[0]])))
    return None


class SpaceRegistry:
    """Resolves space ids referenced by covers, maps and precode files."""

    def __init__(self, spaces: Iterable[FiniteMetricSpace] = ()):
        self._spaces: Dict[str, FiniteMetricSpace] = {}
        for space in spaces:
            self.register(space)

    def register(self, space: FiniteMetricSpace) -> FiniteMetricSpace:
        existing = self._spaces.get(space.id)
        if existing is not None and existing is not space:
            logger.warning(f"Space id {space.id} re-registered; the newer definition wins")
        self._spaces[space.id] = space
        return space

    def __contains__(self, space_id: str) -> bool:
        return space_id in self._spaces

    def resolve(self, space_id: str) -> FiniteMetricSpace:
        try:
            return self._spaces[space_id]
        except KeyError:
            raise SpaceError(f"unknown space id {space_id!r}")

    def diameter(self, A: PointSet) -> Number:
        return self.resolve(A.space_id).diameter(A)


def scale_schedule(cap: Number, start: int = 1) -> List[Number]:
    """Geometric sweep ``start, 2·start, 4·start, ...`` up to and including the cap."""
    cap = exact(cap)
    scales: List[Number] = []
    r = start
    while r <= cap:
        scales.append(r)
        r *= 2
    if cap >= start and (not scales or exact(scales[-1]) != cap):
        scales.append(as_number(cap))
    return scales
