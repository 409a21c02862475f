"""
Precode structures: nested cover sequences and the ultrametric they induce.

A structure is validated once; validation records the scale schedule (the
least level certifying each r) and, for the AN kind, the constants (c, r0).
The single-element top level absorbs every bounded set on a finite space, so
it never certifies a scale on its own unless it is the only level.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from coarsetk.coarse_maps import CoarseMapRecord, check_coarse_equivalence
from coarsetk.covers import Cover, r_multiplicity
from coarsetk.errors import PreconditionError, ValidationError
from coarsetk.metric_core import (
    KEY_LIMIT,
    FiniteMetricSpace,
    Number,
    SpaceRegistry,
    Tree,
    _json_number,
    as_number,
    exact,
    scale_schedule,
)

logger = logging.getLogger(__name__)

EXHAUSTIVE_LEAF_LIMIT = 1000
SAMPLED_TRIPLES = 200_000
NEWICK_RESERVED = frozenset("(),:;'[]")


@dataclass(frozen=True)
class PrecodeKind:
    """``asdim`` or ``AN`` with base a, start level i0 and optional (c, r0)."""

    name: str = "asdim"
    base: Optional[int] = None
    i0: int = 0
    c: Optional[Number] = None
    r0: Optional[Number] = None

    @property
    def is_an(self) -> bool:
        return self.name == "AN"

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name}
        if self.is_an:
            data.update({"base": self.base, "i0": self.i0})
            if self.c is not None:
                data.update({"c": _json_number(self.c), "r0": _json_number(self.r0)})
        return data

    @classmethod
    def from_json(cls, data: Optional[Dict[str, Any]]) -> "PrecodeKind":
        if not data:
            return cls()
        c, r0 = data.get("c"), data.get("r0")
        return cls(data.get("name", "asdim"), data.get("base"), int(data.get("i0", 0)),
                   Fraction(c) if isinstance(c, str) else c, Fraction(r0) if isinstance(r0, str) else r0)


class PrecodeStructure:
    """
    Covers U_0, U_1, ... of one space with the containing elements between
    consecutive levels.

    ``containers[i][j]`` lists every level-(i+1) element containing element j
    of level i; a valid structure has exactly one, recorded in ``parents``.
    """

    def __init__(self, space: FiniteMetricSpace, levels: Sequence[Cover], kind: Optional[PrecodeKind] = None,
                 name: str = "P"):
        if not levels:
            raise ValidationError("a precode structure needs at least one level")
        for i, level in enumerate(levels):
            if level.space_id != space.id:
                raise ValidationError(f"level {i} lives on {level.space_id}, not {space.id}")
        self.space = space
        self.levels: List[Cover] = list(levels)
        self.kind = kind or PrecodeKind()
        self.name = name
        self.containers = [self._containers(i) for i in range(len(self.levels) - 1)]
        self.parents = [
            np.asarray([options[0] if len(options) == 1 else -1 for options in level], dtype=np.int64)
            for level in self.containers
        ]
        self.disjoint = all(level.multiplicity == 1 for level in self.levels)
        self.schedule: Dict[Number, int] = {}
        self.report: Optional["PrecodeReport"] = None
        self.validated_n: Optional[int] = None

    @classmethod
    def from_elements(cls, space: FiniteMetricSpace, levels: Sequence[Sequence[Sequence[int]]],
                      kind: Optional[PrecodeKind] = None, name: str = "P") -> "PrecodeStructure":
        return cls(space, [Cover(space, elements) for elements in levels], kind, name)

    def _containers(self, i: int) -> List[List[int]]:
        upper = self.levels[i + 1]
        result = []
        for members in self.levels[i].arrays:
            candidates = upper.elements_containing(int(members[0]))
            inside = [int(j) for j in candidates.tolist()
                      if np.all(np.isin(members, upper.arrays[j], assume_unique=True))]
            result.append(sorted(inside))
        return result

    @property
    def space_id(self) -> str:
        return self.space.id

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    @property
    def base(self) -> int:
        return int(self.kind.base) if self.kind.is_an else 3

    def proper_levels(self) -> List[int]:
        """Levels allowed to certify scales."""
        proper = [i for i, level in enumerate(self.levels) if len(level) > 1]
        return proper or [0]

    def ancestors(self) -> np.ndarray:
        """Level-l element above every level-0 element; needs unique parents."""
        chains = [np.arange(len(self.levels[0]), dtype=np.int64)]
        for parents in self.parents:
            if np.any(parents < 0):
                raise PreconditionError(f"structure {self.name} has elements without a unique parent")
            chains.append(parents[chains[-1]])
        return np.stack(chains)

    def to_json(self) -> Dict[str, Any]:
        return {
            "space": self.space_id,
            "kind": self.kind.to_json(),
            "levels": [[list(e.members) for e in level.elements] for level in self.levels],
            "parents": [p.tolist() for p in self.parents],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any], registry: SpaceRegistry) -> "PrecodeStructure":
        space_ref = data["space"]
        if isinstance(space_ref, dict):
            space = registry.register(FiniteMetricSpace.from_json(space_ref))
        else:
            space = registry.resolve(space_ref)
        structure = cls.from_elements(space, data["levels"], PrecodeKind.from_json(data.get("kind")))
        stored = data.get("parents")
        if stored is not None and [p.tolist() for p in structure.parents] != [list(p) for p in stored]:
            raise ValidationError("stored parent arrays disagree with level containment")
        return structure


@dataclass
class PrecodeReport:
    n: int
    valid: bool
    failures: List[Dict[str, Any]] = field(default_factory=list)
    schedule: Dict[Number, int] = field(default_factory=dict)
    an_constants: Optional[Dict[str, Any]] = None
    disjoint: bool = True
    meshes: List[Number] = field(default_factory=list)

    def raise_for_failures(self):
        if not self.valid:
            first = self.failures[0]
            raise ValidationError(f"precode check '{first['check']}' failed", details={"failures": self.failures})

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "valid": self.valid,
            "failures": self.failures,
            "schedule": {str(r): level for r, level in self.schedule.items()},
            "an_constants": self.an_constants,
            "disjoint": self.disjoint,
            "meshes": [_json_number(m) for m in self.meshes],
        }


def _least_level(P: PrecodeStructure, r: Number, n: int, budget: Optional[int],
                 levels: Optional[Sequence[int]] = None) -> Optional[int]:
    for i in (levels if levels is not None else P.proper_levels()):
        if r_multiplicity(P.levels[i], r, budget) <= n:
            return i
    return None


def validate_precode(P: PrecodeStructure, n: int, scales: Optional[Sequence[Number]] = None,
                     budget: Optional[int] = None) -> PrecodeReport:
    """
    Check uniqueness of parents, absorption, the r-multiplicity schedule and,
    for the AN kind, mesh(U_i) <= a^i and the (c, r0) condition.

    Every failure is reported with its level, element(s) and scale; the
    certified schedule is stored on the structure when all checks pass.
    """
    report = PrecodeReport(n=n, valid=True, disjoint=P.disjoint)
    report.meshes = [level.mesh for level in P.levels]

    for i, level in enumerate(P.containers):
        for j, options in enumerate(level):
            if len(options) != 1:
                report.failures.append({"check": "uniqueness", "level": i, "element": j, "containers": options})

    top = P.levels[-1]
    if len(top) != 1 or len(top[0]) != P.space.size:
        report.failures.append({"check": "absorption", "level": P.top, "elements": len(top)})

    scales = list(scales) if scales is not None else scale_schedule(P.space.scale_cap)
    for r in scales:
        level = _least_level(P, r, n, budget)
        if level is None:
            report.failures.append({"check": "schedule", "r": _json_number(r),
                                    "reason": f"no level has {r}-multiplicity <= {n}"})
        else:
            report.schedule[r] = level

    if P.kind.is_an:
        a = exact(P.kind.base)
        for i in range(P.kind.i0, len(P.levels)):
            if exact(report.meshes[i]) > a ** i:
                report.failures.append({"check": "an-mesh", "level": i, "mesh": _json_number(report.meshes[i]),
                                        "bound": _json_number(as_number(a ** i))})
        report.an_constants = _an_constants(P, report, n, budget)
        if report.an_constants.get("failure"):
            report.failures.append(report.an_constants["failure"])

    report.valid = not report.failures
    for failure in report.failures:
        logger.warning(f"precode {P.name}: {failure}")
    P.report = report
    if report.valid:
        P.schedule = dict(report.schedule)
        P.validated_n = n
        logger.info(f"Precode {P.name} valid as a {n}-precode on {len(scales)} scales")
    return report


def _an_constants(P: PrecodeStructure, report: PrecodeReport, n: int, budget: Optional[int]) -> Dict[str, Any]:
    """
    Least c with a^i <= c·r and r-mul(U_i) <= n for every scheduled r >= r0.

    With (c, r0) given on the kind they are checked instead.
    """
    a = exact(P.kind.base)
    proper = [i for i in P.proper_levels() if i >= P.kind.i0] or P.proper_levels()
    per_r = {}
    for r in report.schedule:
        level = _least_level(P, r, n, budget, proper)
        if level is not None:
            per_r[r] = level
    given_c, given_r0 = P.kind.c, P.kind.r0
    if given_c is not None:
        c, r0 = exact(given_c), exact(given_r0 if given_r0 is not None else 0)
        for r, level in per_r.items():
            if exact(r) >= r0 and a ** level > c * exact(r):
                return {"c": _json_number(given_c), "r0": _json_number(given_r0),
                        "failure": {"check": "an-schedule", "r": _json_number(r), "level": level,
                                    "reason": f"a^{level} exceeds c·r"}}
        return {"c": _json_number(given_c), "r0": _json_number(given_r0), "per_r": _levels_json(per_r)}
    positive = [r for r in per_r if exact(r) > 0]
    if not positive:
        return {"c": None, "r0": None, "per_r": {}}
    r0 = min(positive, key=exact)
    c = max(a ** per_r[r] / exact(r) for r in positive)
    return {"c": _json_number(as_number(c)), "r0": _json_number(r0), "per_r": _levels_json(per_r)}


def _levels_json(per_r: Dict[Number, int]) -> Dict[str, int]:
    return {str(r): level for r, level in per_r.items()}


def _require_validated(P: PrecodeStructure, n: Optional[int] = None):
    if P.validated_n is None:
        raise PreconditionError(f"precode {P.name} has not been validated")
    if n is not None and P.validated_n != n:
        raise PreconditionError(f"precode {P.name} was validated as a {P.validated_n}-precode, not a {n}-precode")


def an_constants(P: PrecodeStructure) -> Tuple[Fraction, Fraction]:
    _require_validated(P)
    constants = (P.report.an_constants or {}) if P.report else {}
    if constants.get("c") is None:
        raise PreconditionError(f"precode {P.name} carries no AN constants")
    return exact(constants["c"]), exact(constants["r0"])


# ---------------------------------------------------------------------------
# ultrametric
# ---------------------------------------------------------------------------

@dataclass
class UltrametricSpace:
    """
    Level-0 elements with d(V, W) = base^p(V, W).

    ``space`` is a tree space when the parent chains give p; when levels
    overlap and the direct minimum-level computation disagrees, it is an
    explicit matrix and ``diverged`` is set.
    """

    structure: PrecodeStructure
    space: FiniteMetricSpace
    base: int
    levels: np.ndarray
    section: np.ndarray
    diverged: bool = False

    @property
    def base_space_id(self) -> str:
        return self.structure.space_id

    @property
    def size(self) -> int:
        return self.space.size

    def leaf_level_of_lca(self, v: int, w: int) -> int:
        return int(self.levels[v, w])

    def distance(self, v: int, w: int) -> Number:
        return self.space.distance(v, w)


def _leaf_labels(P: PrecodeStructure) -> List[str]:
    return [P.space.labels[element.members[0]] for element in P.levels[0].elements]


def _min_levels_brute_force(P: PrecodeStructure) -> np.ndarray:
    leaves = len(P.levels[0])
    result = np.full((leaves, leaves), P.top, dtype=np.int64)
    settled = np.zeros((leaves, leaves), dtype=bool)
    for k, level in enumerate(P.levels):
        contains = np.zeros((leaves, len(level)), dtype=np.int64)
        for j, members in enumerate(P.levels[0].arrays):
            contains[j] = [np.all(np.isin(members, arr, assume_unique=True)) for arr in level.arrays]
        together = (contains @ contains.T) > 0
        fresh = together & ~settled
        result[fresh] = k
        settled |= together
    np.fill_diagonal(result, 0)
    return result


def build_ultrametric(P: PrecodeStructure, selector: Optional[np.ndarray] = None) -> UltrametricSpace:
    """
    The ultrametric d(V, W) = base^p(V, W) on the level-0 elements.

    p is the first level where the parent chains of V and W meet; for
    overlapping levels it is also computed directly as the least level with an
    element containing V ∪ W and any disagreement is flagged.

    Raises:
        PreconditionError: if P has not been validated
    """
    _require_validated(P)
    ancestors = P.ancestors()
    base = P.base
    labels = _leaf_labels(P)
    tree = Tree(ancestors, base)
    levels = tree.meet_levels(np.arange(tree.size), np.arange(tree.size)) if tree.size <= 4096 else None
    space = FiniteMetricSpace(f"{P.space_id}/U0", tree, labels=labels)
    diverged = False
    if not P.disjoint:
        direct = _min_levels_brute_force(P)
        if levels is None:
            levels = tree.meet_levels(np.arange(tree.size), np.arange(tree.size))
        if not np.array_equal(direct, levels):
            diverged = True
            bad = np.argwhere(direct != levels)[0]
            logger.warning(f"precode {P.name}: parent chains and direct containment disagree at leaves {bad.tolist()}")
            matrix = np.power(np.int64(base), direct, dtype=np.int64)
            matrix[direct == 0] = 0
            np.fill_diagonal(matrix, 0)
            space = FiniteMetricSpace.from_matrix(f"{P.space_id}/U0", matrix, labels=labels, validate=False)
            levels = direct
    if levels is None:
        levels = np.zeros((0, 0), dtype=np.int64)
    section = selector if selector is not None else np.asarray(
        [element.members[0] for element in P.levels[0].elements], dtype=np.int64)
    logger.info(f"Ultrametric on {space.size} leaves of {P.name}, base {base}")
    return UltrametricSpace(P, space, base, levels, section, diverged)


def strong_triangle_violation(U: UltrametricSpace, seed: int = 0) -> Optional[Tuple[int, int, int]]:
    """First (x, y, z) with d(x, z) > max(d(x, y), d(y, z)); exhaustive up to 10³ leaves."""
    space = U.space
    n = space.size
    if n <= EXHAUSTIVE_LEAF_LIMIT:
        matrix = space.submatrix(np.arange(n), np.arange(n))
        for y in range(n):
            bound = np.maximum(matrix[:, y][:, None], matrix[y, :][None, :])
            bad = np.argwhere(matrix > bound)
            if len(bad):
                x, z = (int(v) for v in bad[0])
                return x, y, z
        return None
    rng = np.random.default_rng(seed)
    triples = rng.integers(0, n, size=(SAMPLED_TRIPLES, 3))
    keys = space.geometry.pair_keys
    d_xz = keys(triples[:, 0], triples[:, 2])
    bound = np.maximum(keys(triples[:, 0], triples[:, 1]), keys(triples[:, 1], triples[:, 2]))
    bad = np.nonzero(d_xz > bound)[0]
    return tuple(int(v) for v in triples[bad[0]]) if len(bad) else None


def _newick_label(name: str) -> str:
    """Single-quote labels that contain Newick punctuation or whitespace, doubling inner quotes."""
    if any(ch in NEWICK_RESERVED or ch.isspace() for ch in name):
        return "'" + name.replace("'", "''") + "'"
    return name


def to_newick(U: UltrametricSpace) -> str:
    """Newick string with one node per element of every level; branch lengths are level gaps."""
    P = U.structure
    labels = U.space.labels
    ancestors = P.ancestors()
    top = ancestors.shape[0] - 1
    if top == 0:
        return f"{_newick_label(labels[0])};"

    def render(level: int, node: int) -> str:
        if level == 0:
            return _newick_label(labels[node])
        children = sorted(set(np.nonzero(ancestors[level] == node)[0].tolist()))
        below = sorted(set(int(ancestors[level - 1][c]) for c in children))
        return "(" + ",".join(f"{render(level - 1, child)}:1" for child in below) + ")"

    return render(top, int(ancestors[top][0])) + ";"


def distance_matrix_json(U: UltrametricSpace) -> Dict[str, Any]:
    n = U.space.size
    matrix = U.space.submatrix(np.arange(n), np.arange(n))
    return {"labels": list(U.space.labels), "base": U.base, "matrix": matrix.tolist()}


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

def quotient_map(P: PrecodeStructure, selector: str = "min", table: Optional[Sequence[int]] = None,
                 seed: int = 0, U: Optional[UltrametricSpace] = None) -> CoarseMapRecord:
    """
    q: U_0 -> X sending each level-0 element to a chosen point inside it.

    Selectors: ``min`` (smallest point), ``table`` (explicit points) and
    ``random`` (seeded). The bound d(qV, qW) <= mesh(U_k) whenever
    d(V, W) <= base^k is verified.

    Raises:
        PreconditionError: if a chosen point is not in its element
        ValidationError: if the modulus bound fails
    """
    elements = P.levels[0].elements
    if selector == "min":
        points = np.asarray([e.members[0] for e in elements], dtype=np.int64)
    elif selector == "table":
        if table is None or len(table) != len(elements):
            raise PreconditionError("the table selector needs one point per level-0 element")
        points = np.asarray(table, dtype=np.int64)
        for j, (element, x) in enumerate(zip(elements, points.tolist())):
            if x not in element:
                raise PreconditionError(f"selector point {x} is not in level-0 element {j}",
                                        details={"element": j, "point": x})
    elif selector == "random":
        rng = np.random.default_rng(seed)
        points = np.asarray([e.members[int(rng.integers(len(e)))] for e in elements], dtype=np.int64)
    else:
        raise ValueError(f"unknown selector {selector!r}")

    U = build_ultrametric(P, selector=points) if U is None else U
    q = CoarseMapRecord(U.space, P.space, points, name=f"q_{P.name}")
    base = U.base
    for k, level in enumerate(P.levels):
        threshold = 0 if k == 0 else base ** k
        moved = q.delta(threshold)
        if exact(moved) > exact(level.mesh):
            raise ValidationError(f"d(qV, qW) reaches {moved} although d(V, W) <= {threshold} and mesh(U_{k}) = {level.mesh}",
                                  details={"level": k})
    q.certificates["quotient"] = {"selector": selector, "seed": seed if selector == "random" else None}
    return q


def inverse_section(P: PrecodeStructure, U: Optional[UltrametricSpace] = None) -> CoarseMapRecord:
    """
    g: X -> U_0 sending x to the level-0 element containing it.

    Raises:
        PreconditionError: unless P was validated as a 1-precode
    """
    _require_validated(P, 1)
    U = U or build_ultrametric(P)
    level0 = P.levels[0]
    table = np.asarray([int(level0.elements_containing(x)[0]) for x in range(P.space.size)], dtype=np.int64)
    return CoarseMapRecord(P.space, U.space, table, name=f"g_{P.name}")


def ultrametric_on_points(P: PrecodeStructure) -> Dict[str, Any]:
    """
    Move the ultrametric onto X itself (level 0 must be singletons) and check
    that id: (X, d) -> (X, ρ) is a coarse equivalence, plus the
    quasi-isometry fit for the AN kind.
    """
    _require_validated(P)
    level0 = P.levels[0]
    if any(len(e) != 1 for e in level0.elements):
        raise PreconditionError(f"level 0 of {P.name} is not the singleton cover")
    U = build_ultrametric(P)
    rho = U.space
    to_rho = CoarseMapRecord(P.space, rho, level0.owner, name="id")
    back = CoarseMapRecord(rho, P.space, np.asarray([e.members[0] for e in level0.elements]), name="id⁻¹")
    report = check_coarse_equivalence(to_rho, back)
    summary = {
        "S_X": report["S_X"],
        "S_Y": report["S_Y"],
        "to_ultrametric": to_rho.fitted,
        "from_ultrametric": back.fitted,
    }
    if P.kind.is_an:
        summary["quasi_isometry"] = "quasi_isometry" in back.fitted
    return summary


def check_quasi_isometry_bound(P: PrecodeStructure, q: CoarseMapRecord) -> Dict[str, Any]:
    """d_C(U, V) <= (c·a)·d(qU, qV) + c·r0 on every pair of level-0 elements."""
    if not P.kind.is_an:
        raise PreconditionError(f"precode {P.name} is not of AN kind")
    c, r0 = an_constants(P)
    a = exact(P.base)
    if P.space.squared:
        raise PreconditionError("the quasi-isometry bound is checked on unsquared keys only")
    domain = q.domain
    everything = np.arange(domain.size)
    worst: Optional[Dict[str, Any]] = None
    for start in range(0, domain.size, 256):
        rows = everything[start:start + 256]
        d_c = domain.submatrix(rows, everything)
        d_x = P.space.submatrix(q.table[rows], q.table)
        bound = np.asarray([[c * a * int(v) + c * r0 for v in row] for row in d_x.tolist()], dtype=object)
        bad = np.argwhere(d_c > bound)
        if len(bad) and worst is None:
            i, j = (int(v) for v in bad[0])
            worst = {"pair": [int(rows[i]), j], "d_C": int(d_c[i, j]), "bound": str(bound[i, j])}
    return {"c": _json_number(as_number(c)), "a": int(a), "r0": _json_number(as_number(r0)),
            "holds": worst is None, "counterexample": worst}


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------

def example_dyadic(N: int) -> PrecodeStructure:
    """
    Dyadic blocks on [0, N-1]: level i consists of the blocks of length 2^i.

    Raises:
        ValueError: unless N is a power of two
    """
    if N < 1 or N & (N - 1):
        raise ValueError(f"N must be a power of two, got {N}")
    space = FiniteMetricSpace.lattice(f"dyadic{N}", [(0, N - 1)], "l1")
    levels = []
    for i in range(int(math.log2(N)) + 1):
        length = 2 ** i
        levels.append([list(range(start, start + length)) for start in range(0, N, length)])
    return PrecodeStructure.from_elements(space, levels, name=f"dyadic{N}")


def example_triadic(K: int, kind: str = "asdim") -> PrecodeStructure:
    """
    Triadic intervals on [-(3^K-1)/2, (3^K-1)/2].

    Level k consists of the intervals of length 3^k starting at
    (3^(k+1)-1)/2 + j·3^k, clipped to the truncation. Level K has two
    elements and level K+1 is the absorbing one.
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    half = (3 ** K - 1) // 2
    space = FiniteMetricSpace.lattice(f"triadic{K}", [(-half, half)], "l1")
    levels = []
    for k in range(K + 2):
        length = 3 ** k
        first = (3 ** (k + 1) - 1) // 2
        j = math.floor(Fraction(-half - first, length))
        elements = []
        while first + j * length <= half:
            start = first + j * length
            lo, hi = max(start, -half), min(start + length - 1, half)
            if lo <= hi:
                elements.append([x + half for x in range(lo, hi + 1)])
            j += 1
        levels.append(elements)
    structure_kind = PrecodeKind("AN", base=3, i0=0) if kind == "AN" else PrecodeKind()
    return PrecodeStructure.from_elements(space, levels, structure_kind, name=f"triadic{K}")


def cluster_space(clusters: int = 8, cluster_size: int = 4, scale: int = 4) -> FiniteMetricSpace:
    """
    ``clusters`` groups of ``cluster_size`` points: distance 1 inside a group
    and ``scale^i`` between groups whose indices first agree after dropping i
    binary digits.
    """
    if clusters < 1 or clusters & (clusters - 1):
        raise ValueError(f"number of clusters must be a power of two, got {clusters}")
    if scale ** int(math.log2(clusters)) > KEY_LIMIT:
        raise ValueError(f"cluster distance {scale}^{int(math.log2(clusters))} does not fit an int64 key")
    owner = np.repeat(np.arange(clusters), cluster_size)
    xor = owner[:, None] ^ owner[None, :]
    levels = np.vectorize(lambda v: int(v).bit_length())(xor)
    matrix = np.where(levels > 0, np.power(np.int64(scale), levels, dtype=np.int64), 1)
    np.fill_diagonal(matrix, 0)
    cap = scale ** int(math.log2(clusters)) - 1 if clusters > 1 else 1
    labels = [f"c{c}.{j}" for c in range(clusters) for j in range(cluster_size)]
    return FiniteMetricSpace.from_matrix(f"clusters{clusters}x{cluster_size}", matrix, labels=labels, scale_cap=cap)


def example_clusters(clusters: int = 8, cluster_size: int = 4, scale: int = 4) -> PrecodeStructure:
    """1-precode on the cluster space: level i merges 2^i clusters."""
    space = cluster_space(clusters, cluster_size, scale)
    levels = []
    for i in range(int(math.log2(clusters)) + 1):
        group = 2 ** i * cluster_size
        levels.append([list(range(start, start + group)) for start in range(0, space.size, group)])
    return PrecodeStructure.from_elements(space, levels, name=space.id)
