"""
Covers of finite metric spaces and their scale invariants.

mesh, multiplicity, r-multiplicity and the Lebesgue number are computed
exactly. The last two range over the inclusion-maximal subsets of diameter
at most r; on Linf (and one-dimensional) lattices those are windows and the
counts are read off summed-area tables, elsewhere they are maximal cliques of
the threshold graph.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from coarsetk.errors import BudgetExceeded, PreconditionError, ValidationError
from coarsetk.metric_core import (
    FiniteMetricSpace,
    Number,
    PointSet,
    SpaceRegistry,
    WindowGrid,
    as_number,
    exact,
    scale_schedule,
)

if TYPE_CHECKING:
    from coarsetk.coarse_maps import CoarseMapRecord

logger = logging.getLogger(__name__)

# cells of the per-chunk indicator tensor used by the window fast path
WINDOW_CELLS = 4_000_000


class Cover:
    """
    Indexed family of nonempty point sets of one space.

    With ``require_cover`` the union must be the whole space; otherwise the
    ``is_cover`` flag records whether it is.
    """

    def __init__(self, space: FiniteMetricSpace, elements: Iterable[Union[PointSet, Iterable[int]]],
                 require_cover: bool = True, dedup: bool = False):
        self.space = space
        parsed: List[PointSet] = []
        seen = set()
        for position, element in enumerate(elements):
            if isinstance(element, PointSet):
                if element.space_id != space.id:
                    raise ValidationError(f"element {position} belongs to space {element.space_id}, not {space.id}")
                point_set = element
            else:
                point_set = space.point_set(element)
            if len(point_set) == 0:
                raise ValidationError(f"cover element {position} is empty", details={"element": position})
            if dedup:
                if point_set.members in seen:
                    continue
                seen.add(point_set.members)
            parsed.append(point_set)
        if not parsed:
            raise ValidationError("a cover needs at least one element")
        self.elements: Tuple[PointSet, ...] = tuple(parsed)
        self.certificates: Dict[str, Any] = {}

        counts = np.diff(self._incidence[0])
        uncovered = np.nonzero(counts == 0)[0]
        self.is_cover = len(uncovered) == 0
        if require_cover and not self.is_cover:
            raise ValidationError(
                f"family does not cover space {space.id}: {len(uncovered)} points uncovered",
                details={"uncovered": [int(p) for p in uncovered[:20]]},
            )

    @property
    def space_id(self) -> str:
        return self.space.id

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, index: int) -> PointSet:
        return self.elements[index]

    def __repr__(self) -> str:
        return f"Cover(space={self.space_id!r}, elements={len(self.elements)})"

    @cached_property
    def arrays(self) -> List[np.ndarray]:
        return [element.array for element in self.elements]

    @cached_property
    def _incidence(self) -> Tuple[np.ndarray, np.ndarray]:
        lengths = [len(a) for a in self.arrays]
        points = np.concatenate(self.arrays)
        owners = np.repeat(np.arange(len(self.arrays), dtype=np.int64), lengths)
        order = np.argsort(points, kind="stable")
        sorted_points = points[order]
        pointer = np.searchsorted(sorted_points, np.arange(self.space.size + 1))
        return pointer, owners[order]

    def elements_containing(self, point: int) -> np.ndarray:
        pointer, owners = self._incidence
        return owners[pointer[point]:pointer[point + 1]]

    @cached_property
    def owner(self) -> Optional[np.ndarray]:
        """Element index per point when elements are pairwise disjoint (-1 if uncovered)."""
        pointer, owners = self._incidence
        counts = np.diff(pointer)
        if counts.max() > 1:
            return None
        result = np.full(self.space.size, -1, dtype=np.int64)
        covered = np.nonzero(counts == 1)[0]
        result[covered] = owners[pointer[covered]]
        return result

    @cached_property
    def mesh(self) -> Number:
        return max(self.space.diameter(element) for element in self.elements)

    @cached_property
    def multiplicity(self) -> int:
        return int(np.diff(self._incidence[0]).max())

    @property
    def is_partition(self) -> bool:
        return self.is_cover and self.owner is not None

    def met_count(self, members: np.ndarray) -> int:
        """Number of elements meeting the point set ``members``."""
        if self.owner is not None:
            hit = self.owner[members]
            return int(len(np.unique(hit[hit >= 0])))
        pointer, owners = self._incidence
        hits = [owners[pointer[p]:pointer[p + 1]] for p in members.tolist()]
        return int(len(np.unique(np.concatenate(hits)))) if hits else 0

    def container_of(self, members: np.ndarray) -> Optional[int]:
        """Smallest index of an element containing all of ``members``, or None."""
        if len(members) == 0:
            return 0
        if self.owner is not None:
            hit = self.owner[members]
            return int(hit[0]) if hit[0] >= 0 and np.all(hit == hit[0]) else None
        for index in self.elements_containing(int(members[0])).tolist():
            if np.all(np.isin(members, self.arrays[index], assume_unique=True)):
                return int(index)
        return None

    def to_json(self) -> Dict[str, Any]:
        return {"space": self.space_id, "elements": [list(element.members) for element in self.elements]}

    @classmethod
    def from_json(cls, data: Dict[str, Any], registry: SpaceRegistry, require_cover: bool = True) -> "Cover":
        space_ref = data["space"]
        if isinstance(space_ref, dict):
            space = registry.register(FiniteMetricSpace.from_json(space_ref))
        else:
            space = registry.resolve(space_ref)
        return cls(space, data["elements"], require_cover=require_cover)


def singleton_cover(space: FiniteMetricSpace) -> Cover:
    return Cover(space, ([i] for i in range(space.size)))


def mesh(C: Cover) -> Number:
    """Largest element diameter."""
    return C.mesh


def multiplicity(C: Cover) -> int:
    """Largest number of elements sharing a point."""
    return C.multiplicity


# ---------------------------------------------------------------------------
# scale invariants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleScan:
    """Per-key summary of the maximal diameter-bounded subsets."""

    key: int
    max_met: int
    witness: Optional[np.ndarray]
    all_contained: bool
    uncontained: Optional[np.ndarray]


def _window_scan(C: Cover, grid: WindowGrid, key: int) -> ScaleScan:
    shape = grid.shape
    dim = len(shape)
    padded = tuple(s + 1 for s in shape)
    cells = int(np.prod(padded))
    per_chunk = max(1, WINDOW_CELLS // cells)
    window_size = int(np.prod(grid.widths))
    windows = grid.count
    met = np.zeros(windows, dtype=np.int64)
    contained = np.zeros(windows, dtype=bool)

    for first in range(0, len(C.arrays), per_chunk):
        chunk = C.arrays[first:first + per_chunk]
        indicator = np.zeros((len(chunk),) + padded, dtype=np.int32)
        for row, members in enumerate(chunk):
            coords = np.unravel_index(members, shape)
            indicator[(np.full(len(members), row),) + tuple(c + 1 for c in coords)] = 1
        table = indicator
        for axis in range(1, dim + 1):
            table = np.cumsum(table, axis=axis, dtype=np.int64)
        sums = np.zeros((len(chunk),) + tuple(len(s) for s in grid.starts), dtype=np.int64)
        for bits in itertools.product((0, 1), repeat=dim):
            index = [grid.starts[a] + bits[a] * grid.widths[a] for a in range(dim)]
            sign = -1 if (dim - sum(bits)) % 2 else 1
            sums += sign * table[(slice(None),) + np.ix_(*index)]
        sums = sums.reshape(len(chunk), windows)
        met += (sums > 0).sum(axis=0)
        contained |= (sums == window_size).any(axis=0)

    best = int(np.argmax(met))
    corners = list(grid.corners())
    missing = np.nonzero(~contained)[0]
    return ScaleScan(
        key=key,
        max_met=int(met[best]),
        witness=grid.members(corners[best]),
        all_contained=len(missing) == 0,
        uncontained=grid.members(corners[int(missing[0])]) if len(missing) else None,
    )


def _scan_sets(C: Cover, sets: Sequence[np.ndarray], key: int, need_containment: bool) -> ScaleScan:
    best, witness = 0, None
    uncontained = None
    for members in sets:
        count = C.met_count(members)
        if count > best:
            best, witness = count, members
        if need_containment and uncontained is None and C.container_of(members) is None:
            uncontained = members
    return ScaleScan(key, best, witness, uncontained is None, uncontained)


def scan_key(C: Cover, key: int, budget: Optional[int] = None, need_containment: bool = True) -> ScaleScan:
    """
    Exact scan of all maximal subsets with pairwise keys at most ``key``.

    Raises:
        BudgetExceeded: with ``lower`` set to the best met-count seen so far
    """
    space = C.space
    grid = space.geometry.window_grid(key) if key >= 0 else None
    if grid is not None:
        return _window_scan(C, grid, key)
    try:
        sets = space.bounded_subsets_key(key, budget)
    except BudgetExceeded as exc:
        partial = _scan_sets(C, exc.partial or [], key, need_containment=False)
        raise BudgetExceeded(
            f"subset enumeration for r-multiplicity exceeded the budget at key {key}",
            lower=partial.max_met,
            upper=len(C),
            partial=partial,
        )
    return _scan_sets(C, sets, key, need_containment)


def r_multiplicity(C: Cover, r: Number, budget: Optional[int] = None) -> int:
    """Largest number of elements met by a subset of diameter at most r."""
    if exact(r) < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    return scan_key(C, C.space.closed_key(r), budget, need_containment=False).max_met


def r_multiplicity_witness(C: Cover, r: Number, budget: Optional[int] = None) -> Tuple[int, PointSet]:
    """r-multiplicity together with a subset attaining it."""
    scan = scan_key(C, C.space.closed_key(r), budget, need_containment=False)
    return scan.max_met, C.space.point_set(scan.witness if scan.witness is not None else [])


def lebesgue_holds(C: Cover, r: Number, budget: Optional[int] = None) -> bool:
    """True iff every subset of diameter at most r lies in one element."""
    return scan_key(C, C.space.closed_key(r), budget).all_contained


def lebesgue_violation(C: Cover, r: Number, budget: Optional[int] = None) -> Optional[PointSet]:
    """A subset of diameter at most r inside no element, or None."""
    scan = scan_key(C, C.space.closed_key(r), budget)
    return None if scan.all_contained else C.space.point_set(scan.uncontained)


def _balls_contained(C: Cover, key: int) -> bool:
    space = C.space
    everything = np.arange(space.size)
    owner = C.owner
    for start in range(0, space.size, 256):
        rows = everything[start:start + 256]
        within = space.submatrix(rows, everything) <= key
        if owner is not None:
            if (within & (owner[None, :] != owner[rows][:, None])).any():
                return False
            continue
        for offset, x in enumerate(rows.tolist()):
            ball = np.nonzero(within[offset])[0]
            if C.container_of(ball) is None:
                return False
    return True


@dataclass(frozen=True)
class LebesgueNumber:
    value: Number
    mode: str
    fell_back: bool = False

    def to_dict(self) -> Dict[str, Any]:
        value = self.value
        if not isinstance(value, (int, float)):
            value = str(value)
        return {"value": value, "mode": self.mode, "fell_back": self.fell_back}


def _largest_certified(candidates: List[int], holds) -> int:
    lo, hi = 0, len(candidates) - 1
    # candidates[0] is key 0, which every cover satisfies
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if holds(candidates[mid]):
            lo = mid
        else:
            hi = mid - 1
    return candidates[lo]


def lebesgue_number(C: Cover, mode: str = "exact", budget: Optional[int] = None) -> LebesgueNumber:
    """
    Lebesgue number on the realized-distance grid, truncated at R_max.

    ``exact`` checks every maximal diameter-bounded subset; ``ball_certificate``
    checks closed balls only and is a lower bound. When the exact search runs
    out of budget the certificate is returned with ``fell_back`` set.
    """
    if mode not in ("exact", "ball_certificate"):
        raise ValueError(f"unknown Lebesgue mode {mode!r}")
    if not C.is_cover:
        raise PreconditionError(f"Lebesgue number needs a cover of {C.space_id}")
    space = C.space
    cap_key = space.closed_key(space.scale_cap)
    candidates = sorted({int(k) for k in space.realized_keys() if k <= cap_key} | {0, cap_key})

    def to_value(key: int) -> Number:
        if key == cap_key:
            return space.scale_cap
        return space.key_to_distance(key)

    if mode == "exact":
        try:
            key = _largest_certified(candidates, lambda k: scan_key(C, k, budget).all_contained)
            return LebesgueNumber(to_value(key), "exact")
        except BudgetExceeded:
            logger.warning(f"Exact Lebesgue search on {C.space_id} exceeded the budget; using ball certificate")
            key = _largest_certified(candidates, lambda k: _balls_contained(C, k))
            return LebesgueNumber(to_value(key), "ball_certificate", fell_back=True)

    key = _largest_certified(candidates, lambda k: _balls_contained(C, k))
    return LebesgueNumber(to_value(key), "ball_certificate")


# ---------------------------------------------------------------------------
# disjoint families
# ---------------------------------------------------------------------------

def r_disjointness_violation(space: FiniteMetricSpace, family: Sequence[PointSet],
                             r: Number) -> Optional[Tuple[int, int]]:
    """First pair (x, y) from different elements with d(x, y) <= r, or None."""
    if len(family) < 2:
        return None
    key = space.closed_key(r)
    members = np.concatenate([space._members(element) for element in family])
    labels = np.concatenate([np.full(len(element), i, dtype=np.int64) for i, element in enumerate(family)])
    for start in range(0, len(members), 256):
        rows = members[start:start + 256]
        close = space.submatrix(rows, members) <= key
        clash = close & (labels[start:start + 256][:, None] != labels[None, :])
        hits = np.argwhere(clash)
        if len(hits):
            i, j = hits[0]
            return int(rows[i]), int(members[j])
    return None


def is_r_disjoint(space: FiniteMetricSpace, family: Sequence[PointSet], r: Number) -> bool:
    """True iff points of different elements are more than r apart."""
    return r_disjointness_violation(space, family, r) is None


# ---------------------------------------------------------------------------
# derived covers
# ---------------------------------------------------------------------------

def pushforward(C: Cover, f: "CoarseMapRecord") -> Cover:
    """
    Image family f(C) with duplicate images merged.

    The result covers the codomain iff f is surjective; ``is_cover`` records it.
    """
    if C.space_id != f.domain.id:
        raise PreconditionError(f"cover lives on {C.space_id} but the map starts at {f.domain.id}")
    images = [np.unique(f.table[members]) for members in C.arrays]
    image = Cover(f.codomain, images, require_cover=False, dedup=True)
    if not image.is_cover:
        logger.warning(f"pushforward along non-surjective map {f.domain.id}->{f.codomain.id} does not cover the codomain")
    return image


def shrink_cover(C: Cover, s: Number) -> Cover:
    """
    Replace each U by {x : B̄(x, s) ⊂ U}.

    Starting from L(C) >= 2s the result still covers and has s-multiplicity at
    most mul(C).

    Raises:
        ValidationError: if the shrunken family no longer covers
    """
    space = C.space
    key = space.closed_key(s)
    everything = np.arange(space.size)
    shrunk = []
    for members in C.arrays:
        inside = np.zeros(space.size, dtype=bool)
        inside[members] = True
        keep = []
        for start in range(0, len(members), 256):
            rows = members[start:start + 256]
            balls = space.submatrix(rows, everything) <= key
            ok = ~(balls & ~inside[None, :]).any(axis=1)
            keep.append(rows[ok])
        kept = np.concatenate(keep)
        if len(kept):
            shrunk.append(kept)
    return Cover(space, shrunk)


def thicken_cover(C: Cover, t: Number) -> Cover:
    """Replace each U by the closed neighborhood B̄(U, t)."""
    space = C.space
    key = space.closed_key(t)
    return Cover(space, [space.neighborhood_indices(members, key) for members in C.arrays])


def cover_report(C: Cover, scales: Optional[Sequence[Number]] = None,
                 budget: Optional[int] = None) -> Dict[str, Any]:
    """Deterministic summary: mesh, multiplicity, r-multiplicity table and Lebesgue numbers."""
    scales = list(scales) if scales is not None else scale_schedule(C.space.scale_cap)
    table = {}
    for r in scales:
        try:
            table[str(r)] = r_multiplicity(C, r, budget)
        except BudgetExceeded as exc:
            table[str(r)] = {"lower": exc.lower, "budget_exceeded": True}
    exact_l = lebesgue_number(C, "exact", budget)
    certificate = lebesgue_number(C, "ball_certificate", budget)
    return {
        "space": C.space_id,
        "elements": len(C),
        "is_cover": C.is_cover,
        "mesh": C.mesh,
        "multiplicity": C.multiplicity,
        "r_multiplicity": table,
        "lebesgue": {"exact": exact_l.to_dict(), "ball_certificate": certificate.to_dict()},
    }
