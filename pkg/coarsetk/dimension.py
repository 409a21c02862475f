"""
Scale-truncated dimension witnesses.

A witness at scale r is either a list of r-disjoint families that jointly
cover the space, or a cover certified by its r-multiplicity or by its
Lebesgue number and multiplicity. Everything a generator returns is checked
before it is recorded.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from coarsetk.covers import (
    Cover,
    lebesgue_holds,
    r_disjointness_violation,
    r_multiplicity,
)
from coarsetk.errors import PreconditionError, ValidationError
from coarsetk.fitting import lipschitz_constant, upper_affine_fit
from coarsetk.metric_core import (
    ROW_CHUNK,
    FiniteMetricSpace,
    Lattice,
    Number,
    PointSet,
    Tree,
    as_number,
    exact,
    scale_schedule,
)

logger = logging.getLogger(__name__)


@dataclass
class DisjointFamilyList:
    """Families U^0..U^n, each r-disjoint, jointly covering the space."""

    space: FiniteMetricSpace
    families: List[List[PointSet]]
    r: Number
    generator: str = "given"

    @property
    def space_id(self) -> str:
        return self.space.id

    @property
    def n(self) -> int:
        return len(self.families) - 1

    def elements(self) -> List[PointSet]:
        return [element for family in self.families for element in family]

    @property
    def mesh(self) -> Number:
        return max((self.space.diameter(e) for e in self.elements()), default=0)

    def verify(self, as_witness: bool = True) -> None:
        """
        Raises:
            ValidationError: with the offending pair if a family is not r-disjoint,
                or the uncovered points if the union misses some
        """
        for index, family in enumerate(self.families):
            pair = r_disjointness_violation(self.space, family, self.r)
            if pair is not None:
                x, y = pair
                raise ValidationError(
                    f"family {index} is not {self.r}-disjoint: d({x}, {y}) = {self.space.distance(x, y)}",
                    details={"family": index, "pair": [x, y], "r": str(self.r)},
                )
        if as_witness:
            Cover(self.space, self.elements())

    def to_json(self) -> Dict[str, Any]:
        return {
            "space": self.space_id,
            "r": str(self.r),
            "generator": self.generator,
            "families": [[list(e.members) for e in family] for family in self.families],
        }


def _families_from_labels(space: FiniteMetricSpace, cells: np.ndarray, colors: Dict[int, int],
                          r: Number, generator: str) -> DisjointFamilyList:
    order = np.argsort(cells, kind="stable")
    cell_ids, starts = np.unique(cells[order], return_index=True)
    groups = np.split(order, starts[1:])
    count = max(colors.values()) + 1 if colors else 1
    families: List[List[PointSet]] = [[] for _ in range(count)]
    for cell, members in zip(cell_ids.tolist(), groups):
        families[colors.get(cell, 0)].append(space.point_set(members))
    families = [family for family in families if family]
    return DisjointFamilyList(space, families, r, generator)


def _axis_lattice(space: FiniteMetricSpace, dims: Tuple[int, ...]) -> Lattice:
    geometry = space.geometry
    if not isinstance(geometry, Lattice) or geometry.dim not in dims:
        raise PreconditionError(f"space {space.id} is not a lattice of dimension {dims}")
    return geometry


def block_families(space: FiniteMetricSpace, r: Number) -> DisjointFamilyList:
    """Consecutive blocks of length r+1 on a one-dimensional lattice, alternating between two families."""
    lattice = _axis_lattice(space, (1,))
    length = int(exact(r)) + 1
    offsets = lattice.coords[:, 0] - lattice.box[0][0]
    blocks = offsets // length
    colors = {int(b): int(b) % 2 for b in np.unique(blocks)}
    families = _families_from_labels(space, blocks, colors, r, "blocks")
    families.verify()
    return families


def brick_families(space: FiniteMetricSpace, r: Number) -> DisjointFamilyList:
    """
    Shifted-brick pattern on a two-dimensional lattice with three families.

    Bricks are 2(r+1) wide and r+1 tall; odd rows are shifted by half a brick.
    Brick (row i, column k) gets color ``(k - i // 2 - i) mod 3``. Higher
    dimensional lattices fall back to the greedy net generator.
    """
    geometry = space.geometry
    if isinstance(geometry, Lattice) and geometry.dim == 1:
        return block_families(space, r)
    if not isinstance(geometry, Lattice) or geometry.dim != 2:
        return greedy_net_families(space, r)
    height = int(exact(r)) + 1
    width = 2 * height
    offsets = geometry.coords - np.array([lo for lo, _ in geometry.box], dtype=np.int64)
    rows = offsets[:, 1] // height
    shifted = offsets[:, 0] - (rows % 2) * height
    columns = shifted // width
    cells = rows * (geometry.shape[0] // width + 3) + columns + 1
    colors = {}
    for cell, row, column in zip(cells.tolist(), rows.tolist(), columns.tolist()):
        colors[cell] = (column - row // 2 - row) % 3
    families = _families_from_labels(space, cells, colors, r, "bricks")
    families.verify()
    return families


def greedy_net_families(space: FiniteMetricSpace, r: Number, radius: Optional[Number] = None) -> DisjointFamilyList:
    """
    Cells around a greedy (r+1)-net, grouped into families by coloring the
    graph of cells that come within r of each other.
    """
    radius = exact(radius) if radius is not None else exact(r) + 1
    net_key = space.closed_key(radius)
    close_key = space.closed_key(r)
    everything = np.arange(space.size)
    centers: List[int] = []
    covered = np.zeros(space.size, dtype=bool)
    for x in range(space.size):
        if covered[x]:
            continue
        centers.append(x)
        covered |= space.row(x) <= net_key
    centers_arr = np.asarray(centers, dtype=np.int64)
    cells = np.empty(space.size, dtype=np.int64)
    for start in range(0, space.size, ROW_CHUNK):
        block = space.submatrix(everything[start:start + ROW_CHUNK], centers_arr)
        cells[start:start + ROW_CHUNK] = np.argmin(block, axis=1)

    conflicts = nx.Graph()
    conflicts.add_nodes_from(range(len(centers)))
    for start in range(0, space.size, ROW_CHUNK):
        rows = everything[start:start + ROW_CHUNK]
        near = space.submatrix(rows, everything) <= close_key
        i, j = np.nonzero(near)
        a, b = cells[rows[i]], cells[j]
        keep = a < b
        conflicts.add_edges_from(zip(a[keep].tolist(), b[keep].tolist()))
    colors = nx.greedy_color(conflicts, strategy="largest_first")
    logger.debug(f"greedy net on {space.id} at r={r}: {len(centers)} cells, {max(colors.values()) + 1} colors")
    families = _families_from_labels(space, cells, colors, r, "greedy-net")
    families.verify()
    return families


def component_families(space: FiniteMetricSpace, r: Number) -> DisjointFamilyList:
    """The r-components as one r-disjoint family (an asdim-0 witness on ultrametric spaces)."""
    key = space.closed_key(r)
    geometry = space.geometry
    if isinstance(geometry, Tree):
        classes = geometry.classes(geometry.level_for_key(key))
    else:
        graph = space.threshold_graph(key)
        classes = [np.asarray(sorted(c), dtype=np.int64) for c in nx.connected_components(graph)]
        classes.sort(key=lambda c: int(c[0]))
    families = DisjointFamilyList(space, [[space.point_set(c) for c in classes]], r, "components")
    families.verify()
    return families


def default_generator(space: FiniteMetricSpace) -> Callable[[FiniteMetricSpace, Number], DisjointFamilyList]:
    geometry = space.geometry
    if isinstance(geometry, Lattice) and geometry.dim == 1:
        return block_families
    if isinstance(geometry, Lattice) and geometry.dim == 2:
        return brick_families
    if isinstance(geometry, Tree):
        return component_families
    return greedy_net_families


GENERATORS = {
    "blocks": block_families,
    "bricks": brick_families,
    "greedy-net": greedy_net_families,
    "components": component_families,
}


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

@dataclass
class DimensionWitness:
    """Per-scale certificates of a dimension bound n together with the control function D_X."""

    space: FiniteMetricSpace
    n: int
    per_scale: Dict[Number, Union[DisjointFamilyList, Cover]] = field(default_factory=dict)
    transcripts: Dict[Number, Dict[str, Any]] = field(default_factory=dict)

    @property
    def space_id(self) -> str:
        return self.space.id

    @property
    def scale_range(self) -> Tuple[Number, Number]:
        scales = sorted(self.per_scale, key=exact)
        return (scales[0], scales[-1]) if scales else (0, 0)

    def control_table(self) -> Dict[Number, Number]:
        table = {}
        for r, entry in self.per_scale.items():
            table[r] = entry.mesh
        return dict(sorted(table.items(), key=lambda item: exact(item[0])))

    def control(self) -> Dict[str, Any]:
        """D_X(r) as recorded, with its linear (c·r) and affine (c·r + d) fits."""
        table = self.control_table()
        linear = lipschitz_constant(table)
        affine = upper_affine_fit(table)
        for r, value in table.items():
            if exact(r) > 0 and exact(value) > linear * exact(r) or exact(value) > affine.upper(r):
                raise ValidationError(f"fitted control function misses D_X({r}) = {value}")
        return {
            "table": {str(r): value for r, value in table.items()},
            "linear": {"c": str(as_number(linear))},
            "affine": {"c": str(as_number(affine.c)), "d": str(as_number(affine.b))},
        }

    def to_json(self) -> Dict[str, Any]:
        low, high = self.scale_range
        return {
            "space": self.space_id,
            "n": self.n,
            "scale_range": [str(low), str(high)],
            "per_scale": {str(r): self.transcripts.get(r, {}) for r in sorted(self.per_scale, key=exact)},
            "control": self.control(),
        }


def witness_from_disjoint_families(F: DisjointFamilyList) -> DimensionWitness:
    """
    Single-scale witness of dimension ``len(families) - 1``.

    Raises:
        ValidationError: on a disjointness or coverage violation
    """
    F.verify(as_witness=True)
    witness = DimensionWitness(F.space, F.n)
    witness.per_scale[F.r] = F
    witness.transcripts[F.r] = {
        "form": "disjoint-families",
        "generator": F.generator,
        "families": len(F.families),
        "elements": sum(len(family) for family in F.families),
        "mesh": F.mesh,
        "r_disjoint": True,
        "covers": True,
    }
    return witness


def witness_over_schedule(space: FiniteMetricSpace, n: Optional[int] = None,
                          generator: Optional[Callable[[FiniteMetricSpace, Number], DisjointFamilyList]] = None,
                          scales: Optional[Sequence[Number]] = None) -> DimensionWitness:
    """
    Build and verify a witness at every scale of the schedule.

    Raises:
        ValidationError: if a generator needs more than ``n + 1`` families
    """
    generator = generator or default_generator(space)
    scales = list(scales) if scales is not None else scale_schedule(space.scale_cap)
    merged: Optional[DimensionWitness] = None
    for r in scales:
        single = witness_from_disjoint_families(generator(space, r))
        if n is not None and single.n > n:
            raise ValidationError(
                f"{single.per_scale[r].generator} generator needs {single.n + 1} families at r={r}, more than {n + 1}",
                details={"r": str(r), "families": single.n + 1},
            )
        if merged is None:
            merged = DimensionWitness(space, n if n is not None else single.n)
        merged.n = max(merged.n, single.n)
        merged.per_scale.update(single.per_scale)
        merged.transcripts.update(single.transcripts)
    if merged is None:
        raise PreconditionError("empty scale schedule")
    logger.info(f"Witness for {space.id}: n={merged.n} on {len(scales)} scales")
    return merged


def expand_to_lebesgue_cover(F: DisjointFamilyList, s: Number, t: Number,
                             an_constants: Optional[Tuple[Number, Number]] = None,
                             budget: Optional[int] = None) -> Cover:
    """
    Thicken every element of F by the open 2t-neighborhood.

    Needs ``r >= s + 4t``. The result is re-checked: s-multiplicity at most the
    number of families, Lebesgue number at least t, mesh at most
    ``mesh(F) + 4t`` and, with ``an_constants=(c, d)``, at most ``c(s+4t) + d``.

    Raises:
        PreconditionError: if r < s + 4t
        ValidationError: if a re-check fails
    """
    s, t = exact(s), exact(t)
    if s < 0 or t < 0:
        raise PreconditionError("s and t must be nonnegative")
    if exact(F.r) < s + 4 * t:
        raise PreconditionError(f"families are {F.r}-disjoint but s + 4t = {as_number(s + 4 * t)}",
                                details={"r": str(F.r), "s": str(s), "t": str(t)})
    space = F.space
    elements = [space.neighborhood(element, 2 * t) for element in F.elements()]
    cover = Cover(space, elements)
    families = len(F.families)

    s_mul = r_multiplicity(cover, s, budget)
    if s_mul > families:
        raise ValidationError(f"expanded cover has {s}-multiplicity {s_mul} > {families}",
                              details={"s": str(s), "r_multiplicity": s_mul})
    if not lebesgue_holds(cover, t, budget):
        raise ValidationError(f"expanded cover has Lebesgue number below {t}", details={"t": str(t)})
    mesh_bound = exact(F.mesh) + 4 * t
    if exact(cover.mesh) > mesh_bound:
        raise ValidationError(f"expanded mesh {cover.mesh} exceeds mesh(F) + 4t = {as_number(mesh_bound)}")
    cover.certificates.update({
        "s": as_number(s),
        "t": as_number(t),
        "s_multiplicity": s_mul,
        "lebesgue_at_least_t": True,
        "mesh": cover.mesh,
        "mesh_bound": as_number(mesh_bound),
    })
    if an_constants is not None:
        c, d = (exact(v) for v in an_constants)
        an_bound = c * (s + 4 * t) + d
        if exact(cover.mesh) > an_bound:
            raise ValidationError(f"expanded mesh {cover.mesh} exceeds c(s+4t)+d = {as_number(an_bound)}")
        cover.certificates["an_mesh_bound"] = as_number(an_bound)
    return cover


def cover_for_scales(space: FiniteMetricSpace, s: Number, t: Number,
                     generator: Optional[Callable[[FiniteMetricSpace, Number], DisjointFamilyList]] = None,
                     an_constants: Optional[Tuple[Number, Number]] = None,
                     budget: Optional[int] = None) -> Cover:
    """Generate families at r = s + 4t and expand them."""
    generator = generator or default_generator(space)
    r = as_number(exact(s) + 4 * exact(t))
    return expand_to_lebesgue_cover(generator(space, r), s, t, an_constants, budget)


def product_zero_dim_witness(Wx: DimensionWitness, Wy: DimensionWitness, r: Optional[Number] = None,
                             product: Optional[FiniteMetricSpace] = None) -> DimensionWitness:
    """
    Witness for X × Y (max-metric) from a 0-dimensional witness of X and a
    witness of Y at the same scale: ``W_i = {V × U : V in V, U in U_i}``.

    Raises:
        PreconditionError: if the witnesses share no scale or Wx is not 0-dimensional
    """
    common = sorted(set(map(exact, Wx.per_scale)) & set(map(exact, Wy.per_scale)))
    if not common:
        raise PreconditionError(f"witnesses for {Wx.space_id} and {Wy.space_id} share no scale")
    scale = exact(r) if r is not None else common[-1]
    if scale not in common:
        raise PreconditionError(f"scale {r} is not certified by both witnesses")
    entry_x = next(v for k, v in Wx.per_scale.items() if exact(k) == scale)
    entry_y = next(v for k, v in Wy.per_scale.items() if exact(k) == scale)
    if not isinstance(entry_x, DisjointFamilyList) or len(entry_x.families) != 1:
        raise PreconditionError(f"witness for {Wx.space_id} is not 0-dimensional at r={as_number(scale)}")
    if not isinstance(entry_y, DisjointFamilyList):
        raise PreconditionError(f"witness for {Wy.space_id} at r={as_number(scale)} is not in family form")

    product = product or FiniteMetricSpace.product(Wx.space, Wy.space)
    width = Wy.space.size
    families = []
    for family in entry_y.families:
        combined = []
        for V in entry_x.families[0]:
            for U in family:
                members = (V.array[:, None] * width + U.array[None, :]).ravel()
                combined.append(product.point_set(members))
        families.append(combined)
    result = DisjointFamilyList(product, families, as_number(scale), "product")
    witness = witness_from_disjoint_families(result)
    bound = 2 * max(exact(entry_x.mesh), exact(entry_y.mesh))
    if exact(result.mesh) > bound:
        raise ValidationError(f"product families have mesh {result.mesh} above 2d = {as_number(bound)}")
    witness.transcripts[result.r]["mesh_bound_2d"] = as_number(bound)
    return witness


def certify_cover(C: Cover, n: int, s: Optional[Number] = None, t: Optional[Number] = None,
                  budget: Optional[int] = None) -> Dict[str, Any]:
    """
    Check one of the two cover forms of dimension at most n.

    With ``s`` the s-multiplicity must be at most n+1; with ``t`` the Lebesgue
    number must be at least t and the multiplicity at most n+1.
    """
    transcript: Dict[str, Any] = {"n": n, "mesh": C.mesh}
    if s is not None:
        value = r_multiplicity(C, s, budget)
        transcript.update({"s": str(s), "s_multiplicity": value, "passed_s": value <= n + 1})
    if t is not None:
        holds = lebesgue_holds(C, t, budget)
        transcript.update({"t": str(t), "lebesgue_at_least_t": holds, "multiplicity": C.multiplicity,
                           "passed_t": holds and C.multiplicity <= n + 1})
    transcript["passed"] = all(v for k, v in transcript.items() if k.startswith("passed_"))
    return transcript
