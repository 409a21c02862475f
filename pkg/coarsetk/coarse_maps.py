"""
Maps between finite metric spaces and their large-scale checkers.

A map is a total table from domain indices to codomain indices. Moduli are
the exact empirical displacement and separation tables over realized
distances. The (B)_n checker decides, for every maximal subset B of the
codomain with diameter at most r, how finely f⁻¹(B) splits into n parts by
coloring the graph of pairs that are too far apart.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from joblib import Parallel, delayed

from coarsetk.config import DEFAULT_CLIQUE_BUDGET, DEFAULT_COLORING_BUDGET
from coarsetk.covers import Cover, lebesgue_holds, pushforward, r_multiplicity
from coarsetk.errors import BudgetExceeded, PreconditionError, ValidationError
from coarsetk.fitting import (
    AffineFit,
    least_start,
    linear_constant,
    lipschitz_constant,
    lower_affine_fit,
    quasi_isometry_constants,
    upper_affine_fit,
)
from coarsetk.graph_kernels import n_coloring
from coarsetk.metric_core import (
    ROW_CHUNK,
    FiniteMetricSpace,
    Number,
    PointSet,
    SpaceRegistry,
    Tree,
    _json_number,
    as_number,
    exact,
    scale_schedule,
)

logger = logging.getLogger(__name__)

# decompositions kept verbatim in a (B)_n transcript
TRANSCRIPT_LIMIT = 20
SELECTION_BUDGET = 100_000
SELECTION_DEPTH = 500
# exhaustive oracles: assignments per preimage and codomain points
EXHAUSTIVE_ASSIGNMENTS = 1 << 20
EXHAUSTIVE_CODOMAIN = 2048


class CoarseMapRecord:
    """Total map ``domain -> codomain`` with its empirical moduli and certificates."""

    def __init__(self, domain: FiniteMetricSpace, codomain: FiniteMetricSpace, table, name: str = "f"):
        values = np.asarray(table, dtype=np.int64).ravel()
        if len(values) != domain.size:
            raise PreconditionError(f"map {name} has {len(values)} entries for a domain of {domain.size} points")
        if len(values) and (values.min() < 0 or values.max() >= codomain.size):
            raise PreconditionError(f"map {name} sends a point outside codomain {codomain.id}")
        self.domain = domain
        self.codomain = codomain
        self.table = values
        self.table.setflags(write=False)
        self.name = name
        self.certificates: Dict[str, Any] = {}
        self.fitted: Dict[str, Any] = {}

    @property
    def domain_id(self) -> str:
        return self.domain.id

    @property
    def codomain_id(self) -> str:
        return self.codomain.id

    def __repr__(self) -> str:
        return f"CoarseMapRecord({self.name}: {self.domain_id} -> {self.codomain_id})"

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    @cached_property
    def _fibers(self) -> Tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.table, kind="stable")
        pointer = np.searchsorted(self.table[order], np.arange(self.codomain.size + 1))
        return pointer, order

    def fiber(self, y: int) -> np.ndarray:
        pointer, order = self._fibers
        return order[pointer[y]:pointer[y + 1]]

    def preimage(self, members: np.ndarray) -> np.ndarray:
        pointer, order = self._fibers
        parts = [order[pointer[y]:pointer[y + 1]] for y in np.asarray(members).tolist()]
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)

    @property
    def max_fiber(self) -> int:
        return int(np.diff(self._fibers[0]).max())

    @property
    def is_surjective(self) -> bool:
        return bool(np.all(np.diff(self._fibers[0]) > 0))

    @cached_property
    def _moduli_keys(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        realized = self.domain.realized_keys()
        worst = np.zeros(len(realized), dtype=np.int64)
        best = np.full(len(realized), np.iinfo(np.int64).max, dtype=np.int64)
        everything = np.arange(self.domain.size)
        for start in range(0, self.domain.size, ROW_CHUNK):
            rows = everything[start:start + ROW_CHUNK]
            dx = self.domain.submatrix(rows, everything)
            dy = self.codomain.submatrix(self.table[rows], self.table)
            slots = np.searchsorted(realized, dx)
            np.maximum.at(worst, slots.ravel(), dy.ravel())
            np.minimum.at(best, slots.ravel(), dy.ravel())
        delta = np.maximum.accumulate(worst)
        # separation over pairs at least r apart
        gamma = np.minimum.accumulate(best[::-1])[::-1]
        return realized, delta, gamma

    def _table_within_cap(self, values: np.ndarray) -> Dict[Number, Number]:
        realized = self._moduli_keys[0]
        cap = self.domain.closed_key(self.domain.scale_cap)
        return {
            self.domain.key_to_distance(k): self.codomain.key_to_distance(v)
            for k, v in zip(realized.tolist(), values.tolist()) if k <= cap
        }

    @property
    def delta_modulus(self) -> Dict[Number, Number]:
        """δ_f(r): largest d(fx, fx') over pairs with d(x, x') <= r."""
        return self._table_within_cap(self._moduli_keys[1])

    @property
    def gamma_modulus(self) -> Dict[Number, Number]:
        """γ_f(r): smallest d(fx, fx') over pairs with d(x, x') >= r."""
        return self._table_within_cap(self._moduli_keys[2])

    def delta(self, r: Number) -> Number:
        realized, delta, _ = self._moduli_keys
        position = int(np.searchsorted(realized, self.domain.closed_key(r), side="right")) - 1
        return self.codomain.key_to_distance(delta[max(position, 0)])

    def to_json(self, include_moduli: bool = False) -> Dict[str, Any]:
        data = {"domain": self.domain_id, "codomain": self.codomain_id, "table": self.table.tolist()}
        if include_moduli:
            data["delta_modulus"] = {str(k): _json_number(v) for k, v in self.delta_modulus.items()}
            data["gamma_modulus"] = {str(k): _json_number(v) for k, v in self.gamma_modulus.items()}
            data["fitted"] = self.fitted
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any], registry: SpaceRegistry, name: str = "f") -> "CoarseMapRecord":
        return cls(registry.resolve(data["domain"]), registry.resolve(data["codomain"]), data["table"], name)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def identity_map(space: FiniteMetricSpace) -> CoarseMapRecord:
    return CoarseMapRecord(space, space, np.arange(space.size), name=f"id_{space.id}")


def map_from_function(domain: FiniteMetricSpace, codomain: FiniteMetricSpace,
                      function: Callable[[int], int], name: str = "f", by_label: bool = False) -> CoarseMapRecord:
    """
    Tabulate ``function`` on every domain point.

    With ``by_label`` the function receives and returns labels parsed as integers
    (handy for maps of one-dimensional lattices such as ``x -> 2x``).
    """
    if by_label:
        table = [codomain.index_of(str(function(int(label)))) for label in domain.labels]
    else:
        table = [function(x) for x in range(domain.size)]
    return CoarseMapRecord(domain, codomain, table, name)


def compose(f: CoarseMapRecord, g: CoarseMapRecord) -> CoarseMapRecord:
    """g ∘ f (f first)."""
    if f.codomain_id != g.domain_id:
        raise PreconditionError(f"cannot compose {f.name}: ->{f.codomain_id} with {g.name}: {g.domain_id}->")
    return CoarseMapRecord(f.domain, g.codomain, g.table[f.table], name=f"{g.name}∘{f.name}")


def product_map(f: CoarseMapRecord, g: CoarseMapRecord,
                domain: Optional[FiniteMetricSpace] = None,
                codomain: Optional[FiniteMetricSpace] = None) -> CoarseMapRecord:
    """f × g between max-metric products."""
    domain = domain or FiniteMetricSpace.product(f.domain, g.domain)
    codomain = codomain or FiniteMetricSpace.product(f.codomain, g.codomain)
    table = (f.table[:, None] * g.codomain.size + g.table[None, :]).ravel()
    return CoarseMapRecord(domain, codomain, table, name=f"{f.name}×{g.name}")


def coarse_density(f: CoarseMapRecord) -> Number:
    """R = max over the codomain of the distance to the image of f."""
    image = np.unique(f.table)
    everything = np.arange(f.codomain.size)
    worst = 0
    for start in range(0, f.codomain.size, ROW_CHUNK):
        block = f.codomain.submatrix(everything[start:start + ROW_CHUNK], image)
        worst = max(worst, int(block.min(axis=1).max()))
    return f.codomain.key_to_distance(worst)


def fit_moduli(f: CoarseMapRecord) -> CoarseMapRecord:
    """
    Compute δ_f and γ_f exactly and fit the Lipschitz, asymptotically
    Lipschitz and quasi-isometry forms. The fits are stored on ``f.fitted``.
    """
    delta = f.delta_modulus
    gamma = f.gamma_modulus
    upper = upper_affine_fit(delta, f.domain.scale_cap)
    lower = lower_affine_fit({r: v for r, v in gamma.items() if exact(r) > 0}, f.domain.scale_cap)
    f.fitted = {
        "lipschitz": {"c": _json_number(as_number(lipschitz_constant(delta)))},
        "asymptotic_lipschitz": {k: _json_number(v) for k, v in upper.to_dict().items()},
    }
    qi = quasi_isometry_constants(upper, lower)
    if qi is not None:
        c, b = qi
        f.fitted["quasi_isometry"] = {
            "c": _json_number(as_number(c)),
            "b": _json_number(as_number(b)),
            "R": _json_number(coarse_density(f)),
        }
    for r, value in delta.items():
        if exact(value) > upper.upper(r):
            raise ValidationError(f"fitted envelope misses δ({r}) = {value}")
    return f


def properness_table(f: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
                     budget: Optional[int] = None) -> Dict[Number, Number]:
    """P(r) = max diam f⁻¹(B) over maximal B of diameter at most r."""
    scales = list(scales) if scales is not None else scale_schedule(f.codomain.scale_cap)
    table = {}
    for r in scales:
        worst = 0
        for members in f.codomain.bounded_subsets(r, budget):
            worst = max(worst, f.domain.diameter_key(f.preimage(members)))
        table[r] = f.domain.key_to_distance(worst)
    return table


# ---------------------------------------------------------------------------
# closeness
# ---------------------------------------------------------------------------

def check_close(f: CoarseMapRecord, g: CoarseMapRecord) -> Number:
    """Smallest S with d(f x, g x) <= S for every x."""
    if f.domain_id != g.domain_id or f.codomain_id != g.codomain_id:
        raise PreconditionError(
            f"maps {f.name} and {g.name} have different signatures: "
            f"{f.domain_id}->{f.codomain_id} vs {g.domain_id}->{g.codomain_id}"
        )
    displacement = f.codomain.geometry.pair_keys(f.table, g.table)
    return f.codomain.key_to_distance(int(displacement.max()) if len(displacement) else 0)


def check_coarse_equivalence(f: CoarseMapRecord, g: CoarseMapRecord) -> Dict[str, Any]:
    """
    Closeness of g∘f to id_X and of f∘g to id_Y, with both moduli records.

    Closeness constants above the relevant R_max are flagged.
    """
    if f.codomain_id != g.domain_id or g.codomain_id != f.domain_id:
        raise PreconditionError(f"{f.name} and {g.name} are not maps in opposite directions")
    X, Y = f.domain, f.codomain
    s_x = check_close(compose(f, g), identity_map(X))
    s_y = check_close(compose(g, f), identity_map(Y))
    fit_moduli(f)
    fit_moduli(g)
    flags = []
    if exact(s_x) > exact(X.scale_cap):
        flags.append(f"S_X={s_x} exceeds R_max of {X.id}")
    if exact(s_y) > exact(Y.scale_cap):
        flags.append(f"S_Y={s_y} exceeds R_max of {Y.id}")
    for flag in flags:
        logger.warning(flag)
    return {
        "f": {**f.to_json(include_moduli=True), "name": f.name},
        "g": {**g.to_json(include_moduli=True), "name": g.name},
        "S_X": _json_number(s_x),
        "S_Y": _json_number(s_y),
        "gf_is_identity": bool(np.array_equal(g.table[f.table], np.arange(X.size))),
        "fg_is_identity": bool(np.array_equal(f.table[g.table], np.arange(Y.size))),
        "flags": flags,
        "verdict": "equivalent" if not flags else "equivalent-beyond-scale-cap",
    }


# ---------------------------------------------------------------------------
# (B)_n
# ---------------------------------------------------------------------------

@dataclass
class _Split:
    key: int
    parts: List[np.ndarray]
    exact: bool = True
    lower: int = 0
    previous: Optional[int] = None


def _parts_from_coloring(points: np.ndarray, coloring: Dict[int, int]) -> List[np.ndarray]:
    groups: Dict[int, List[int]] = {}
    for position, color in sorted(coloring.items()):
        groups.setdefault(color, []).append(int(points[position]))
    return [np.asarray(sorted(group), dtype=np.int64) for _, group in sorted(groups.items())]


def _conflict_graph(matrix: np.ndarray, key: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(matrix.shape[0]))
    i, j = np.nonzero(np.triu(matrix > key, k=1))
    graph.add_edges_from(zip(i.tolist(), j.tolist()))
    return graph


def min_split(space: FiniteMetricSpace, points: np.ndarray, n: int,
              budget: Optional[int] = None) -> _Split:
    """
    Least key k such that ``points`` is a union of n sets of diameter key <= k.

    Candidates are the pairwise keys inside ``points``. If the coloring budget
    runs out the result is an interval ``[lower, key]`` with ``exact=False``.
    """
    points = np.asarray(points, dtype=np.int64)
    if len(points) <= n:
        return _Split(0, [points[i:i + 1] for i in range(len(points))])
    geometry = space.geometry
    if isinstance(geometry, Tree):
        previous = None
        for level in range(geometry.top + 1):
            nodes = geometry.ancestors[level][points]
            if len(np.unique(nodes)) <= n:
                key = 0 if level == 0 else geometry.base ** level
                parts = [np.sort(points[nodes == node]) for node in np.unique(nodes)]
                return _Split(key, parts, previous=previous)
            previous = 0 if level == 0 else geometry.base ** level
        raise ValidationError("tree without a common root")

    matrix = space.submatrix(points, points)
    candidates = np.unique(matrix)
    if n == 1:
        previous = int(candidates[-2]) if len(candidates) > 1 else None
        return _Split(int(candidates[-1]), [points], previous=previous)

    lo, hi = 0, len(candidates) - 1
    best = [points]
    exact_search = True
    while lo < hi:
        mid = (lo + hi) // 2
        try:
            coloring = n_coloring(_conflict_graph(matrix, int(candidates[mid])), n, budget)
        except BudgetExceeded:
            exact_search = False
            break
        if coloring is None:
            lo = mid + 1
        else:
            hi = mid
            best = _parts_from_coloring(points, coloring)
    previous = int(candidates[hi - 1]) if hi > 0 else None
    return _Split(int(candidates[hi]), best, exact=exact_search, lower=int(candidates[lo]), previous=previous)


def exhaustive_min_split(space: FiniteMetricSpace, points: np.ndarray, n: int) -> int:
    """
    Least max-diameter key over every assignment of ``points`` to n parts.

    Independent of the coloring kernel; the first point is pinned to part 0.

    Raises:
        PreconditionError: if there are more than EXHAUSTIVE_ASSIGNMENTS assignments
    """
    points = np.asarray(points, dtype=np.int64)
    m = len(points)
    if m <= n:
        return 0
    if n ** (m - 1) > EXHAUSTIVE_ASSIGNMENTS:
        raise PreconditionError(f"{n}^{m - 1} assignments exceed the exhaustive limit {EXHAUSTIVE_ASSIGNMENTS}")
    matrix = space.submatrix(points, points)
    codes = np.arange(n ** (m - 1), dtype=np.int64)
    labels = np.zeros((len(codes), m), dtype=np.int8)
    for position in range(1, m):
        labels[:, position] = (codes // n ** (position - 1)) % n
    worst = np.zeros(len(codes), dtype=np.int64)
    for i, j in itertools.combinations(range(m), 2):
        key = int(matrix[i, j])
        if key > 0:
            np.maximum(worst, np.where(labels[:, i] == labels[:, j], key, 0), out=worst)
    return int(worst.min())


def exhaustive_Bn(f: CoarseMapRecord, n: int, r: Number) -> Number:
    """
    (B)_n value at r from the maximal cliques of the codomain's ``d <= r``
    graph and an exhaustive split of every preimage.

    Raises:
        PreconditionError: if the codomain or a preimage is too large to enumerate
    """
    codomain = f.codomain
    if codomain.size > EXHAUSTIVE_CODOMAIN:
        raise PreconditionError(f"codomain {codomain.id} has {codomain.size} points, "
                                f"more than the exhaustive limit {EXHAUSTIVE_CODOMAIN}")
    everything = np.arange(codomain.size)
    close = codomain.submatrix(everything, everything) <= codomain.closed_key(r)
    graph = nx.Graph()
    graph.add_nodes_from(range(codomain.size))
    i, j = np.nonzero(np.triu(close, k=1))
    graph.add_edges_from(zip(i.tolist(), j.tolist()))
    worst = 0
    for clique in nx.find_cliques(graph):
        points = f.preimage(np.asarray(sorted(clique), dtype=np.int64))
        worst = max(worst, exhaustive_min_split(f.domain, points, n))
    return f.domain.key_to_distance(worst)


@dataclass
class BnResult:
    """Outcome of one (B)_n check at one scale."""

    n: int
    r: Number
    d: Optional[Number]
    exact: bool
    d_lower: Number
    d_upper: Number
    sets_checked: int
    worst_set: Optional[PointSet] = None
    decomposition: List[PointSet] = field(default_factory=list)
    counterexample: Optional[Dict[str, Any]] = None
    transcripts: List[Dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "r": _json_number(self.r),
            "d": _json_number(self.d) if self.d is not None else None,
            "exact": self.exact,
            "d_interval": [_json_number(self.d_lower), _json_number(self.d_upper)],
            "sets_checked": self.sets_checked,
            "worst_set": list(self.worst_set.members) if self.worst_set is not None else None,
            "decomposition": [list(part.members) for part in self.decomposition],
            "minimality_counterexample": self.counterexample,
            "transcripts": self.transcripts,
        }


def check_Bn(f: CoarseMapRecord, n: int, r: Number, clique_budget: Optional[int] = None,
             coloring_budget: Optional[int] = None, threads: int = 1) -> BnResult:
    """
    Minimal d such that f⁻¹(B) is a union of n sets of diameter <= d for
    every B of diameter <= r.

    Only inclusion-maximal B are enumerated. When a budget runs out the
    result carries an interval instead of an exact value.

    Raises:
        PreconditionError: if n < 1 or r exceeds the codomain's R_max
    """
    if n < 1:
        raise PreconditionError(f"(B)_n needs n >= 1, got {n}")
    if exact(r) > exact(f.codomain.scale_cap):
        raise PreconditionError(f"r={r} exceeds R_max={f.codomain.scale_cap} of {f.codomain_id}")
    clique_budget = clique_budget or DEFAULT_CLIQUE_BUDGET
    coloring_budget = coloring_budget or DEFAULT_COLORING_BUDGET
    domain = f.domain

    complete = True
    try:
        sets = f.codomain.bounded_subsets(r, clique_budget)
    except BudgetExceeded as exc:
        logger.warning(f"(B)_{n} at r={r}: subset enumeration exceeded the budget, bounding from partial sets")
        sets = exc.partial or []
        complete = False

    preimages = [f.preimage(members) for members in sets]
    splits = Parallel(n_jobs=threads, prefer="threads")(
        delayed(min_split)(domain, points, n, coloring_budget) for points in preimages
    )

    worst_index, worst_key, lower_key, upper_key = None, -1, 0, 0
    for index, split in enumerate(splits):
        lower_key = max(lower_key, split.lower if not split.exact else split.key)
        upper_key = max(upper_key, split.key)
        if split.exact and split.key > worst_key:
            worst_index, worst_key = index, split.key
    exact_result = complete and all(split.exact for split in splits)
    if not complete:
        upper_key = domain.diameter_key(np.arange(domain.size))

    result = BnResult(
        n=n,
        r=r,
        d=domain.key_to_distance(upper_key) if exact_result else None,
        exact=exact_result,
        d_lower=domain.key_to_distance(lower_key),
        d_upper=domain.key_to_distance(upper_key),
        sets_checked=len(sets),
    )
    if worst_index is not None:
        split = splits[worst_index]
        result.worst_set = f.codomain.point_set(sets[worst_index])
        result.decomposition = [domain.point_set(part) for part in split.parts]
        if split.previous is not None:
            result.counterexample = {
                "B": list(result.worst_set.members),
                "d": _json_number(domain.key_to_distance(split.previous)),
                "reason": f"f⁻¹(B) is not a union of {n} sets of diameter <= this d",
            }
    for members, split in itertools.islice(zip(sets, splits), TRANSCRIPT_LIMIT):
        result.transcripts.append({
            "B": [int(v) for v in members],
            "d_B": _json_number(domain.key_to_distance(split.key)),
            "parts": [[int(v) for v in part] for part in split.parts],
        })
    if not exact_result:
        logger.warning(f"(B)_{n} at r={r} is only bracketed: [{result.d_lower}, {result.d_upper}]")
    return result


@dataclass
class BnCertificate:
    n: int
    per_r: Dict[Number, Number]
    results: Dict[Number, BnResult] = field(default_factory=dict)

    def d(self, r: Number) -> Number:
        return self.per_r[r]

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "per_r": {str(r): _json_number(d) for r, d in self.per_r.items()},
            "transcripts": {str(r): result.to_json() for r, result in self.results.items()},
        }


def certify_Bn(f: CoarseMapRecord, n: int, scales: Optional[Sequence[Number]] = None,
               **budgets) -> BnCertificate:
    """
    Run check_Bn over the schedule and attach the certificate to ``f``.

    Raises:
        BudgetExceeded: if some scale is only bracketed
    """
    scales = list(scales) if scales is not None else scale_schedule(f.codomain.scale_cap)
    certificate = BnCertificate(n, {})
    for r in scales:
        result = check_Bn(f, n, r, **budgets)
        if not result.exact:
            raise BudgetExceeded(f"(B)_{n} for {f.name} at r={r} did not complete",
                                 lower=result.d_lower, upper=result.d_upper, details=result.to_json())
        certificate.per_r[r] = result.d
        certificate.results[r] = result
    f.certificates["Bn"] = certificate
    return certificate


def _certificate(f: CoarseMapRecord, kind: str):
    certificate = f.certificates.get(kind)
    if certificate is None:
        raise PreconditionError(f"map {f.name} carries no {kind} certificate")
    return certificate


def compose_Bn(f: CoarseMapRecord, g: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
               **budgets) -> CoarseMapRecord:
    """
    g ∘ f with the predicted (B)_{n·m} certificate d_gf(r) = d_f(d_g(r)),
    re-verified by check_Bn at every scale.

    Raises:
        PreconditionError: if either certificate is missing
        ValidationError: if the checker needs more than the predicted d
    """
    cert_f, cert_g = _certificate(f, "Bn"), _certificate(g, "Bn")
    composed = compose(f, g)
    parts = cert_f.n * cert_g.n
    scales = list(scales) if scales is not None else list(cert_g.per_r)
    predicted, observed = {}, BnCertificate(parts, {})
    for r in scales:
        d_g = cert_g.per_r[r] if r in cert_g.per_r else check_Bn(g, cert_g.n, r, **budgets).d_upper
        inner = min(exact(d_g), exact(f.codomain.scale_cap))
        d_f = cert_f.per_r.get(as_number(inner))
        if d_f is None:
            d_f = check_Bn(f, cert_f.n, as_number(inner), **budgets).d_upper
        predicted[r] = d_f
        result = check_Bn(composed, parts, r, **budgets)
        if exact(result.d_upper) > exact(d_f):
            raise ValidationError(f"{composed.name} needs d={result.d_upper} at r={r}, predicted {d_f}",
                                  details=result.to_json())
        observed.per_r[r] = result.d_upper
        observed.results[r] = result
    composed.certificates["Bn"] = observed
    composed.certificates["Bn_prediction"] = {"n": parts, "per_r": predicted}
    return composed


def product_Bn(f: CoarseMapRecord, g: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
               domain: Optional[FiniteMetricSpace] = None, codomain: Optional[FiniteMetricSpace] = None,
               **budgets) -> CoarseMapRecord:
    """
    f × g with the predicted (B)_{n·m} bound d(r) <= d_f(r) + d_g(r); under the
    max-metric max(d_f, d_g) already suffices and is recorded alongside.
    """
    cert_f, cert_g = _certificate(f, "Bn"), _certificate(g, "Bn")
    product = product_map(f, g, domain, codomain)
    parts = cert_f.n * cert_g.n
    scales = list(scales) if scales is not None else sorted(set(cert_f.per_r) & set(cert_g.per_r), key=exact)
    predicted, observed = {}, BnCertificate(parts, {})
    for r in scales:
        d_f = cert_f.per_r.get(r)
        d_g = cert_g.per_r.get(r)
        if d_f is None:
            d_f = check_Bn(f, cert_f.n, min(exact(r), exact(f.codomain.scale_cap)), **budgets).d_upper
        if d_g is None:
            d_g = check_Bn(g, cert_g.n, min(exact(r), exact(g.codomain.scale_cap)), **budgets).d_upper
        predicted[r] = {"sum": as_number(exact(d_f) + exact(d_g)), "max": max(d_f, d_g, key=exact)}
        result = check_Bn(product, parts, r, **budgets)
        if exact(result.d_upper) > exact(d_f) + exact(d_g):
            raise ValidationError(f"{product.name} needs d={result.d_upper} at r={r}, predicted {d_f}+{d_g}",
                                  details=result.to_json())
        observed.per_r[r] = result.d_upper
        observed.results[r] = result
    product.certificates["Bn"] = observed
    product.certificates["Bn_prediction"] = {"n": parts, "per_r": predicted}
    return product


# ---------------------------------------------------------------------------
# (C)_n
# ---------------------------------------------------------------------------

@dataclass
class CnCertificate:
    """
    Linear control d(r) <= c·r for r >= r0, and the affine form d(r) <= c'·r + d'.

    Neither form is canonical; both are always reported.
    """

    n: int
    c: Fraction
    r0: Number
    affine: AffineFit
    per_r: Dict[Number, Number]
    c_by_start: Dict[Number, Fraction]
    least_r0: Optional[Number] = None
    c_max: Optional[Number] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "linear": {"c": _json_number(as_number(self.c)), "r0": _json_number(self.r0)},
            "affine": {"c": _json_number(as_number(self.affine.c)), "d": _json_number(as_number(self.affine.b))},
            "per_r": {str(r): _json_number(d) for r, d in self.per_r.items()},
            "c_by_r0": {str(r): _json_number(as_number(c)) for r, c in self.c_by_start.items()},
            "least_r0": _json_number(self.least_r0) if self.least_r0 is not None else None,
            "c_max": _json_number(self.c_max) if self.c_max is not None else None,
            "note": "both the linear (c, r0) and the affine (c', d') forms are emitted; neither is canonical",
        }


def check_Cn(f: CoarseMapRecord, n: int, scales: Optional[Sequence[Number]] = None,
             c_max: Optional[Number] = None, **budgets) -> Optional[CnCertificate]:
    """
    Sweep check_Bn over the schedule and fit both forms of (C)_n.

    ``c`` is the least constant with d(r) <= c·r for every scheduled r >= r0,
    r0 being the first scale. With ``c_max`` the least feasible r0 is also
    reported, and None is returned when no scheduled r0 achieves it.
    """
    scales = sorted(scales if scales is not None else scale_schedule(f.codomain.scale_cap), key=exact)
    scales = [r for r in scales if exact(r) > 0]
    if not scales:
        raise PreconditionError("check_Cn needs at least one positive scale")
    certificate = certify_Bn(f, n, scales, **budgets)
    table = dict(certificate.per_r)
    c_by_start = {r0: linear_constant(table, r0) for r0 in scales}
    least = least_start(table, c_max) if c_max is not None else None
    if c_max is not None and least is None:
        logger.info(f"(C)_{n} for {f.name}: no scheduled r0 reaches c <= {c_max}")
        return None
    result = CnCertificate(
        n=n,
        c=c_by_start[scales[0]],
        r0=scales[0],
        affine=upper_affine_fit(table, scales[-1]),
        per_r=table,
        c_by_start=c_by_start,
        least_r0=as_number(least) if least is not None else None,
        c_max=c_max,
    )
    f.certificates["Cn"] = result
    return result


def compose_Cn(f: CoarseMapRecord, g: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
               **budgets) -> CoarseMapRecord:
    """g ∘ f with predicted (C)_{n·m} constant c_f·c_g, re-verified by check_Cn."""
    cert_f, cert_g = _certificate(f, "Cn"), _certificate(g, "Cn")
    composed = compose(f, g)
    predicted = cert_f.c * cert_g.c
    observed = check_Cn(composed, cert_f.n * cert_g.n, scales or list(cert_g.per_r), **budgets)
    if observed.c > predicted:
        raise ValidationError(f"{composed.name} needs c={observed.c}, predicted {predicted}")
    composed.certificates["Cn_prediction"] = {"n": cert_f.n * cert_g.n, "c": _json_number(as_number(predicted))}
    return composed


def product_Cn(f: CoarseMapRecord, g: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
               domain: Optional[FiniteMetricSpace] = None, codomain: Optional[FiniteMetricSpace] = None,
               **budgets) -> CoarseMapRecord:
    """f × g with predicted (C)_{n·m} constant c_f + c_g, re-verified by check_Cn."""
    cert_f, cert_g = _certificate(f, "Cn"), _certificate(g, "Cn")
    product = product_map(f, g, domain, codomain)
    predicted = cert_f.c + cert_g.c
    shared = sorted(set(cert_f.per_r) & set(cert_g.per_r), key=exact)
    observed = check_Cn(product, cert_f.n * cert_g.n, scales or shared, **budgets)
    if observed.c > predicted:
        raise ValidationError(f"{product.name} needs c={observed.c}, predicted {predicted}")
    product.certificates["Cn_prediction"] = {"n": cert_f.n * cert_g.n, "c": _json_number(as_number(predicted))}
    return product


# ---------------------------------------------------------------------------
# condition (B)
# ---------------------------------------------------------------------------

class _SelectionSearch:
    """Branch and bound over one preimage point per element of B."""

    def __init__(self, space: FiniteMetricSpace, fibers: List[np.ndarray], bound: int, budget: int):
        self.space = space
        self.fibers = sorted(fibers, key=len)
        self.best = bound
        self.budget = budget
        self.nodes = 0
        self.complete = True

    def run(self) -> int:
        self._extend([], 0, 0)
        return self.best

    def _extend(self, chosen: List[int], depth: int, current: int):
        if current >= self.best:
            return
        if depth == len(self.fibers):
            self.best = current
            return
        self.nodes += 1
        if self.nodes > self.budget:
            self.complete = False
            return
        fiber = self.fibers[depth]
        if chosen:
            spans = self.space.submatrix(fiber, chosen).max(axis=1)
        else:
            spans = np.zeros(len(fiber), dtype=np.int64)
        for position in np.argsort(spans, kind="stable").tolist():
            self._extend(chosen + [int(fiber[position])], depth + 1, max(current, int(spans[position])))
            if not self.complete:
                return


def _min_selection_key(f: CoarseMapRecord, members: np.ndarray, budget: int) -> Tuple[int, bool]:
    fibers = [f.fiber(int(y)) for y in members]
    # greedy: nearest fiber point to each anchor in the smallest fiber
    anchors = min(fibers, key=len)
    best = None
    for anchor in anchors.tolist():
        chosen = [int(fiber[np.argmin(f.domain.submatrix([anchor], fiber)[0])]) for fiber in fibers]
        key = f.domain.diameter_key(np.asarray(chosen))
        best = key if best is None else min(best, key)
    if len(fibers) > SELECTION_DEPTH:
        return best, False
    search = _SelectionSearch(f.domain, fibers, best + 1, budget)
    found = search.run()
    return min(found, best), search.complete


def check_B_linear(f: CoarseMapRecord, scales: Optional[Sequence[Number]] = None,
                   budget: Optional[int] = None) -> Dict[str, Any]:
    """
    Least d with: every B of diameter <= r has A with f(A) = B and diam(A) <= d·r.

    Raises:
        PreconditionError: if f is not surjective
    """
    if not f.is_surjective:
        raise PreconditionError(f"condition (B) needs a surjective map; {f.name} is not")
    scales = [r for r in (scales if scales is not None else scale_schedule(f.codomain.scale_cap)) if exact(r) > 0]
    budget = budget or SELECTION_BUDGET
    per_r: Dict[Number, Number] = {}
    exact_search = True
    d = Fraction(0)
    for r in scales:
        worst = 0
        for members in f.codomain.bounded_subsets(r):
            key, complete = _min_selection_key(f, members, budget)
            exact_search = exact_search and complete
            worst = max(worst, key)
        per_r[r] = f.domain.key_to_distance(worst)
        d = max(d, exact(per_r[r]) / exact(r))
    f.certificates["B"] = {"d": d, "per_r": per_r}
    return {
        "d": _json_number(as_number(d)),
        "per_r": {str(r): _json_number(v) for r, v in per_r.items()},
        "exact": exact_search,
    }


# ---------------------------------------------------------------------------
# pushforward inequalities
# ---------------------------------------------------------------------------

def check_pushforward_multiplicity(f: CoarseMapRecord, C: Cover, n: Optional[int] = None) -> Dict[str, Any]:
    """mul(f(C)) <= mul(C)·n whenever every fiber has at most n points."""
    n = n if n is not None else f.max_fiber
    if f.max_fiber > n:
        raise PreconditionError(f"{f.name} has a fiber of {f.max_fiber} points, more than {n}")
    image = pushforward(C, f)
    bound = C.multiplicity * n
    return {"left": image.multiplicity, "bound": bound, "holds": image.multiplicity <= bound}


def check_pushforward_rmul(f: CoarseMapRecord, C: Cover, r: Number, d: Number, n: int,
                           budget: Optional[int] = None) -> Dict[str, Any]:
    """r-mul(f(C)) <= d-mul(C)·n, for (B)_n at (r, d) or (C)_n with d = c·r."""
    image = pushforward(C, f)
    left = r_multiplicity(image, r, budget)
    right = r_multiplicity(C, d, budget) * n
    return {"r": _json_number(r), "d": _json_number(d), "left": left, "bound": right, "holds": left <= right}


def check_dimension_raising(f: CoarseMapRecord, d_linear: Number, C: Cover, r: Number,
                            budget: Optional[int] = None) -> Dict[str, Any]:
    """
    From L(C) >= d·r, every fiber of at most n points and condition (B) with
    constant d: f(C) has multiplicity <= mul(C)·n and Lebesgue number >= r.
    """
    scale = exact(d_linear) * exact(r)
    if not lebesgue_holds(C, scale, budget):
        raise PreconditionError(f"cover does not have Lebesgue number >= {as_number(scale)}")
    image = pushforward(C, f)
    n = f.max_fiber
    report = {
        "r": _json_number(r),
        "multiplicity": image.multiplicity,
        "multiplicity_bound": C.multiplicity * n,
        "lebesgue_at_least_r": lebesgue_holds(image, r, budget) if image.is_cover else False,
    }
    report["holds"] = report["multiplicity"] <= report["multiplicity_bound"] and report["lebesgue_at_least_r"]
    return report


def check_dimension_raising_asdim(f: CoarseMapRecord, n: int, r: Number, d: Number, C: Cover, m: int,
                                  budget: Optional[int] = None) -> Dict[str, Any]:
    """
    Pushforward of a domain cover with d-multiplicity <= m+1 along a map with
    (B)_n at (r, d) has r-multiplicity <= (m+1)·n.
    """
    source = r_multiplicity(C, d, budget)
    if source > m + 1:
        raise PreconditionError(f"domain cover has {d}-multiplicity {source} > {m + 1}")
    left = r_multiplicity(pushforward(C, f), r, budget)
    bound = (m + 1) * n
    return {"r": _json_number(r), "d": _json_number(d), "left": left, "bound": bound, "holds": left <= bound}
