"""
Inductive precode constructions.

Both builders start from the singleton cover and merge level k into level k+1
through a control cover supplied by a ``ControlCoverProvider``: every level-k
element goes to the control element that holds the ball around x0 when it
meets it, and otherwise to the first control element it meets. The five
inductive properties are re-verified after every step and recorded in a
``BuilderTrace``.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from coarsetk.covers import Cover, lebesgue_violation, r_multiplicity, r_multiplicity_witness
from coarsetk.dimension import GENERATORS, DisjointFamilyList, cover_for_scales, default_generator
from coarsetk.errors import PreconditionError, ValidationError
from coarsetk.fitting import upper_affine_fit
from coarsetk.metric_core import FiniteMetricSpace, Lattice, Number, _json_number, as_number, exact, scale_schedule
from coarsetk.precode import PrecodeKind, PrecodeStructure, validate_precode

logger = logging.getLogger(__name__)

DEFAULT_LEVEL_CAP = 64
PROVIDER_KINDS = ("grid-brick", "greedy-net", "table")


class ControlCoverProvider:
    """
    Source of control covers: (s, t) -> cover with s-multiplicity at most
    n+1 and Lebesgue number at least t.

    With AN constants (c, d) every cover must also have mesh at most
    c(s+4t)+d. Claims are verified before a cover is handed out.
    """

    def __init__(self, space: FiniteMetricSpace, n: int, kind: str = "grid-brick",
                 generator: Optional[Callable[[FiniteMetricSpace, Number], DisjointFamilyList]] = None,
                 table: Optional[Dict[Tuple[Number, Number], Cover]] = None,
                 an_constants: Optional[Tuple[Number, Number]] = None,
                 budget: Optional[int] = None):
        if kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {kind!r}; expected one of {PROVIDER_KINDS}")
        if kind == "table" and not table:
            raise PreconditionError("a table provider needs preloaded covers")
        self.space = space
        self.n = n
        self.kind = kind
        if generator is None and kind == "greedy-net":
            generator = GENERATORS["greedy-net"]
        if generator is None and kind == "grid-brick":
            if not isinstance(space.geometry, Lattice):
                raise PreconditionError(f"grid-brick providers need a lattice, {space.id} is a {space.geometry.kind}")
            generator = default_generator(space)
        self.generator = generator
        self.table = {(exact(s), exact(t)): cover for (s, t), cover in (table or {}).items()}
        self.an_constants = tuple(exact(v) for v in an_constants) if an_constants is not None else None
        self.budget = budget
        self._cache: Dict[Tuple[Fraction, Fraction], Cover] = {}

    @property
    def space_id(self) -> str:
        return self.space.id

    @classmethod
    def from_table(cls, space: FiniteMetricSpace, covers: Dict[Tuple[Number, Number], Any], n: int,
                   an_constants: Optional[Tuple[Number, Number]] = None,
                   budget: Optional[int] = None) -> "ControlCoverProvider":
        """Preloaded covers keyed by (s, t); plain element lists are accepted."""
        table = {key: cover if isinstance(cover, Cover) else Cover(space, cover) for key, cover in covers.items()}
        return cls(space, n, "table", table=table, an_constants=an_constants, budget=budget)

    def _produce(self, s: Fraction, t: Fraction) -> Cover:
        if self.kind == "table":
            if (s, t) not in self.table:
                raise PreconditionError(f"no preloaded cover for s={as_number(s)}, t={as_number(t)}")
            return self.table[(s, t)]
        return cover_for_scales(self.space, as_number(s), as_number(t), self.generator, budget=self.budget)

    def verify(self, cover: Cover, s: Number, t: Number) -> Dict[str, Any]:
        """
        Check the (s, t) claim on a cover.

        Raises:
            ValidationError: with the violating subset in ``details``
        """
        if cover.space_id != self.space.id:
            raise ValidationError(f"provider cover lives on {cover.space_id}, not {self.space.id}")
        s_mul, witness = r_multiplicity_witness(cover, s, self.budget)
        if s_mul > self.n + 1:
            raise ValidationError(f"provider cover has {s}-multiplicity {s_mul} > {self.n + 1}",
                                  details={"s": _json_number(s), "subset": list(witness.members)})
        violation = lebesgue_violation(cover, t, self.budget)
        if violation is not None:
            raise ValidationError(f"provider cover has Lebesgue number below {t}",
                                  details={"t": _json_number(t), "subset": list(violation.members)})
        record = {"s": _json_number(s), "t": _json_number(t), "s_multiplicity": s_mul, "mesh": cover.mesh}
        if self.an_constants is not None:
            c, d = self.an_constants
            bound = c * (exact(s) + 4 * exact(t)) + d
            if exact(cover.mesh) > bound:
                raise ValidationError(f"provider cover mesh {cover.mesh} exceeds c(s+4t)+d = {as_number(bound)}",
                                      details={"s": _json_number(s), "t": _json_number(t)})
            record["an_mesh_bound"] = _json_number(as_number(bound))
        return record

    def cover(self, s: Number, t: Number) -> Cover:
        key = (exact(s), exact(t))
        if key not in self._cache:
            cover = self._produce(*key)
            cover.certificates["provider"] = self.verify(cover, s, t)
            self._cache[key] = cover
        return self._cache[key]

    def measure_an_constants(self, samples: Optional[Sequence[Tuple[Number, Number]]] = None) -> Tuple[int, Fraction]:
        """
        Fit mesh <= c(s+4t)+d over sample covers and normalize to c >= d >= 2
        with integral c.
        """
        if samples is None:
            samples = self._default_samples()
        observed: Dict[Number, Number] = {}
        for s, t in samples:
            cover = self.cover(s, t)
            scale = as_number(exact(s) + 4 * exact(t))
            observed[scale] = max(exact(observed.get(scale, 0)), exact(cover.mesh))
        fit = upper_affine_fit(observed)
        d = max(fit.b, Fraction(2))
        c = max(math.ceil(fit.c), math.ceil(d), 2)
        self.an_constants = (Fraction(c), d)
        logger.info(f"Measured AN constants for {self.space.id}: c={c}, d={as_number(d)} from {len(observed)} covers")
        return c, d

    def _default_samples(self) -> List[Tuple[int, int]]:
        cap = exact(self.space.scale_cap)
        samples = []
        for s in scale_schedule(max(cap // 4, 1)):
            for t in (1, 2):
                if exact(s) + 4 * t <= cap:
                    samples.append((int(s), t))
        return samples or [(1, 1)]


@dataclass
class BuilderTrace:
    """Per-level record of the control cover and the verified inductive properties."""

    builder: str
    n: int
    x0: int
    levels: List[Dict[str, Any]] = field(default_factory=list)
    schedule: List[Number] = field(default_factory=list)
    an_constants: Optional[Dict[str, Any]] = None
    ball_convention: str = "closed"

    @property
    def passed(self) -> bool:
        return all(all(record["properties"].values()) for record in self.levels)

    def to_json(self) -> Dict[str, Any]:
        return {
            "builder": self.builder,
            "n": self.n,
            "x0": self.x0,
            "ball_convention": self.ball_convention,
            "an_constants": self.an_constants,
            "schedule": [_json_number(r) for r in self.schedule],
            "levels": self.levels,
            "passed": self.passed,
        }


def _merge(level: Cover, control: Cover, alpha: int) -> Tuple[List[np.ndarray], List[int]]:
    """τ assignment and the merged elements, ordered by control index."""
    tau = []
    for members in level.arrays:
        met = np.unique(np.concatenate([control.elements_containing(int(x)) for x in members.tolist()]))
        tau.append(alpha if alpha in met else int(met[0]))
    groups: Dict[int, List[np.ndarray]] = {}
    for members, beta in zip(level.arrays, tau):
        groups.setdefault(beta, []).append(members)
    merged = [np.sort(np.concatenate(groups[beta])) for beta in sorted(groups)]
    return merged, tau


def _check_step(space: FiniteMetricSpace, previous: Cover, current: Cover, mesh_bound: Number,
                mul_scale: Number, n: int, x0: int, radius: Number, budget: Optional[int]) -> Dict[str, bool]:
    ball = space.ball(x0, radius, closed=True)
    properties = {
        "bounded": exact(current.mesh) <= exact(mesh_bound),
        "multiplicity": r_multiplicity(current, mul_scale, budget) <= n + 1,
        "disjoint": current.multiplicity == 1,
        "nested": all(current.container_of(members) is not None for members in previous.arrays),
        "ball": current.container_of(ball.array) is not None,
    }
    return properties


def _finish(space: FiniteMetricSpace, levels: List[Cover], kind: PrecodeKind, name: str,
            cap: Optional[int]) -> PrecodeStructure:
    if len(levels) == 1:
        levels.append(levels[0])
    if cap is not None and len(levels[-1]) == 1:
        while len(levels) < cap + 1:
            levels.append(levels[-1])
    return PrecodeStructure(space, levels, kind, name=name)


def _schedule(P: PrecodeStructure, certified: Dict[Number, int], n: int, budget: Optional[int]) -> List[Number]:
    """Scales certified during the build plus the geometric sweep up to the first failing scale."""
    schedule = sorted(certified, key=exact)
    proper = P.proper_levels()
    reach = max((exact(r) for r, level in certified.items() if level in proper), default=Fraction(0))
    for r in scale_schedule(P.space.scale_cap):
        if exact(r) <= reach:
            continue
        if not any(r_multiplicity(P.levels[i], r, budget) <= n + 1 for i in proper):
            break
        schedule.append(r)
    return [r for r in schedule if exact(r) > 0]


def _raise_failed(builder: str, level: int, properties: Dict[str, bool]):
    failed = [name for name, ok in properties.items() if not ok]
    if failed:
        raise ValidationError(f"{builder} builder broke {', '.join(failed)} at level {level}",
                              details={"level": level, "properties": properties})


def build_precode_asdim(space: FiniteMetricSpace, n: int, provider: ControlCoverProvider, x0: int = 0,
                        K: Optional[int] = None) -> Tuple[PrecodeStructure, BuilderTrace]:
    """
    (n+1)-precode from control covers of dimension at most n.

    Step k+1 asks for a cover with s = k+1+2M_k and t = 2(k+1), merges level
    k through it and sets M_{k+1} = 2M_k + N_{k+1}, where N_{k+1} is the
    control mesh. The build stops once one element covers the space or after
    K steps.

    Returns:
        The structure (validated as an (n+1)-precode) and its trace

    Raises:
        ValidationError: if a provider claim or an inductive property fails
    """
    x0 = space.check_index(x0)
    if provider.space_id != space.id:
        raise PreconditionError(f"provider covers {provider.space_id}, not {space.id}")
    cap = K if K is not None else DEFAULT_LEVEL_CAP
    levels = [Cover(space, [[x] for x in range(space.size)])]
    trace = BuilderTrace("asdim", n, x0)
    trace.levels.append({"level": 0, "M": 0, "properties": {"singletons": True}})
    certified: Dict[Number, int] = {}
    mesh_bound: Number = 0
    k = 0
    while len(levels[-1]) > 1 and k < cap:
        s = k + 1 + 2 * exact(mesh_bound)
        t = 2 * (k + 1)
        control = provider.cover(as_number(s), t)
        ball = space.ball(x0, k + 1, closed=True)
        alpha = control.container_of(ball.array)
        if alpha is None:
            raise ValidationError(f"no control element contains the closed ball B(x0, {k + 1})",
                                  details={"level": k + 1, "ball": list(ball.members)})
        merged, tau = _merge(levels[-1], control, alpha)
        current = Cover(space, merged)
        next_bound = as_number(2 * exact(mesh_bound) + exact(control.mesh))
        properties = _check_step(space, levels[-1], current, next_bound, k + 1, n, x0, k + 1, provider.budget)
        _raise_failed("asdim", k + 1, properties)
        trace.levels.append({
            "level": k + 1,
            "s": _json_number(as_number(s)),
            "t": t,
            "N": _json_number(control.mesh),
            "M": _json_number(next_bound),
            "mesh": _json_number(current.mesh),
            "alpha": alpha,
            "tau": tau,
            "elements": len(current),
            "properties": properties,
        })
        logger.debug(f"asdim level {k + 1}: {len(current)} elements, mesh {current.mesh} <= {next_bound}")
        levels.append(current)
        if len(current) > 1:
            certified[k + 1] = k + 1
        mesh_bound = next_bound
        k += 1
    if len(levels[-1]) > 1:
        logger.warning(f"asdim builder stopped at the level cap {cap} before absorption")

    P = _finish(space, levels, PrecodeKind(), f"asdim({space.id})", K)
    trace.schedule = _schedule(P, certified, n, provider.budget)
    validate_precode(P, n + 1, scales=trace.schedule, budget=provider.budget).raise_for_failures()
    logger.info(f"Built {P.name}: {len(P.levels)} levels, validated as a {n + 1}-precode")
    return P, trace


def build_precode_AN(space: FiniteMetricSpace, n: int, provider: ControlCoverProvider, x0: int = 0,
                     K: Optional[int] = None) -> Tuple[PrecodeStructure, BuilderTrace]:
    """
    (n+1)-precode of AN kind with base a = 14c.

    Step k+1 asks for a cover with s = 3^k + 2a^k and t = 2·3^k; level i has
    mesh at most a^i, ((3^i-1)/3)-multiplicity at most n+1 and an element
    holding the closed ball of radius (3^i-1)/3 around x0.
    """
    x0 = space.check_index(x0)
    if provider.space_id != space.id:
        raise PreconditionError(f"provider covers {provider.space_id}, not {space.id}")
    if provider.an_constants is None:
        provider.measure_an_constants()
    c, d = provider.an_constants
    if not (c >= d >= 2) or c.denominator != 1:
        raise PreconditionError(f"AN constants must satisfy c >= d >= 2 with integral c, got c={c}, d={d}")
    a = 14 * int(c)
    cap = K if K is not None else DEFAULT_LEVEL_CAP
    levels = [Cover(space, [[x] for x in range(space.size)])]
    trace = BuilderTrace("AN", n, x0, an_constants={"c": int(c), "d": _json_number(as_number(d)), "a": a})
    trace.levels.append({"level": 0, "M": 1, "properties": {"singletons": True}})
    certified: Dict[Number, int] = {}
    k = 0
    while len(levels[-1]) > 1 and k < cap:
        s = 3 ** k + 2 * a ** k
        t = 2 * 3 ** k
        radius = as_number(Fraction(3 ** (k + 1) - 1, 3))
        control = provider.cover(s, t)
        ball = space.ball(x0, radius, closed=True)
        alpha = control.container_of(ball.array)
        if alpha is None:
            raise ValidationError(f"no control element contains the closed ball B(x0, {radius})",
                                  details={"level": k + 1, "ball": list(ball.members)})
        merged, tau = _merge(levels[-1], control, alpha)
        current = Cover(space, merged)
        chain = 2 * exact(levels[-1].mesh) + c * (s + 4 * t) + d
        properties = _check_step(space, levels[-1], current, a ** (k + 1), radius, n, x0, radius, provider.budget)
        properties["mesh_chain"] = exact(current.mesh) <= chain <= a ** (k + 1)
        _raise_failed("AN", k + 1, properties)
        trace.levels.append({
            "level": k + 1,
            "s": s,
            "t": t,
            "N": _json_number(control.mesh),
            "M": a ** (k + 1),
            "chain_bound": _json_number(as_number(chain)),
            "mesh": _json_number(current.mesh),
            "alpha": alpha,
            "tau": tau,
            "elements": len(current),
            "properties": properties,
        })
        levels.append(current)
        if len(current) > 1:
            certified[radius] = k + 1
        k += 1
    if len(levels[-1]) > 1:
        logger.warning(f"AN builder stopped at the level cap {cap} before absorption")

    P = _finish(space, levels, PrecodeKind("AN", base=a, i0=0), f"AN({space.id})", K)
    trace.schedule = _schedule(P, certified, n, provider.budget)
    validate_precode(P, n + 1, scales=trace.schedule, budget=provider.budget).raise_for_failures()
    logger.info(f"Built {P.name}: {len(P.levels)} levels with base {a}, validated as a {n + 1}-precode")
    return P, trace
