"""
Batch verification suites.

Each suite is an ordered list of named checks built for a profile (``quick``
for CI, ``desk`` for the full sizes) and a seed. Checks run through joblib
threads; results are collected in submission order so reports are
byte-stable for a fixed seed.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from coarsetk.builders import ControlCoverProvider, build_precode_AN, build_precode_asdim
from coarsetk.coarse_maps import (
    CoarseMapRecord,
    certify_Bn,
    check_B_linear,
    check_Bn,
    check_Cn,
    check_coarse_equivalence,
    check_dimension_raising,
    check_dimension_raising_asdim,
    check_pushforward_multiplicity,
    check_pushforward_rmul,
    compose_Bn,
    compose_Cn,
    exhaustive_Bn,
    identity_map,
    map_from_function,
    product_Bn,
    product_Cn,
)
from coarsetk.config import Settings
from coarsetk.covers import Cover, lebesgue_holds, r_multiplicity
from coarsetk.dimension import (
    GENERATORS,
    component_families,
    cover_for_scales,
    product_zero_dim_witness,
    witness_from_disjoint_families,
    witness_over_schedule,
)
from coarsetk.errors import BudgetExceeded, CoarseTKError, PreconditionError
from coarsetk.metric_core import FiniteMetricSpace, _json_number, as_number, exact, scale_schedule
from coarsetk.precode import (
    build_ultrametric,
    cluster_space,
    example_clusters,
    example_dyadic,
    example_triadic,
    inverse_section,
    quotient_map,
    strong_triangle_violation,
    validate_precode,
)
from coarsetk.reports import BUDGET, FAIL, PASS, CheckVerdict, RunReport, stopwatch

logger = logging.getLogger(__name__)

SUITES = ("lemmas", "examples", "builders", "constructions", "closure")

PROFILES: Dict[str, Dict[str, Any]] = {
    "quick": {
        "dyadic": 32, "oracle_r": 8, "triadic": 3, "ultra_dyadic": 64, "ultra_triadic": 4,
        "asdim_line": 50, "asdim_plane": 10, "an_line": 300,
        "instances": 8, "instance_size": 60, "closure": 4,
        "grid": (0, 1, 2), "line": 40, "plane": 8,
    },
    "desk": {
        "dyadic": 128, "oracle_r": 16, "triadic": 4, "ultra_dyadic": 1024, "ultra_triadic": 6,
        "asdim_line": 200, "asdim_plane": 40, "an_line": 3000,
        "instances": 50, "instance_size": 300, "closure": 20,
        "grid": (0, 1, 2, 3, 5, 8), "line": 60, "plane": 15,
    },
}


@dataclass(frozen=True)
class SuiteCheck:
    theorem: str
    name: str
    run: Callable[[], Dict[str, Any]]


def _line(space_id: str, lo: int, hi: int) -> FiniteMetricSpace:
    return FiniteMetricSpace.lattice(space_id, [(lo, hi)], "l1")


def _plane(space_id: str, half: int) -> FiniteMetricSpace:
    return FiniteMetricSpace.lattice(space_id, [(-half, half), (-half, half)], "linf")


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------

def _dyadic_validation(N: int) -> Dict[str, Any]:
    report = validate_precode(example_dyadic(N), 2)
    return {"N": N, "levels": int(math.log2(N)) + 1, "holds": report.valid,
            "counterexample": report.failures[0] if report.failures else None}


@lru_cache(maxsize=None)
def _dyadic_quotient(N: int) -> CoarseMapRecord:
    P = example_dyadic(N)
    validate_precode(P, 2).raise_for_failures()
    return quotient_map(P)


def _dyadic_split(N: int, r: int, oracle: bool, budgets: Dict[str, int]) -> Dict[str, Any]:
    q = _dyadic_quotient(N)
    result = check_Bn(q, 2, r, **budgets)
    # 3^⌈log₂(r+1)⌉ bounds d(r) from above; it is not attained at every r
    bound = 3 ** math.ceil(math.log2(r + 1))
    values = {"r": r, "d": result.d, "bound": bound, "holds": result.exact and exact(result.d) <= bound}
    if oracle:
        reference = exhaustive_Bn(q, 2, r)
        values["oracle"] = reference
        values["holds"] = values["holds"] and exact(reference) == exact(result.d)
    return values


def _triadic_example(K: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    P = example_triadic(K)
    report = validate_precode(P, 2)
    report.raise_for_failures()
    bad_nesting = []
    for i in range(1, len(P.levels)):
        for j, element in enumerate(P.levels[i].elements):
            if len(element) == 3 ** i:
                children = sum(1 for parent in P.parents[i - 1].tolist() if parent == j)
                if children != 3:
                    bad_nesting.append({"level": i, "element": j, "children": children})
    certificate = check_Cn(quotient_map(P), 2, **budgets)
    return {"K": K, "c": as_number(certificate.c), "affine": certificate.affine.to_dict(),
            "holds": not bad_nesting and certificate.c <= 3,
            "counterexample": bad_nesting[0] if bad_nesting else None}


def _ultrametric_axioms(P_factory: Callable, seed: int) -> Dict[str, Any]:
    P = P_factory()
    validate_precode(P, 2).raise_for_failures()
    U = build_ultrametric(P)
    violation = strong_triangle_violation(U, seed=seed)
    return {"structure": P.name, "leaves": U.size, "holds": violation is None,
            "counterexample": {"triple": list(violation)} if violation else None}


def _cluster_equivalence() -> Dict[str, Any]:
    P = example_clusters()
    validate_precode(P, 1).raise_for_failures()
    U = build_ultrametric(P)
    q = quotient_map(P, U=U)
    g = inverse_section(P, U)
    report = check_coarse_equivalence(q, g)
    mesh0 = P.levels[0].mesh
    return {"S_U": report["S_X"], "S_X": report["S_Y"], "mesh_U0": mesh0,
            "holds": report["gf_is_identity"] and exact(report["S_Y"]) <= exact(mesh0)}


def _identity_split(size: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    f = identity_map(_line(f"line{size}", 0, size - 1))
    per_r = {}
    for r in scale_schedule(f.codomain.scale_cap):
        per_r[r] = check_Bn(f, 2, r, **budgets).d
    return {"per_r": per_r, "holds": all(exact(d) <= exact(r) for r, d in per_r.items())}


def _floor_condition_b(size: int) -> Dict[str, Any]:
    domain = _line(f"line{size}", 0, size - 1)
    codomain = _line(f"line{size}/3", 0, (size - 1) // 3)
    f = map_from_function(domain, codomain, lambda x: x // 3, name="floor3")
    result = check_B_linear(f)
    return {"d": result["d"], "exact": result["exact"], "holds": exact(result["d"]) <= 3}


def examples_suite(profile: Dict[str, Any], seed: int, budgets: Dict[str, int]) -> List[SuiteCheck]:
    N, K = profile["dyadic"], profile["triadic"]
    checks = [
        SuiteCheck("dyadic precode", f"validate dyadic N={N} as 2-precode", lambda: _dyadic_validation(N)),
    ]
    for r in range(1, N // 2 + 1):
        checks.append(SuiteCheck("dyadic precode", f"(B)_2 of q at r={r}",
                                 lambda r=r: _dyadic_split(N, r, r <= profile["oracle_r"], budgets)))
    ultra_N, ultra_K = profile["ultra_dyadic"], profile["ultra_triadic"]
    checks += [
        SuiteCheck("triadic precode", f"validate triadic K={K}, nesting, (C)_2 of q", lambda: _triadic_example(K, budgets)),
        SuiteCheck("ultrametric", f"strong triangle on dyadic N={ultra_N}",
                   lambda: _ultrametric_axioms(lambda: example_dyadic(ultra_N), seed)),
        SuiteCheck("ultrametric", f"strong triangle on triadic K={ultra_K}",
                   lambda: _ultrametric_axioms(lambda: example_triadic(ultra_K), seed)),
        SuiteCheck("zero-dimensional equivalence", "cluster space q and g", _cluster_equivalence),
        SuiteCheck("finite-to-one maps", "identity has (B)_2 with d <= r", lambda: _identity_split(32, budgets)),
        SuiteCheck("finite-to-one maps", "x -> floor(x/3) has condition (B) with d <= 3",
                   lambda: _floor_condition_b(profile["line"])),
    ]
    return checks


# ---------------------------------------------------------------------------
# lemmas (randomized)
# ---------------------------------------------------------------------------

def _random_cover(rng: np.random.Generator, space: FiniteMetricSpace) -> Cover:
    size = space.size
    cuts = np.unique(np.concatenate([[0, size], rng.integers(1, size, size=max(2, size // 8))]))
    elements = []
    for lo, hi in zip(cuts[:-1].tolist(), cuts[1:].tolist()):
        left = max(0, lo - int(rng.integers(0, 4)))
        right = min(size, hi + int(rng.integers(0, 4)))
        elements.append(list(range(left, right)))
    return Cover(space, elements)


def _random_map(rng: np.random.Generator, size: int, n: int, jitter: bool,
                tag: str) -> CoarseMapRecord:
    m = int(rng.integers(max(20, size // 2), size + 1))
    domain = _line(f"{tag}/X", 0, m - 1)
    top = (m - 1) // n
    codomain = _line(f"{tag}/Y", 0, top)
    table = np.arange(m) // n
    if jitter:
        moved = rng.random(m) < 0.2
        table = np.clip(table + moved * rng.integers(-1, 2, size=m), 0, top)
    return CoarseMapRecord(domain, codomain, table, name=f"f{tag}")


def _lemma_multiplicity(seed: int, size: int) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f = _random_map(rng, size, n, jitter=False, tag=f"mul{seed}")
    C = _random_cover(rng, f.domain)
    return {"n": n, **check_pushforward_multiplicity(f, C, n)}


def _lemma_rmul(seed: int, size: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f = _random_map(rng, size, n, jitter=True, tag=f"rmul{seed}")
    r = int(min(rng.integers(1, 6), exact(f.codomain.scale_cap)))
    result = check_Bn(f, n, r, **budgets)
    if not result.exact:
        raise BudgetExceeded(f"(B)_{n} at r={r} did not complete", lower=result.d_lower, upper=result.d_upper)
    C = _random_cover(rng, f.domain)
    m = r_multiplicity(C, result.d) - 1
    values = check_dimension_raising_asdim(f, n, r, result.d, C, m)
    values.update(check_pushforward_rmul(f, C, r, result.d, n))
    return {"n": n, "m": m, **values}


def _lemma_linear(seed: int, size: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f = _random_map(rng, size, n, jitter=True, tag=f"lin{seed}")
    certificate = check_Cn(f, n, **budgets)
    scales = [r for r in certificate.per_r if exact(r) >= exact(certificate.r0)]
    r = scales[int(rng.integers(0, len(scales)))]
    d = as_number(certificate.c * exact(r))
    C = _random_cover(rng, f.domain)
    return {"n": n, "c": as_number(certificate.c), **check_pushforward_rmul(f, C, r, d, n)}


def _dimension_raising(seed: int, size: int) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    m = int(rng.integers(max(20, size // 2), size + 1))
    domain = _line(f"raise{seed}/X", 0, m - 1)
    codomain = _line(f"raise{seed}/Y", 0, (m - 1) // 3)
    f = map_from_function(domain, codomain, lambda x: x // 3, name=f"raise{seed}")
    d_linear = exact(check_B_linear(f)["d"])
    r = int(rng.integers(1, 4))
    t = math.ceil(d_linear * r)
    C = cover_for_scales(domain, 0, t)
    return {"d": as_number(d_linear), **check_dimension_raising(f, d_linear, C, r)}


def lemmas_suite(profile: Dict[str, Any], seed: int, budgets: Dict[str, int]) -> List[SuiteCheck]:
    size = profile["instance_size"]
    checks = []
    for i in range(profile["instances"]):
        s = seed * 1000 + i
        checks += [
            SuiteCheck("pushforward multiplicity", f"n-to-1 instance {i}", lambda s=s: _lemma_multiplicity(s, size)),
            SuiteCheck("pushforward r-multiplicity", f"(B)_n instance {i}", lambda s=s: _lemma_rmul(s, size, budgets)),
            SuiteCheck("pushforward r-multiplicity", f"(C)_n instance {i}", lambda s=s: _lemma_linear(s, size, budgets)),
        ]
    for i in range(max(1, profile["instances"] // 5)):
        s = seed * 1000 + 500 + i
        checks.append(SuiteCheck("dimension raising", f"condition (B) instance {i}",
                                 lambda s=s: _dimension_raising(s, size)))
    return checks


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _asdim_build(space: FiniteMetricSpace, n: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    provider = ControlCoverProvider(space, n, "grid-brick", budget=budgets.get("clique_budget"))
    x0 = space.index_of("0") if space.geometry.dim == 1 else space.index_of("(0,0)")
    P, trace = build_precode_asdim(space, n, provider, x0)
    q = quotient_map(P)
    failures = []
    for r in trace.schedule:
        result = check_Bn(q, n + 1, r, **budgets)
        bound = P.base ** P.schedule[r]
        if not result.exact:
            failures.append({"r": _json_number(r), "d_interval": [result.d_lower, result.d_upper]})
        elif exact(result.d) > bound:
            failures.append({"r": _json_number(r), "d": _json_number(result.d), "bound": bound})
    return {"space": space.id, "levels": len(P.levels), "schedule": trace.schedule,
            "properties_passed": trace.passed, "holds": trace.passed and not failures,
            "counterexample": failures[0] if failures else None}


def _an_build(space: FiniteMetricSpace, n: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    provider = ControlCoverProvider(space, n, "grid-brick", budget=budgets.get("clique_budget"))
    P, trace = build_precode_AN(space, n, provider, space.index_of("0"))
    a = P.base
    meshes_ok = all(exact(level.mesh) <= a ** i for i, level in enumerate(P.levels))
    certificate = check_Cn(quotient_map(P), n + 1, scales=trace.schedule, **budgets)
    # certify_Bn raises on a bracketed scale, so every per_r value is exact
    complete = set(certificate.per_r) == set(trace.schedule)
    failures = [{"r": _json_number(r), "d": _json_number(d), "bound": a ** P.schedule[r]}
                for r, d in certificate.per_r.items() if exact(d) > a ** P.schedule[r]]
    return {"space": space.id, "base": a, "levels": len(P.levels), "c": as_number(certificate.c),
            "an_constants": trace.an_constants,
            "holds": meshes_ok and trace.passed and complete and not failures,
            "counterexample": failures[0] if failures else None}


def _trivial_build() -> Dict[str, Any]:
    space = _line("point", 0, 0)
    provider = ControlCoverProvider(space, 0, "grid-brick")
    P, _ = build_precode_asdim(space, 0, provider, 0)
    return {"levels": len(P.levels), "holds": len(P.levels) == 2 and P.validated_n == 1}


def _ultrametric_build() -> Dict[str, Any]:
    space = cluster_space()
    provider = ControlCoverProvider(space, 0, "greedy-net", generator=GENERATORS["components"])
    P, trace = build_precode_asdim(space, 0, provider, 0)
    U = build_ultrametric(P)
    q = quotient_map(P, U=U)
    g = inverse_section(P, U)
    report = check_coarse_equivalence(q, g)
    return {"levels": len(P.levels), "S_X": report["S_Y"], "holds": report["gf_is_identity"] and trace.passed}


def builders_suite(profile: Dict[str, Any], seed: int, budgets: Dict[str, int]) -> List[SuiteCheck]:
    line, plane, an_line = profile["asdim_line"], profile["asdim_plane"], profile["an_line"]
    return [
        SuiteCheck("asdim builder", f"Z[-{line},{line}] n=1",
                   lambda: _asdim_build(_line(f"Z{line}", -line, line), 1, budgets)),
        SuiteCheck("asdim builder", f"Z^2[-{plane},{plane}] linf n=2",
                   lambda: _asdim_build(_plane(f"Z2_{plane}", plane), 2, budgets)),
        SuiteCheck("asdim builder", "one-point space", _trivial_build),
        SuiteCheck("asdim builder", "cluster space n=0 gives an ultrametric", _ultrametric_build),
        SuiteCheck("AN builder", f"Z[-{an_line},{an_line}] n=1",
                   lambda: _an_build(_line(f"Z{an_line}", -an_line, an_line), 1, budgets)),
    ]


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

def _expansion(space: FiniteMetricSpace, s: int, t: int, an_constants: Tuple[Fraction, Fraction],
               budgets: Dict[str, int]) -> Dict[str, Any]:
    budget = budgets.get("clique_budget")
    C = cover_for_scales(space, s, t, an_constants=an_constants, budget=budget)
    s_mul = r_multiplicity(C, s, budget)
    families = 2 if space.geometry.dim == 1 else 3
    holds = s_mul <= families and lebesgue_holds(C, t, budget)
    return {"s": s, "t": t, "s_multiplicity": s_mul, "mesh": C.mesh,
            "mesh_bound": C.certificates["mesh_bound"], "holds": holds}


def _witness_schedule(space: FiniteMetricSpace, n: int) -> Dict[str, Any]:
    witness = witness_over_schedule(space, n)
    control = witness.control()
    return {"space": space.id, "n": witness.n, "linear": control["linear"], "affine": control["affine"],
            "holds": witness.n <= n}


def _product_witness(r: int) -> Dict[str, Any]:
    clusters = cluster_space()
    line = _line("Zline", 0, 20)
    Wx = witness_from_disjoint_families(component_families(clusters, r))
    Wy = witness_from_disjoint_families(GENERATORS["blocks"](line, r))
    W = product_zero_dim_witness(Wx, Wy, r)
    return {"r": r, "n": W.n, "holds": W.n == Wy.n}


def constructions_suite(profile: Dict[str, Any], seed: int, budgets: Dict[str, int]) -> List[SuiteCheck]:
    spaces = [_line("Zgrid", -profile["line"], profile["line"]), _plane("Z2grid", profile["plane"])]
    checks = []
    for space in spaces:
        provider = ControlCoverProvider(space, space.geometry.dim, "grid-brick")
        constants = provider.measure_an_constants()
        for s in profile["grid"]:
            for t in profile["grid"]:
                checks.append(SuiteCheck("Lebesgue expansion", f"{space.id} s={s} t={t}",
                                         lambda space=space, s=s, t=t, c=constants:
                                         _expansion(space, s, t, c, budgets)))
        checks.append(SuiteCheck("dimension witness", f"{space.id} over the schedule",
                                 lambda space=space: _witness_schedule(space, space.geometry.dim)))
    checks.append(SuiteCheck("dimension witness", "cluster space x Z product", lambda: _product_witness(3)))
    return checks


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------

def _halving(tag: str, size: int, step: int) -> CoarseMapRecord:
    domain = _line(f"{tag}/X", 0, size - 1)
    codomain = _line(f"{tag}/Y", 0, (size - 1) // step)
    return map_from_function(domain, codomain, lambda x: x // step, name=tag)


def _closure_compose(seed: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    a, b = int(rng.integers(2, 4)), int(rng.integers(2, 4))
    size = int(rng.integers(24, 48))
    f = _halving(f"cf{seed}", size, a)
    middle = f.codomain
    g = map_from_function(middle, _line(f"cg{seed}/Y", 0, (middle.size - 1) // b), lambda x: x // b, name=f"g{seed}")
    scales = [r for r in scale_schedule(g.codomain.scale_cap) if exact(r) <= 4]
    certify_Bn(f, a, scale_schedule(f.codomain.scale_cap), **budgets)
    certify_Bn(g, b, scales, **budgets)
    composed = compose_Bn(f, g, scales, **budgets)
    return {"n": a * b, "observed": composed.certificates["Bn"].per_r,
            "predicted": composed.certificates["Bn_prediction"]["per_r"], "holds": True}


def _closure_product(seed: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    a = int(rng.integers(2, 4))
    f = _halving(f"pf{seed}", int(rng.integers(8, 14)), a)
    g = identity_map(_line(f"pg{seed}", 0, int(rng.integers(3, 7))))
    scales = [1, 2]
    certify_Bn(f, a, scales, **budgets)
    certify_Bn(g, 1, scales, **budgets)
    product = product_Bn(f, g, scales, **budgets)
    return {"n": a, "observed": product.certificates["Bn"].per_r, "holds": True}


def _closure_dyadic_product(budgets: Dict[str, int]) -> Dict[str, Any]:
    P = example_dyadic(8)
    validate_precode(P, 2).raise_for_failures()
    q = quotient_map(P)
    identity = identity_map(_line("pid", 0, 3))
    scales = [1, 2, 3]
    certify_Bn(q, 2, scales, **budgets)
    certify_Bn(identity, 1, scales, **budgets)
    product = product_Bn(q, identity, scales, **budgets)
    return {"observed": product.certificates["Bn"].per_r,
            "predicted": product.certificates["Bn_prediction"]["per_r"], "holds": True}


def _closure_linear(seed: int, budgets: Dict[str, int]) -> Dict[str, Any]:
    f = _halving(f"lf{seed}", 24, 2)
    g = map_from_function(f.codomain, _line(f"lg{seed}/Y", 0, 5), lambda x: x // 2, name=f"lg{seed}")
    check_Cn(f, 2, **budgets)
    check_Cn(g, 2, **budgets)
    composed = compose_Cn(f, g, **budgets)
    h = identity_map(_line(f"lh{seed}", 0, 5))
    check_Cn(h, 1, [1, 2, 4], **budgets)
    product = product_Cn(g, h, [1, 2, 4], **budgets)
    return {"compose_c": composed.certificates["Cn_prediction"]["c"],
            "product_c": product.certificates["Cn_prediction"]["c"], "holds": True}


def closure_suite(profile: Dict[str, Any], seed: int, budgets: Dict[str, int]) -> List[SuiteCheck]:
    checks = []
    for i in range(profile["closure"]):
        s = seed * 1000 + i
        checks.append(SuiteCheck("composition closure", f"instance {i}", lambda s=s: _closure_compose(s, budgets)))
        checks.append(SuiteCheck("product closure", f"instance {i}", lambda s=s: _closure_product(s, budgets)))
    checks.append(SuiteCheck("product closure", "dyadic q x identity", lambda: _closure_dyadic_product(budgets)))
    checks.append(SuiteCheck("linear closure", "compose and product of (C)_n maps",
                             lambda: _closure_linear(seed, budgets)))
    return checks


SUITE_BUILDERS = {
    "lemmas": lemmas_suite,
    "examples": examples_suite,
    "builders": builders_suite,
    "constructions": constructions_suite,
    "closure": closure_suite,
}


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _execute(check: SuiteCheck) -> CheckVerdict:
    with stopwatch() as elapsed:
        counterexample = None
        try:
            values = check.run()
            verdict = PASS if values.pop("holds", True) else FAIL
            counterexample = values.pop("counterexample", None)
        except BudgetExceeded as e:
            verdict, values = BUDGET, {"lower": e.lower, "upper": e.upper}
        except CoarseTKError as e:
            verdict, values = FAIL, {}
            counterexample = {"error": str(e), **e.details}
        seconds = elapsed()
    if verdict != PASS:
        logger.warning(f"{check.theorem}: {check.name} -> {verdict}")
    return CheckVerdict(check.theorem, check.name, verdict, values, counterexample, seconds)


def collect_checks(suite: str, profile: str = "quick", seed: int = 7,
                   settings: Optional[Settings] = None) -> List[SuiteCheck]:
    if not suite:
        raise PreconditionError("a suite name is required")
    if profile not in PROFILES:
        raise PreconditionError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    names = SUITES if suite == "all" else (suite,)
    unknown = [name for name in names if name not in SUITE_BUILDERS]
    if unknown:
        raise PreconditionError(f"unknown suite {unknown[0]!r}; expected one of {SUITES + ('all',)}")
    settings = settings or Settings(seed=seed)
    budgets = {"clique_budget": settings.clique_budget, "coloring_budget": settings.coloring_budget}
    checks: List[SuiteCheck] = []
    for name in names:
        checks += SUITE_BUILDERS[name](PROFILES[profile], seed, budgets)
    return checks


def run_suite(suite: str, profile: str = "quick", seed: int = 7, settings: Optional[Settings] = None,
              timings: bool = False) -> RunReport:
    """
    Run one suite (or ``all``) and collect the verdicts.

    Raises:
        PreconditionError: for an empty or unknown suite or profile name
    """
    settings = settings or Settings(seed=seed)
    checks = collect_checks(suite, profile, seed, settings)
    logger.info(f"Running suite {suite} ({profile}, seed {seed}): {len(checks)} checks on {settings.threads} threads")
    verdicts = Parallel(n_jobs=settings.threads, prefer="threads")(
        delayed(_execute)(check)
        for check in tqdm(checks, desc=f"verify {suite}", disable=not settings.progress)
    )
    report = RunReport(
        command="verify",
        config={"suite": suite, "profile": profile, "clique_budget": settings.clique_budget,
                "coloring_budget": settings.coloring_budget},
        seed=seed,
        checks=list(verdicts),
        timings=timings,
    )
    counts = report.summary()
    logger.info(f"Suite {suite} finished: {counts[PASS]} passed, {counts[FAIL]} failed, {counts[BUDGET]} over budget")
    return report
