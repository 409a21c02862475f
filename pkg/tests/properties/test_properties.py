"""Property-based tests for the exact checkers."""

import networkx as nx
import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from coarsetk.coarse_maps import CoarseMapRecord, check_Bn, check_pushforward_multiplicity, min_split
from coarsetk.covers import Cover, lebesgue_holds, lebesgue_number, r_multiplicity
from coarsetk.graph_kernels import n_coloring
from coarsetk.metric_core import FiniteMetricSpace
from coarsetk.precode import build_ultrametric, example_dyadic, strong_triangle_violation, validate_precode
from tests.fixtures.test_helpers import brute_min_split, brute_r_multiplicity, full_matrix

PROPERTY_SETTINGS = settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def path_space(draw, min_points=2, max_points=8):
    """
    Points on a line at random positive integer gaps.

    Returns:
        Explicit-matrix FiniteMetricSpace
    """
    gaps = draw(st.lists(st.integers(min_value=1, max_value=4), min_size=min_points - 1, max_size=max_points - 1))
    positions = np.concatenate([[0], np.cumsum(gaps)]).astype(np.int64)
    return FiniteMetricSpace.from_points("path", positions)


@st.composite
def interval_cover(draw, max_points=8, space=None):
    """An interval cover of a path space; every uncovered point gets a singleton."""
    space = space if space is not None else draw(path_space(min_points=2, max_points=max_points))
    n = space.size
    elements = []
    for start in range(n):
        if start == 0 or draw(st.booleans()):
            length = draw(st.integers(min_value=1, max_value=n - start))
            elements.append(list(range(start, start + length)))
    covered = set().union(*map(set, elements))
    elements += [[x] for x in range(n) if x not in covered]
    return Cover(space, elements)


@st.composite
def fiber_map(draw):
    """A map from a path space onto a short lattice line."""
    domain = draw(path_space(min_points=3, max_points=8))
    size = draw(st.integers(min_value=1, max_value=3))
    codomain = FiniteMetricSpace.lattice(f"line{size}", [(0, size - 1)], "l1")
    table = draw(st.lists(st.integers(min_value=0, max_value=size - 1),
                          min_size=domain.size, max_size=domain.size))
    return CoarseMapRecord(domain, codomain, table, "f")


class TestCoverProperties:
    """Scale invariants of covers"""

    @PROPERTY_SETTINGS
    @given(C=interval_cover(), r=st.integers(min_value=0, max_value=6))
    def test_r_multiplicity_matches_brute_force(self, C, r):
        assert r_multiplicity(C, r) == brute_r_multiplicity(C, r)

    @PROPERTY_SETTINGS
    @given(C=interval_cover(), r=st.integers(min_value=0, max_value=6))
    def test_r_multiplicity_is_monotone(self, C, r):
        """Test that a larger scale never meets fewer elements"""
        assert C.multiplicity <= r_multiplicity(C, r) <= r_multiplicity(C, r + 1) <= len(C)

    @PROPERTY_SETTINGS
    @given(C=interval_cover(), r=st.integers(min_value=1, max_value=6))
    def test_lebesgue_is_downward_closed(self, C, r):
        if lebesgue_holds(C, r):
            assert lebesgue_holds(C, r - 1)

    @PROPERTY_SETTINGS
    @given(C=interval_cover())
    def test_ball_certificate_never_beats_exact(self, C):
        exact_value = lebesgue_number(C, "exact").value
        assert lebesgue_number(C, "ball_certificate").value <= exact_value
        assert lebesgue_holds(C, exact_value)


class TestMapProperties:
    """Splitting and pushforward bounds"""

    @PROPERTY_SETTINGS
    @given(space=path_space(max_points=7), n=st.integers(min_value=1, max_value=3))
    def test_min_split_matches_brute_force(self, space, n):
        points = np.arange(space.size)
        assert min_split(space, points, n).key == brute_min_split(full_matrix(space), points, n)

    @PROPERTY_SETTINGS
    @given(f=fiber_map(), r=st.integers(min_value=0, max_value=2))
    def test_more_parts_never_need_more(self, f, r):
        """Test that (B)_n values do not increase with n"""
        r = min(r, f.codomain.scale_cap)
        values = [check_Bn(f, n, r).d for n in (1, 2, 3)]
        assert values == sorted(values, reverse=True)

    @PROPERTY_SETTINGS
    @given(f=fiber_map(), data=st.data())
    def test_pushforward_multiplicity_bound(self, f, data):
        """Test mul(f(C)) <= mul(C) times the largest fiber"""
        C = data.draw(interval_cover(space=f.domain))
        assert check_pushforward_multiplicity(f, C)["holds"]


class TestStructureProperties:
    @settings(max_examples=6, deadline=None)
    @given(exponent=st.integers(min_value=0, max_value=5))
    def test_dyadic_ultrametric(self, exponent):
        """Test the strong triangle inequality on every dyadic structure"""
        P = example_dyadic(2 ** exponent)
        validate_precode(P, 2).raise_for_failures()
        assert strong_triangle_violation(build_ultrametric(P)) is None

    @PROPERTY_SETTINGS
    @given(nodes=st.integers(min_value=1, max_value=9), p=st.floats(min_value=0.1, max_value=0.7),
           seed=st.integers(min_value=0, max_value=2 ** 16), n=st.integers(min_value=1, max_value=4))
    def test_coloring_is_proper(self, nodes, p, seed, n):
        """Test that a returned coloring is proper and uses at most n colors"""
        graph = nx.gnp_random_graph(nodes, p, seed=seed)
        coloring = n_coloring(graph, n)
        if coloring is None:
            assert n < nodes
            return
        assert set(coloring) == set(graph.nodes)
        assert all(0 <= color < n for color in coloring.values())
        assert all(coloring[u] != coloring[v] for u, v in graph.edges)
