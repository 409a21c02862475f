"""
Dimension witness tests for coarsetk
"""

import pytest

from coarsetk.covers import Cover
from coarsetk.dimension import (
    GENERATORS,
    DisjointFamilyList,
    block_families,
    brick_families,
    certify_cover,
    component_families,
    cover_for_scales,
    expand_to_lebesgue_cover,
    greedy_net_families,
    product_zero_dim_witness,
    witness_from_disjoint_families,
    witness_over_schedule,
)
from coarsetk.errors import PreconditionError, ValidationError
from coarsetk.metric_core import FiniteMetricSpace
from tests.fixtures.test_helpers import sample_space


@pytest.fixture(scope="module")
def tree4():
    """Two pairs at distance 9, partners at distance 3"""
    return FiniteMetricSpace.tree("tree4", [[0, 1, 2, 3], [0, 0, 1, 1], [0, 0, 0, 0]], base=3)


@pytest.fixture(scope="module")
def line4():
    return FiniteMetricSpace.lattice("line4", [(0, 3)], "l1")


class TestGenerators:
    """Disjoint family generators"""

    def test_blocks_alternate(self, line16):
        """Test that blocks of length r+1 alternate between two families"""
        F = block_families(line16, 3)
        assert F.n == 1
        assert [list(e.members) for e in F.families[0]] == [list(range(0, 4)), list(range(8, 12))]
        assert [list(e.members) for e in F.families[1]] == [list(range(4, 8)), list(range(12, 16))]
        assert F.mesh == 3

    def test_blocks_need_a_line(self, plane5):
        """Test that the block generator refuses two-dimensional lattices"""
        with pytest.raises(PreconditionError):
            block_families(plane5, 2)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_bricks_use_three_families(self, plane5, r):
        """Test that shifted bricks give at most three r-disjoint families"""
        F = brick_families(plane5, r)
        assert F.n <= 2
        assert F.mesh <= 2 * (r + 1) - 1
        F.verify()

    def test_bricks_on_a_line(self, line16):
        """Test that bricks reduce to blocks on a line"""
        assert brick_families(line16, 2).generator == "blocks"

    def test_greedy_net(self):
        """Test that the greedy net generator verifies on an explicit space"""
        F = greedy_net_families(sample_space("square"), 1)
        F.verify()
        assert F.generator == "greedy-net"

    def test_components_on_tree(self, tree4):
        """Test that r-components of a tree are one family"""
        F = component_families(tree4, 3)
        assert F.n == 0
        assert [list(e.members) for e in F.families[0]] == [[0, 1], [2, 3]]

    def test_registry(self):
        """Test the generator names"""
        assert set(GENERATORS) == {"blocks", "bricks", "greedy-net", "components"}


class TestDisjointFamilyList:
    """Verification of hand-made family lists"""

    def test_overlapping_family(self, line16):
        """Test that a family with close elements is reported with its pair"""
        family = [line16.point_set(range(0, 4)), line16.point_set(range(5, 16))]
        F = DisjointFamilyList(line16, [family], 2)
        with pytest.raises(ValidationError) as info:
            F.verify()
        assert info.value.details["pair"] == [3, 5]

    def test_uncovered_family(self, line16):
        """Test that a family list missing points is not a witness"""
        F = DisjointFamilyList(line16, [[line16.point_set(range(0, 4))]], 1)
        F.verify(as_witness=False)
        with pytest.raises(ValidationError):
            witness_from_disjoint_families(F)


class TestWitnesses:
    """Witnesses over a scale schedule"""

    def test_line_over_schedule(self, line16):
        """Test a one-dimensional witness of the line and its control function"""
        W = witness_over_schedule(line16, 1, block_families, [1, 2, 4])
        assert W.n == 1
        assert W.scale_range == (1, 4)
        control = W.control()
        assert control["table"] == {"1": 1, "2": 2, "4": 4}
        assert control["linear"] == {"c": "1"}
        assert control["affine"] == {"c": "1", "d": "0"}

    def test_too_many_families(self, line16):
        """Test that a dimension bound below the generator's family count fails"""
        with pytest.raises(ValidationError) as info:
            witness_over_schedule(line16, 0, block_families, [1])
        assert info.value.details["families"] == 2

    def test_transcript(self, line16):
        """Test the per-scale transcript"""
        W = witness_from_disjoint_families(block_families(line16, 3))
        transcript = W.to_json()["per_scale"]["3"]
        assert transcript["form"] == "disjoint-families"
        assert transcript["families"] == 2
        assert transcript["elements"] == 4

    def test_empty_schedule(self, line16):
        """Test that an empty schedule is refused"""
        with pytest.raises(PreconditionError):
            witness_over_schedule(line16, 1, block_families, [])


class TestExpansion:
    """Disjoint families to Lebesgue covers"""

    def test_expand_blocks(self, line16):
        """Test the expansion of 5-disjoint blocks at s = t = 1"""
        C = expand_to_lebesgue_cover(block_families(line16, 5), 1, 1)
        assert [list(e.members) for e in C.elements] == [
            list(range(0, 7)), list(range(11, 16)), list(range(5, 13))]
        assert C.certificates["s_multiplicity"] == 2
        assert C.certificates["mesh"] == 7
        assert C.certificates["mesh_bound"] == 9

    def test_insufficient_separation(self, line16):
        """Test that r < s + 4t is a precondition failure"""
        with pytest.raises(PreconditionError):
            expand_to_lebesgue_cover(block_families(line16, 3), 1, 1)

    def test_an_mesh_bound(self, line16):
        """Test the mesh bound c(s+4t)+d"""
        F = block_families(line16, 5)
        C = expand_to_lebesgue_cover(F, 1, 1, an_constants=(2, 0))
        assert C.certificates["an_mesh_bound"] == 10
        with pytest.raises(ValidationError):
            expand_to_lebesgue_cover(F, 1, 1, an_constants=(1, 0))

    def test_cover_for_scales(self, line16):
        """Test generation at r = s + 4t followed by expansion"""
        C = cover_for_scales(line16, 1, 1)
        assert C.mesh == 7
        assert C.certificates["t"] == 1

    def test_certify_cover(self, line16):
        """Test both cover forms on the expanded cover"""
        C = cover_for_scales(line16, 1, 1)
        assert certify_cover(C, 1, s=1, t=1)["passed"]
        transcript = certify_cover(C, 0, s=1)
        assert transcript["s_multiplicity"] == 2
        assert not transcript["passed"]


class TestProductWitness:
    """Zero-dimensional factor times a witness"""

    def test_product(self, tree4, line4):
        """Test that a 0-dimensional tree times a line gives two families"""
        Wx = witness_over_schedule(tree4, 0, component_families, [2])
        Wy = witness_over_schedule(line4, 1, block_families, [2])
        W = product_zero_dim_witness(Wx, Wy)
        F = W.per_scale[2]
        assert W.n == 1
        assert F.space.size == 16
        assert F.mesh == 2
        assert W.transcripts[2]["mesh_bound_2d"] == 4
        assert isinstance(Cover(F.space, F.elements()), Cover)

    def test_positive_dimensional_left_factor(self, line4):
        """Test that the left witness must be 0-dimensional"""
        Wy = witness_over_schedule(line4, 1, block_families, [2])
        with pytest.raises(PreconditionError):
            product_zero_dim_witness(Wy, Wy)

    def test_no_common_scale(self, tree4, line4):
        """Test that witnesses must share a scale"""
        Wx = witness_over_schedule(tree4, 0, component_families, [2])
        Wy = witness_over_schedule(line4, 1, block_families, [3])
        with pytest.raises(PreconditionError):
            product_zero_dim_witness(Wx, Wy)
