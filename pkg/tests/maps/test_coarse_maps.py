"""
Coarse map checker tests for coarsetk
"""

from fractions import Fraction

import numpy as np
import pytest

from coarsetk.coarse_maps import (
    CoarseMapRecord,
    certify_Bn,
    check_B_linear,
    check_Bn,
    check_close,
    check_Cn,
    check_coarse_equivalence,
    check_dimension_raising,
    check_dimension_raising_asdim,
    check_pushforward_multiplicity,
    check_pushforward_rmul,
    coarse_density,
    compose,
    compose_Bn,
    compose_Cn,
    exhaustive_Bn,
    exhaustive_min_split,
    fit_moduli,
    identity_map,
    map_from_function,
    min_split,
    product_Bn,
    product_Cn,
    product_map,
    properness_table,
)
from coarsetk.covers import Cover
from coarsetk.errors import PreconditionError
from coarsetk.metric_core import FiniteMetricSpace
from tests.fixtures.test_helpers import brute_Bn, sample_space


def line(size, space_id=None):
    return FiniteMetricSpace.lattice(space_id or f"line{size}", [(0, size - 1)], "l1")


@pytest.fixture
def quarter(line16):
    """x -> floor(x/4) from [0, 15] onto [0, 3]"""
    return map_from_function(line16, line(4), lambda x: x // 4, name="quarter")


@pytest.fixture
def third():
    """x -> floor(x/3) from [0, 11] onto [0, 3]"""
    return map_from_function(line(12), line(4), lambda x: x // 3, name="third")


@pytest.fixture
def half():
    """x -> floor(x/2) from [0, 3] onto [0, 1]"""
    return map_from_function(line(4), line(2), lambda x: x // 2, name="half")


class TestMapRecord:
    """Tables, fibers and moduli"""

    def test_fibers(self, quarter):
        """Test fibers and preimages of the quarter map"""
        assert quarter.fiber(1).tolist() == [4, 5, 6, 7]
        assert quarter.preimage(np.array([0, 3])).tolist() == [0, 1, 2, 3, 12, 13, 14, 15]
        assert quarter.max_fiber == 4
        assert quarter.is_surjective
        assert quarter(9) == 2

    def test_table_length(self, line16):
        """Test that the table must cover the whole domain"""
        with pytest.raises(PreconditionError):
            CoarseMapRecord(line16, line(4), [0, 1, 2])

    def test_table_range(self, line16):
        """Test that images must be codomain points"""
        with pytest.raises(PreconditionError):
            CoarseMapRecord(line16, line(4), np.arange(16))

    def test_doubling_moduli(self):
        """Test the exact moduli and fits of x -> 2x"""
        f = map_from_function(line(8), line(15), lambda x: 2 * x, name="double", by_label=True)
        fit_moduli(f)
        assert f.delta_modulus == {r: 2 * r for r in range(8)}
        assert f.delta(3) == 6
        assert f.fitted["lipschitz"] == {"c": 2}
        assert f.fitted["asymptotic_lipschitz"] == {"c": 2, "b": 0}
        assert f.fitted["quasi_isometry"] == {"c": 2, "b": 0, "R": 1}
        assert coarse_density(f) == 1

    def test_moduli_serialized(self, quarter):
        """Test that moduli are written with string keys"""
        data = quarter.to_json(include_moduli=True)
        assert data["delta_modulus"]["4"] == 1
        assert data["table"][:5] == [0, 0, 0, 0, 1]

    def test_properness(self, quarter):
        """Test the properness table of the quarter map"""
        assert properness_table(quarter, [0, 1]) == {0: 3, 1: 7}


class TestComposition:
    """Composition, products and closeness"""

    def test_compose_with_identity(self, quarter):
        """Test that composing with the identity keeps the table"""
        composed = compose(quarter, identity_map(quarter.codomain))
        assert composed.table.tolist() == quarter.table.tolist()

    def test_compose_mismatch(self, quarter):
        """Test that codomain and domain must agree"""
        with pytest.raises(PreconditionError):
            compose(quarter, quarter)

    def test_product_map(self, half):
        """Test the index layout of a product map"""
        f = product_map(identity_map(line(4)), half)
        assert f.domain.size == 16
        assert f.codomain.size == 8
        assert f(2 * 4 + 3) == 2 * 2 + 1

    def test_close(self, quarter):
        """Test the displacement between two maps"""
        shifted = map_from_function(quarter.domain, quarter.codomain, lambda x: min(x // 4 + 1, 3))
        assert check_close(quarter, shifted) == 1
        with pytest.raises(PreconditionError):
            check_close(quarter, identity_map(quarter.domain))

    def test_coarse_equivalence(self, quarter):
        """Test that the quarter map and y -> 4y are coarse inverses"""
        g = map_from_function(quarter.codomain, quarter.domain, lambda y: 4 * y, name="times4")
        report = check_coarse_equivalence(quarter, g)
        assert report["S_X"] == 3
        assert report["S_Y"] == 0
        assert report["fg_is_identity"] and not report["gf_is_identity"]
        assert report["verdict"] == "equivalent"


class TestSplitting:
    """(B)_n values"""

    def test_min_split(self, line16):
        """Test minimal splits of eight consecutive points"""
        assert min_split(line16, np.arange(8), 2).key == 3
        split = min_split(line16, np.arange(8), 1)
        assert split.key == 7
        assert split.previous == 6

    def test_few_points(self, line16):
        """Test that at most n points split into singletons"""
        assert min_split(line16, np.array([0, 15]), 2).key == 0

    @pytest.mark.parametrize("n,r,expected", [(1, 0, 3), (2, 0, 1), (2, 1, 3), (4, 1, 1), (2, 3, 7)])
    def test_quarter_map(self, quarter, n, r, expected):
        """Test (B)_n of the quarter map"""
        result = check_Bn(quarter, n, r)
        assert result.exact
        assert result.d == expected

    def test_identity(self, line16):
        """Test that the identity needs at most d = r"""
        f = identity_map(line16)
        for r in (0, 1, 4, 7):
            assert check_Bn(f, 1, r).d == r

    def test_counterexample(self, quarter):
        """Test that the transcript names a set forcing the reported d"""
        result = check_Bn(quarter, 2, 1)
        assert len(result.decomposition) == 2
        assert all(quarter.domain.diameter(part) <= 3 for part in result.decomposition)
        assert result.counterexample["d"] == 2
        assert result.sets_checked == 3

    def test_threads(self, quarter):
        """Test that threading does not change the value"""
        assert check_Bn(quarter, 2, 1, threads=2).d == check_Bn(quarter, 2, 1).d

    def test_preconditions(self, quarter):
        """Test that n < 1 and r beyond the scale cap are refused"""
        with pytest.raises(PreconditionError):
            check_Bn(quarter, 0, 1)
        with pytest.raises(PreconditionError):
            check_Bn(quarter, 1, 4)

    def test_against_brute_force(self, generator):
        """Test check_Bn on a random map against full enumeration"""
        domain = generator.path_metric(6)
        codomain = sample_space("path5")
        f = CoarseMapRecord(domain, codomain, generator.table(domain, codomain))
        for n in (1, 2, 3):
            for r in (0, 1, 2):
                assert check_Bn(f, n, r).d == brute_Bn(f, n, codomain.closed_key(r))


class TestExhaustiveOracle:
    """Split search by enumerating every assignment"""

    def test_min_split(self, line16):
        """Test the best split of [0, 4] into one and two parts"""
        assert exhaustive_min_split(line16, np.arange(5), 1) == 4
        assert exhaustive_min_split(line16, np.arange(5), 2) == 2
        assert exhaustive_min_split(line16, np.arange(2), 2) == 0

    def test_quarter(self, quarter):
        """Test the oracle on the quarter map"""
        assert [exhaustive_Bn(quarter, 2, r) for r in (0, 1, 2, 3)] == [1, 3, 5, 7]

    def test_against_checker(self, generator):
        """Test that the oracle, the checker and brute_Bn agree on a random map"""
        domain = generator.path_metric(6)
        codomain = sample_space("path5")
        f = CoarseMapRecord(domain, codomain, generator.table(domain, codomain))
        for n in (1, 2, 3):
            for r in (0, 1, 2):
                expected = brute_Bn(f, n, codomain.closed_key(r))
                assert exhaustive_Bn(f, n, r) == expected
                assert check_Bn(f, n, r).d == expected

    def test_limits(self):
        """Test that oversized searches are refused"""
        with pytest.raises(PreconditionError):
            exhaustive_min_split(line(32), np.arange(25), 2)
        with pytest.raises(PreconditionError):
            exhaustive_Bn(identity_map(line(3000)), 1, 1)


class TestCertificates:
    """(B)_n and (C)_n certificates and their closure"""

    def test_certify(self, quarter):
        """Test the (B)_2 certificate of the quarter map"""
        certificate = certify_Bn(quarter, 2, [0, 1, 2, 3])
        assert certificate.per_r == {0: 1, 1: 3, 2: 5, 3: 7}
        assert quarter.certificates["Bn"] is certificate

    def test_compose_Bn(self, quarter):
        """Test the composed certificate with the identity"""
        g = identity_map(quarter.codomain)
        certify_Bn(quarter, 2, [0, 1, 2, 3])
        certify_Bn(g, 1, [0, 1, 2, 3])
        composed = compose_Bn(quarter, g)
        assert composed.certificates["Bn_prediction"]["per_r"] == {0: 1, 1: 3, 2: 5, 3: 7}
        assert composed.certificates["Bn"].per_r == {0: 1, 1: 3, 2: 5, 3: 7}

    def test_compose_needs_certificates(self, quarter):
        """Test that closure operations need stored certificates"""
        with pytest.raises(PreconditionError):
            compose_Bn(quarter, identity_map(quarter.codomain))

    def test_product_Bn(self, half):
        """Test the product of the half map with itself"""
        certify_Bn(half, 1, [0, 1])
        product = product_Bn(half, half)
        assert product.certificates["Bn"].per_r == {0: 1, 1: 3}
        assert product.certificates["Bn_prediction"]["per_r"][1] == {"sum": 6, "max": 3}

    def test_check_Cn(self, quarter):
        """Test both forms of (C)_2 for the quarter map"""
        certificate = check_Cn(quarter, 2, [1, 2, 3])
        data = certificate.to_json()
        assert data["linear"] == {"c": 3, "r0": 1}
        assert data["affine"] == {"c": 2, "d": 1}
        assert data["c_by_r0"] == {"1": 3, "2": "5/2", "3": "7/3"}

    def test_check_Cn_c_max(self, quarter):
        """Test the least r0 for a target constant"""
        assert check_Cn(quarter, 2, [1, 2, 3], c_max=Fraction(5, 2)).least_r0 == 2
        assert check_Cn(quarter, 2, [1, 2, 3], c_max=2) is None

    def test_compose_Cn(self, quarter):
        """Test the predicted constant c_f·c_g"""
        g = identity_map(quarter.codomain)
        check_Cn(quarter, 2, [1, 2, 3])
        check_Cn(g, 1, [1, 2, 3])
        composed = compose_Cn(quarter, g)
        assert composed.certificates["Cn_prediction"] == {"n": 2, "c": 3}

    def test_product_Cn(self, half):
        """Test the predicted constant c_f + c_g"""
        check_Cn(half, 1, [1])
        product = product_Cn(half, half)
        assert product.certificates["Cn_prediction"] == {"n": 1, "c": 6}
        assert product.certificates["Cn"].c == 3


class TestConditionB:
    """Linear lifting of bounded sets"""

    def test_third_map(self, third):
        """Test the lifting constant of x -> floor(x/3)"""
        result = check_B_linear(third)
        assert result["per_r"] == {"1": 1, "2": 4, "3": 7}
        assert result["d"] == "7/3"
        assert result["exact"]

    def test_needs_surjection(self, line16):
        """Test that condition (B) needs a surjective map"""
        f = map_from_function(line16, line16, lambda x: x // 2)
        with pytest.raises(PreconditionError):
            check_B_linear(f)


class TestPushforwardChecks:
    """Multiplicity inequalities along maps"""

    @pytest.fixture
    def halves(self, line16):
        return Cover(line16, [range(0, 8), range(6, 16)])

    def test_multiplicity(self, quarter, halves):
        """Test mul(f(C)) <= mul(C)·n"""
        assert check_pushforward_multiplicity(quarter, halves) == {"left": 2, "bound": 8, "holds": True}

    def test_multiplicity_fiber_bound(self, quarter, halves):
        """Test that a fiber bound below the real fibers is refused"""
        with pytest.raises(PreconditionError):
            check_pushforward_multiplicity(quarter, halves, n=2)

    def test_rmul(self, quarter, halves):
        """Test r-mul(f(C)) <= d-mul(C)·n at the (B)_2 pair (1, 3)"""
        report = check_pushforward_rmul(quarter, halves, 1, 3, 2)
        assert report["left"] == 2
        assert report["bound"] == 4
        assert report["holds"]

    def test_dimension_raising(self, third):
        """Test the image cover of a cover with a large Lebesgue number"""
        C = Cover(third.domain, [range(0, 8), range(4, 12)])
        report = check_dimension_raising(third, "7/3", C, 1)
        assert report["multiplicity"] == 2
        assert report["multiplicity_bound"] == 6
        assert report["lebesgue_at_least_r"]
        assert report["holds"]

    def test_dimension_raising_precondition(self, third):
        """Test that the Lebesgue precondition is enforced"""
        C = Cover(third.domain, [range(0, 6), range(5, 12)])
        with pytest.raises(PreconditionError):
            check_dimension_raising(third, "7/3", C, 1)

    def test_dimension_raising_asdim(self, quarter, halves):
        """Test the asdim form with m = 1"""
        report = check_dimension_raising_asdim(quarter, 2, 1, 3, halves, 1)
        assert report["left"] == 2
        assert report["bound"] == 4
        with pytest.raises(PreconditionError):
            check_dimension_raising_asdim(quarter, 2, 1, 3, halves, 0)
