"""
Affine envelope tests for coarsetk
"""

from fractions import Fraction

import pytest

from coarsetk.fitting import (
    AffineFit,
    least_start,
    linear_constant,
    lipschitz_constant,
    lower_affine_fit,
    quasi_isometry_constants,
    upper_affine_fit,
)


class TestUpperFit:
    """Dominating lines"""

    def test_collinear_table(self):
        """Test that a collinear table is fitted by its own line"""
        fit = upper_affine_fit({1: 3, 2: 4, 4: 6})
        assert fit.to_dict() == {"c": 1, "b": 2}
        assert fit.upper(10) == 12

    def test_dominates_every_point(self):
        """Test that the chosen line lies above the table"""
        table = {1: 2, 2: 7, 3: 7, 8: 10}
        fit = upper_affine_fit(table)
        assert all(fit.upper(x) >= y for x, y in table.items())
        assert fit.c >= 0 and fit.b >= 0

    def test_empty_table(self):
        """Test the zero line for an empty table"""
        assert upper_affine_fit({}) == AffineFit(Fraction(0), Fraction(0))


class TestLowerFit:
    """Dominated lines"""

    def test_collinear_table(self):
        """Test a growing table fitted from below"""
        fit = lower_affine_fit({1: 0, 2: 1, 4: 3})
        assert fit.to_dict() == {"c": 1, "b": 1}
        assert fit.lower(4) == 3

    def test_flat_zero_table(self):
        """Test that a table that never grows has no lower line"""
        assert lower_affine_fit({1: 0, 2: 0}) is None


class TestConstants:
    """Ratios and starting scales"""

    def test_lipschitz_ignores_zero_scale(self):
        """Test that the ratio at scale 0 is skipped"""
        assert lipschitz_constant({0: 5, 2: 3, 4: 4}) == Fraction(3, 2)

    def test_linear_constant_from_r0(self):
        """Test that scales below r0 are ignored"""
        assert linear_constant({1: 5, 2: 2, 4: 4}, 2) == 1

    @pytest.mark.parametrize("c_max,expected", [(1, 2), (5, 1), (Fraction(1, 2), None)])
    def test_least_start(self, c_max, expected):
        """Test the least start of a linear bound"""
        assert least_start({1: 5, 2: 2, 4: 4}, c_max) == expected

    def test_quasi_isometry_constants(self):
        """Test combining the envelopes"""
        constants = quasi_isometry_constants(AffineFit(Fraction(2), Fraction(1)),
                                             AffineFit(Fraction(1, 3), Fraction(2)))
        assert constants == (3, 2)
        assert quasi_isometry_constants(AffineFit(Fraction(2), Fraction(1)), None) is None
