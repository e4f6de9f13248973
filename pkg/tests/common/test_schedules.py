"""
Tests for common.schedules module
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from common.errors import ConfigError, PreconditionError
from common.schedules import (
    ALL_ZERO,
    CONVERGENT,
    DIVERGENT,
    UNKNOWN,
    ScheduleSpec,
    classify_complement,
    classify_linear_series,
    classify_product_series,
    classify_series,
    classify_weighted_combination,
    constant,
    explicit,
    gap_schedule,
    geometric,
    infimum,
    log_sandwich,
    partial_sum_sandwich,
    power,
    supremum,
    tail_limit,
    value_at,
    values,
)


HARMONIC = power(1.0, 1.0, 1.0)

# Smaller probe keeps the suite quick; verdicts are symbolic
PROBE = 10_000


class TestValueAt:
    """Tests for schedule terms"""

    def test_harmonic_term(self):
        """Test power c=1, p=1, q=1 at n=3 is 0.25"""
        assert value_at(HARMONIC, 3) == 0.25

    def test_constant_term(self):
        """Test constant 0.2 at any n"""
        assert value_at(constant(0.2), 0) == 0.2
        assert value_at(constant(0.2), 1000) == 0.2

    def test_geometric_term(self):
        """Test geometric c=0.5, r=0.5 at n=2 is 0.125"""
        assert value_at(geometric(0.5, 0.5), 2) == 0.125

    def test_explicit_tail(self):
        """Test explicit lists continue with their tail"""
        schedule = explicit([0.9, 0.1], tail=0.3)
        assert [value_at(schedule, n) for n in range(4)] == [0.9, 0.1, 0.3, 0.3]

    def test_values_match_value_at(self):
        """Test the vector form agrees with term-by-term evaluation"""
        for schedule in (HARMONIC, geometric(0.8, 0.3), explicit([0.2], 0.0), constant(0.4)):
            assert values(schedule, 6) == pytest.approx([value_at(schedule, n) for n in range(6)])

    def test_negative_index(self):
        """Test negative indices are rejected"""
        with pytest.raises(ValueError):
            value_at(HARMONIC, -1)


class TestScheduleValidation:
    """Tests for schedule range checks and JSON form"""

    @pytest.mark.parametrize('build', [
        lambda: constant(1.2),
        lambda: power(2.0, 1.0, 1.0),
        lambda: power(1.0, 0.5, 1.0),
        lambda: geometric(0.5, 1.0),
        lambda: explicit([0.5, -0.1], 0.0),
    ])
    def test_out_of_range(self, build):
        """Test families that leave [0, 1] are rejected"""
        with pytest.raises(ConfigError):
            build()

    def test_unknown_family(self):
        """Test an unknown family name is a config error"""
        with pytest.raises(ConfigError, match='unknown schedule family'):
            ScheduleSpec.from_dict({'family': 'cosine'})

    def test_missing_key(self):
        """Test a family without its parameters is a config error"""
        with pytest.raises(ConfigError, match='missing key'):
            ScheduleSpec.from_dict({'family': 'geometric', 'c': 0.5})

    def test_from_dict(self):
        """Test JSON form builds the same schedule"""
        assert ScheduleSpec.from_dict({'family': 'power', 'c': 1.0, 'p': 2, 'q': 2}) == power(1.0, 2.0, 2.0)
        assert ScheduleSpec.from_dict(geometric(0.5, 0.25).to_dict()) == geometric(0.5, 0.25)

    @settings(max_examples=100, deadline=None)
    @given(c=st.floats(0.0, 1.0), p=st.floats(1.0, 50.0), q=st.floats(0.0, 4.0))
    def test_power_terms_in_unit_interval(self, c, p, q):
        """Test every accepted power schedule stays in [0, 1] with exact extrema"""
        schedule = power(c, p, q)
        terms = values(schedule, 200)
        assert np.all(terms >= 0.0) and np.all(terms <= 1.0)
        assert supremum(schedule) == pytest.approx(terms.max())
        assert infimum(schedule) <= terms.min()

    @settings(max_examples=100, deadline=None)
    @given(c=st.floats(0.0, 1.0), r=st.floats(0.0, 0.999))
    def test_geometric_terms_in_unit_interval(self, c, r):
        """Test geometric schedules decrease from c towards 0"""
        schedule = geometric(c, r)
        terms = values(schedule, 100)
        assert np.all(np.diff(terms) <= 0.0)
        assert supremum(schedule) == c
        assert tail_limit(schedule) == 0.0


class TestClassifySeries:
    """Tests for symbolic series verdicts"""

    def test_harmonic_divergent(self):
        """Test the harmonic series diverges"""
        verdict = classify_series(HARMONIC, PROBE)
        assert verdict.verdict == DIVERGENT
        assert verdict.diverges_to_infinity

    def test_p_series_convergent(self):
        """Test q=2 converges"""
        assert classify_series(power(1.0, 1.0, 2.0), PROBE).verdict == CONVERGENT

    def test_zero_constant(self):
        """Test constant 0 is all-zero"""
        assert classify_series(constant(0.0), PROBE).verdict == ALL_ZERO

    def test_explicit_with_zero_tail(self):
        """Test finitely many non-zero terms converge"""
        assert classify_series(explicit([0.5, 0.5], 0.0), PROBE).verdict == CONVERGENT

    def test_partial_sum_probe(self):
        """Test the probe carries the numeric partial sum"""
        verdict = classify_series(constant(0.5), 100)
        assert verdict.partial_sum_probe == pytest.approx(50.0)

    def test_complement_of_constant(self):
        """Test sum (1 - a) diverges for a constant below 1 and vanishes at 1"""
        assert classify_complement(constant(0.3), PROBE).verdict == DIVERGENT
        assert classify_complement(constant(1.0), PROBE).verdict == ALL_ZERO


class TestWeightedCombination:
    """Tests for weighted sums of non-negative series"""

    def test_divergent_terms_named(self):
        """Test harmonic a and b == 1 force divergence through the first and third terms"""
        verdict = classify_weighted_combination([
            (0.5, HARMONIC, 'schedule'),
            (0.5, constant(1.0), 'one_minus'),
            (0.2, constant(1.0), 'schedule'),
        ], PROBE)
        assert verdict.verdict == DIVERGENT
        assert 'power' in verdict.rationale and 'constant' in verdict.rationale

    def test_all_weights_zero(self):
        """Test zero weights give a convergent (identically zero) sum"""
        verdict = classify_weighted_combination([
            (0.0, HARMONIC, 'schedule'),
            (0.0, constant(0.5), 'one_minus'),
        ], PROBE)
        assert verdict.verdict == CONVERGENT

    def test_geometric_only(self):
        """Test a single geometric term converges"""
        verdict = classify_weighted_combination([(1.0, geometric(0.5, 0.5), 'schedule')], PROBE)
        assert verdict.verdict == CONVERGENT

    def test_negative_weight_rejected(self):
        """Test weights must be non-negative"""
        with pytest.raises(ValueError):
            classify_weighted_combination([(-1.0, HARMONIC, 'schedule')], PROBE)


class TestLinearAndProductSeries:
    """Tests for sign-aware and product series verdicts"""

    def test_positive_constant_limit(self):
        """Test a positive constant general term diverges to +infinity"""
        verdict = classify_linear_series(0.6, [(-1.5 / 0.71, constant(0.2))], PROBE)
        assert verdict.verdict == DIVERGENT
        assert verdict.direction == 1

    def test_negative_limit(self):
        """Test a negative limit diverges to -infinity"""
        verdict = classify_linear_series(-0.5, [(1.0, constant(0.2))], PROBE)
        assert verdict.verdict == DIVERGENT
        assert not verdict.diverges_to_infinity

    def test_harmonic_deviation(self):
        """Test a zero limit with a 1/n tail diverges in the tail's direction"""
        verdict = classify_linear_series(0.0, [(1.0, HARMONIC)], PROBE)
        assert verdict.diverges_to_infinity

    def test_cancelling_deviations(self):
        """Test cancelling 1/n tails leave the verdict open"""
        verdict = classify_linear_series(0.0, [(1.0, HARMONIC), (-1.0, HARMONIC)], PROBE)
        assert verdict.verdict == UNKNOWN

    def test_product_of_harmonics(self):
        """Test sum of 1/n^2 converges while constant times harmonic diverges"""
        assert classify_product_series(HARMONIC, HARMONIC, PROBE).verdict == CONVERGENT
        assert classify_product_series(constant(0.5), HARMONIC, PROBE).verdict == DIVERGENT
        assert classify_product_series(constant(0.0), HARMONIC, PROBE).verdict == ALL_ZERO


class TestGapSchedule:
    """Tests for shifted threshold sequences"""

    def test_above_threshold(self):
        """Test a = 0.1 against threshold 1/11 is a precondition error"""
        with pytest.raises(PreconditionError, match='threshold'):
            gap_schedule(constant(0.1), 0.1 / 1.1)

    def test_constant_gap(self):
        """Test a = 0.05 against 1/11 leaves a positive constant gap"""
        gap = gap_schedule(constant(0.05), 1.0 / 11.0)
        assert gap.c == pytest.approx(0.040909090909, rel=1e-9)
        assert classify_series(gap, PROBE).verdict == DIVERGENT

    def test_on_threshold(self):
        """Test a schedule equal to the threshold gives an all-zero gap"""
        gap = gap_schedule(constant(0.2 / 1.4), 0.2 / 1.4)
        assert classify_series(gap, PROBE).verdict == ALL_ZERO

    def test_decreasing_base(self):
        """Test a vanishing base leaves a gap tending to the threshold"""
        gap = gap_schedule(geometric(0.1, 0.5), 0.25)
        assert gap.family == 'gap'
        assert value_at(gap, 1) == pytest.approx(0.2)
        assert classify_series(gap, PROBE).verdict == DIVERGENT


class TestSandwichInequalities:
    """Tests for the logarithm and partial-sum sandwiches"""

    def test_log_sandwich(self):
        """Test x/(x+1) <= ln(1+x) <= x on random x in (-1, 10]"""
        rng = np.random.default_rng(0)
        x = -1.0 + 11.0 * (1.0 - rng.random(100_000))
        low, middle, high = log_sandwich(x)
        assert np.all(low <= middle + 1e-12)
        assert np.all(middle <= high + 1e-12)

    def test_partial_sum_sandwich(self):
        """Test partial sums of a and a/(1 - u a) bracket each other through the margin"""
        n = 100_000
        a_values = values(HARMONIC, n)
        u_values = np.random.default_rng(1).random(n)
        plain, inflated, margin = partial_sum_sandwich(a_values, u_values)
        assert margin > 0
        assert np.all(plain <= inflated + 1e-12)
        assert np.all(inflated <= plain / margin + 1e-9)

    def test_partial_sum_needs_margin(self):
        """Test u a reaching 1 is rejected"""
        with pytest.raises(PreconditionError):
            partial_sum_sandwich([1.0, 0.5], [1.0, 0.0])
