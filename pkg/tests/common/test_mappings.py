"""
Tests for common.mappings module
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from common.errors import ConfigError, DomainViolationError
from common.iterations import SchemeParams
from common.mappings import (
    DomainSpec,
    MappingSpec,
    NonexpansiveClass,
    apply,
    is_contraction,
    lipschitz_interval,
    random_in_class,
    roles_in_class,
    scaling,
    verify_class,
    witness_lower,
    witness_upper,
)


PLANE = DomainSpec(dimension=2)


class TestApply:
    """Tests for evaluating mappings"""

    def test_scaling_in_one_dimension(self):
        """Test scaling c=0.5 about 0 sends 0.4 to 0.2"""
        assert apply(scaling(0.5), [0.4]) == pytest.approx([0.2])

    @pytest.mark.parametrize('mapping', [
        scaling(-0.7),
        MappingSpec('rotation_scaling', 0.9, PLANE, theta=1.2),
        MappingSpec('affine', [[0.3, 0.1], [0.0, 0.6]], PLANE),
    ])
    def test_fixed_point_is_fixed(self, mapping):
        """Test every kind leaves its fixed point in place"""
        fixed_point = mapping.fixed_point_array
        assert np.array_equal(apply(mapping, fixed_point), fixed_point)

    def test_affine_diagonal(self):
        """Test M = diag(0.3, 0.6) sends (0.2, 0.1) to (0.06, 0.06)"""
        mapping = MappingSpec('affine', [[0.3, 0.0], [0.0, 0.6]], PLANE)
        assert apply(mapping, [0.2, 0.1]) == pytest.approx([0.06, 0.06])

    def test_point_outside_ball_rejected(self):
        """Test a point outside the domain ball raises"""
        with pytest.raises(DomainViolationError):
            apply(scaling(0.5), [0.9])

    def test_off_center_fixed_point(self):
        """Test scaling about an off-center fixed point"""
        mapping = MappingSpec('scaling', 0.5, DomainSpec(), fixed_point=(0.1,))
        assert apply(mapping, [0.3]) == pytest.approx([0.2])


class TestMappingValidation:
    """Tests for MappingSpec invariants"""

    def test_coefficient_out_of_range(self):
        """Test scaling coefficients beyond 1 are rejected"""
        with pytest.raises(ConfigError):
            scaling(1.5)

    def test_affine_norm_above_one(self):
        """Test affine maps with sigma_max > 1 are rejected"""
        with pytest.raises(ConfigError, match='sigma_max'):
            MappingSpec('affine', [[1.2, 0.0], [0.0, 0.5]], PLANE)

    def test_rotation_needs_plane(self):
        """Test rotation_scaling is 2-D only"""
        with pytest.raises(ConfigError):
            MappingSpec('rotation_scaling', 0.5, DomainSpec())

    def test_off_center_map_must_stay_in_ball(self):
        """Test an off-center fixed point that pushes the ball outside itself is rejected"""
        with pytest.raises(ConfigError, match='does not map the ball'):
            MappingSpec('scaling', 1.0, DomainSpec(), fixed_point=(0.2,))

    def test_from_dict_uses_domain(self):
        """Test JSON form is read against the supplied domain"""
        mapping = MappingSpec.from_dict({'kind': 'rotation_scaling', 'coeff': 0.5, 'theta': 0.3}, PLANE)
        assert mapping.domain.dimension == 2
        assert mapping.theta == 0.3

    def test_from_dict_missing_kind(self):
        """Test a mapping without kind is a config error"""
        with pytest.raises(ConfigError, match='kind'):
            MappingSpec.from_dict({'coeff': 0.5})


class TestLipschitzInterval:
    """Tests for exact Lipschitz intervals"""

    def test_negative_scaling(self):
        """Test scaling c=-0.6 has interval (0.6, 0.6)"""
        assert lipschitz_interval(scaling(-0.6)) == (0.6, 0.6)

    def test_affine_singular_values(self):
        """Test diag(0.3, 0.6) has interval (0.3, 0.6)"""
        low, high = lipschitz_interval(MappingSpec('affine', [[0.3, 0.0], [0.0, 0.6]], PLANE))
        assert low == pytest.approx(0.3)
        assert high == pytest.approx(0.6)

    def test_constant_map(self):
        """Test scaling c=0 has interval (0, 0)"""
        assert lipschitz_interval(scaling(0.0)) == (0.0, 0.0)


class TestVerifyClass:
    """Tests for sampled class membership"""

    def test_exact_modulus_passes(self):
        """Test scaling 0.5 is in class (0.5, 0.5)"""
        report = verify_class(scaling(0.5), NonexpansiveClass(0.5, 0.5), 500, seed=1)
        assert report.passed
        assert report.contraction

    def test_isometry_in_wide_class(self):
        """Test scaling -1 is in class (0.5, 1)"""
        report = verify_class(scaling(-1.0), NonexpansiveClass(0.5, 1.0), 500, seed=2)
        assert report.passed
        assert not report.contraction

    def test_upper_side_fails(self):
        """Test scaling 0.9 fails class (0, 0.5) on the upper side"""
        report = verify_class(scaling(0.9), NonexpansiveClass(0.0, 0.5), 500, seed=3)
        assert report.lower_ok
        assert not report.upper_ok

    def test_needs_samples(self):
        """Test zero samples are rejected"""
        with pytest.raises(ConfigError):
            verify_class(scaling(0.5), NonexpansiveClass(0.0, 1.0), 0, seed=0)

    def test_class_order_enforced(self):
        """Test kappa above alpha is rejected"""
        with pytest.raises(ConfigError):
            NonexpansiveClass(0.8, 0.5)

    def test_is_contraction(self):
        """Test alpha < 1 marks a contraction class"""
        assert is_contraction(NonexpansiveClass(0.0, 0.99))
        assert not is_contraction(NonexpansiveClass(0.2, 1.0))


class TestWitnesses:
    """Tests for extremal witness assignments"""

    def test_ig_upper(self):
        """Test IG upper witness uses +alpha1, +alpha2"""
        roles = witness_upper('IG', SchemeParams(alpha1=0.5, alpha2=0.8))
        assert roles['T1'].coeff == 0.5
        assert roles['T2'].coeff == 0.8

    def test_g_upper_identity(self):
        """Test G upper witness with all constants 1 is all identities"""
        roles = witness_upper('G', SchemeParams())
        assert {role: mapping.coeff for role, mapping in roles.items()} == {'S1': 1.0, 'S2': 1.0, 'T1': 1.0, 'T2': 1.0}

    def test_ig_lower(self):
        """Test IG lower witness uses -kappa1, +alpha2"""
        roles = witness_lower('IG', SchemeParams(kappa1=0.6, alpha2=0.8))
        assert roles['T1'].coeff == -0.6
        assert roles['T2'].coeff == 0.8

    def test_g_lower(self):
        """Test G lower witness uses S = kappa, T = -alpha"""
        roles = witness_lower('G', SchemeParams(kappa1=1.0, kappa2=1.0))
        assert roles['S1'].coeff == 1.0 and roles['S2'].coeff == 1.0
        assert roles['T1'].coeff == -1.0 and roles['T2'].coeff == -1.0

    def test_unknown_scheme(self):
        """Test witnesses only exist for the certified schemes"""
        with pytest.raises(ConfigError):
            witness_upper('PICARD', SchemeParams())


class TestRandomInClass:
    """Tests for random class members"""

    def test_one_dimension(self):
        """Test a 1-D draw is a scaling with |c| <= 1"""
        mapping = random_in_class(NonexpansiveClass(0.0, 1.0), DomainSpec(), seed=7)
        assert mapping.kind == 'scaling'
        assert abs(mapping.coeff) <= 1.0

    def test_forced_modulus(self):
        """Test class (0.5, 0.5) forces both singular values to 0.5"""
        mapping = random_in_class(NonexpansiveClass(0.5, 0.5), DomainSpec(dimension=3), seed=4)
        low, high = lipschitz_interval(mapping)
        assert low == pytest.approx(0.5)
        assert high == pytest.approx(0.5)

    def test_plane_draw_in_class(self):
        """Test a 2-D draw from class (0.3, 0.9) has singular values in range"""
        nonexpansive_class = NonexpansiveClass(0.3, 0.9)
        mapping = random_in_class(nonexpansive_class, PLANE, seed=1)
        assert mapping.kind == 'affine'
        assert not roles_in_class({'T': mapping}, {'T': nonexpansive_class})

    @settings(max_examples=50, deadline=None)
    @given(
        kappa=st.floats(0.0, 1.0),
        width=st.floats(0.0, 1.0),
        dim=st.integers(1, 3),
        seed=st.integers(0, 2 ** 32 - 1),
    )
    def test_draws_stay_in_class(self, kappa, width, dim, seed):
        """Test random draws always land inside their class"""
        alpha = min(1.0, kappa + (1.0 - kappa) * width)
        nonexpansive_class = NonexpansiveClass(kappa, alpha)
        mapping = random_in_class(nonexpansive_class, DomainSpec(dimension=dim), seed)
        assert not roles_in_class({'T': mapping}, {'T': nonexpansive_class})

    def test_roles_in_class_reports_escape(self):
        """Test a role outside its class is named"""
        violations = roles_in_class({'T1': scaling(0.9)}, {'T1': NonexpansiveClass(0.0, 0.5), 'T2': NonexpansiveClass(0.0, 1.0)})
        assert any('T1' in v for v in violations)
        assert any('T2 is not assigned' in v for v in violations)
