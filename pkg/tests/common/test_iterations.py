"""
Tests for common.iterations module
"""

import math

import numpy as np
import pytest

from common.errors import ConfigError
from common.iterations import (
    SchemeConfig,
    SchemeParams,
    config_violations,
    error_ratio_series,
    param_violations,
    run,
    scheme_label,
    step,
)
from common.mappings import DomainSpec, MappingSpec, scaling, witness_upper
from common.schedules import constant, power


def ig_config(**overrides) -> SchemeConfig:
    params = SchemeParams(alpha1=0.5, alpha2=0.8)
    settings = dict(
        scheme='IG',
        roles={'T1': scaling(0.5), 'T2': scaling(0.8)},
        params=params,
        schedule_a=constant(0.5),
        schedule_b=constant(0.25),
        x0=(0.4,),
        horizon=1,
    )
    settings.update(overrides)
    return SchemeConfig(**settings)


class TestStep:
    """Tests for single scheme steps"""

    def test_ig_by_hand(self):
        """Test IG with T1=0.5, T2=0.8, a=0.5, b=0.25 from 0.4"""
        y, x_next = step(ig_config(), [0.4], 0)
        assert y == pytest.approx([0.3])
        assert x_next == pytest.approx([0.4 * 0.43125])

    @pytest.mark.parametrize('scheme', ['I', 'IM', 'IG'])
    def test_fixed_point_absorbing(self, scheme):
        """Test x = x* stays at x* exactly"""
        config = ig_config(scheme=scheme)
        _, x_next = step(config, [0.0], 0)
        assert np.array_equal(x_next, [0.0])

    def test_g_with_unit_weights(self):
        """Test G with a = b = 1 is T2 after T1"""
        roles = {'S1': scaling(0.9), 'S2': scaling(0.7), 'T1': scaling(-0.5), 'T2': scaling(0.4)}
        config = SchemeConfig('G', roles, SchemeParams(), constant(1.0), constant(1.0), (0.4,), 1)
        _, x_next = step(config, [0.4], 0)
        assert x_next == pytest.approx([0.4 * -0.5 * 0.4])

    def test_ishikawa_matches_i(self):
        """Test Ishikawa with one map equals scheme I with T1 = T2"""
        shared = scaling(0.6)
        ishikawa = SchemeConfig('ISHIKAWA', {'T': shared}, SchemeParams(), constant(0.3), constant(0.7), (0.4,), 1)
        scheme_i = SchemeConfig('I', {'T1': shared, 'T2': shared}, SchemeParams(), constant(0.3), constant(0.7),
                                (0.4,), 1)
        assert step(ishikawa, [0.4], 0)[1] == pytest.approx(step(scheme_i, [0.4], 0)[1])


class TestRun:
    """Tests for recorded trajectories"""

    def test_picard_geometric_decay(self):
        """Test Picard with T = 0.5 from 0.4 reaches 0.05 after 3 steps"""
        config = SchemeConfig('PICARD', {'T': scaling(0.5)}, x0=(0.4,), horizon=3)
        traj = run(config)
        assert traj.points[3] == pytest.approx([0.05])
        assert traj.ratios[3] == pytest.approx(0.125)
        assert traj.intermediates is None

    def test_ig_witness_first_ratio(self):
        """Test the IG upper witness gives r_1 = 0.43125"""
        params = SchemeParams(alpha1=0.5, alpha2=0.8)
        traj = run(ig_config(roles=witness_upper('IG', params)))
        assert traj.ratios[1] == pytest.approx(0.43125)
        assert traj.intermediates.shape == (1, 1)

    def test_ig_counterexample_ratio(self):
        """Test kappa1=0.5, alpha1=1, T1=-1, a=0.45, b=0 gives r_1 = 0.1"""
        params = SchemeParams(kappa1=0.5, alpha1=1.0, alpha2=0.0)
        config = ig_config(roles={'T1': scaling(-1.0), 'T2': scaling(0.0)}, params=params,
                           schedule_a=constant(0.45), schedule_b=constant(0.0))
        assert run(config).ratios[1] == pytest.approx(0.1)

    def test_error_ratio_series(self):
        """Test Picard with T = 0.5 over two steps"""
        traj = run(SchemeConfig('PICARD', {'T': scaling(0.5)}, x0=(0.4,), horizon=2))
        assert error_ratio_series(traj) == pytest.approx([1.0, 0.5, 0.25])

    def test_frozen_mann(self):
        """Test Mann with a = 0 never moves"""
        traj = run(SchemeConfig('MANN', {'T': scaling(-0.3)}, schedule_a=constant(0.0), x0=(0.4,), horizon=5))
        assert error_ratio_series(traj) == [1.0] * 6

    def test_log_ratios_survive_underflow(self):
        """Test ln r_n stays finite after the linear error underflows"""
        traj = run(SchemeConfig('PICARD', {'T': scaling(0.1)}, x0=(0.4,), horizon=400))
        assert traj.ratios[-1] == 0.0
        assert traj.ln_ratios[-1] == pytest.approx(400 * math.log(0.1))

    def test_rotation_in_plane(self):
        """Test a rotation-scaling run shrinks the error by |c| per step"""
        plane = DomainSpec(dimension=2)
        rotation = MappingSpec('rotation_scaling', 0.5, plane, theta=0.7)
        traj = run(SchemeConfig('PICARD', {'T': rotation}, x0=(0.3, 0.1), horizon=4))
        assert traj.ratios[4] == pytest.approx(0.5 ** 4)

    def test_trajectory_is_read_only(self):
        """Test recorded arrays cannot be modified"""
        traj = run(SchemeConfig('PICARD', {'T': scaling(0.5)}, x0=(0.4,), horizon=2))
        with pytest.raises(ValueError):
            traj.points[0, 0] = 1.0

    def test_invalid_config_raises(self):
        """Test run refuses a config starting at the fixed point"""
        with pytest.raises(ConfigError, match='x0 != x\\*'):
            run(SchemeConfig('PICARD', {'T': scaling(0.5)}, x0=(0.0,), horizon=2))

    def test_degenerate_config_runs(self):
        """Test alpha1 = alpha2 = 1 runs once the config allows boundary constants"""
        params = SchemeParams(alpha1=1.0, alpha2=1.0)
        roles = {'T1': scaling(1.0), 'T2': scaling(1.0)}
        with pytest.raises(ConfigError, match='alpha1 \\+ alpha2'):
            run(ig_config(params=params, roles=roles, horizon=3))
        traj = run(ig_config(params=params, roles=roles, horizon=3, allow_degenerate=True))
        assert np.array_equal(traj.ratios, np.ones(4))
        assert np.array_equal(traj.fixed_point, np.zeros(1))

    def test_krasnoselskij_label(self):
        """Test a constant-schedule Mann run is labelled Krasnoselskij"""
        config = SchemeConfig('MANN', {'T': scaling(0.5)}, schedule_a=constant(0.5), x0=(0.4,))
        assert 'Krasnoselskij' in scheme_label(config)
        assert scheme_label(ig_config(schedule_a=power(1.0, 1.0, 1.0))) == 'IG'


class TestConfigViolations:
    """Tests for config invariants"""

    def test_valid_config(self):
        """Test the hand-checked IG config has no violations"""
        assert config_violations(ig_config()) == []

    def test_unknown_scheme(self):
        """Test an unknown scheme id is the only violation reported"""
        assert 'unknown scheme' in config_violations(ig_config(scheme='XYZ'))[0]

    def test_missing_role(self):
        """Test missing roles are named"""
        violations = config_violations(ig_config(roles={'T1': scaling(0.5)}))
        assert any('T2' in v for v in violations)

    def test_role_outside_class(self):
        """Test a mapping stronger than its class is flagged"""
        violations = config_violations(ig_config(roles={'T1': scaling(0.9), 'T2': scaling(0.8)}))
        assert any('role T1' in v for v in violations)

    def test_x0_outside_ball(self):
        """Test a start point outside the domain ball is flagged"""
        assert any('outside' in v for v in config_violations(ig_config(x0=(0.7,))))

    def test_mismatched_fixed_points(self):
        """Test roles must share a fixed point"""
        shifted = MappingSpec('scaling', 0.5, DomainSpec(), fixed_point=(0.1,))
        violations = config_violations(ig_config(roles={'T1': shifted, 'T2': scaling(0.8)}))
        assert any('fixed point' in v for v in violations)

    def test_ig_sum_condition(self):
        """Test alpha1 + alpha2 = 2 breaks the strict IG range unless degenerate runs are allowed"""
        params = SchemeParams(alpha1=1.0, alpha2=1.0)
        assert param_violations('IG', params)
        assert param_violations('IG', params, allow_degenerate=True) == []

    def test_g_class_order(self):
        """Test kappa1 above beta1 is flagged for G"""
        params = SchemeParams(kappa1=0.9, beta1=0.5)
        assert any('kappa1 <= beta1' in v for v in param_violations('G', params))

    def test_params_range(self):
        """Test class constants must lie in [0, 1]"""
        with pytest.raises(ConfigError):
            SchemeParams(alpha1=1.5)

    def test_params_unknown_key(self):
        """Test unknown parameter names are rejected"""
        with pytest.raises(ConfigError, match='gamma'):
            SchemeParams.from_dict({'gamma': 0.5})
