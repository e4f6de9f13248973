"""
Convergence classification of the bound products and convergence-rate comparison
Verdicts come from symbolic series rules; ratios are always computed alongside
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from common.bounds import BoundSeries, bound_series
from common.errors import ConfigError, PreconditionError
from common.iterations import SchemeConfig, SchemeParams, Trajectory, param_violations, run
from common.schedules import (
    DIVERGENT,
    ScheduleSpec,
    SeriesVerdict,
    UNKNOWN,
    ZERO_TOL,
    classify_linear_series,
    classify_product_series,
    classify_weighted_combination,
    gap_schedule,
    supremum,
    tail_limit,
    values,
)


YES = 'yes'
NO = 'no'
FASTER = 'faster'
NOT_ESTABLISHED = 'not-established'

# Terms scanned when extracting delta*, epsilon*, tau* (the tail limit is added)
CONSTANT_HORIZON = 10_000

# Envelope slack per step, log domain
ENVELOPE_TOL = 1e-9

COMPARISON_PAIRS = (('IG', 'I'), ('IG', 'IM'), ('G', 'I'), ('G', 'IM'), ('G', 'IG'))


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Whether a bound product (or the iterates) tends to zero, with the series that decided it"""
    bound_side: str
    converges_to_zero: str
    condition_trace: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'bound_side': self.bound_side,
            'converges_to_zero': self.converges_to_zero,
            'condition_trace': self.condition_trace,
        }


def _trace(condition: str, verdict: SeriesVerdict) -> Dict:
    entry = {'condition': condition}
    entry.update(verdict.to_dict())
    return entry


def _verdict_from_series(side: str, condition: str, series: SeriesVerdict) -> ConvergenceVerdict:
    if series.verdict == UNKNOWN:
        answer = 'unknown'
    else:
        answer = YES if series.diverges_to_infinity else NO
    return ConvergenceVerdict(side, answer, [_trace(condition, series)])


def _require_params(scheme: str, params: SchemeParams):
    violations = param_violations(scheme, params, allow_degenerate=True)
    if violations:
        raise ConfigError(f"invalid {scheme} parameters: " + "; ".join(violations))


def _need_ig_problem(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> Optional[str]:
    a_top, b_top = supremum(schedule_a), supremum(schedule_b)
    a_threshold = 1.0 / (1.0 + params.kappa1)
    b_threshold = params.kappa1 / (params.kappa1 + params.alpha2) if params.kappa1 + params.alpha2 > 0 else 0.0
    if a_top >= a_threshold:
        return f"sup a_n = {a_top:.17g} is not below 1/(1+kappa1) = {a_threshold:.17g}"
    if b_top >= b_threshold:
        return f"sup b_n = {b_top:.17g} is not below kappa1/(kappa1+alpha2) = {b_threshold:.17g}"
    return None


def _need_g_problem(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> Optional[str]:
    checks = (
        ('a', schedule_a, params.kappa1, params.alpha1, 'kappa1/(kappa1+alpha1)'),
        ('b', schedule_b, params.kappa2, params.alpha2, 'kappa2/(kappa2+alpha2)'),
    )
    for name, schedule, kappa, alpha, label in checks:
        threshold = kappa / (kappa + alpha) if kappa + alpha > 0 else 1.0
        top = supremum(schedule)
        if top > threshold:
            return f"sup {name}_n = {top:.17g} exceeds {label} = {threshold:.17g}"
    return None


# ============================================================================
# Bound classifiers
# ============================================================================

def classify_ueb_ig(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """
    U_n^IG -> 0 iff (1-a1) sum a_k + (1-a1) sum (1-b_k) + (1-a2) sum b_k = infinity

    Args:
        params: IG parameters
        schedule_a, schedule_b: Schedules

    Returns:
        ConvergenceVerdict for the upper bound
    """
    _require_params('IG', params)
    p = params
    series = classify_weighted_combination([
        (1.0 - p.alpha1, schedule_a, 'schedule'),
        (1.0 - p.alpha1, schedule_b, 'one_minus'),
        (1.0 - p.alpha2, schedule_b, 'schedule'),
    ])
    return _verdict_from_series('upper', '(1-alpha1)[sum a + sum (1-b)] + (1-alpha2) sum b', series)


def classify_leb_ig(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """
    L_n^IG -> 0 always when kappa1 < 1; for kappa1 = 1 iff sum (a_n + b_n) = infinity

    Raises:
        PreconditionError: If the IG lower-bound schedule conditions fail
    """
    _require_params('IG', params)
    problem = _need_ig_problem(params, schedule_a, schedule_b)
    if problem:
        raise PreconditionError(problem)
    if params.kappa1 < 1.0:
        return ConvergenceVerdict('lower', YES, [{'condition': 'kappa1 < 1', 'kappa1': params.kappa1}])
    series = classify_weighted_combination([(1.0, schedule_a, 'schedule'), (1.0, schedule_b, 'schedule')])
    return _verdict_from_series('lower', 'kappa1 = 1 and sum (a + b)', series)


def classify_ueb_g(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """U_n^G -> 0 iff (1-a1) sum a + (1-a2) sum b + (1-b1) sum (1-a) + (1-b2) sum (1-b) = infinity"""
    _require_params('G', params)
    p = params
    series = classify_weighted_combination([
        (1.0 - p.alpha1, schedule_a, 'schedule'),
        (1.0 - p.alpha2, schedule_b, 'schedule'),
        (1.0 - p.beta1, schedule_a, 'one_minus'),
        (1.0 - p.beta2, schedule_b, 'one_minus'),
    ])
    return _verdict_from_series(
        'upper', '(1-alpha1) sum a + (1-alpha2) sum b + (1-beta1) sum (1-a) + (1-beta2) sum (1-b)', series
    )


def classify_leb_g(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    _require_params('G', params)
    problem = _need_g_problem(params, schedule_a, schedule_b)
    if problem:
        raise PreconditionError(problem)
    smallest = min(params.kappa1, params.kappa2)
    if smallest < 1.0:
        return ConvergenceVerdict('lower', YES, [{'condition': 'min(kappa1, kappa2) < 1', 'min_kappa': smallest}])
    series = classify_weighted_combination([(1.0, schedule_a, 'schedule'), (1.0, schedule_b, 'schedule')])
    return _verdict_from_series('lower', 'kappa1 = kappa2 = 1 and sum (a + b)', series)


def classify_ueb_im(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """U_n^IM -> 0 iff (1-a1) sum a + (1-a2) sum b = infinity"""
    _require_params('IM', params)
    series = classify_weighted_combination([
        (1.0 - params.alpha1, schedule_a, 'schedule'),
        (1.0 - params.alpha2, schedule_b, 'schedule'),
    ])
    return _verdict_from_series('upper', '(1-alpha1) sum a + (1-alpha2) sum b', series)


def classify_ueb_i(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """U_n^I -> 0 iff (1-a2) sum b + a2 (1-a1) sum a b = infinity"""
    _require_params('I', params)
    p = params
    linear = classify_weighted_combination([(1.0 - p.alpha2, schedule_b, 'schedule')])
    product = classify_product_series(schedule_a, schedule_b)
    product_weight = p.alpha2 * (1.0 - p.alpha1)
    trace = [
        _trace('(1-alpha2) sum b', linear),
        dict(_trace('sum a b', product), weight=product_weight),
    ]
    if linear.verdict == DIVERGENT or (product_weight > 0 and product.verdict == DIVERGENT):
        return ConvergenceVerdict('upper', YES, trace)
    if product_weight > 0 and product.verdict == UNKNOWN:
        return ConvergenceVerdict('upper', 'unknown', trace)
    return ConvergenceVerdict('upper', NO, trace)


def crossing_index(series: BoundSeries, level: float = 1e-6) -> Optional[int]:
    """First n with B_n < level, or None if the computed series never gets there"""
    below = series.log_cumulative < math.log(level)
    return int(np.argmax(below)) if np.any(below) else None


# ============================================================================
# Corollaries
# ============================================================================

def corollary_g_equivalence(params: SchemeParams, schedule_a: ScheduleSpec,
                            schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """
    For kappa1 = kappa2 = 1 and alpha1, alpha2 in (0, 1): x_n -> x* iff sum (a_n + b_n) = infinity

    Returns:
        The verdict, or 'unknown' with the failing hypothesis in the trace
    """
    p = params
    hypotheses = []
    if not (0.0 < p.alpha1 < 1.0 and 0.0 < p.alpha2 < 1.0):
        hypotheses.append(f"alpha1, alpha2 must lie in (0, 1), got {p.alpha1}, {p.alpha2}")
    if p.kappa1 != 1.0 or p.kappa2 != 1.0:
        hypotheses.append(f"kappa1 = kappa2 = 1 required, got {p.kappa1}, {p.kappa2}")
    if not hypotheses:
        hypotheses.extend(param_violations('G', p))
    if not hypotheses:
        problem = _need_g_problem(p, schedule_a, schedule_b)
        if problem:
            hypotheses.append(problem)
    if hypotheses:
        return ConvergenceVerdict('both', 'unknown', [{'condition': 'hypothesis', 'failed': hypotheses}])

    series = classify_weighted_combination([(1.0, schedule_a, 'schedule'), (1.0, schedule_b, 'schedule')])
    return _verdict_from_series('both', 'sum (a + b)', series)


def corollary_ig_convergence(params: SchemeParams, schedule_a: ScheduleSpec,
                             schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """Sufficient condition for x_n -> x* under scheme IG (the upper-bound series diverges)"""
    _require_params('IG', params)
    problem = _need_ig_problem(params, schedule_a, schedule_b)
    if problem:
        return ConvergenceVerdict('upper', 'unknown', [{'condition': 'hypothesis', 'failed': [problem]}])
    upper = classify_ueb_ig(params, schedule_a, schedule_b)
    answer = YES if upper.converges_to_zero == YES else 'unknown'
    return ConvergenceVerdict('upper', answer, upper.condition_trace)


def corollary_g_convergence(params: SchemeParams, schedule_a: ScheduleSpec,
                            schedule_b: ScheduleSpec) -> ConvergenceVerdict:
    """
    Convergence of scheme G from both bounds

    The upper-bound series decides 'yes'; a lower bound with a positive limit
    decides 'no'; anything else stays 'unknown'.
    """
    upper = classify_ueb_g(params, schedule_a, schedule_b)
    trace = [dict(entry, bound='upper') for entry in upper.condition_trace]
    if upper.converges_to_zero == YES:
        return ConvergenceVerdict('both', YES, trace)

    if _need_g_problem(params, schedule_a, schedule_b) is None:
        lower = classify_leb_g(params, schedule_a, schedule_b)
        trace.extend(dict(entry, bound='lower') for entry in lower.condition_trace)
        if lower.converges_to_zero == NO:
            return ConvergenceVerdict('both', NO, trace)
    return ConvergenceVerdict('both', 'unknown', trace)


# ============================================================================
# Rate comparison
# ============================================================================

@dataclass(frozen=True)
class ConditionResult:
    name: str
    holds: bool
    detail: str
    series: Optional[Dict] = None

    def to_dict(self) -> Dict:
        data = {'name': self.name, 'holds': self.holds, 'detail': self.detail}
        if self.series is not None:
            data['series'] = self.series
        return data


@dataclass(frozen=True)
class TheoremCheck:
    """Condition verdicts of one comparison theorem; conclusions are keyed by the slower scheme"""
    theorem: str
    constants: Dict[str, float]
    conditions: List[ConditionResult]
    conclusions: Dict[str, str]

    def to_dict(self) -> Dict:
        return {
            'theorem': self.theorem,
            'constants': self.constants,
            'conditions': [condition.to_dict() for condition in self.conditions],
            'conclusions': self.conclusions,
        }


def _infimum(expression: Callable, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
             horizon: int = CONSTANT_HORIZON) -> float:
    """inf over the first horizon terms together with the value at the tail limits"""
    scanned = expression(values(schedule_a, horizon), values(schedule_b, horizon))
    limit = expression(tail_limit(schedule_a), tail_limit(schedule_b))
    return float(min(np.min(scanned), limit))


def _series_condition(name: str, series: SeriesVerdict) -> ConditionResult:
    return ConditionResult(name, series.diverges_to_infinity, series.rationale, series.to_dict())


def _hypothesis_groups(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> ConditionResult:
    """Group i) alpha2 < 1, sum b = inf; or group ii) alpha1 < 1, alpha2 = 1, sum (a - b + 1) = inf, sum a b = inf"""
    p = params
    sum_b = classify_weighted_combination([(1.0, schedule_b, 'schedule')])
    group_i = p.alpha2 < 1.0 and sum_b.diverges_to_infinity

    shifted = classify_linear_series(1.0, [(1.0, schedule_a), (-1.0, schedule_b)])
    product = classify_product_series(schedule_a, schedule_b)
    group_ii = (p.alpha1 < 1.0 and p.alpha2 == 1.0
                and shifted.diverges_to_infinity and product.diverges_to_infinity)

    detail = (
        f"group i: alpha2 < 1 is {p.alpha2 < 1.0}, sum b {sum_b.verdict}; "
        f"group ii: alpha1 < 1 is {p.alpha1 < 1.0}, alpha2 = 1 is {p.alpha2 == 1.0}, "
        f"sum (a - b + 1) {shifted.verdict}, sum a b {product.verdict}"
    )
    return ConditionResult('hypothesis groups', group_i or group_ii, detail, {
        'sum_b': sum_b.to_dict(),
        'sum_a_minus_b_plus_1': shifted.to_dict(),
        'sum_ab': product.to_dict(),
    })


def _conclusion(conditions: List[ConditionResult]) -> str:
    return FASTER if all(condition.holds for condition in conditions) else NOT_ESTABLISHED


def _require_sum_range(params: SchemeParams):
    total = params.alpha1 + params.alpha2
    if not 0.0 < total < 2.0:
        raise PreconditionError(f"0 < alpha1 + alpha2 < 2 fails (sum {total})")


def check_ig_vs_i(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> TheoremCheck:
    """
    Sufficient conditions for IG to converge faster than I

    delta* = inf [1 - b - a2 b (1 - a + a1 a)] must be positive, the series
    sum [(1-a1)(a+1) + (a1 - a2 - (1+a2)/delta*) b] must diverge, and one
    hypothesis group must hold.
    """
    _require_sum_range(params)
    p = params
    delta = _infimum(lambda a, b: 1.0 - b - p.alpha2 * b * (1.0 - a + p.alpha1 * a), schedule_a, schedule_b)
    conditions = [ConditionResult('delta* > 0', delta > 0, f"delta* = {delta:.17g}")]

    if delta > 0:
        series = classify_linear_series(1.0 - p.alpha1, [
            (1.0 - p.alpha1, schedule_a),
            (p.alpha1 - p.alpha2 - (1.0 + p.alpha2) / delta, schedule_b),
        ])
        conditions.append(_series_condition('sum [(1-a1)(a+1) + (a1-a2-(1+a2)/delta*) b] = inf', series))
    conditions.append(_hypothesis_groups(p, schedule_a, schedule_b))
    return TheoremCheck('IG vs I', {'delta': delta}, conditions, {'I': _conclusion(conditions)})


def check_ig_vs_im(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> TheoremCheck:
    """Sufficient conditions for IG to converge faster than IM (constants epsilon*, tau*)"""
    _require_sum_range(params)
    p = params
    epsilon = _infimum(lambda a, b: 1.0 - a - p.alpha1 * a, schedule_a, schedule_b)
    tau = _infimum(lambda a, b: 1.0 - b - p.alpha2 * b, schedule_a, schedule_b)
    conditions = [
        ConditionResult('epsilon* > 0', epsilon > 0, f"epsilon* = {epsilon:.17g}"),
        ConditionResult('tau* > 0', tau > 0, f"tau* = {tau:.17g}"),
    ]

    if epsilon > 0 and tau > 0:
        scale = epsilon * tau
        series = classify_linear_series(1.0 - p.alpha1 / scale, [
            (1.0 - p.alpha1, schedule_a),
            ((p.alpha1 - p.alpha2) / scale, schedule_b),
        ])
        conditions.append(_series_condition('sum [(1-a1) a + (a1-a2)/(eps* tau*) b + 1 - a1/(eps* tau*)] = inf', series))
    conditions.append(_hypothesis_groups(p, schedule_a, schedule_b))
    return TheoremCheck('IG vs IM', {'epsilon': epsilon, 'tau': tau}, conditions, {'IM': _conclusion(conditions)})


def _threshold(numerator: float, spread: float) -> float:
    return numerator / (numerator + spread) if numerator + spread > 0 else 0.0


def _gap(name: str, schedule: ScheduleSpec, threshold: float,
         strict: bool = False) -> Tuple[ConditionResult, Optional[ScheduleSpec]]:
    """Range condition on schedule against threshold, plus the gap schedule when it holds"""
    if strict:
        top = supremum(schedule)
        if top >= threshold or math.isclose(top, threshold, rel_tol=1e-12, abs_tol=ZERO_TOL):
            detail = f"sup {name}_n = {top:.17g} reaches the threshold {threshold:.17g}"
            return ConditionResult(f"{name}_n within range", False, detail), None
    try:
        gap = gap_schedule(schedule, threshold)
    except PreconditionError as e:
        return ConditionResult(f"{name}_n within range", False, f"{e} (threshold {threshold:.17g})"), None
    relation = '<' if strict else '<='
    return ConditionResult(f"{name}_n within range", True, f"sup {name}_n {relation} {threshold:.17g}"), gap


def check_g_vs_i_im(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec) -> TheoremCheck:
    """
    Sufficient conditions for G to converge faster than I and than IM

    With a_n < (1-b1)/(1-b1+2a1) and b_n < (1-b2)/(1-b2+2a2), the gap
    sequences a*, b* (threshold minus schedule) decide: sum b* = inf gives
    G faster than I, sum (a* + b*) = inf gives G faster than IM.
    """
    _require_params('G', params)
    p = params
    a_threshold = _threshold(1.0 - p.beta1, 2.0 * p.alpha1)
    b_threshold = _threshold(1.0 - p.beta2, 2.0 * p.alpha2)
    a_range, a_gap = _gap('a', schedule_a, a_threshold, strict=True)
    b_range, b_gap = _gap('b', schedule_b, b_threshold, strict=True)
    constants = {'a_threshold': a_threshold, 'b_threshold': b_threshold}

    if a_gap is None or b_gap is None:
        conditions = [a_range, b_range]
        return TheoremCheck('G vs I/IM', constants, conditions, {'I': NOT_ESTABLISHED, 'IM': NOT_ESTABLISHED})

    part_i = _series_condition('(i) sum b* = inf', classify_weighted_combination([(1.0, b_gap, 'schedule')]))
    part_ii = _series_condition(
        '(ii) sum (a* + b*) = inf',
        classify_weighted_combination([(1.0, a_gap, 'schedule'), (1.0, b_gap, 'schedule')])
    )
    conditions = [a_range, b_range, part_i, part_ii]
    return TheoremCheck('G vs I/IM', constants, conditions, {
        'I': FASTER if part_i.holds else NOT_ESTABLISHED,
        'IM': FASTER if part_ii.holds else NOT_ESTABLISHED,
    })


def check_g_vs_ig(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
                  kappa1: float) -> TheoremCheck:
    """
    Sufficient conditions for G to converge faster than IG

    Args:
        params: G parameters (alpha1, alpha2, beta1, beta2)
        schedule_a, schedule_b: Shared schedules
        kappa1: Lower class constant of the IG mapping T1

    Raises:
        PreconditionError: If beta2 <= kappa1 <= alpha1 fails
    """
    _require_params('G', params)
    p = params
    if not p.beta2 <= kappa1 <= p.alpha1:
        raise PreconditionError(f"beta2 <= kappa1 <= alpha1 fails (beta2={p.beta2}, kappa1={kappa1}, alpha1={p.alpha1})")

    a_threshold = _threshold(1.0 - p.beta1, 2.0 * p.alpha1)
    b_threshold = _threshold(kappa1 - p.beta2, 2.0 * p.alpha2)
    a_range, a_gap = _gap('a', schedule_a, a_threshold)
    b_range, b_gap = _gap('b', schedule_b, b_threshold)
    constants = {'a_threshold': a_threshold, 'b_threshold': b_threshold, 'kappa1': kappa1}

    if a_gap is None or b_gap is None:
        return TheoremCheck('G vs IG', constants, [a_range, b_range], {'IG': NOT_ESTABLISHED})

    combined = _series_condition(
        'sum (a* + b*) = inf',
        classify_weighted_combination([(1.0, a_gap, 'schedule'), (1.0, b_gap, 'schedule')])
    )
    conditions = [a_range, b_range, combined]
    return TheoremCheck('G vs IG', constants, conditions, {'IG': _conclusion(conditions)})


def rate_envelope(scheme_a: str, params_a: SchemeParams, scheme_b: str, params_b: SchemeParams,
                  schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> np.ndarray:
    """
    ln of the envelope E_0..E_{N+1} with R_{n+1} <= E_{n+1} = U^A_n / L^B_n and E_0 = 1

    IG as the slower scheme uses the lower bound that holds for its whole class.
    Indices where L^B has vanished carry +inf.
    """
    if (scheme_a, scheme_b) not in COMPARISON_PAIRS:
        raise ConfigError(f"no rate comparison for {scheme_a} against {scheme_b}")
    upper = bound_series(scheme_a, 'upper', params_a, schedule_a, schedule_b, N)
    lower = bound_series(scheme_b, 'lower', params_b, schedule_a, schedule_b, N, variant='safe')
    ln_envelope = np.empty(int(N) + 2)
    ln_envelope[0] = 0.0
    ln_envelope[1:] = np.where(lower.valid, upper.log_cumulative - np.where(lower.valid, lower.log_cumulative, 0.0),
                               math.inf)
    return ln_envelope


# Singular-index markers of the ratio series
REGULAR = ''
BOTH_AT_FIXED_POINT = 'both-at-fixed-point'
DENOMINATOR_AT_FIXED_POINT = 'denominator-at-fixed-point'


def _ratio_log_series(traj_a: Trajectory, traj_b: Trajectory, zero_tol: float) -> Tuple[np.ndarray, List[str]]:
    if traj_a.horizon != traj_b.horizon:
        raise ConfigError(f"trajectories have horizons {traj_a.horizon} and {traj_b.horizon}")
    if not np.array_equal(traj_a.points[0], traj_b.points[0]):
        raise ConfigError("trajectories start from different points")
    if traj_a.fixed_point is not None and traj_b.fixed_point is not None \
            and not np.array_equal(traj_a.fixed_point, traj_b.fixed_point):
        raise ConfigError("trajectories approach different fixed points")

    threshold = math.log(zero_tol) if zero_tol > 0 else -math.inf
    at_a = traj_a.ln_ratios <= threshold
    at_b = traj_b.ln_ratios <= threshold
    ln_ratio = np.empty(traj_a.horizon + 1)
    flags = []
    for n in range(traj_a.horizon + 1):
        if at_a[n] and at_b[n]:
            ln_ratio[n] = -math.inf
            flags.append(BOTH_AT_FIXED_POINT)
        elif at_b[n]:
            ln_ratio[n] = 0.0
            flags.append(DENOMINATOR_AT_FIXED_POINT)
        else:
            ln_ratio[n] = traj_a.ln_ratios[n] - traj_b.ln_ratios[n]
            flags.append(REGULAR)
    return ln_ratio, flags


def ratio_series(traj_a: Trajectory, traj_b: Trajectory, zero_tol: float = 0.0) -> List[float]:
    """
    R_n = |x_n - x*| / |u_n - x*| for two runs from the same start

    Both errors within zero_tol * e_0 give R_n = 0; only the denominator
    within it gives R_n = 1.

    Raises:
        ConfigError: If the horizons, start points or fixed points differ
    """
    ln_ratio, _ = _ratio_log_series(traj_a, traj_b, zero_tol)
    return [float(v) for v in np.exp(ln_ratio)]


@dataclass(frozen=True)
class EmpiricalCheck:
    """What the runs actually did against the envelope"""
    decreasing: bool
    within_envelope: Optional[bool]
    max_excess: Optional[float]

    def to_dict(self) -> Dict:
        return {
            'decreasing': self.decreasing,
            'within_envelope': self.within_envelope,
            'max_excess': self.max_excess,
        }


@dataclass(frozen=True)
class ComparisonReport:
    scheme_a: str
    scheme_b: str
    ln_ratios: np.ndarray
    singular_flags: List[str]
    ln_envelope: Optional[np.ndarray]
    theorem_check: Optional[TheoremCheck]
    empirical: EmpiricalCheck
    conclusion: str
    notes: List[str] = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return np.exp(self.ln_ratios)

    def rows(self) -> List[Dict]:
        """CSV records: n, R_n, ln_R_n, envelope_n, singular_flag"""
        ratios = self.ratios
        records = []
        for n in range(len(self.ln_ratios)):
            envelope = None if self.ln_envelope is None else float(np.exp(self.ln_envelope[n]))
            records.append({
                'n': n,
                'R_n': float(ratios[n]),
                'ln_R_n': float(self.ln_ratios[n]),
                'envelope_n': envelope,
                'singular_flag': self.singular_flags[n],
            })
        return records

    def verdict(self) -> Dict:
        check = self.theorem_check
        return {
            'schemes': [self.scheme_a, self.scheme_b],
            'theorem': check.theorem if check else None,
            'constants': check.constants if check else {},
            'conditions': [c.to_dict() for c in check.conditions] if check else [],
            'conclusion': self.conclusion,
            'empirical': self.empirical.to_dict(),
            'notes': self.notes,
        }


def theorem_check(config_a: SchemeConfig, config_b: SchemeConfig) -> TheoremCheck:
    """Dispatch to the comparison theorem for (A, B); schedules must already agree"""
    pair = (config_a.scheme, config_b.scheme)
    schedules = (config_a.schedule_a, config_a.schedule_b)
    if pair == ('IG', 'I'):
        return check_ig_vs_i(config_a.params, *schedules)
    if pair == ('IG', 'IM'):
        return check_ig_vs_im(config_a.params, *schedules)
    if pair in (('G', 'I'), ('G', 'IM')):
        return check_g_vs_i_im(config_a.params, *schedules)
    if pair == ('G', 'IG'):
        return check_g_vs_ig(config_a.params, *schedules, kappa1=config_b.params.kappa1)
    raise ConfigError(f"no rate comparison for {config_a.scheme} against {config_b.scheme}")


def compare_trajectories(config_a: SchemeConfig, config_b: SchemeConfig, zero_tol: float = 0.0) -> ComparisonReport:
    """
    Run both schemes and assemble the comparison report

    Args:
        config_a: The scheme claimed faster
        config_b: The scheme compared against
        zero_tol: Relative error below which an iterate counts as x*

    Returns:
        ComparisonReport with the ratio series, envelope, theorem check and
        empirical check; the conclusion comes from the theorem check only

    Raises:
        ConfigError: If the runs do not share x*, x0 and horizon
    """
    if not np.array_equal(config_a.fixed_point, config_b.fixed_point):
        raise ConfigError("compared schemes must share the fixed point")
    traj_a, traj_b = run(config_a), run(config_b)
    ln_ratios, flags = _ratio_log_series(traj_a, traj_b, zero_tol)

    notes = []
    shared = config_a.schedule_a == config_b.schedule_a and config_a.schedule_b == config_b.schedule_b
    check = None
    ln_envelope = None
    if not shared:
        notes.append("schedules differ between the schemes; no theorem applies")
    elif (config_a.scheme, config_b.scheme) not in COMPARISON_PAIRS:
        notes.append(f"no comparison theorem for {config_a.scheme} against {config_b.scheme}")
    else:
        try:
            check = theorem_check(config_a, config_b)
        except PreconditionError as e:
            notes.append(f"theorem precondition fails: {e}")
        if traj_a.horizon > 0:
            try:
                ln_envelope = rate_envelope(config_a.scheme, config_a.params, config_b.scheme, config_b.params,
                                            config_a.schedule_a, config_a.schedule_b, traj_a.horizon - 1)
            except PreconditionError as e:
                notes.append(f"envelope unavailable: {e}")

    horizon = traj_a.horizon
    within, excess = None, None
    if ln_envelope is not None:
        slack = ENVELOPE_TOL * max(horizon, 1)
        gaps = ln_ratios - ln_envelope
        finite = np.isfinite(gaps)
        excess = float(np.max(gaps[finite])) if np.any(finite) else 0.0
        within = bool(np.all(gaps[finite] <= slack))
    empirical = EmpiricalCheck(bool(ln_ratios[horizon] < ln_ratios[0]), within, excess)

    conclusion = check.conclusions.get(config_b.scheme, NOT_ESTABLISHED) if check else NOT_ESTABLISHED
    return ComparisonReport(
        scheme_a=config_a.scheme,
        scheme_b=config_b.scheme,
        ln_ratios=ln_ratios,
        singular_flags=flags,
        ln_envelope=ln_envelope,
        theorem_check=check,
        empirical=empirical,
        conclusion=conclusion,
        notes=notes
    )
