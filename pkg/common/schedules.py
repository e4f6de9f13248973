"""
Parameter schedules (a_n), (b_n) in [0, 1] and symbolic series classification
Built-in families are monotone, so extrema and tail limits are exact
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import ConfigError, PreconditionError


FAMILIES = ('constant', 'power', 'geometric', 'explicit', 'gap')

DIVERGENT = 'divergent'
CONVERGENT = 'convergent'
ALL_ZERO = 'all-zero'
UNKNOWN = 'unknown'

# Number of terms summed for the numeric partial-sum probe
N_PROBE = 10 ** 6

# Tolerance for deciding a tail limit is exactly zero
ZERO_TOL = 1e-15


@dataclass(frozen=True)
class ScheduleSpec:
    """
    A parameter sequence family

    constant:  c
    power:     c / (n + p)^q,  p >= 1, q >= 0
    geometric: c * r^n,        r in [0, 1)
    explicit:  values[n] for n < len(values), tail afterwards
    gap:       threshold - base_n (built by gap_schedule)
    """
    family: str
    c: float = 0.0
    p: float = 1.0
    q: float = 1.0
    r: float = 0.5
    values: Tuple[float, ...] = ()
    tail: float = 0.0
    threshold: float = 0.0
    base: Optional['ScheduleSpec'] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown schedule family '{self.family}' (expected one of {', '.join(FAMILIES)})")
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))

        problem = self._range_problem()
        if problem:
            raise ConfigError(f"{self.family} schedule leaves [0, 1]: {problem}")

    def _range_problem(self) -> Optional[str]:
        """Analytic check that every term lies in [0, 1]"""
        if self.family == 'constant':
            if not 0.0 <= self.c <= 1.0:
                return f"c={self.c}"
        elif self.family == 'power':
            if self.p < 1 or self.q < 0:
                return f"requires p >= 1 and q >= 0, got p={self.p}, q={self.q}"
            if self.c < 0 or self.c / self.p ** self.q > 1.0:
                return f"first term c/p^q = {self.c / self.p ** self.q}"
        elif self.family == 'geometric':
            if not 0.0 <= self.c <= 1.0 or not 0.0 <= self.r < 1.0:
                return f"requires c in [0, 1] and r in [0, 1), got c={self.c}, r={self.r}"
        elif self.family == 'explicit':
            bad = [v for v in self.values + (self.tail,) if not 0.0 <= v <= 1.0]
            if bad:
                return f"values {bad}"
        elif self.family == 'gap':
            if self.base is None:
                return "gap schedule needs a base schedule"
            if supremum(self.base) - self.threshold > 1e-12 or self.threshold - infimum(self.base) > 1.0:
                return f"threshold {self.threshold} against base range [{infimum(self.base)}, {supremum(self.base)}]"
        return None

    def to_dict(self) -> Dict:
        if self.family == 'constant':
            return {'family': 'constant', 'c': self.c}
        if self.family == 'power':
            return {'family': 'power', 'c': self.c, 'p': self.p, 'q': self.q}
        if self.family == 'geometric':
            return {'family': 'geometric', 'c': self.c, 'r': self.r}
        if self.family == 'explicit':
            return {'family': 'explicit', 'values': list(self.values), 'tail': self.tail}
        return {'family': 'gap', 'threshold': self.threshold, 'base': self.base.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ScheduleSpec':
        family = data.get('family')
        try:
            if family == 'constant':
                return cls('constant', c=float(data['c']))
            if family == 'power':
                return cls('power', c=float(data['c']), p=float(data.get('p', 1.0)), q=float(data['q']))
            if family == 'geometric':
                return cls('geometric', c=float(data['c']), r=float(data['r']))
            if family == 'explicit':
                return cls('explicit', values=tuple(data['values']), tail=float(data['tail']))
            if family == 'gap':
                return cls('gap', threshold=float(data['threshold']), base=cls.from_dict(data['base']))
        except KeyError as e:
            raise ConfigError(f"{family} schedule is missing key {e}")
        raise ConfigError(f"unknown schedule family '{family}'")


def constant(c: float) -> ScheduleSpec:
    return ScheduleSpec('constant', c=c)


def power(c: float, p: float, q: float) -> ScheduleSpec:
    return ScheduleSpec('power', c=c, p=p, q=q)


def geometric(c: float, r: float) -> ScheduleSpec:
    return ScheduleSpec('geometric', c=c, r=r)


def explicit(values: Sequence[float], tail: float) -> ScheduleSpec:
    return ScheduleSpec('explicit', values=tuple(values), tail=tail)


def value_at(schedule: ScheduleSpec, n: int) -> float:
    """Term n of the schedule"""
    if n < 0:
        raise ValueError(f"schedule index must be non-negative, got {n}")
    family = schedule.family
    if family == 'constant':
        return schedule.c
    if family == 'power':
        return schedule.c / (n + schedule.p) ** schedule.q
    if family == 'geometric':
        return schedule.c * schedule.r ** n
    if family == 'explicit':
        return schedule.values[n] if n < len(schedule.values) else schedule.tail
    return schedule.threshold - value_at(schedule.base, n)


def values(schedule: ScheduleSpec, count: int) -> np.ndarray:
    """Terms 0..count-1 as an array"""
    n = np.arange(count, dtype=float)
    family = schedule.family
    if family == 'constant':
        return np.full(count, schedule.c)
    if family == 'power':
        return schedule.c / (n + schedule.p) ** schedule.q
    if family == 'geometric':
        return schedule.c * schedule.r ** n
    if family == 'explicit':
        head = np.array(schedule.values[:count], dtype=float)
        return np.concatenate([head, np.full(count - len(head), schedule.tail)])
    return schedule.threshold - values(schedule.base, count)


def tail_limit(schedule: ScheduleSpec) -> float:
    """lim a_n"""
    family = schedule.family
    if family == 'constant':
        return schedule.c
    if family == 'power':
        return schedule.c if schedule.q == 0 else 0.0
    if family == 'geometric':
        return 0.0
    if family == 'explicit':
        return schedule.tail
    return schedule.threshold - tail_limit(schedule.base)


def supremum(schedule: ScheduleSpec) -> float:
    """sup_n a_n (attained for every built-in family)"""
    family = schedule.family
    if family in ('constant', 'geometric'):
        return schedule.c
    if family == 'power':
        return schedule.c / schedule.p ** schedule.q
    if family == 'explicit':
        return max(schedule.values + (schedule.tail,))
    return schedule.threshold - infimum(schedule.base)


def infimum(schedule: ScheduleSpec) -> float:
    """inf_n a_n (possibly only approached in the limit)"""
    family = schedule.family
    if family == 'constant':
        return schedule.c
    if family == 'power':
        return tail_limit(schedule)
    if family == 'geometric':
        return 0.0
    if family == 'explicit':
        return min(schedule.values + (schedule.tail,))
    return schedule.threshold - supremum(schedule.base)


# ============================================================================
# Series classification
# ============================================================================

@dataclass(frozen=True)
class SeriesVerdict:
    """Symbolic verdict on a series, with a numeric partial-sum probe"""
    verdict: str
    rationale: str
    partial_sum_probe: float
    direction: int = 1

    @property
    def diverges_to_infinity(self) -> bool:
        """True if the partial sums tend to +infinity"""
        return self.verdict == DIVERGENT and self.direction > 0

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict,
            'rationale': self.rationale,
            'partial_sum_probe': self.partial_sum_probe,
            'direction': self.direction
        }


def _symbolic(schedule: ScheduleSpec) -> Tuple[str, str]:
    family = schedule.family
    if family == 'constant':
        if schedule.c == 0:
            return ALL_ZERO, "constant 0"
        return DIVERGENT, f"constant {schedule.c} > 0"
    if family == 'power':
        if schedule.c == 0:
            return ALL_ZERO, "power family with c = 0"
        if schedule.q <= 1:
            return DIVERGENT, f"power family with q = {schedule.q} <= 1"
        return CONVERGENT, f"power family with q = {schedule.q} > 1"
    if family == 'geometric':
        if schedule.c == 0:
            return ALL_ZERO, "geometric family with c = 0"
        return CONVERGENT, f"geometric family with ratio {schedule.r} < 1"
    if family == 'explicit':
        if schedule.tail > 0:
            return DIVERGENT, f"explicit list with constant tail {schedule.tail} > 0"
        if all(v == 0 for v in schedule.values):
            return ALL_ZERO, "explicit list of zeros"
        return CONVERGENT, "explicit list with zero tail (finitely many non-zero terms)"

    limit = tail_limit(schedule)
    if limit > ZERO_TOL:
        return DIVERGENT, f"gap sequence with positive limit {limit:.6g}"
    # Zero limit: the base never drops below its limit, so the gap is zero wherever it is defined
    if schedule.base.family == 'explicit':
        if all(abs(v) <= ZERO_TOL for v in values(schedule, len(schedule.base.values))):
            return ALL_ZERO, "gap sequence identically zero"
        return CONVERGENT, "gap sequence with zero limit (finitely many non-zero terms)"
    return ALL_ZERO, "gap sequence identically zero"


def classify_series(schedule: ScheduleSpec, probe_terms: int = N_PROBE) -> SeriesVerdict:
    """
    Decide whether sum a_n diverges

    Args:
        schedule: Schedule to classify
        probe_terms: Number of terms in the numeric partial-sum probe

    Returns:
        SeriesVerdict with a symbolic verdict and the probe sum
    """
    verdict, rationale = _symbolic(schedule)
    return SeriesVerdict(verdict, rationale, float(np.sum(values(schedule, probe_terms))))


def classify_complement(schedule: ScheduleSpec, probe_terms: int = N_PROBE) -> SeriesVerdict:
    """Decide whether sum (1 - a_n) diverges"""
    probe = float(np.sum(1.0 - values(schedule, probe_terms)))
    limit = 1.0 - tail_limit(schedule)
    if limit > ZERO_TOL:
        return SeriesVerdict(DIVERGENT, f"1 - a_n tends to {limit:.6g} > 0", probe)

    family = schedule.family
    if family == 'gap':
        # 1 - (1 - base_n) = base_n when the threshold is 1
        inner = classify_series(schedule.base, probe_terms)
        return SeriesVerdict(inner.verdict, f"complement of a unit-threshold gap: {inner.rationale}", probe)
    if family == 'explicit' and any(v != 1.0 for v in schedule.values):
        return SeriesVerdict(CONVERGENT, "1 - a_n vanishes after finitely many terms", probe)
    return SeriesVerdict(ALL_ZERO, "a_n is identically 1", probe)


def classify_weighted_combination(terms: List[Tuple[float, ScheduleSpec, str]],
                                  probe_terms: int = N_PROBE) -> SeriesVerdict:
    """
    Decide whether sum_i w_i * sum_n s_i(n) diverges for non-negative addends

    Args:
        terms: (weight, schedule, kind) triples, kind is 'schedule' or 'one_minus'
        probe_terms: Number of terms in the numeric probe

    Returns:
        Divergent iff some term with positive weight diverges
    """
    probe = 0.0
    forcing = []
    for weight, schedule, kind in terms:
        if weight < 0:
            raise ValueError(f"weights must be non-negative, got {weight}")
        if kind == 'schedule':
            verdict = classify_series(schedule, probe_terms)
            label = f"sum of {schedule.family} schedule"
        elif kind == 'one_minus':
            verdict = classify_complement(schedule, probe_terms)
            label = f"sum of 1 - {schedule.family} schedule"
        else:
            raise ValueError(f"unknown series kind '{kind}'")
        probe += weight * verdict.partial_sum_probe
        if weight > 0 and verdict.verdict == DIVERGENT:
            forcing.append(f"{weight:.6g} x {label} ({verdict.rationale})")

    if forcing:
        return SeriesVerdict(DIVERGENT, "; ".join(forcing), probe)
    if all(weight == 0 for weight, _, _ in terms):
        return SeriesVerdict(CONVERGENT, "all weights are zero (sum is identically 0)", probe)
    return SeriesVerdict(CONVERGENT, "every positively weighted series converges", probe)


def _deviation(schedule: ScheduleSpec) -> Tuple[str, int, float, float]:
    """
    Asymptotic shape of a_n - lim a_n

    Returns:
        (kind, sign, coefficient, exponent) where kind is 'zero', 'finite',
        'geometric' or 'power'; a power deviation behaves like sign*coefficient/n^exponent
    """
    family = schedule.family
    if family == 'constant':
        return 'zero', 0, 0.0, 0.0
    if family in ('power', 'geometric') and schedule.c == 0:
        return 'zero', 0, 0.0, 0.0
    if family == 'power' and schedule.q == 0:
        return 'zero', 0, 0.0, 0.0
    if family == 'power':
        return 'power', 1, schedule.c, schedule.q
    if family == 'geometric':
        return 'geometric', 1, 0.0, 0.0
    if family == 'explicit':
        if all(v == schedule.tail for v in schedule.values):
            return 'zero', 0, 0.0, 0.0
        return 'finite', 0, 0.0, 0.0
    kind, sign, coefficient, exponent = _deviation(schedule.base)
    return kind, -sign, coefficient, exponent


def classify_linear_series(constant_term: float, terms: List[Tuple[float, ScheduleSpec]],
                           probe_terms: int = N_PROBE) -> SeriesVerdict:
    """
    Sign-aware verdict for sum_n [constant_term + sum_i w_i s_i(n)]

    The general term may change sign; a symbolic verdict is issued only when the
    tail is eventually of one sign under the family algebra.

    Args:
        constant_term: Constant part of the general term
        terms: (weight, schedule) pairs, weights of any sign
        probe_terms: Number of terms in the numeric probe

    Returns:
        SeriesVerdict; direction tells +infinity from -infinity
    """
    general = np.full(probe_terms, float(constant_term))
    for weight, schedule in terms:
        general += weight * values(schedule, probe_terms)
    probe = float(np.sum(general))

    limit = constant_term + sum(weight * tail_limit(schedule) for weight, schedule in terms)
    if limit > ZERO_TOL:
        return SeriesVerdict(DIVERGENT, f"general term tends to {limit:.6g} > 0", probe, 1)
    if limit < -ZERO_TOL:
        return SeriesVerdict(DIVERGENT, f"general term tends to {limit:.6g} < 0", probe, -1)

    # Zero limit: compare the decay of the deviations from the tail
    dominant = None
    net = 0.0
    all_zero = True
    for weight, schedule in terms:
        kind, sign, coefficient, exponent = _deviation(schedule)
        if kind == 'zero' or weight == 0:
            continue
        all_zero = False
        if kind != 'power' or exponent > 1:
            continue
        if dominant is None or exponent < dominant:
            dominant, net = exponent, 0.0
        if exponent == dominant:
            net += weight * sign * coefficient

    if dominant is not None:
        if abs(net) <= ZERO_TOL:
            return SeriesVerdict(UNKNOWN, "leading n^-q deviations cancel; sign of the tail is undecided", probe, 0)
        direction = 1 if net > 0 else -1
        return SeriesVerdict(
            DIVERGENT, f"general term behaves like {net:.6g}/n^{dominant:g} (q <= 1)", probe, direction
        )
    if all_zero:
        return SeriesVerdict(ALL_ZERO, "general term is identically zero", probe, 0)
    return SeriesVerdict(CONVERGENT, "general term vanishes faster than 1/n", probe, 0)


def _product_shape(schedule: ScheduleSpec) -> Tuple[str, float, float]:
    """('zero'|'finite'|'geometric'|'power', coefficient, exponent) of a_n for large n"""
    verdict, _ = _symbolic(schedule)
    if verdict == ALL_ZERO:
        return 'zero', 0.0, 0.0
    limit = tail_limit(schedule)
    if limit > ZERO_TOL:
        return 'power', limit, 0.0
    if schedule.family == 'power':
        return 'power', schedule.c, schedule.q
    if schedule.family == 'geometric':
        return 'geometric', 0.0, 0.0
    return 'finite', 0.0, 0.0


def classify_product_series(a: ScheduleSpec, b: ScheduleSpec, probe_terms: int = N_PROBE) -> SeriesVerdict:
    """Decide whether sum a_n * b_n diverges"""
    probe = float(np.sum(values(a, probe_terms) * values(b, probe_terms)))
    shape_a, shape_b = _product_shape(a), _product_shape(b)
    kinds = {shape_a[0], shape_b[0]}

    if 'zero' in kinds:
        return SeriesVerdict(ALL_ZERO, "one factor is identically zero", probe)
    if 'finite' in kinds:
        return SeriesVerdict(CONVERGENT, "one factor vanishes after finitely many terms", probe)
    if 'geometric' in kinds:
        return SeriesVerdict(CONVERGENT, "one factor decays geometrically, the other is bounded", probe)

    exponent = shape_a[2] + shape_b[2]
    if exponent <= 1:
        return SeriesVerdict(DIVERGENT, f"product behaves like n^-{exponent:g} with exponent <= 1", probe)
    return SeriesVerdict(CONVERGENT, f"product behaves like n^-{exponent:g} with exponent > 1", probe)


def gap_schedule(schedule: ScheduleSpec, threshold: float) -> ScheduleSpec:
    """
    The shifted sequence threshold - a_n

    Args:
        schedule: Base schedule, which must stay at or below threshold
        threshold: Upper limit for the base schedule

    Returns:
        A constant schedule for constant bases, a gap-family schedule otherwise

    Raises:
        PreconditionError: If the base exceeds threshold for some n
    """
    top = supremum(schedule)
    # Thresholds are computed in floating point; a schedule on the threshold gives a zero gap
    touching = math.isclose(top, threshold, rel_tol=1e-12, abs_tol=ZERO_TOL)
    if top > threshold and not touching:
        raise PreconditionError(
            f"{schedule.family} schedule reaches {top:.17g}, above the threshold {threshold:.17g}"
        )
    if schedule.family == 'constant':
        return constant(0.0 if touching else threshold - schedule.c)
    return ScheduleSpec('gap', threshold=threshold, base=schedule)


# ============================================================================
# Sandwich inequalities
# ============================================================================

def log_sandwich(x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x/(x+1), ln(1+x), x) for x > -1; the middle term lies between the outer two"""
    x = np.asarray(x, dtype=float)
    return x / (x + 1.0), np.log1p(x), x


def partial_sum_sandwich(a_values, u_values) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Partial sums of a_n and of a_n / (1 - u_n a_n), with the margin min(1 - u_n a_n)

    The two series converge or diverge together whenever the margin is positive.
    """
    a_values = np.asarray(a_values, dtype=float)
    u_values = np.asarray(u_values, dtype=float)
    denominators = 1.0 - u_values * a_values
    margin = float(denominators.min())
    if margin <= 0:
        raise PreconditionError(f"1 - u_n a_n must stay positive, minimum is {margin:.6g}")
    return np.cumsum(a_values), np.cumsum(a_values / denominators), margin
