"""
Optimal upper/lower error-bound products for the two-step schemes
Plus a brute-force 1-D oracle and a randomized falsification probe for the bounds
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import ortho_group

from common.errors import ConfigError, PreconditionError
from common.iterations import (
    SchemeConfig,
    SchemeParams,
    param_violations,
    run,
    scheme_update,
)
from common.mappings import (
    DomainSpec,
    MappingSpec,
    NonexpansiveClass,
    role_classes,
    witness_lower,
    witness_upper,
)
from common.schedules import ScheduleSpec, values


SIDES = ('upper', 'lower')
VARIANTS = ('paper', 'safe')
# Alternate spelling accepted for the 'paper' variant
VARIANT_ALIASES = {'published': 'paper'}
BOUND_SCHEMES = ('I', 'IM', 'IG', 'G')

# Relative slack when comparing a run against a bound
REL_TOL = 1e-9

# Probe samples per deterministic chunk
CHUNK_SIZE = 8192

# Chance of drawing each endpoint kappa / alpha exactly
ENDPOINT_PROB = 0.125


@dataclass(frozen=True)
class BoundSeries:
    """
    Cumulative bound products B_n = prod_{k<=n} f_k for n = 0..N

    B_n bounds r_{n+1} = |x_{n+1} - x*| / |x_0 - x*|. Products are carried in
    log domain; a factor <= 0 poisons the series from its index on.
    """
    scheme: str
    side: str
    factors: np.ndarray
    positive: np.ndarray
    log_cumulative: np.ndarray
    variant: str = 'paper'

    @property
    def valid(self) -> np.ndarray:
        return np.logical_and.accumulate(self.positive)

    @property
    def values(self) -> np.ndarray:
        return np.where(self.valid, np.exp(self.log_cumulative), 0.0)

    @property
    def horizon(self) -> int:
        return len(self.factors) - 1

    def rows(self) -> List[Dict]:
        """One record per index: n, factor, bound_value, ln_bound (None when invalid), valid"""
        valid = self.valid
        bound_values = self.values
        return [
            {
                'n': n,
                'factor': float(self.factors[n]),
                'bound_value': float(bound_values[n]),
                'ln_bound': float(self.log_cumulative[n]) if valid[n] else None,
                'valid': bool(valid[n]),
            }
            for n in range(len(self.factors))
        ]


def _accumulate(scheme: str, side: str, brackets: Sequence[np.ndarray], variant: str = 'paper') -> BoundSeries:
    factors = np.prod(np.vstack(brackets), axis=0)
    positive = np.all(np.vstack(brackets) > 0, axis=0)
    logs = np.log(np.where(positive, factors, 1.0))
    valid = np.logical_and.accumulate(positive)
    log_cumulative = np.where(valid, np.cumsum(logs), -math.inf)
    for array in (factors, positive, log_cumulative):
        array.setflags(write=False)
    return BoundSeries(scheme, side, factors, positive, log_cumulative, variant)


def _schedule_values(schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> Tuple[np.ndarray, np.ndarray]:
    if int(N) != N or N < 0:
        raise ConfigError(f"bound horizon N must be a non-negative integer, got {N}")
    return values(schedule_a, int(N) + 1), values(schedule_b, int(N) + 1)


def _require_params(scheme: str, params: SchemeParams):
    violations = param_violations(scheme, params, allow_degenerate=True)
    if violations:
        raise ConfigError(f"invalid {scheme} parameters: " + "; ".join(violations))


def _require_below(name: str, terms: np.ndarray, threshold: float, label: str, strict: bool):
    """Raise on the first index whose schedule term reaches threshold"""
    failing = terms >= threshold if strict else terms > threshold
    if np.any(failing):
        k = int(np.argmax(failing))
        relation = '<' if strict else '<='
        raise PreconditionError(
            f"{name}_{k} = {terms[k]:.17g} violates {name}_k {relation} {label} = {threshold:.17g}"
        )


def canonical_variant(variant: str) -> str:
    """Resolve a lower-bound variant name through its aliases"""
    name = VARIANT_ALIASES.get(variant, variant)
    if name not in VARIANTS:
        raise ConfigError(f"unknown lower-bound variant '{variant}' (expected paper or safe)")
    return name


# ============================================================================
# IG bounds
# ============================================================================

def ueb_ig(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """
    Upper bound of scheme IG: f_k = [1 - (1-a1) a_k] [a1 + (a2-a1) b_k]

    Raises:
        ConfigError: If the IG parameter invariants fail
    """
    _require_params('IG', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('IG', 'upper', [
        1.0 - (1.0 - p.alpha1) * a,
        p.alpha1 + (p.alpha2 - p.alpha1) * b,
    ])


def leb_ig(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int,
           variant: str = 'paper') -> BoundSeries:
    """
    Lower bound of scheme IG

    Variant 'paper' uses [1 - (1+k1) a_k] [k1 - (k1+a2) b_k]; the safe variant
    swaps the first bracket for [1 - (1+a1) a_k], which holds for every member
    of the T1 class.

    Args:
        params: IG parameters (kappa2 is not used)
        schedule_a, schedule_b: Schedules
        N: Last bound index
        variant: 'paper' (alias 'published') or 'safe'

    Raises:
        ConfigError: Invalid params or unknown variant
        PreconditionError: A schedule term breaks a_k < 1/(1+k1), b_k < k1/(k1+a2),
            or (safe) a_k <= 1/(1+a1)
    """
    variant = canonical_variant(variant)
    _require_params('IG', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params

    _require_below('a', a, 1.0 / (1.0 + p.kappa1), '1/(1+kappa1)', strict=True)
    b_threshold = p.kappa1 / (p.kappa1 + p.alpha2) if p.kappa1 + p.alpha2 > 0 else 0.0
    _require_below('b', b, b_threshold, 'kappa1/(kappa1+alpha2)', strict=True)

    if variant == 'safe':
        _require_below('a', a, 1.0 / (1.0 + p.alpha1), '1/(1+alpha1)', strict=False)
        first = 1.0 - (1.0 + p.alpha1) * a
    else:
        first = 1.0 - (1.0 + p.kappa1) * a
    second = p.kappa1 - (p.kappa1 + p.alpha2) * b
    return _accumulate('IG', 'lower', [first, second], variant)


# ============================================================================
# G bounds
# ============================================================================

def ueb_g(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """Upper bound of scheme G: f_k = [b1 + (a1-b1) a_k] [b2 + (a2-b2) b_k]"""
    _require_params('G', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('G', 'upper', [
        p.beta1 + (p.alpha1 - p.beta1) * a,
        p.beta2 + (p.alpha2 - p.beta2) * b,
    ])


def leb_g(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """
    Lower bound of scheme G: f_k = [k1 - (k1+a1) a_k] [k2 - (k2+a2) b_k]

    Raises:
        PreconditionError: If a_k > k1/(k1+a1) or b_k > k2/(k2+a2) for some k <= N
    """
    _require_params('G', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    a_threshold = p.kappa1 / (p.kappa1 + p.alpha1) if p.kappa1 + p.alpha1 > 0 else 1.0
    b_threshold = p.kappa2 / (p.kappa2 + p.alpha2) if p.kappa2 + p.alpha2 > 0 else 1.0
    _require_below('a', a, a_threshold, 'kappa1/(kappa1+alpha1)', strict=False)
    _require_below('b', b, b_threshold, 'kappa2/(kappa2+alpha2)', strict=False)
    return _accumulate('G', 'lower', [
        p.kappa1 - (p.kappa1 + p.alpha1) * a,
        p.kappa2 - (p.kappa2 + p.alpha2) * b,
    ])


# ============================================================================
# I / IM bounds
# ============================================================================

def ueb_i(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """Upper bound of scheme I: f_k = 1 - b_k + a2 b_k [1 - (1-a1) a_k]"""
    _require_params('I', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('I', 'upper', [1.0 - b + p.alpha2 * b * (1.0 - (1.0 - p.alpha1) * a)])


def leb_i(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """Lower bound of scheme I: f_k = 1 - b_k - a2 b_k [1 - (1-a1) a_k]"""
    _require_params('I', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('I', 'lower', [1.0 - b - p.alpha2 * b * (1.0 - (1.0 - p.alpha1) * a)])


def ueb_im(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """Upper bound of scheme IM: f_k = [1 - (1-a1) a_k] [1 - (1-a2) b_k]"""
    _require_params('IM', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('IM', 'upper', [
        1.0 - (1.0 - p.alpha1) * a,
        1.0 - (1.0 - p.alpha2) * b,
    ])


def leb_im(params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, N: int) -> BoundSeries:
    """Lower bound of scheme IM; each bracket must stay positive for the index to count"""
    _require_params('IM', params)
    a, b = _schedule_values(schedule_a, schedule_b, N)
    p = params
    return _accumulate('IM', 'lower', [
        1.0 - (1.0 + p.alpha2) * b,
        1.0 - (1.0 + p.alpha1) * a,
    ])


_CONSTRUCTORS = {
    ('IG', 'upper'): ueb_ig,
    ('G', 'upper'): ueb_g,
    ('G', 'lower'): leb_g,
    ('I', 'upper'): ueb_i,
    ('I', 'lower'): leb_i,
    ('IM', 'upper'): ueb_im,
    ('IM', 'lower'): leb_im,
}


def bound_series(scheme: str, side: str, params: SchemeParams, schedule_a: ScheduleSpec,
                 schedule_b: ScheduleSpec, N: int, variant: str = 'paper') -> BoundSeries:
    """
    Dispatch to the bound constructor for (scheme, side)

    Raises:
        ConfigError: For schemes without certified bounds or an unknown side
    """
    if side not in SIDES:
        raise ConfigError(f"unknown bound side '{side}' (expected upper or lower)")
    if scheme not in BOUND_SCHEMES:
        raise ConfigError(f"scheme {scheme} has no certified error bounds (bounds exist for {', '.join(BOUND_SCHEMES)})")
    if (scheme, side) == ('IG', 'lower'):
        return leb_ig(params, schedule_a, schedule_b, N, variant)
    if side == 'lower' and canonical_variant(variant) == 'safe':
        raise ConfigError(f"scheme {scheme} has no safe lower-bound variant (only IG does)")
    return _CONSTRUCTORS[(scheme, side)](params, schedule_a, schedule_b, N)


# ============================================================================
# Batch evaluation of linear runs
# ============================================================================

def _batch_log_ratios(scheme: str, matrices: Dict[str, np.ndarray], directions: np.ndarray,
                      a: np.ndarray, b: np.ndarray) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Yield (n, ln r_{n+1}) for a batch of linear runs

    Args:
        scheme: Scheme id
        matrices: role -> (M, d, d) linear parts
        directions: (M, d) unit start displacements
        a, b: Schedule terms for n = 0..N
    """
    def role_map(role: str, d: np.ndarray) -> np.ndarray:
        return np.einsum('mij,mj->mi', matrices[role], d)

    d = directions
    log_length = np.zeros(len(directions))
    for n in range(len(a)):
        _, z = scheme_update(scheme, role_map, d, a[n], b[n])
        gain = np.linalg.norm(z, axis=1)
        positive = gain > 0
        with np.errstate(divide='ignore'):
            log_length = log_length + np.log(gain)
        d = np.where(positive[:, None], z / np.where(positive, gain, 1.0)[:, None], 0.0)
        yield n, log_length


def _coefficient_grid(nonexpansive_class: NonexpansiveClass, grid: int) -> np.ndarray:
    moduli = np.linspace(nonexpansive_class.kappa, nonexpansive_class.alpha, grid)
    return np.unique(np.concatenate([moduli, -moduli]))


def oracle_extreme_1d(scheme: str, params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
                      N: int, side: str, grid: int = 9) -> List[float]:
    """
    Brute-force extreme of r_{n+1} over 1-D scaling assignments, n = 0..N

    Each role's coefficient ranges over +-linspace(kappa, alpha, grid) of its
    class; a role used in both sub-steps keeps one coefficient for the run.

    Returns:
        Per-n maximum (upper) or minimum (lower) of r_{n+1}
    """
    if grid < 3:
        raise ConfigError(f"oracle grid must be at least 3, got {grid}")
    if side not in SIDES:
        raise ConfigError(f"unknown bound side '{side}' (expected upper or lower)")
    _require_params(scheme, params)

    classes = role_classes(scheme, params)
    roles = list(classes)
    mesh = np.meshgrid(*[_coefficient_grid(classes[role], grid) for role in roles], indexing='ij')
    matrices = {role: axis.reshape(-1, 1, 1) for role, axis in zip(roles, mesh)}
    count = mesh[0].size

    a, b = _schedule_values(schedule_a, schedule_b, N)
    reduce = np.max if side == 'upper' else np.min
    extremes = []
    for _, log_ratio in _batch_log_ratios(scheme, matrices, np.ones((count, 1)), a, b):
        extremes.append(float(np.exp(reduce(log_ratio))))
    return extremes


# ============================================================================
# Falsification probe
# ============================================================================

@dataclass(frozen=True)
class Counterexample:
    """A class-conforming run that breaks a bound, with everything needed to replay it"""
    scheme: str
    side: str
    variant: str
    seed: int
    sample_index: int
    dimension: int
    roles: Dict[str, MappingSpec]
    x0: Tuple[float, ...]
    index: int
    ratio: float
    ln_ratio: float
    bound: float
    ln_bound: float

    def to_dict(self) -> Dict:
        return {
            'scheme': self.scheme,
            'side': self.side,
            'variant': self.variant,
            'seed': self.seed,
            'sample_index': self.sample_index,
            'dimension': self.dimension,
            'roles': {role: mapping.to_dict() for role, mapping in self.roles.items()},
            'x0': list(self.x0),
            'index': self.index,
            'ratio': self.ratio,
            'ln_ratio': self.ln_ratio,
            'bound': self.bound,
            'ln_bound': self.ln_bound,
        }


def _endpoint_biased(rng: np.random.Generator, nonexpansive_class: NonexpansiveClass, shape) -> np.ndarray:
    """Moduli in [kappa, alpha], hitting each endpoint exactly with probability ENDPOINT_PROB"""
    moduli = rng.uniform(nonexpansive_class.kappa, nonexpansive_class.alpha, size=shape)
    pick = rng.random(size=shape)
    moduli = np.where(pick < ENDPOINT_PROB, nonexpansive_class.kappa, moduli)
    return np.where((pick >= ENDPOINT_PROB) & (pick < 2 * ENDPOINT_PROB), nonexpansive_class.alpha, moduli)


def _sample_matrices(rng: np.random.Generator, classes: Dict[str, NonexpansiveClass],
                     count: int, dim: int) -> Dict[str, np.ndarray]:
    matrices = {}
    for role, nonexpansive_class in classes.items():
        if dim == 1:
            signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
            matrices[role] = (signs * _endpoint_biased(rng, nonexpansive_class, count)).reshape(-1, 1, 1)
            continue
        singular_values = _endpoint_biased(rng, nonexpansive_class, (count, dim))
        left = np.reshape(ortho_group.rvs(dim, size=count, random_state=rng), (count, dim, dim))
        right = np.reshape(ortho_group.rvs(dim, size=count, random_state=rng), (count, dim, dim))
        batch = np.einsum('mij,mj,mkj->mik', left, singular_values, right)
        top = np.linalg.norm(batch, ord=2, axis=(1, 2))
        # Keep sigma_max <= 1 after rounding in the product
        matrices[role] = batch / np.maximum(top, 1.0)[:, None, None]
    return matrices


def _unit_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    if dim == 1:
        return np.ones((count, 1))
    raw = rng.standard_normal((count, dim))
    return raw / np.linalg.norm(raw, axis=1)[:, None]


def _first_violations(scheme: str, matrices: Dict[str, np.ndarray], directions: np.ndarray,
                      a: np.ndarray, b: np.ndarray, bound: BoundSeries) -> Tuple[np.ndarray, np.ndarray]:
    """Per sample: the first violating index (-1 if none) and ln r at that index"""
    count = len(directions)
    first = np.full(count, -1)
    ln_at = np.full(count, math.nan)
    valid = bound.valid
    for n, log_ratio in _batch_log_ratios(scheme, matrices, directions, a, b):
        if bound.side == 'upper':
            limit = bound.log_cumulative[n] + math.log1p(REL_TOL)
            broken = log_ratio > limit
        elif valid[n]:
            limit = bound.log_cumulative[n] + math.log1p(-REL_TOL)
            broken = log_ratio < limit
        else:
            continue
        fresh = broken & (first < 0)
        first[fresh] = n
        ln_at[fresh] = log_ratio[fresh]
    return first, ln_at


def probe_bound_violation(scheme: str, params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
                          N: int, samples: int, seed: int, side: str = 'lower',
                          variant: str = 'paper') -> Optional[Counterexample]:
    """
    Search random class-conforming assignments for a run that breaks a bound

    Even sample indices are 1-D scalings, odd indices 2-D matrices U diag(s) V^T.
    Samples are drawn in fixed chunks, chunk j from default_rng([seed, j]), so
    the lowest violating sample index is the same however chunks are scheduled.

    Args:
        scheme: Scheme with certified bounds (I, IM, IG, G)
        params: Scheme parameters
        schedule_a, schedule_b: Schedules
        N: Last bound index checked (runs take N+1 steps)
        samples: Number of random assignments
        seed: Probe seed
        side: 'lower' flags r_{n+1} < B_n (1 - 1e-9); 'upper' flags r_{n+1} > B_n (1 + 1e-9)
        variant: IG lower-bound variant

    Returns:
        The counterexample with the lowest sample index, or None
    """
    if samples < 1:
        raise ConfigError(f"probe needs at least one sample, got {samples}")
    bound = bound_series(scheme, side, params, schedule_a, schedule_b, N, variant)
    classes = role_classes(scheme, params)
    a, b = _schedule_values(schedule_a, schedule_b, N)

    for chunk_start in range(0, samples, CHUNK_SIZE):
        chunk = chunk_start // CHUNK_SIZE
        rng = np.random.default_rng([seed, chunk])
        indices = np.arange(chunk_start, min(chunk_start + CHUNK_SIZE, samples))

        best = None
        for dim in (1, 2):
            members = indices[indices % 2 == (dim - 1)]
            if len(members) == 0:
                continue
            matrices = _sample_matrices(rng, classes, len(members), dim)
            directions = _unit_directions(rng, len(members), dim)
            first, ln_at = _first_violations(scheme, matrices, directions, a, b, bound)
            hits = np.flatnonzero(first >= 0)
            if len(hits) == 0:
                continue
            i = int(hits[0])
            if best is None or members[i] < best[0]:
                best = (int(members[i]), dim, {role: m[i] for role, m in matrices.items()},
                        directions[i], int(first[i]), float(ln_at[i]))

        if best is not None:
            return _counterexample(scheme, side, bound.variant, seed, best, bound)
    return None


def _counterexample(scheme: str, side: str, variant: str, seed: int, best, bound: BoundSeries) -> Counterexample:
    sample_index, dim, matrices, direction, n, ln_ratio = best
    domain = DomainSpec(dimension=dim)
    if dim == 1:
        roles = {role: MappingSpec('scaling', float(m[0, 0]), domain) for role, m in matrices.items()}
    else:
        roles = {role: MappingSpec('affine', m, domain) for role, m in matrices.items()}
    return Counterexample(
        scheme=scheme,
        side=side,
        variant=variant,
        seed=seed,
        sample_index=sample_index,
        dimension=dim,
        roles=roles,
        x0=tuple(float(v) for v in 0.25 * direction),
        index=n,
        ratio=float(np.exp(ln_ratio)),
        ln_ratio=ln_ratio,
        bound=float(bound.values[n]),
        ln_bound=float(bound.log_cumulative[n])
    )


def probe_lower_violation(scheme: str, params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
                          N: int, samples: int, seed: int, variant: str = 'paper') -> Optional[Counterexample]:
    """First run with r_{n+1} < L_n (1 - 1e-9), or None"""
    return probe_bound_violation(scheme, params, schedule_a, schedule_b, N, samples, seed, 'lower', variant)


# ============================================================================
# Witness certification
# ============================================================================

@dataclass(frozen=True)
class WitnessCheck:
    """Log-domain distance between a witness run and its bound"""
    scheme: str
    side: str
    log_gaps: Tuple[float, ...]

    @property
    def max_log_gap(self) -> float:
        return max(self.log_gaps) if self.log_gaps else 0.0

    @property
    def tight(self) -> bool:
        """|ln r_{n+1} - ln B_n| <= 1e-9 (n+1) at every index"""
        return all(gap <= REL_TOL * (n + 1) for n, gap in enumerate(self.log_gaps))


def witness_check(scheme: str, params: SchemeParams, schedule_a: ScheduleSpec, schedule_b: ScheduleSpec,
                  N: int, side: str, variant: str = 'paper') -> WitnessCheck:
    """
    Run the 1-D witness assignment for (scheme, side) and compare it with the bound

    Returns:
        Per-index |ln r_{n+1} - ln B_n|; indices where the bound is zero count
        as 0 when the run reaches x* and inf otherwise
    """
    bound = bound_series(scheme, side, params, schedule_a, schedule_b, N, variant)
    witness = witness_upper if side == 'upper' else witness_lower
    config = SchemeConfig(
        scheme=scheme,
        roles=witness(scheme, params),
        params=params,
        schedule_a=schedule_a,
        schedule_b=schedule_b,
        x0=(0.25,),
        horizon=int(N) + 1,
        allow_degenerate=True
    )
    traj = run(config)
    gaps = []
    valid = bound.valid
    for n in range(int(N) + 1):
        ln_ratio = float(traj.ln_ratios[n + 1])
        if valid[n]:
            gaps.append(abs(ln_ratio - float(bound.log_cumulative[n])))
        else:
            gaps.append(0.0 if ln_ratio == -math.inf else math.inf)
    return WitnessCheck(scheme, side, tuple(gaps))
