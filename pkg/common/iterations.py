"""
Iteration schemes (Picard, Mann, Ishikawa, I, IM, IG, G) and trajectory recording
All updates are formed on displacements x - x*, so x* is absorbing bit-for-bit
"""

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from common.errors import ConfigError
from common.mappings import (
    DomainSpec,
    MappingSpec,
    apply,
    linear_part,
    role_classes,
    roles_in_class,
)
from common.schedules import ScheduleSpec, constant, value_at


SCHEMES = ('PICARD', 'MANN', 'ISHIKAWA', 'I', 'IM', 'IG', 'G')
TWO_STEP_SCHEMES = ('ISHIKAWA', 'I', 'IM', 'IG', 'G')

ROLES = {
    'PICARD': ('T',),
    'MANN': ('T',),
    'ISHIKAWA': ('T',),
    'I': ('T1', 'T2'),
    'IM': ('T1', 'T2'),
    'IG': ('T1', 'T2'),
    'G': ('S1', 'S2', 'T1', 'T2'),
}


@dataclass(frozen=True)
class SchemeParams:
    """Class constants of the mapping roles"""
    alpha1: float = 1.0
    alpha2: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    kappa1: float = 0.0
    kappa2: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"parameter {f.name} must lie in [0, 1], got {value}")

    def to_dict(self) -> Dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'SchemeParams':
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{key: float(value) for key, value in data.items()})


def param_violations(scheme: str, params: SchemeParams, allow_degenerate: bool = False) -> List[str]:
    """
    Scheme-specific parameter invariants that fail

    allow_degenerate skips the strict sum conditions of IG and G, whose
    boundary (all constants 1) still has well-defined bound products.
    """
    p = params
    violations = []
    if scheme in ('I', 'IM', 'IG', 'PICARD', 'MANN', 'ISHIKAWA'):
        if p.kappa1 > p.alpha1:
            violations.append(f"kappa1 <= alpha1 fails ({p.kappa1} > {p.alpha1})")
    if scheme in ('I', 'IM', 'IG'):
        if p.kappa2 > p.alpha2:
            violations.append(f"kappa2 <= alpha2 fails ({p.kappa2} > {p.alpha2})")
    if scheme == 'IG' and not allow_degenerate and not 0.0 < p.alpha1 + p.alpha2 < 2.0:
        violations.append(f"0 < alpha1 + alpha2 < 2 fails (sum {p.alpha1 + p.alpha2})")
    if scheme == 'G':
        if p.kappa1 > p.beta1:
            violations.append(f"kappa1 <= beta1 fails ({p.kappa1} > {p.beta1})")
        if p.kappa2 > p.beta2:
            violations.append(f"kappa2 <= beta2 fails ({p.kappa2} > {p.beta2})")
        total = p.alpha1 + p.alpha2 + p.beta1 + p.beta2
        if not allow_degenerate and not 0.0 < total < 4.0:
            violations.append(f"0 < alpha1 + alpha2 + beta1 + beta2 < 4 fails (sum {total})")
    return violations


@dataclass(frozen=True)
class SchemeConfig:
    """One scheme run: mappings per role, parameters, schedules, start point and horizon"""
    scheme: str
    roles: Dict[str, MappingSpec]
    params: SchemeParams = field(default_factory=SchemeParams)
    schedule_a: ScheduleSpec = field(default_factory=lambda: constant(0.0))
    schedule_b: ScheduleSpec = field(default_factory=lambda: constant(0.0))
    x0: Tuple[float, ...] = (0.25,)
    horizon: int = 10
    # Accept the boundary constants (e.g. alpha1 = alpha2 = 1) excluded by the strict sum conditions
    allow_degenerate: bool = False

    @property
    def domain(self) -> DomainSpec:
        return next(iter(self.roles.values())).domain

    @property
    def fixed_point(self) -> np.ndarray:
        return next(iter(self.roles.values())).fixed_point_array


def config_violations(config: SchemeConfig, allow_degenerate: bool = False) -> List[str]:
    """All invariant violations of a scheme config (empty when valid)"""
    allow_degenerate = allow_degenerate or config.allow_degenerate
    if config.scheme not in SCHEMES:
        return [f"unknown scheme '{config.scheme}' (expected one of {', '.join(SCHEMES)})"]

    violations = param_violations(config.scheme, config.params, allow_degenerate)
    required = ROLES[config.scheme]
    missing = [role for role in required if role not in config.roles]
    if missing:
        violations.append(f"missing mapping role(s): {', '.join(missing)}")
        return violations

    mappings = [config.roles[role] for role in required]
    reference = mappings[0]
    for role, mapping in zip(required, mappings):
        if mapping.domain != reference.domain:
            violations.append(f"role {role} lives on a different domain")
        if mapping.fixed_point != reference.fixed_point:
            violations.append(f"role {role} has fixed point {mapping.fixed_point}, expected {reference.fixed_point}")

    if not param_violations(config.scheme, config.params, allow_degenerate=True):
        classes = role_classes(config.scheme, config.params)
        violations.extend(roles_in_class(config.roles, classes))

    if int(config.horizon) != config.horizon or config.horizon < 0:
        violations.append(f"horizon must be a non-negative integer, got {config.horizon}")

    x0 = np.asarray(config.x0, dtype=float)
    if x0.shape != (reference.domain.dimension,):
        violations.append(f"x0 has {x0.size} coordinates, expected {reference.domain.dimension}")
    else:
        if not reference.domain.contains(x0):
            violations.append(f"x0 {list(config.x0)} lies outside the domain ball")
        if np.array_equal(x0, reference.fixed_point_array):
            violations.append("x0 != x* fails: the start point equals the fixed point")
    return violations


def scheme_update(scheme: str, role_map: Callable[[str, np.ndarray], np.ndarray],
                   d: np.ndarray, a: float, b: float) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """
    One step on the displacement d = x - x*

    Args:
        scheme: Scheme id
        role_map: role_map(role, d) returns T_role(x* + d) - x*
        d: Current displacement
        a, b: Schedule terms a_n, b_n

    Returns:
        (displacement of y_n or None, displacement of x_{n+1})
    """
    if scheme == 'PICARD':
        return None, role_map('T', d)
    if scheme == 'MANN':
        return None, (1 - a) * d + a * role_map('T', d)
    if scheme == 'ISHIKAWA':
        y = (1 - a) * d + a * role_map('T', d)
        return y, (1 - b) * d + b * role_map('T', y)

    if scheme == 'G':
        y = (1 - a) * role_map('S1', d) + a * role_map('T1', d)
        return y, (1 - b) * role_map('S2', y) + b * role_map('T2', y)

    y = (1 - a) * d + a * role_map('T1', d)
    if scheme == 'I':
        return y, (1 - b) * d + b * role_map('T2', y)
    if scheme == 'IM':
        return y, (1 - b) * y + b * role_map('T2', y)
    if scheme == 'IG':
        return y, (1 - b) * role_map('T1', y) + b * role_map('T2', y)
    raise ConfigError(f"unknown scheme '{scheme}'")


def step(config: SchemeConfig, x, n: int) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """
    Advance one step of the configured scheme

    Args:
        config: Scheme configuration
        x: Current iterate x_n (a point of the domain ball)
        n: Step index, selects a_n and b_n

    Returns:
        (y_n or None for one-step schemes, x_{n+1})
    """
    fixed_point = config.fixed_point
    x = np.asarray(x, dtype=float)

    def role_map(role: str, d: np.ndarray) -> np.ndarray:
        return apply(config.roles[role], fixed_point + d) - fixed_point

    a = value_at(config.schedule_a, n)
    b = value_at(config.schedule_b, n)
    y, x_next = scheme_update(config.scheme, role_map, x - fixed_point, a, b)
    return (None if y is None else fixed_point + y), fixed_point + x_next


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: iterates, intermediates, errors and error ratios (linear and log domain)"""
    scheme: str
    points: np.ndarray
    intermediates: Optional[np.ndarray]
    errors: np.ndarray
    ratios: np.ndarray
    ln_ratios: np.ndarray
    fixed_point: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return len(self.points) - 1


def _log_error_track(config: SchemeConfig) -> np.ndarray:
    """
    ln |x_n - x*| propagated on the renormalised displacement

    Every mapping is affine about x*, so one step scales the displacement
    linearly; carrying the direction and the log length separately keeps the
    log error finite long after the linear error underflows.
    """
    matrices = {role: linear_part(mapping) for role, mapping in config.roles.items()}

    def role_map(role: str, d: np.ndarray) -> np.ndarray:
        return matrices[role] @ d

    d0 = np.asarray(config.x0, dtype=float) - config.fixed_point
    length = float(np.linalg.norm(d0))
    direction = d0 / length
    log_errors = np.empty(config.horizon + 1)
    log_errors[0] = math.log(length)

    for n in range(config.horizon):
        if log_errors[n] == -math.inf:
            log_errors[n + 1] = -math.inf
            continue
        a = value_at(config.schedule_a, n)
        b = value_at(config.schedule_b, n)
        _, z = scheme_update(config.scheme, role_map, direction, a, b)
        gain = float(np.linalg.norm(z))
        if gain == 0.0:
            log_errors[n + 1] = -math.inf
            continue
        log_errors[n + 1] = log_errors[n] + math.log(gain)
        direction = z / gain
    return log_errors


def run(config: SchemeConfig) -> Trajectory:
    """
    Run the scheme for config.horizon steps from config.x0

    Raises:
        ConfigError: Listing every violated config invariant
    """
    violations = config_violations(config)
    if violations:
        raise ConfigError("invalid scheme config: " + "; ".join(violations))

    horizon = int(config.horizon)
    dim = config.domain.dimension
    fixed_point = config.fixed_point

    points = np.empty((horizon + 1, dim))
    points[0] = np.asarray(config.x0, dtype=float)
    intermediates = np.empty((horizon, dim)) if config.scheme in TWO_STEP_SCHEMES else None

    for n in range(horizon):
        y, points[n + 1] = step(config, points[n], n)
        if intermediates is not None:
            intermediates[n] = y

    errors = np.linalg.norm(points - fixed_point, axis=1)
    ratios = errors / errors[0]
    log_errors = _log_error_track(config)
    ln_ratios = log_errors - log_errors[0]

    for array in (points, errors, ratios, ln_ratios):
        array.setflags(write=False)
    if intermediates is not None:
        intermediates.setflags(write=False)

    return Trajectory(
        scheme=config.scheme,
        points=points,
        intermediates=intermediates,
        errors=errors,
        ratios=ratios,
        ln_ratios=ln_ratios,
        fixed_point=fixed_point
    )


def error_ratio_series(traj: Trajectory) -> List[float]:
    """r_n = e_n / e_0 for n = 0..N"""
    if not traj.errors[0] > 0:
        raise ValueError("trajectory starts at the fixed point")
    return [float(r) for r in traj.ratios]


def scheme_label(config: SchemeConfig) -> str:
    """Human-readable scheme name; a constant-schedule Mann run is a Krasnoselskij run"""
    if config.scheme == 'MANN' and config.schedule_a.family == 'constant':
        return 'MANN (Krasnoselskij, constant a)'
    return config.scheme
