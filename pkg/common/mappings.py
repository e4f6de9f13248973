"""
Domain ball, (kappa, alpha)-nonexpansive mapping classes and concrete mapping families
Also builds the extremal witness assignments used to certify error bounds
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import ortho_group

from common.errors import ConfigError, DomainViolationError


KINDS = ('scaling', 'rotation_scaling', 'affine')

# Relative tolerance on membership of the closed ball
DOMAIN_TOL = 1e-12

# Absolute slack on the class inequalities when sampling
CLASS_SLACK = 1e-10


@dataclass(frozen=True)
class DomainSpec:
    """Closed ball B(center, radius) in R^dimension"""
    dimension: int = 1
    radius: float = 0.5
    center: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigError(f"domain dimension must be a positive integer, got {self.dimension}")
        if not self.radius > 0:
            raise ConfigError(f"domain radius must be positive, got {self.radius}")
        center = self.center if self.center is not None else (0.0,) * self.dimension
        center = tuple(float(c) for c in center)
        if len(center) != self.dimension:
            raise ConfigError(f"domain center has {len(center)} coordinates, expected {self.dimension}")
        object.__setattr__(self, 'center', center)

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center, dtype=float)

    def contains(self, point: np.ndarray) -> bool:
        """True if point lies in the closed ball, within DOMAIN_TOL * radius"""
        distance = float(np.linalg.norm(np.asarray(point, dtype=float) - self.center_array))
        return distance <= self.radius * (1.0 + DOMAIN_TOL)

    def to_dict(self) -> Dict:
        return {'dim': self.dimension, 'radius': self.radius, 'center': list(self.center)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'DomainSpec':
        return cls(
            dimension=int(data.get('dim', 1)),
            radius=float(data.get('radius', 0.5)),
            center=tuple(data['center']) if data.get('center') is not None else None
        )


@dataclass(frozen=True)
class NonexpansiveClass:
    """The class N_{kappa, alpha}: kappa*|x-y| <= |Tx-Ty| <= alpha*|x-y|"""
    kappa: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.kappa <= self.alpha <= 1.0:
            raise ConfigError(
                f"class requires 0 <= kappa <= alpha <= 1, got kappa={self.kappa}, alpha={self.alpha}"
            )

    def contains_interval(self, low: float, high: float) -> bool:
        return self.kappa <= low + CLASS_SLACK and high <= self.alpha + CLASS_SLACK


def is_contraction(nonexpansive_class: NonexpansiveClass) -> bool:
    """A class with alpha < 1 is a (kappa, alpha)-contraction class"""
    return nonexpansive_class.alpha < 1.0


@dataclass(frozen=True)
class MappingSpec:
    """
    A self-map T of the domain ball fixing fixed_point

    kind='scaling':          T(x) = x* + c (x - x*),        c in [-1, 1]
    kind='rotation_scaling': T(x) = x* + c R_theta (x - x*), 2-D only
    kind='affine':           T(x) = x* + M (x - x*),        sigma_max(M) <= 1
    """
    kind: str
    coeff: object
    domain: DomainSpec = field(default_factory=DomainSpec)
    fixed_point: Optional[Tuple[float, ...]] = None
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown mapping kind '{self.kind}' (expected one of {', '.join(KINDS)})")

        dim = self.domain.dimension
        fixed_point = self.fixed_point if self.fixed_point is not None else self.domain.center
        fixed_point = tuple(float(v) for v in fixed_point)
        if len(fixed_point) != dim:
            raise ConfigError(f"fixed_point has {len(fixed_point)} coordinates, expected {dim}")
        object.__setattr__(self, 'fixed_point', fixed_point)

        if self.kind == 'affine':
            matrix = np.array(self.coeff, dtype=float)
            if matrix.shape != (dim, dim):
                raise ConfigError(f"affine coefficient must be a {dim}x{dim} matrix, got shape {matrix.shape}")
            object.__setattr__(self, 'coeff', tuple(tuple(float(v) for v in row) for row in matrix))
            if np.linalg.svd(matrix, compute_uv=False).max() > 1.0 + DOMAIN_TOL:
                raise ConfigError("affine map must satisfy sigma_max(M) <= 1")
        else:
            coeff = float(self.coeff)
            if not -1.0 <= coeff <= 1.0:
                raise ConfigError(f"{self.kind} coefficient must lie in [-1, 1], got {coeff}")
            object.__setattr__(self, 'coeff', coeff)
            if self.kind == 'rotation_scaling' and dim != 2:
                raise ConfigError("rotation_scaling maps are only defined in dimension 2")

        self._check_self_map()

    def _check_self_map(self):
        """Reject fixed points whose image of the ball cannot be shown to stay inside it"""
        offset = float(np.linalg.norm(np.array(self.fixed_point) - self.domain.center_array))
        radius = self.domain.radius
        if offset > radius * (1.0 + DOMAIN_TOL):
            raise ConfigError(f"fixed_point {self.fixed_point} lies outside the domain ball")
        if offset == 0.0:
            return
        if self.kind != 'scaling':
            raise ConfigError(f"{self.kind} maps must be centered: fixed_point has to equal the domain center")
        if abs(self.coeff) * (radius + offset) + offset > radius * (1.0 + DOMAIN_TOL):
            raise ConfigError(
                f"scaling {self.coeff} about off-center fixed point {self.fixed_point} does not map the ball into itself"
            )

    @property
    def fixed_point_array(self) -> np.ndarray:
        return np.array(self.fixed_point, dtype=float)

    def to_dict(self) -> Dict:
        data = {
            'kind': self.kind,
            'coeff': [list(row) for row in self.coeff] if self.kind == 'affine' else self.coeff,
            'fixed_point': list(self.fixed_point),
            'dim': self.domain.dimension,
        }
        if self.kind == 'rotation_scaling':
            data['theta'] = self.theta
        if self.domain.radius != 0.5:
            data['radius'] = self.domain.radius
        return data

    @classmethod
    def from_dict(cls, data: Dict, domain: Optional[DomainSpec] = None) -> 'MappingSpec':
        """Build from the JSON object form; an explicit domain overrides dim/radius"""
        try:
            kind = data['kind']
            coeff = data['coeff']
        except KeyError as e:
            raise ConfigError(f"mapping is missing required key {e}")
        if domain is None:
            domain = DomainSpec(dimension=int(data.get('dim', 1)), radius=float(data.get('radius', 0.5)))
        elif 'dim' in data and int(data['dim']) != domain.dimension:
            raise ConfigError(f"mapping dim {data['dim']} does not match domain dimension {domain.dimension}")
        fixed_point = data.get('fixed_point')
        return cls(
            kind=kind,
            coeff=coeff,
            domain=domain,
            fixed_point=tuple(fixed_point) if fixed_point is not None else None,
            theta=float(data.get('theta', 0.0))
        )


def scaling(c: float, domain: Optional[DomainSpec] = None) -> MappingSpec:
    """Scaling map x -> x* + c (x - x*) centered on the domain center"""
    return MappingSpec(kind='scaling', coeff=c, domain=domain or DomainSpec())


def linear_part(mapping: MappingSpec) -> np.ndarray:
    """The matrix L with T(x) = x* + L (x - x*)"""
    dim = mapping.domain.dimension
    if mapping.kind == 'scaling':
        return mapping.coeff * np.eye(dim)
    if mapping.kind == 'rotation_scaling':
        cos_t, sin_t = math.cos(mapping.theta), math.sin(mapping.theta)
        return mapping.coeff * np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    return np.array(mapping.coeff, dtype=float)


def apply(mapping: MappingSpec, point) -> np.ndarray:
    """
    Evaluate T(point)

    Args:
        mapping: Mapping to apply
        point: Point of the mapping's domain ball

    Returns:
        The image point, which lies in the domain ball

    Raises:
        DomainViolationError: If point (or, impossibly, its image) is outside the ball
    """
    point = np.asarray(point, dtype=float).reshape(mapping.domain.dimension)
    if not mapping.domain.contains(point):
        raise DomainViolationError(f"point {point.tolist()} lies outside the domain ball")

    fixed_point = mapping.fixed_point_array
    if mapping.kind == 'scaling':
        image = fixed_point + mapping.coeff * (point - fixed_point)
    else:
        image = fixed_point + linear_part(mapping) @ (point - fixed_point)

    if not mapping.domain.contains(image):
        raise DomainViolationError(f"image {image.tolist()} left the domain ball")
    return image


def lipschitz_interval(mapping: MappingSpec) -> Tuple[float, float]:
    """
    Exact (kappa_T, alpha_T) of a mapping

    Returns:
        |c| twice for scaling and rotation-scaling, singular value extremes for affine
    """
    if mapping.kind in ('scaling', 'rotation_scaling'):
        modulus = abs(mapping.coeff)
        return modulus, modulus
    singular_values = np.linalg.svd(np.array(mapping.coeff, dtype=float), compute_uv=False)
    return float(singular_values.min()), float(singular_values.max())


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a sampled class-membership check"""
    min_ratio: float
    max_ratio: float
    lower_ok: bool
    upper_ok: bool
    sample_count: int
    contraction: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def sample_ball(domain: DomainSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw count points uniformly from the domain ball"""
    directions = rng.standard_normal((count, domain.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = domain.radius * rng.random(count) ** (1.0 / domain.dimension)
    return domain.center_array + directions * radii[:, None]


def verify_class(mapping: MappingSpec, nonexpansive_class: NonexpansiveClass,
                 sample_count: int, seed: int) -> VerificationReport:
    """
    Check kappa*|x-y| <= |Tx-Ty| <= alpha*|x-y| on sampled pairs

    Args:
        mapping: Mapping under test
        nonexpansive_class: Class to check membership of
        sample_count: Number of (x, y) pairs
        seed: Seed for the pair sampler

    Returns:
        VerificationReport with the worst ratios seen on each side
    """
    if sample_count < 1:
        raise ConfigError("sample_count must be at least 1")

    rng = np.random.default_rng(seed)
    domain = mapping.domain
    xi = sample_ball(domain, sample_count, rng)
    eta = sample_ball(domain, sample_count, rng)

    # Resample coincident pairs rather than dividing by zero
    degenerate = np.linalg.norm(xi - eta, axis=1) == 0.0
    while degenerate.any():
        eta[degenerate] = sample_ball(domain, int(degenerate.sum()), rng)
        degenerate = np.linalg.norm(xi - eta, axis=1) == 0.0

    matrix = linear_part(mapping)
    gaps = np.linalg.norm(xi - eta, axis=1)
    image_gaps = np.linalg.norm((xi - eta) @ matrix.T, axis=1)
    ratios = image_gaps / gaps

    return VerificationReport(
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        lower_ok=bool(np.all(nonexpansive_class.kappa * gaps - CLASS_SLACK <= image_gaps)),
        upper_ok=bool(np.all(image_gaps <= nonexpansive_class.alpha * gaps + CLASS_SLACK)),
        sample_count=sample_count,
        contraction=is_contraction(nonexpansive_class)
    )


# ============================================================================
# Role classes and witness assignments
# ============================================================================

WITNESS_SCHEMES = ('I', 'IM', 'IG', 'G')


def role_classes(scheme: str, params) -> Dict[str, NonexpansiveClass]:
    """
    Declared class of each mapping role of a scheme

    I/IM/IG: T1 in N(k1, a1), T2 in N(k2, a2)
    G:       S1 in N(k1, b1), S2 in N(k2, b2), T1 in N(a1), T2 in N(a2)
    PICARD/MANN/ISHIKAWA: T in N(k1, a1)
    """
    if scheme in ('I', 'IM', 'IG'):
        return {
            'T1': NonexpansiveClass(params.kappa1, params.alpha1),
            'T2': NonexpansiveClass(params.kappa2, params.alpha2),
        }
    if scheme == 'G':
        return {
            'S1': NonexpansiveClass(params.kappa1, params.beta1),
            'S2': NonexpansiveClass(params.kappa2, params.beta2),
            'T1': NonexpansiveClass(0.0, params.alpha1),
            'T2': NonexpansiveClass(0.0, params.alpha2),
        }
    if scheme in ('PICARD', 'MANN', 'ISHIKAWA'):
        return {'T': NonexpansiveClass(params.kappa1, params.alpha1)}
    raise ConfigError(f"unknown scheme id '{scheme}'")


def _witness_coefficients(scheme: str, params, side: str) -> Dict[str, float]:
    if scheme not in WITNESS_SCHEMES:
        raise ConfigError(f"unknown scheme id '{scheme}' (witnesses exist for {', '.join(WITNESS_SCHEMES)})")

    p = params
    if side == 'upper':
        if scheme == 'G':
            return {'S1': p.beta1, 'S2': p.beta2, 'T1': p.alpha1, 'T2': p.alpha2}
        return {'T1': p.alpha1, 'T2': p.alpha2}

    # Sign choices attain the implemented lower products exactly in 1-D
    if scheme == 'IG':
        return {'T1': -p.kappa1, 'T2': p.alpha2}
    if scheme == 'G':
        return {'S1': p.kappa1, 'S2': p.kappa2, 'T1': -p.alpha1, 'T2': -p.alpha2}
    if scheme == 'I':
        return {'T1': p.alpha1, 'T2': -p.alpha2}
    return {'T1': -p.alpha1, 'T2': -p.alpha2}


def witness_upper(scheme: str, params, domain: Optional[DomainSpec] = None) -> Dict[str, MappingSpec]:
    """Scaling maps achieving equality with the scheme's upper bound"""
    domain = domain or DomainSpec()
    return {role: scaling(c, domain) for role, c in _witness_coefficients(scheme, params, 'upper').items()}


def witness_lower(scheme: str, params, domain: Optional[DomainSpec] = None) -> Dict[str, MappingSpec]:
    """Scaling maps achieving equality with the scheme's lower bound"""
    domain = domain or DomainSpec()
    return {role: scaling(c, domain) for role, c in _witness_coefficients(scheme, params, 'lower').items()}


def random_in_class(nonexpansive_class: NonexpansiveClass, domain: DomainSpec, seed) -> MappingSpec:
    """
    Random mapping whose exact Lipschitz interval lies in [kappa, alpha]

    Args:
        nonexpansive_class: Target class
        domain: Domain ball (the map is centered on its center)
        seed: Seed or numpy Generator

    Returns:
        A scaling map in 1-D, an affine map U diag(s) V^T otherwise
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kappa, alpha = nonexpansive_class.kappa, nonexpansive_class.alpha

    if domain.dimension == 1:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return MappingSpec(kind='scaling', coeff=sign * rng.uniform(kappa, alpha), domain=domain)

    singular_values = np.sort(rng.uniform(kappa, alpha, size=domain.dimension))
    left = ortho_group.rvs(domain.dimension, random_state=rng)
    right = ortho_group.rvs(domain.dimension, random_state=rng)
    matrix = left @ np.diag(singular_values) @ right.T
    # Guard the sigma_max <= 1 check against rounding in the product
    top = np.linalg.svd(matrix, compute_uv=False).max()
    if top > 1.0:
        matrix = matrix / top
    return MappingSpec(kind='affine', coeff=matrix, domain=domain)


def roles_in_class(roles: Dict[str, MappingSpec], classes: Dict[str, NonexpansiveClass]) -> List[str]:
    """Names of roles whose exact Lipschitz interval escapes their declared class"""
    violations = []
    for role, nonexpansive_class in classes.items():
        mapping = roles.get(role)
        if mapping is None:
            violations.append(f"role {role} is not assigned")
            continue
        low, high = lipschitz_interval(mapping)
        if not nonexpansive_class.contains_interval(low, high):
            violations.append(
                f"role {role} has Lipschitz interval [{low:.6g}, {high:.6g}] outside "
                f"[{nonexpansive_class.kappa:.6g}, {nonexpansive_class.alpha:.6g}]"
            )
    return violations
