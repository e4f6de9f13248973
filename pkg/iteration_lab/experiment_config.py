"""
Experiment config ingestion
One JSON document describes a scheme run plus optional bounds, probe and compare blocks
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from common.bounds import BOUND_SCHEMES, canonical_variant
from common.errors import ConfigError
from common.iterations import SchemeConfig, SchemeParams, config_violations
from common.mappings import DomainSpec, MappingSpec, witness_lower, witness_upper
from common.schedules import ScheduleSpec, constant


WITNESS_ROLES = {
    'witness_upper': witness_upper,
    'witness_lower': witness_lower,
}

DEFAULT_SAMPLES = 1000
DEFAULT_GRID = 9


@dataclass(frozen=True)
class BoundRequest:
    side: str
    variant: str = 'paper'


@dataclass(frozen=True)
class ProbeSettings:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    grid: int = DEFAULT_GRID
    side: str = 'lower'
    variant: str = 'paper'


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed experiment document"""
    name: str
    scheme: SchemeConfig
    compare: Optional[SchemeConfig] = None
    bounds: List[BoundRequest] = field(default_factory=list)
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    output: Optional[str] = None
    zero_tol: float = 0.0


def _parse_roles(raw, scheme: str, params: SchemeParams, domain: DomainSpec) -> Dict[str, MappingSpec]:
    if isinstance(raw, str):
        if raw not in WITNESS_ROLES:
            raise ConfigError(f"roles must be a mapping per role or one of {', '.join(WITNESS_ROLES)}, got '{raw}'")
        return WITNESS_ROLES[raw](scheme, params, domain)
    if not isinstance(raw, dict) or not raw:
        raise ConfigError("roles must be a non-empty object mapping role names to mappings")
    return {role: MappingSpec.from_dict(spec, domain) for role, spec in raw.items()}


def _parse_schedule(raw: Optional[Dict], fallback: ScheduleSpec) -> ScheduleSpec:
    return fallback if raw is None else ScheduleSpec.from_dict(raw)


def _scheme_block(block: Dict, domain: DomainSpec, x0, horizon: int,
                  schedule_a: ScheduleSpec, schedule_b: ScheduleSpec, allow_degenerate: bool = False) -> SchemeConfig:
    """Build and validate one SchemeConfig from a scheme block"""
    try:
        scheme = str(block['scheme']).upper()
        raw_roles = block['roles']
    except KeyError as e:
        raise ConfigError(f"scheme block is missing required key {e}")

    params = SchemeParams.from_dict(block.get('params', {}))
    config = SchemeConfig(
        scheme=scheme,
        roles=_parse_roles(raw_roles, scheme, params, domain),
        params=params,
        schedule_a=_parse_schedule(block.get('schedule_a'), schedule_a),
        schedule_b=_parse_schedule(block.get('schedule_b'), schedule_b),
        x0=x0,
        horizon=horizon,
        allow_degenerate=allow_degenerate
    )
    violations = config_violations(config)
    if violations:
        raise ConfigError(f"invalid {scheme} config: " + "; ".join(violations))
    return config


def _parse_compare(block: Dict, main: SchemeConfig, domain: DomainSpec) -> SchemeConfig:
    """The second scheme of a comparison; it must start from the same point over the same horizon"""
    if not isinstance(block, dict):
        raise ConfigError("compare must be an object describing the second scheme")
    if 'x0' in block and tuple(float(v) for v in block['x0']) != main.x0:
        raise ConfigError(f"compared schemes must share x0, got {list(main.x0)} and {block['x0']}")
    if 'horizon' in block and int(block['horizon']) != main.horizon:
        raise ConfigError(f"compared schemes must share the horizon, got {main.horizon} and {block['horizon']}")
    if 'domain' in block and DomainSpec.from_dict(block['domain']) != domain:
        raise ConfigError("compared schemes must share the domain")

    other = _scheme_block(block, domain, main.x0, main.horizon, main.schedule_a, main.schedule_b,
                          main.allow_degenerate)
    if not np.array_equal(other.fixed_point, main.fixed_point):
        raise ConfigError(
            f"compared schemes must share the fixed point, got {list(main.fixed_point)} and {list(other.fixed_point)}"
        )
    if main.scheme in BOUND_SCHEMES and other.scheme in BOUND_SCHEMES:
        constants = (main.params.alpha1, main.params.alpha2)
        if (other.params.alpha1, other.params.alpha2) != constants:
            raise ConfigError(
                f"compared schemes must share alpha1 and alpha2, got {list(constants)} and "
                f"{[other.params.alpha1, other.params.alpha2]}"
            )
    return other


def _parse_bounds(raw) -> List[BoundRequest]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ConfigError("bounds must be a list of {\"side\", \"variant\"} objects")
    requests = []
    for item in raw:
        side = item.get('side')
        variant = item.get('variant', 'paper')
        if side not in ('upper', 'lower'):
            raise ConfigError(f"bound side must be upper or lower, got {side!r}")
        requests.append(BoundRequest(side, canonical_variant(variant)))
    return requests


def _parse_probe(raw: Optional[Dict]) -> ProbeSettings:
    raw = raw or {}
    unknown = set(raw) - {'samples', 'seed', 'grid', 'side', 'variant'}
    if unknown:
        raise ConfigError(f"unknown probe setting(s): {', '.join(sorted(unknown))}")
    return ProbeSettings(
        samples=int(raw.get('samples', DEFAULT_SAMPLES)),
        seed=int(raw.get('seed', 0)),
        grid=int(raw.get('grid', DEFAULT_GRID)),
        side=raw.get('side', 'lower'),
        variant=canonical_variant(raw.get('variant', 'paper'))
    )


def parse_experiment(data: Dict, name: str = 'experiment') -> ExperimentConfig:
    """
    Build an ExperimentConfig from a JSON object

    Args:
        data: Parsed JSON document
        name: Experiment name used for default output files

    Returns:
        ExperimentConfig with every scheme config validated

    Raises:
        ConfigError: On malformed input or a violated invariant
    """
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")

    domain = DomainSpec.from_dict(data.get('domain', {}))
    try:
        x0 = tuple(float(v) for v in data['x0'])
        horizon = data['horizon']
    except KeyError as e:
        raise ConfigError(f"experiment config is missing required key {e}")
    except TypeError:
        raise ConfigError(f"x0 must be a list of numbers, got {data['x0']!r}")
    if not isinstance(horizon, int) or isinstance(horizon, bool):
        raise ConfigError(f"horizon must be a non-negative integer, got {horizon!r}")

    schedule_a = _parse_schedule(data.get('schedule_a'), constant(0.0))
    schedule_b = _parse_schedule(data.get('schedule_b'), constant(0.0))
    # Opt-in for the boundary IG/G constants (all 1), used by classify experiments
    allow_degenerate = bool(data.get('allow_degenerate', False))
    main = _scheme_block(data, domain, x0, horizon, schedule_a, schedule_b, allow_degenerate)

    compare = None
    if data.get('compare') is not None:
        compare = _parse_compare(data['compare'], main, domain)

    zero_tol = float(data.get('zero_tol', 0.0))
    if zero_tol < 0:
        raise ConfigError(f"zero_tol must be non-negative, got {zero_tol}")

    return ExperimentConfig(
        name=name,
        scheme=main,
        compare=compare,
        bounds=_parse_bounds(data.get('bounds')),
        probe=_parse_probe(data.get('probe')),
        output=data.get('output'),
        zero_tol=zero_tol
    )


def load_experiment(path: str) -> ExperimentConfig:
    """Load and parse an experiment JSON file"""
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigError(f"config file '{path}' not found")
    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file '{path}' is not valid JSON: {e}")
    return parse_experiment(data, name=config_file.stem)
