#!/usr/bin/env python3
"""
Fixed-point iteration laboratory
Main entry point: simulate, bounds, compare, classify and probe experiments
"""

import sys
import math
import argparse
import time
from pathlib import Path
from typing import Dict, List, Optional

from common.errors import ConfigError, PreconditionError


COMMANDS = ('simulate', 'bounds', 'compare', 'classify', 'probe')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PRECONDITION = 2
EXIT_PROBE_VIOLATION = 3
EXIT_INTERRUPTED = 130

# Horizon over which classify reports the computed bound products
CLASSIFY_HORIZON = 100_000

# Relative slack of the sandwich column
SANDWICH_TOL = 1e-9

BOUNDS_COLUMNS = [
    'n', 'r_next', 'ln_r_next',
    'U', 'ln_U', 'L_paper', 'ln_L_paper', 'L_safe', 'ln_L_safe',
    'upper_valid', 'lower_valid', 'sandwich',
]

COMPARE_COLUMNS = ['n', 'R_n', 'ln_R_n', 'envelope_n', 'singular_flag']


def output_path(experiment, command: str, out: Optional[str], suffix: str) -> Path:
    """--out wins, then the config's output entry, then output/<config>-<command>.<suffix>"""
    if out:
        return Path(out)
    if experiment.output:
        return Path(experiment.output)
    return Path('output') / f"{experiment.name}-{command}.{suffix}"


def print_header(title: str):
    print(f"\n{'=' * 70}")
    print(title)
    print(f"{'=' * 70}")


def print_footer(lines: List[str]):
    print("\n" + "=" * 50)
    for line in lines:
        print(line)
    print("=" * 50)


def sandwich_flag(n: int, ln_r: float, ln_upper: Optional[float], ln_lower: Optional[float]) -> str:
    """
    Where r_{n+1} sits between the bounds at index n

    Args:
        n: Bound index
        ln_r: ln r_{n+1}
        ln_upper: ln U_n, or None if no upper bound was requested
        ln_lower: ln L_n of the largest requested lower bound, or None if none applies

    Returns:
        violation-upper, violation-lower, tight-upper, tight-lower or ok
    """
    if ln_upper is not None and ln_r > ln_upper + math.log1p(SANDWICH_TOL):
        return 'violation-upper'
    if ln_lower is not None and ln_r < ln_lower + math.log1p(-SANDWICH_TOL):
        return 'violation-lower'
    if ln_upper is not None and abs(ln_r - ln_upper) <= SANDWICH_TOL * (n + 1):
        return 'tight-upper'
    if ln_lower is not None and abs(ln_r - ln_lower) <= SANDWICH_TOL * (n + 1):
        return 'tight-lower'
    return 'ok'


def _bound_cells(series, n: int) -> Dict:
    """(value, ln value or None) of a bound series at n"""
    if series is None:
        return {'value': None, 'ln': None, 'valid': None}
    valid = bool(series.valid[n])
    return {
        'value': float(series.values[n]),
        'ln': float(series.log_cumulative[n]) if valid else None,
        'valid': valid,
    }


def run_simulate(experiment, out: Optional[str]) -> int:
    """Run the configured scheme and write its trajectory CSV"""
    config = experiment.scheme

    print("\n[1/2] Running scheme...")
    start_time = time.time()
    from common.iterations import run, scheme_label
    traj = run(config)
    elapsed = time.time() - start_time
    print(f"  ⏱️  Iteration took {elapsed:.2f}s")

    print("\n[2/2] Writing trajectory CSV...")
    start_time = time.time()
    from iteration_lab.report_writer import trajectory_columns, trajectory_rows, write_csv
    path = output_path(experiment, 'simulate', out, 'csv')
    write_csv(path, trajectory_columns(traj), trajectory_rows(traj))
    elapsed = time.time() - start_time
    print(f"  ⏱️  CSV output took {elapsed:.2f}s")

    print_footer([
        "Success!",
        f"  Scheme: {scheme_label(config)}",
        f"  Trajectory CSV: {path}",
        f"  Final error ratio r_{traj.horizon}: {traj.ratios[-1]:.17g}",
        f"  ln r_{traj.horizon}: {traj.ln_ratios[-1]:.17g}",
    ])
    return EXIT_OK


def run_bounds(experiment, out: Optional[str]) -> int:
    """Run the scheme and tabulate its error ratios against the requested bounds"""
    config = experiment.scheme
    if config.horizon < 1:
        raise ConfigError("bounds need a horizon of at least 1")

    print("\n[1/3] Running scheme...")
    start_time = time.time()
    from common.iterations import run
    traj = run(config)
    elapsed = time.time() - start_time
    print(f"  ⏱️  Iteration took {elapsed:.2f}s")

    print("\n[2/3] Computing bound products...")
    start_time = time.time()
    from common.bounds import bound_series
    from iteration_lab.experiment_config import BoundRequest
    requests = experiment.bounds or [BoundRequest('upper'), BoundRequest('lower', 'paper')]
    N = config.horizon - 1
    series = {}
    for request in requests:
        key = 'upper' if request.side == 'upper' else f"lower_{request.variant}"
        series[key] = bound_series(config.scheme, request.side, config.params,
                                   config.schedule_a, config.schedule_b, N, request.variant)
        print(f"  {key}: final value {series[key].values[-1]:.6g}")
    elapsed = time.time() - start_time
    print(f"  ⏱️  Bounds took {elapsed:.2f}s")

    print("\n[3/3] Writing bounds CSV...")
    start_time = time.time()
    from iteration_lab.report_writer import write_csv
    rows = []
    violations = 0
    for n in range(N + 1):
        ln_r = float(traj.ln_ratios[n + 1])
        upper = _bound_cells(series.get('upper'), n)
        paper = _bound_cells(series.get('lower_paper'), n)
        safe = _bound_cells(series.get('lower_safe'), n)
        ln_upper = float(series['upper'].log_cumulative[n]) if 'upper' in series else None
        # Tightest requested lower bound
        lower_lns = [cells['ln'] for cells in (paper, safe) if cells['ln'] is not None]
        flag = sandwich_flag(n, ln_r, ln_upper, max(lower_lns) if lower_lns else None)
        if flag.startswith('violation'):
            violations += 1
        lower_valid = paper['valid'] if 'lower_paper' in series else safe['valid']
        rows.append({
            'n': n,
            'r_next': float(traj.ratios[n + 1]),
            'ln_r_next': ln_r,
            'U': upper['value'], 'ln_U': upper['ln'],
            'L_paper': paper['value'], 'ln_L_paper': paper['ln'],
            'L_safe': safe['value'], 'ln_L_safe': safe['ln'],
            'upper_valid': upper['valid'],
            'lower_valid': lower_valid,
            'sandwich': flag,
        })
    path = output_path(experiment, 'bounds', out, 'csv')
    write_csv(path, BOUNDS_COLUMNS, rows)
    elapsed = time.time() - start_time
    print(f"  ⏱️  CSV output took {elapsed:.2f}s")

    print_footer([
        "Success!",
        f"  Bounds CSV: {path}",
        f"  Indices: {N + 1}",
        f"  Sandwich violations: {violations}",
    ])
    return EXIT_OK


def run_compare(experiment, out: Optional[str]) -> int:
    """Compare two schemes from the same start and write the ratio CSV and verdict JSON"""
    if experiment.compare is None:
        raise ConfigError("compare needs a 'compare' block describing the second scheme")

    print(f"\n[1/2] Comparing {experiment.scheme.scheme} against {experiment.compare.scheme}...")
    start_time = time.time()
    from common.analysis import compare_trajectories
    report = compare_trajectories(experiment.scheme, experiment.compare, experiment.zero_tol)
    elapsed = time.time() - start_time
    print(f"  ⏱️  Comparison took {elapsed:.2f}s")
    for note in report.notes:
        print(f"  Note: {note}")

    print("\n[2/2] Writing comparison CSV and verdict JSON...")
    start_time = time.time()
    from iteration_lab.report_writer import write_csv, write_json
    csv_path = output_path(experiment, 'compare', out, 'csv')
    json_path = csv_path.with_suffix('.json')
    write_csv(csv_path, COMPARE_COLUMNS, report.rows())
    write_json(json_path, report.verdict())
    elapsed = time.time() - start_time
    print(f"  ⏱️  Output took {elapsed:.2f}s")

    print_footer([
        "Success!",
        f"  Ratio CSV: {csv_path}",
        f"  Verdict JSON: {json_path}",
        f"  Final ratio R_{len(report.ln_ratios) - 1}: {report.ratios[-1]:.17g}",
        f"  Conclusion: {report.scheme_a} {report.conclusion} than {report.scheme_b}",
    ])
    return EXIT_OK


def _classify_side(config, side: str) -> Dict:
    from common import analysis
    from common.bounds import bound_series

    classifiers = {
        ('IG', 'upper'): analysis.classify_ueb_ig,
        ('IG', 'lower'): analysis.classify_leb_ig,
        ('G', 'upper'): analysis.classify_ueb_g,
        ('G', 'lower'): analysis.classify_leb_g,
        ('I', 'upper'): analysis.classify_ueb_i,
        ('IM', 'upper'): analysis.classify_ueb_im,
    }
    classifier = classifiers.get((config.scheme, side))
    if classifier is None:
        raise ConfigError(f"no {side}-bound classifier for scheme {config.scheme}")

    verdict = classifier(config.params, config.schedule_a, config.schedule_b).to_dict()
    series = bound_series(config.scheme, side, config.params, config.schedule_a, config.schedule_b,
                          CLASSIFY_HORIZON - 1)
    verdict['computed'] = {
        'horizon': CLASSIFY_HORIZON,
        'final_value': float(series.values[-1]),
        'final_ln_value': float(series.log_cumulative[-1]),
        'first_index_below_1e-6': analysis.crossing_index(series, 1e-6),
    }
    return verdict


def run_classify(experiment, out: Optional[str]) -> int:
    """Classify whether the bound products (and the iterates) tend to zero"""
    config = experiment.scheme
    sides = sorted({request.side for request in experiment.bounds}) or ['upper']

    print(f"\n[1/2] Classifying {config.scheme} bounds ({', '.join(sides)})...")
    start_time = time.time()
    from common import analysis
    verdicts = {side: _classify_side(config, side) for side in sides}

    corollaries = {}
    if config.scheme == 'IG':
        corollaries['ig_convergence'] = analysis.corollary_ig_convergence(
            config.params, config.schedule_a, config.schedule_b).to_dict()
    if config.scheme == 'G':
        corollaries['g_equivalence'] = analysis.corollary_g_equivalence(
            config.params, config.schedule_a, config.schedule_b).to_dict()
        corollaries['g_convergence'] = analysis.corollary_g_convergence(
            config.params, config.schedule_a, config.schedule_b).to_dict()
    elapsed = time.time() - start_time
    print(f"  ⏱️  Classification took {elapsed:.2f}s")

    print("\n[2/2] Writing verdict JSON...")
    start_time = time.time()
    from iteration_lab.report_writer import write_json
    path = output_path(experiment, 'classify', out, 'json')
    write_json(path, {
        'scheme': config.scheme,
        'params': config.params.to_dict(),
        'schedule_a': config.schedule_a.to_dict(),
        'schedule_b': config.schedule_b.to_dict(),
        'verdicts': verdicts,
        'corollaries': corollaries,
    })
    elapsed = time.time() - start_time
    print(f"  ⏱️  JSON output took {elapsed:.2f}s")

    lines = ["Success!", f"  Verdict JSON: {path}"]
    lines += [f"  {side} bound tends to 0: {verdict['converges_to_zero']}" for side, verdict in verdicts.items()]
    lines += [f"  {name}: {verdict['converges_to_zero']}" for name, verdict in corollaries.items()]
    print_footer(lines)
    return EXIT_OK


def run_probe(experiment, out: Optional[str], samples: Optional[int], seed: Optional[int],
              grid: Optional[int], use_cache: bool = True, reset_cache: bool = False) -> int:
    """Search for a bound violation; exit 3 when one is found"""
    config = experiment.scheme
    settings = experiment.probe
    samples = settings.samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    grid = settings.grid if grid is None else grid
    if config.horizon < 1:
        raise ConfigError("probe needs a horizon of at least 1")
    if samples < 1:
        raise ConfigError(f"probe needs at least one sample, got {samples}")
    N = config.horizon - 1

    request = {
        'kind': 'probe',
        'scheme': config.scheme,
        'params': config.params.to_dict(),
        'schedule_a': config.schedule_a.to_dict(),
        'schedule_b': config.schedule_b.to_dict(),
        'N': N,
        'samples': samples,
        'seed': seed,
        'grid': grid,
        'side': settings.side,
        'variant': settings.variant,
    }

    from common.cache import clear_cache, get_all_cached_requests, load_report_from_cache, save_report_to_cache
    if reset_cache:
        print(f"\nCleared {clear_cache()} cached probe report(s)")
    report = None
    if use_cache:
        print(f"\nProbe cache holds {len(get_all_cached_requests())} report(s)")
        report = load_report_from_cache(request)

    if report is not None:
        print("\n[1/3] Loaded probe report from cache")
        print("\n[2/3] Loaded oracle extremes from cache")
    else:
        print(f"\n[1/3] Probing {samples} random assignments (seed {seed})...")
        start_time = time.time()
        from common.bounds import bound_series, oracle_extreme_1d, probe_bound_violation
        bound = bound_series(config.scheme, settings.side, config.params,
                             config.schedule_a, config.schedule_b, N, settings.variant)
        counterexample = probe_bound_violation(config.scheme, config.params, config.schedule_a, config.schedule_b,
                                               N, samples, seed, settings.side, settings.variant)
        elapsed = time.time() - start_time
        print(f"  ⏱️  Probe took {elapsed:.2f}s")

        print(f"\n[2/3] Brute-force 1-D oracle (grid {grid})...")
        start_time = time.time()
        oracle = None
        if grid >= 3:
            extremes = oracle_extreme_1d(config.scheme, config.params, config.schedule_a, config.schedule_b,
                                         N, settings.side, grid)
            oracle = {'grid': grid, 'extremes': extremes}
        else:
            print("  Skipped (grid below 3)")
        elapsed = time.time() - start_time
        print(f"  ⏱️  Oracle took {elapsed:.2f}s")

        report = {
            'request': request,
            'violation': counterexample is not None,
            'counterexample': counterexample.to_dict() if counterexample else None,
            'bound': bound.rows(),
            'oracle': oracle,
        }
        if use_cache:
            save_report_to_cache(request, report)

    print("\n[3/3] Writing probe report JSON...")
    start_time = time.time()
    from iteration_lab.report_writer import write_json
    path = output_path(experiment, 'probe', out, 'json')
    write_json(path, report)
    elapsed = time.time() - start_time
    print(f"  ⏱️  JSON output took {elapsed:.2f}s")

    counterexample = report['counterexample']
    if counterexample:
        print_footer([
            "Violation found!",
            f"  Probe report: {path}",
            f"  Sample {counterexample['sample_index']} ({counterexample['dimension']}-D) at n={counterexample['index']}",
            f"  r_{counterexample['index'] + 1} = {counterexample['ratio']:.17g}, "
            f"bound = {counterexample['bound']:.17g}",
        ])
        return EXIT_PROBE_VIOLATION

    print_footer(["Success!", f"  Probe report: {path}", f"  No violation in {samples} samples"])
    return EXIT_OK


def run_command(args) -> int:
    """Load the config and dispatch one command, mapping errors to exit codes"""
    print_header(f"Iteration lab: {args.command} ({args.config})")

    try:
        from iteration_lab.experiment_config import load_experiment
        experiment = load_experiment(args.config)

        if args.command == 'simulate':
            return run_simulate(experiment, args.out)
        if args.command == 'bounds':
            return run_bounds(experiment, args.out)
        if args.command == 'compare':
            return run_compare(experiment, args.out)
        if args.command == 'classify':
            return run_classify(experiment, args.out)
        return run_probe(experiment, args.out, args.samples, args.seed, args.grid,
                         use_cache=not args.no_cache, reset_cache=args.clear_cache)

    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        return EXIT_INTERRUPTED
    except PreconditionError as e:
        print(f"\n\nPrecondition Error: {e}")
        return EXIT_PRECONDITION
    except ValueError as e:
        # Configuration errors (ConfigError and malformed values)
        print(f"\n\nConfiguration Error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        print(f"\n\nError: {e}")
        import traceback
        traceback.print_exc()
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Fixed-point iteration laboratory: runs, error bounds and rate comparisons')
    parser.add_argument('command', choices=COMMANDS, help='Experiment to run')
    parser.add_argument('--config', type=str, required=True, help='Experiment JSON file')
    parser.add_argument('--out', type=str, default=None,
                        help='Output file (default: output/<config>-<command>.csv or .json)')
    parser.add_argument('--samples', type=int, default=None, help='Probe samples (default: from config, else 1000)')
    parser.add_argument('--seed', type=int, default=None, help='Probe seed (default: from config, else 0)')
    parser.add_argument('--grid', type=int, default=None, help='Oracle grid size (default: from config, else 9)')
    parser.add_argument('--no-cache', action='store_true', help='Ignore and do not write cached probe reports')
    parser.add_argument('--clear-cache', action='store_true', help='Delete cached probe reports before probing')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
