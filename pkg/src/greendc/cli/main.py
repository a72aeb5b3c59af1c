"""
Command line of greendc.

Every command writes its outputs in a staging folder of the output directory. The outputs are moved to
the output directory once the command succeeded; on a failure, only ``diagnostics.json`` is written.
"""
import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from typing import Dict, List, Optional, Sequence

from greendc.cli.config import RunConfig, config_from_options, create_default_options, default_output_directory, \
    log_config, read_options
from greendc.cli.errors import EXIT_OK, EXIT_USAGE_ERROR, GreenDcError, UsageError, ValidationFailure
from greendc.cli.trace_io import load_traces, write_traces
from greendc.allocation import BROWN, GREEN, SUPPLY_NAMES
from greendc.basic_typing import Options, Records
from greendc.optim.problem import build_problem
from greendc.optim.solve import solve
from greendc.reporting.plots import plot_allocation_shares, plot_profit_series
from greendc.reporting.records import FORMATS, report_filename, round_significant, slot_record, slot_records, \
    summary_record, write_report
from greendc.reporting.table_sqlite import write_run_database
from greendc.simulation.run import SlotJob, run, solve_slot
from greendc.simulation.traces import TraceSet, synth_traces
from greendc.utils.files import atomic_write
from greendc.utils.runtime_formatter import configure_logging
from greendc.validation.brute_force import brute_force_solve
from greendc.validation.convexity_audit import convexity_audit
from greendc.validation.monte_carlo import loss_battery


logger = logging.getLogger(__name__)

DIAGNOSTICS_NAME = 'diagnostics.json'
DATABASE_NAME = 'reporting_sqlite.db'
TRACES_NAME = 'traces.csv'
PLOTS_FOLDER = 'plots'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')

# the grid profit may exceed the solver profit by this fraction of the solver profit
BRUTE_FORCE_TOLERANCE = 5e-3


def solver_matches_grid(solver_profit: float, grid_profit: float) -> bool:
    return grid_profit <= solver_profit + BRUTE_FORCE_TOLERANCE * abs(solver_profit)


class ArgumentParser(argparse.ArgumentParser):
    """Parser raising :class:`UsageError` after printing the usage instead of exiting"""
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f'{self.prog}: {message}')


def create_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON configuration file')
    common.add_argument('--out', help='output directory. Defaults to the configuration, then to '
                                      '$GREENDC_OUTPUT_ROOT, then to ./greendc_output')
    common.add_argument('--seed', type=int, help='seed of the solver starts, the generators and the oracles')
    common.add_argument('--baselines', help='comma separated baselines (mm1, equal_split) or `none`')
    common.add_argument('--format', choices=FORMATS, help='format of the reports')
    common.add_argument('--plots', action='store_true', help='plot the runs')
    common.add_argument('--workers', type=int, help='number of worker processes')
    common.add_argument('--log-level', default='INFO', choices=LOG_LEVELS, help='logging level')

    parser = ArgumentParser(prog='greendc', description='Profit maximization of geographically dispersed '
                                                        'green data centers')
    subparsers = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    subparsers.required = True
    subparsers.add_parser('solve', parents=[common], help='solve the slot of the configuration')
    subparsers.add_parser('simulate', parents=[common], help='solve every slot of the traces, with the baselines')
    subparsers.add_parser('validate-loss', parents=[common], help='compare the loss model to a Monte Carlo simulation')
    subparsers.add_parser('audit-convexity', parents=[common], help='numerical audit of the convexity properties')
    subparsers.add_parser('brute-force', parents=[common], help='compare the solver to a grid search')
    subparsers.add_parser('gen-traces', parents=[common], help='generate synthetic traces')
    return parser


def apply_arguments(options: Options, args: argparse.Namespace) -> Options:
    """
    Override the options with the command line flags
    """
    if args.out is not None:
        options['output_directory'] = args.out
    if args.seed is not None:
        options['solver']['seed'] = args.seed
        options['validation']['monte_carlo']['seed'] = args.seed
        options['validation']['audit']['seed'] = args.seed
        if isinstance(options['traces']['generator'], dict):
            options['traces']['generator']['seed'] = args.seed
    if args.baselines is not None:
        names = [n.strip() for n in args.baselines.split(',') if n.strip()]
        options['simulator']['baselines'] = [] if names == ['none'] else names
    if args.format is not None:
        options['report']['format'] = args.format
    if args.plots:
        options['report']['plots'] = True
    if args.workers is not None:
        if args.workers < 0:
            raise UsageError(f'--workers must be >= 0, got={args.workers}')
        options['simulator']['nb_workers'] = args.workers
        options['validation']['monte_carlo']['nb_workers'] = args.workers
    return options


def _report(staging: str, name: str, records: Records, config: RunConfig) -> str:
    return write_report(os.path.join(staging, report_filename(name, config.report_format)), records,
                        config.report_format)


def _require_slot(config: RunConfig):
    if config.slot is None:
        raise UsageError('the configuration defines no slot (`slot.brown_price` and `slot.rates`)')
    return config.slot


def command_solve(config: RunConfig, staging: str) -> None:
    env = _require_slot(config)
    job = SlotJob(slot=0, env=env, dcs=tuple(config.dcs), classes=tuple(config.classes),
                  options=config.run_options)
    report = solve_slot(job)
    if report.error is not None:
        raise GreenDcError(f'the slot could not be solved: {report.error}')
    _report(staging, 'solve', [slot_record(report, config.dcs, config.classes, config.run_options.baselines)],
            config)
    logger.info(f'slot solved: status={report.status}, profit={report.profit:.10g}')


def _traces(config: RunConfig) -> TraceSet:
    if config.trace_paths:
        return load_traces(config.trace_paths, config)
    if config.generator is not None:
        logger.info('no trace file, the traces are generated')
        return synth_traces(config.generator, config.generator_seed)
    raise UsageError('the configuration defines no trace (`traces.paths` or `traces.generator`)')


def command_simulate(config: RunConfig, staging: str) -> None:
    traces = _traces(config)
    summary = run(traces, config.dcs, config.classes, config.run_options)
    baselines = config.run_options.baselines
    slots = slot_records(summary, config.dcs, config.classes, baselines)
    totals = [summary_record(summary)]
    _report(staging, 'slots', slots, config)
    _report(staging, 'summary', totals, config)
    if config.sqlite:
        write_run_database(os.path.join(staging, DATABASE_NAME), {
            'slots': ('slots', slots),
            'summary': ('summary', totals),
        })
    if config.plots:
        root = os.path.join(staging, PLOTS_FOLDER)
        os.makedirs(root)
        plot_profit_series(root, summary)
        plot_allocation_shares(root, summary, config.dcs, config.classes)


def command_validate_loss(config: RunConfig, staging: str) -> None:
    report = loss_battery(config.loss_battery, nb_workers=config.mc_workers)
    cells = [{name: round_significant(value) for name, value in row.items()}
             for row in report.cells.to_dict(orient='records')]
    _report(staging, 'loss_battery', cells, config)
    summary = {
        'nb_cells': len(cells),
        'nb_compared': report.nb_compared,
        'nb_agree': report.nb_agree,
        'agreement': round_significant(report.agreement),
        'passed': report.passed}
    _report(staging, 'loss_battery_summary', [summary], config)
    if not report.passed:
        outliers = [{name: round_significant(value) for name, value in row.items()}
                    for row in report.outliers().to_dict(orient='records')]
        raise ValidationFailure(f'the loss model disagrees with the simulation: {report.nb_agree}/'
                                f'{report.nb_compared} compared cells agree', checks=[summary] + outliers)


def command_audit_convexity(config: RunConfig, staging: str) -> None:
    report = convexity_audit(config.audit_grid)
    records = []
    for r in report.as_records():
        r = {name: round_significant(value) for name, value in r.items()}
        r['worst_point'] = json.dumps({k: round_significant(v) for k, v in r['worst_point'].items()},
                                      sort_keys=True)
        records.append(r)
    _report(staging, 'convexity_audit', records, config)
    if not report.passed:
        failed = [r for r in records if not r['passed'] and not r['informational']]
        raise ValidationFailure(f'convexity audit failed checks={[r["check"] for r in failed]}', checks=failed)


def command_brute_force(config: RunConfig, staging: str) -> None:
    env = _require_slot(config)
    try:
        grid = brute_force_solve(env, config.dcs, config.classes, config.brute_force_grid,
                                 total_capacity_constraint=config.solve_options.total_capacity_constraint)
    except ValueError as e:
        raise UsageError(str(e))
    result = solve(build_problem(env, config.dcs, config.classes, config.solve_options))

    record = {
        'grid_feasible': grid.feasible,
        'grid_profit': grid.profit,
        'grid_nb_points': grid.nb_points,
        'solver_status': result.status,
        'solver_profit': result.objective if result.feasible else math.nan,
        'profit_gap': result.objective - grid.profit if result.feasible and grid.feasible else math.nan,
    }
    for supply in (GREEN, BROWN):
        name = SUPPLY_NAMES[supply]
        for i, dc in enumerate(config.dcs):
            for label, alloc in (('grid', grid.allocation), ('solver', result.allocation)):
                usable = alloc is not None and (label == 'grid' or result.feasible)
                record[f'{label}_{name}_alloc:{dc.name}'] = alloc.alloc(supply)[i, 0] if usable else math.nan
                record[f'{label}_{name}_rate:{dc.name}'] = alloc.rate(supply)[i, 0] if usable else math.nan
    record = {k: round_significant(v) for k, v in record.items()}
    _report(staging, 'brute_force', [record], config)

    if grid.feasible:
        if not result.feasible:
            raise ValidationFailure(f'the grid has a feasible point but the solver status is {result.status}',
                                    checks=[record])
        if not solver_matches_grid(result.objective, grid.profit):
            raise ValidationFailure(f'the solver profit={result.objective:.10g} is below the grid '
                                    f'profit={grid.profit:.10g}', checks=[record])


def command_gen_traces(config: RunConfig, staging: str) -> None:
    if config.generator is None:
        raise UsageError('the configuration defines no generator (`traces.generator`)')
    write_traces(os.path.join(staging, TRACES_NAME), synth_traces(config.generator, config.generator_seed))


# command name to (command, the configuration must define data centers and classes)
COMMANDS: Dict[str, tuple] = {
    'solve': (command_solve, True),
    'simulate': (command_simulate, True),
    'validate-loss': (command_validate_loss, False),
    'audit-convexity': (command_audit_convexity, False),
    'brute-force': (command_brute_force, True),
    'gen-traces': (command_gen_traces, True),
}


def _publish(staging: str, out: str) -> List[str]:
    """Move the outputs of the staging folder to the output directory"""
    published = []
    for name in sorted(os.listdir(staging)):
        destination = os.path.join(out, name)
        if os.path.isdir(destination):
            shutil.rmtree(destination)
        os.replace(os.path.join(staging, name), destination)
        published.append(destination)
    stale = os.path.join(out, DIAGNOSTICS_NAME)
    if os.path.exists(stale):
        os.remove(stale)
    return published


def write_diagnostics(out: Optional[str], error: GreenDcError, command: Optional[str]) -> None:
    if out is None:
        return
    diagnostics = dict(error.as_dict())
    diagnostics['command'] = command
    try:
        os.makedirs(out, exist_ok=True)
        atomic_write(os.path.join(out, DIAGNOSTICS_NAME), json.dumps(diagnostics, indent=2, sort_keys=True) + '\n')
    except OSError as e:
        logger.error(f'diagnostics could not be written in={out}, E={e}')


def _output_directory(args: argparse.Namespace, options: Optional[Options]) -> str:
    if args.out is not None:
        return args.out
    if options is not None and options.get('output_directory'):
        return options['output_directory']
    return default_output_directory()


def execute(args: argparse.Namespace) -> int:
    """
    Run a parsed command. Errors are reported in ``diagnostics.json`` of the output directory.

    Returns:
        the exit code
    """
    command, require_instance = COMMANDS[args.command]
    options = None
    out = None
    staging = None
    try:
        if args.config is not None:
            options = read_options(args.config)
        else:
            if require_instance:
                raise UsageError(f'`{args.command}` requires --config')
            options = create_default_options()
        out = _output_directory(args, options)
        options = apply_arguments(options, args)
        config = config_from_options(options, path=args.config, require_instance=require_instance)
        log_config(config)

        os.makedirs(out, exist_ok=True)
        staging = tempfile.mkdtemp(prefix='.staging-', dir=out)
        command(config, staging)
        published = _publish(staging, out)
        for path in published:
            logger.info(f'written={path}')
        return EXIT_OK
    except GreenDcError as e:
        logger.error(f'{e.category} error: {e}')
        write_diagnostics(out or _output_directory(args, options), e, args.command)
        return e.exit_code
    except Exception as e:
        logger.exception(f'`{args.command}` failed')
        error = GreenDcError(f'{type(e).__name__}: {e}')
        write_diagnostics(out or _output_directory(args, options), error, args.command)
        return error.exit_code
    finally:
        if staging is not None and os.path.isdir(staging):
            shutil.rmtree(staging, ignore_errors=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the command line.

    Returns:
        the exit code: 0 success, 1 runtime failure, 2 usage or input error, 3 validation failure
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f'{e}\n')
        return EXIT_USAGE_ERROR
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_USAGE_ERROR

    configure_logging(args.log_level)
    return execute(args)
