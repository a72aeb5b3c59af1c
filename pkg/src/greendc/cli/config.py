"""
Configuration of the command line.

The defaults live in :func:`create_default_options`. A configuration file is a JSON document with an explicit
``schema_version``; its values are merged over the defaults, then every section is turned into the option
types of the library, which enforce their invariants.
"""
import contextlib
import copy
import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from greendc.basic_typing import Options
from greendc.cli.errors import ConfigError, TraceError
from greendc.cli.trace_io import check_trace_columns
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment, check_network_delays
from greendc.optim.problem import SolveOptions
from greendc.queueing.types import SearchConfig
from greendc.reporting.records import FORMATS
from greendc.simulation.run import RunOptions
from greendc.simulation.traces import ClassTraceSpec, DcTraceSpec, TraceSpec, coarse_stats
from greendc.utils.options import flatten_nested_dictionaries, recursive_dict_update
from greendc.validation.brute_force import BruteForceGrid
from greendc.validation.convexity_audit import AuditGrid
from greendc.validation.monte_carlo import LossBattery, McConfig


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

OUTPUT_ROOT_VARIABLE = 'GREENDC_OUTPUT_ROOT'
DEFAULT_OUTPUT_ROOT = 'greendc_output'

# fields of a data center entry that may be omitted
DATA_CENTER_DEFAULTS = {
    'idle_power': 0.1,
    'peak_power': 0.2,
    'pue': 1.2,
    'network_delay': 0.0,
    'green_unit_cost': 0.0,
}


def default_output_directory() -> str:
    return os.environ.get(OUTPUT_ROOT_VARIABLE) or os.path.join('.', DEFAULT_OUTPUT_ROOT)


def create_default_options() -> Options:
    """
    Create the default options of every command.

    Sections:
        - ``data_centers``, ``classes``: lists of :class:`DataCenterSpec` and :class:`ServiceClass` fields
        - ``slot``: the environment of the ``solve`` command
        - ``solver``: the options of the slot solve
        - ``simulator``: the options of the ``simulate`` command and of the trace summaries
        - ``traces``: the trace files or the synthetic generator
        - ``validation``: the Monte Carlo battery, the brute force grid and the convexity audit
        - ``report``: the emitted reports

    Returns:
        the options
    """
    return {
        'schema_version': SCHEMA_VERSION,
        'output_directory': None,
        'data_centers': [],
        'classes': [],
        'slot': {
            'slot_length': 900.0,
            'green_energy': None,  # kWh per data center over the slot, zeros if None
            'brown_price': None,  # currency/kWh per data center
            'rates': None,  # mean request rate per class, requests/second
            'rate_std': None,  # standard deviation per class. If None, `simulator.fallback_cv` * rate
        },
        'solver': {
            'tolerance': 1e-7,
            'max_iterations': 500,
            'barrier_initial_weight': None,
            'barrier_reduction': 10.0,
            'epsilon_alloc': 1e-6,
            'seed': 0,
            'multistart': 3,
            'total_capacity_constraint': True,
            'relax_demand_equality': False,
            'kkt_tolerance': 1e-5,
            'feasibility_tolerance': 1e-6,
            'n_max': 1000,
            'patience': 50,
            'loss_model': 'gd1',
        },
        'simulator': {
            'baselines': ['mm1', 'equal_split'],
            'normalized_gain': True,
            'gain_grid_size': 100,
            'gain_max_ratio': 4.0,
            'nb_workers': 0,
            'fallback_cv': 0.3,
            'lag_cap': 0,
        },
        'traces': {
            'paths': [],
            'slot_length': 900.0,
            'generator': None,
        },
        'validation': {
            'monte_carlo': {
                'horizon': 1e5,
                'replications': 20,
                'burn_in': 1000.0,
                'substeps': 8,
                'seed': 0,
                'cvs': [0.1, 0.3],
                'ratios': [1.05, 1.1, 1.2, 1.5],
                'effective_deadlines': [1.0, 5.0, 30.0],
                'mean_rate': 100.0,
                'comparison_range': [1e-4, 1e-1],
                'max_log10_gap': 0.5,
                'min_agreement': 0.8,
                'nb_workers': 0,
            },
            'brute_force': {
                'nb_alloc_steps': 100,
                'nb_rates': 301,
                'max_ratio': 4.0,
                'n_max': 1000,
                'max_cost': 5e9,
            },
            'audit': {
                't_max': 10.0,
                't_step': 0.1,
                'n_max': 50,
                'cvs': [0.1, 0.3, 1.0],
                'effective_deadlines': [1.0, 5.0, 30.0],
                'correlations': [0.0, 0.5, 0.9],
                'nb_random': 1000,
                'scales': [0.5, 2.0, 10.0],
                'seed': 0,
            },
        },
        'report': {
            'format': 'table',
            'plots': False,
            'sqlite': True,
        },
    }


# sections whose content is free-form and not checked against the defaults
_FREE_FORM = ('data_centers', 'classes', 'traces.generator', 'traces.paths', 'slot.green_energy', 'slot.brown_price',
              'slot.rates', 'slot.rate_std', 'simulator.baselines', 'solver.barrier_initial_weight', 'output_directory')


@dataclass
class RunConfig:
    """
    Validated configuration of a command.

    Args:
        dcs: the data centers
        classes: the classes
        solve_options: options of the slot solves
        run_options: options of the multi-slot runs
        slot_length: duration of a slot of the trace files, seconds
        fallback_cv: coefficient of variation of a class summarized from fewer than two trace samples
        lag_cap: largest autocovariance lag estimated from per-second traces
        trace_paths: the trace files, resolved relative to the configuration file
        generator: parameters of the synthetic traces, used when no trace file is given
        generator_seed: seed of the synthetic traces
        slot: environment of the single-slot solve, None if the configuration does not define one
        loss_battery: the Monte Carlo battery
        mc_workers: number of worker processes of the Monte Carlo battery
        brute_force_grid: grid of the brute force search
        audit_grid: grid of the convexity audit
        output_directory: where the reports are written
        report_format: format of the records
        plots: if True, the runs are plotted
        sqlite: if True, the runs are stored in a SQLite database
        options: the merged options the configuration was built from
        path: the configuration file, None for the defaults
    """
    dcs: List[DataCenterSpec]
    classes: List[ServiceClass]
    solve_options: SolveOptions
    run_options: RunOptions
    slot_length: float
    fallback_cv: float
    lag_cap: int
    trace_paths: List[str]
    generator: Optional[TraceSpec]
    generator_seed: int
    slot: Optional[SlotEnvironment]
    loss_battery: LossBattery
    mc_workers: int
    brute_force_grid: BruteForceGrid
    audit_grid: AuditGrid
    output_directory: str
    report_format: str
    plots: bool
    sqlite: bool
    options: Options = field(default_factory=dict, repr=False)
    path: Optional[str] = None


@contextlib.contextmanager
def _field(name: str, path: Optional[str]):
    """Report the failures of the types built from a section as configuration errors naming the field"""
    try:
        yield
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, AssertionError) as e:
        message = str(e)
        if isinstance(e, KeyError):
            message = f'missing field {e}'
        if isinstance(e, TypeError):
            # e.g. "__init__() got an unexpected keyword argument 'pues'"
            message = re.sub(r'^\S*__init__\(\) ', '', message)
        raise ConfigError(message, path=path, field=name)


def _check_unknown(defaults: Mapping, values: Mapping, path: Optional[str], root: str = '') -> None:
    for name, value in values.items():
        full_name = f'{root}.{name}' if root else name
        if full_name in _FREE_FORM:
            continue
        if name not in defaults:
            raise ConfigError('unknown field', path=path, field=full_name)
        if isinstance(defaults[name], dict):
            if not isinstance(value, dict):
                raise ConfigError(f'expected an object, got={type(value).__name__}', path=path, field=full_name)
            _check_unknown(defaults[name], value, path, full_name)


def _floats(values: Optional[Sequence], nb: int, name: str, path: Optional[str], default: float = None) -> np.ndarray:
    if values is None:
        if default is None:
            raise ConfigError('missing field', path=path, field=name)
        return np.full(nb, default)
    if not isinstance(values, list) or len(values) != nb:
        raise ConfigError(f'expected a list of {nb} numbers', path=path, field=name)
    with _field(name, path):
        return np.asarray(values, dtype=np.float64)


def _build_dcs(entries: Sequence[Mapping], path: Optional[str]) -> List[DataCenterSpec]:
    if not isinstance(entries, list) or len(entries) == 0:
        raise ConfigError('at least one data center is required', path=path, field='data_centers')
    dcs = []
    for i, entry in enumerate(entries):
        name = f'data_centers[{i}]'
        if not isinstance(entry, dict):
            raise ConfigError('expected an object', path=path, field=name)
        values = dict(DATA_CENTER_DEFAULTS)
        values['name'] = f'dc{i}'
        values.update(entry)
        with _field(name, path):
            dcs.append(DataCenterSpec(**values))
    names = [dc.name for dc in dcs]
    if len(set(names)) != len(names):
        raise ConfigError(f'data center names must be unique, got={names}', path=path, field='data_centers')
    return dcs


def _build_classes(entries: Sequence[Mapping], path: Optional[str]) -> List[ServiceClass]:
    if not isinstance(entries, list) or len(entries) == 0:
        raise ConfigError('at least one class is required', path=path, field='classes')
    classes = []
    for j, entry in enumerate(entries):
        name = f'classes[{j}]'
        if not isinstance(entry, dict):
            raise ConfigError('expected an object', path=path, field=name)
        values = {'name': f'class{j}'}
        values.update(entry)
        with _field(name, path):
            classes.append(ServiceClass(**values))
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        raise ConfigError(f'class names must be unique, got={names}', path=path, field='classes')
    return classes


def _build_solve_options(solver: Mapping, path: Optional[str]) -> SolveOptions:
    values = dict(solver)
    with _field('solver', path):
        search = SearchConfig(n_max=int(values.pop('n_max')), patience=int(values.pop('patience')))
        return SolveOptions(search=search, **values)


def _build_run_options(simulator: Mapping, solve_options: SolveOptions, path: Optional[str]) -> RunOptions:
    with _field('simulator', path):
        if not isinstance(simulator['baselines'], list):
            raise ValueError('baselines must be a list')
        return RunOptions(
            solve=solve_options,
            baselines=tuple(simulator['baselines']),
            normalized_gain=bool(simulator['normalized_gain']),
            gain_grid_size=int(simulator['gain_grid_size']),
            gain_max_ratio=float(simulator['gain_max_ratio']),
            nb_workers=int(simulator['nb_workers']))


def _build_slot(slot: Mapping, dcs: Sequence[DataCenterSpec], classes: Sequence[ServiceClass], fallback_cv: float,
                path: Optional[str]) -> Optional[SlotEnvironment]:
    if slot['rates'] is None and slot['brown_price'] is None:
        return None
    green = _floats(slot['green_energy'], len(dcs), 'slot.green_energy', path, default=0.0)
    price = _floats(slot['brown_price'], len(dcs), 'slot.brown_price', path)
    rates = _floats(slot['rates'], len(classes), 'slot.rates', path)
    stds = _floats(slot['rate_std'], len(classes), 'slot.rate_std', path, default=-1.0)
    stds = np.where(stds < 0, fallback_cv * rates, stds)
    with _field('slot', path):
        return SlotEnvironment(
            green_energy=green,
            brown_price=price,
            slot_length=float(slot['slot_length']),
            class_stats=[coarse_stats(float(m), float(s)) for m, s in zip(rates, stds)])


def _build_generator(generator: Optional[Mapping], dcs: Sequence[DataCenterSpec], classes: Sequence[ServiceClass],
                     path: Optional[str]) -> Tuple[Optional[TraceSpec], int]:
    if generator is None:
        return None, 0
    if not isinstance(generator, dict):
        raise ConfigError('expected an object', path=path, field='traces.generator')
    values = dict(generator)
    seed = int(values.pop('seed', 0))
    dc_entries = values.pop('dcs', None) or [{} for _ in dcs]
    class_entries = values.pop('classes', None) or [{'mean_rate': 100.0} for _ in classes]
    if len(dc_entries) != len(dcs):
        raise ConfigError(f'expected {len(dcs)} data center profiles', path=path, field='traces.generator.dcs')
    if len(class_entries) != len(classes):
        raise ConfigError(f'expected {len(classes)} class profiles', path=path, field='traces.generator.classes')
    with _field('traces.generator', path):
        spec = TraceSpec(
            dcs=tuple(DcTraceSpec(**e) for e in dc_entries),
            classes=tuple(ClassTraceSpec(**e) for e in class_entries),
            dc_names=tuple(dc.name for dc in dcs),
            class_names=tuple(c.name for c in classes),
            **values)
    return spec, seed


def _build_validation(validation: Mapping, path: Optional[str]) -> Tuple[LossBattery, int, BruteForceGrid, AuditGrid]:
    mc = dict(validation['monte_carlo'])
    with _field('validation.monte_carlo', path):
        cfg = McConfig(horizon=float(mc['horizon']), replications=int(mc['replications']),
                       seed=int(mc['seed']), burn_in=float(mc['burn_in']), substeps=int(mc['substeps']))
        battery = LossBattery(
            cvs=tuple(float(v) for v in mc['cvs']),
            ratios=tuple(float(v) for v in mc['ratios']),
            effective_deadlines=tuple(float(v) for v in mc['effective_deadlines']),
            mean_rate=float(mc['mean_rate']),
            cfg=cfg,
            comparison_range=(float(mc['comparison_range'][0]), float(mc['comparison_range'][1])),
            max_log10_gap=float(mc['max_log10_gap']),
            min_agreement=float(mc['min_agreement']))
        mc_workers = int(mc['nb_workers'])
        if mc_workers < 0:
            raise ValueError(f'nb_workers must be >= 0, got={mc_workers}')

    with _field('validation.brute_force', path):
        bf = validation['brute_force']
        grid = BruteForceGrid(nb_alloc_steps=int(bf['nb_alloc_steps']), nb_rates=int(bf['nb_rates']),
                              max_ratio=float(bf['max_ratio']), n_max=int(bf['n_max']),
                              max_cost=float(bf['max_cost']))

    with _field('validation.audit', path):
        audit = validation['audit']
        if not audit['t_step'] > 0 or audit['t_max'] < 0:
            raise ValueError('t_step must be > 0 and t_max >= 0')
        nb_t = int(round(audit['t_max'] / audit['t_step'])) + 1
        audit_grid = AuditGrid(
            t_values=tuple(np.round(np.linspace(0.0, audit['t_step'] * (nb_t - 1), nb_t), 10).tolist()),
            n_values=tuple(range(1, int(audit['n_max']) + 1)),
            cvs=tuple(float(v) for v in audit['cvs']),
            effective_deadlines=tuple(float(v) for v in audit['effective_deadlines']),
            correlations=tuple(float(v) for v in audit['correlations']),
            nb_random=int(audit['nb_random']),
            scales=tuple(float(v) for v in audit['scales']),
            seed=int(audit['seed']))
    return battery, mc_workers, grid, audit_grid


def config_from_options(options: Options, path: Optional[str] = None, require_instance: bool = True) -> RunConfig:
    """
    Build and validate a configuration from merged options.

    Args:
        options: the options, complete (see :func:`create_default_options`)
        path: the configuration file, used to resolve the trace files and to name the errors
        require_instance: if False, the data centers and classes may be missing (validation commands)

    Raises:
        ConfigError: a field is invalid
    """
    version = options.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ConfigError(f'unsupported schema_version={version}, expected {SCHEMA_VERSION}', path=path,
                          field='schema_version')

    dcs: List[DataCenterSpec] = []
    classes: List[ServiceClass] = []
    if require_instance or options['data_centers'] or options['classes']:
        dcs = _build_dcs(options['data_centers'], path)
        classes = _build_classes(options['classes'], path)
        with _field('data_centers', path):
            check_network_delays(dcs, classes)

    solve_options = _build_solve_options(options['solver'], path)
    run_options = _build_run_options(options['simulator'], solve_options, path)
    simulator = options['simulator']
    with _field('simulator', path):
        fallback_cv = float(simulator['fallback_cv'])
        lag_cap = int(simulator['lag_cap'])
        if fallback_cv < 0 or lag_cap < 0:
            raise ValueError('fallback_cv and lag_cap must be >= 0')

    traces = options['traces']
    with _field('traces.slot_length', path):
        slot_length = float(traces['slot_length'])
        if not slot_length > 0:
            raise ValueError(f'slot_length must be > 0, got={slot_length}')

    if not isinstance(traces['paths'], list):
        raise ConfigError('expected a list of files', path=path, field='traces.paths')
    folder = os.path.dirname(os.path.abspath(path)) if path is not None else os.getcwd()
    trace_paths = [p if os.path.isabs(p) else os.path.join(folder, p) for p in traces['paths']]
    for i, p in enumerate(trace_paths):
        if not os.path.isfile(p):
            raise ConfigError(f'trace file not found={p}', path=path, field=f'traces.paths[{i}]')
    if trace_paths and dcs:
        try:
            check_trace_columns(trace_paths, [dc.name for dc in dcs], [c.name for c in classes])
        except TraceError as e:
            raise ConfigError(str(e), path=path, field='traces.paths')

    slot = None
    generator, generator_seed = None, 0
    if dcs:
        slot = _build_slot(options['slot'], dcs, classes, fallback_cv, path)
        generator, generator_seed = _build_generator(traces['generator'], dcs, classes, path)

    battery, mc_workers, grid, audit_grid = _build_validation(options['validation'], path)

    report = options['report']
    if report['format'] not in FORMATS:
        raise ConfigError(f'unknown format={report["format"]}, expected one of {FORMATS}', path=path,
                          field='report.format')

    return RunConfig(
        dcs=dcs,
        classes=classes,
        solve_options=solve_options,
        run_options=run_options,
        slot_length=slot_length,
        fallback_cv=fallback_cv,
        lag_cap=lag_cap,
        trace_paths=trace_paths,
        generator=generator,
        generator_seed=generator_seed,
        slot=slot,
        loss_battery=battery,
        mc_workers=mc_workers,
        brute_force_grid=grid,
        audit_grid=audit_grid,
        output_directory=options['output_directory'] or default_output_directory(),
        report_format=report['format'],
        plots=bool(report['plots']),
        sqlite=bool(report['sqlite']),
        options=options,
        path=path)


def merge_options(user_options: Mapping, path: Optional[str] = None) -> Options:
    """
    Merge user options over the defaults. Unknown fields are rejected
    """
    if not isinstance(user_options, dict):
        raise ConfigError('the configuration must be a JSON object', path=path)
    defaults = create_default_options()
    _check_unknown(defaults, user_options, path)
    return recursive_dict_update(defaults, copy.deepcopy(user_options))


def read_options(path: str) -> Options:
    """
    Read a configuration file and merge it over the defaults.

    Raises:
        ConfigError: the file cannot be read or parsed (with line and column), or names an unknown field
    """
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'cannot be read ({e.strerror})', path=path)

    try:
        user_options = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, path=path, line=e.lineno, column=e.colno)
    return merge_options(user_options, path)


def load_config(path: str, require_instance: bool = True) -> RunConfig:
    """
    Load, merge over the defaults and validate a configuration file.

    Args:
        path: the JSON configuration file
        require_instance: if False, the data centers and classes may be missing

    Raises:
        ConfigError: the file cannot be read or parsed (with line and column), or a field is invalid
    """
    config = config_from_options(read_options(path), path=path, require_instance=require_instance)
    log_config(config)
    return config


def log_config(config: RunConfig) -> None:
    logger.info(f'configuration loaded={config.path}, nb_dcs={len(config.dcs)}, nb_classes={len(config.classes)}')
    for dc in config.dcs:
        logger.info(f'data center={dc}')
    for c in config.classes:
        logger.info(f'class={c}')
    for section in ('solver', 'simulator'):
        for name, value in flatten_nested_dictionaries(config.options[section], root_name=section).items():
            logger.debug(f'option {name}={value}')


def default_config(require_instance: bool = False) -> RunConfig:
    """Configuration made of the defaults only"""
    return config_from_options(create_default_options(), require_instance=require_instance)
