"""Command-line workbench for the filter and controller trade-off experiments.

    python cli.py tradeoff --preset example1 --out tradeoff.csv
    python cli.py design --preset example1 --gamma 3
    python cli.py sweep --preset vehicle --trials 20 --out rmse.csv
    python cli.py closedloop-tradeoff --config my_plant.json --mode fix-L-lqr

An experiment is described by one JSON document:

    {"experiment": "tradeoff",
     "system": {"A": [[0.9, 0], [0.02, 0.8]], "C": ..., "Q": ..., "R": ...},
     "parameters": {"delta_steps": 25},
     "output_path": "tradeoff.csv",
     "seed": 0}

Controlled experiments take a "plant" block (which adds "B" and "Ts")
instead of "system".  Matrices are arrays of rows.  Results are written as
CSV, preceded by a '# provenance:' comment line, or printed as a table when
no output path is given.  Exit status: 0 on success, 2 for unreadable input,
3 for invalid input, 4 when a solver fails or a target is infeasible; failures
also print a one-line JSON error record on stderr.
"""

from utils import (
    ValidationError, InstabilityError, ConvergenceError, InfeasibleTargetError, print_table
)
from filterdesign import (
    SystemModel, example1, kalman_gain, optimal_gain, robust_gain, performance, sensitivity,
    performance_bounds, tradeoff_curve
)
from montecarlo import (
    NoiseModel, trial_seeds, simulate_filter, empirical_performance, estimator_sweep,
    count_inversions
)
from closedloop import (
    PlantWithInput, vehicle_preset, vehicle_Wx, vehicle_Wu, vehicle_lambda_robust,
    vehicle_R_adverse, lqg_config, closed_loop_cost, rmse_sweep, crossing_scale,
    course_reference, closed_loop_tradeoff, mode_agreement, modes
)

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

__version__ = '0.1.0'

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3, 4

experiments = ('tradeoff', 'design', 'simulate', 'sweep', 'closedloop-tradeoff')

top_level_keys = {'experiment', 'system', 'plant', 'parameters', 'output_path', 'seed'}
system_keys = {'A', 'C', 'Q', 'R', 'Sigma0'}
plant_keys = system_keys | {'B', 'Ts'}
parameter_keys = {
    'delta_grid', 'delta_min', 'delta_max', 'delta_steps', 'lambda', 'gamma',
    'horizon', 'trials', 'burn_in', 'mode', 'starts', 'Wx', 'Wu', 'lambda_robust',
    'R_adverse', 'scales', 'waypoints', 'waypoints_path', 'steps_per_segment', 'sweep',
    'w_noise', 'v_noise', 'v_nominal', 'v_adverse'
}
noise_keys = {'kind', 'cov', 'components', 'samples', 'path'}
component_keys = {'weight', 'mean', 'cov'}

# ______________________________________________________________________________
# Config validation


def _matrix(value, field):
    "A rectangular array of finite numbers, returned as a list of rows of floats."
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[value]]
    if not isinstance(value, list) or not value:
        raise ValidationError('{} must be a non-empty array of rows'.format(field), field)
    rows = []
    for i, row in enumerate(value):
        row_field = '{}[{}]'.format(field, i)
        if not isinstance(row, list):
            raise ValidationError('{} must be an array of numbers'.format(row_field), row_field)
        if len(row) != len(value[0]):
            raise ValidationError('{} has {} entries, expected {}'
                                  .format(row_field, len(row), len(value[0])), row_field)
        rows.append([_number(x, '{}[{}]'.format(row_field, j)) for j, x in enumerate(row)])
    return rows


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError('{} must be a finite number'.format(field), field)
    return float(value)


def _integer(value, field, minimum=0):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValidationError('{} must be an integer >= {}'.format(field, minimum), field)
    return value


def _number_list(values, field):
    "A non-empty array of finite numbers."
    if not isinstance(values, list) or not values:
        raise ValidationError('{} must be a non-empty array'.format(field), field)
    return [_number(x, '{}[{}]'.format(field, i)) for i, x in enumerate(values)]


def _file_name(value, field):
    if not isinstance(value, str) or not value:
        raise ValidationError('{} must be a file name'.format(field), field)
    return value


def _check_keys(block, allowed, field):
    if not isinstance(block, dict):
        raise ValidationError('{} must be an object'.format(field or 'config'), field)
    unknown = sorted(set(block) - allowed)
    if unknown:
        name = '{}.{}'.format(field, unknown[0]) if field else unknown[0]
        raise ValidationError('unknown key {!r}'.format(name), name)


def _prefixed(error, prefix):
    "Re-raise a ValidationError from a model constructor with its field under prefix."
    field = '{}.{}'.format(prefix, error.field) if error.field else prefix
    return type(error)(str(error), field)


class ExperimentConfig:

    """A validated experiment description.  system and plant hold the
    matrices as lists of rows; at most one of them is set."""

    def __init__(self, experiment, system=None, plant=None, parameters=None, output_path=None,
                 seed=0):
        self.experiment = experiment
        self.system = system
        self.plant = plant
        self.parameters = parameters or {}
        self.output_path = output_path
        self.seed = seed

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, top_level_keys, '')
        experiment = d.get('experiment')
        if experiment not in experiments:
            raise ValidationError('experiment must be one of {}, got {!r}'
                                  .format(', '.join(experiments), experiment), 'experiment')
        if ('system' in d) == ('plant' in d):
            raise ValidationError('give exactly one of a system block and a plant block', 'system')
        system = plant = None
        if 'system' in d:
            system = cls._matrices(d['system'], system_keys, 'system')
        else:
            plant = cls._matrices(d['plant'], plant_keys, 'plant')
        parameters = d.get('parameters', {})
        _check_keys(parameters, parameter_keys, 'parameters')
        parameters = copy.deepcopy(parameters)
        for key in ('Wx', 'Wu', 'R_adverse'):
            if key in parameters:
                parameters[key] = _matrix(parameters[key], 'parameters.' + key)
        for key in ('delta_grid', 'scales'):
            if key in parameters:
                parameters[key] = _number_list(parameters[key], 'parameters.' + key)
        if 'waypoints_path' in parameters:
            _file_name(parameters['waypoints_path'], 'parameters.waypoints_path')
        for key in ('w_noise', 'v_noise', 'v_nominal', 'v_adverse'):
            if key in parameters:
                _check_keys(parameters[key], noise_keys, 'parameters.' + key)
                if 'path' in parameters[key]:
                    _file_name(parameters[key]['path'], 'parameters.{}.path'.format(key))
        output_path = d.get('output_path')
        if output_path is not None and not isinstance(output_path, str):
            raise ValidationError('output_path must be a string', 'output_path')
        seed = _integer(d.get('seed', 0), 'seed')
        config = cls(experiment, system, plant, parameters, output_path, seed)
        config.model()
        return config

    @staticmethod
    def _matrices(block, allowed, field):
        _check_keys(block, allowed, field)
        out = {}
        for key, value in block.items():
            if key == 'Ts':
                out[key] = _number(value, field + '.Ts')
            else:
                out[key] = _matrix(value, '{}.{}'.format(field, key))
        for key in ('A', 'C', 'Q', 'R') + (('B',) if field == 'plant' else ()):
            if key not in out:
                raise ValidationError('{}.{} is required'.format(field, key), '{}.{}'.format(field, key))
        return out

    def model(self):
        "The SystemModel or PlantWithInput described by the config."
        try:
            if self.system is not None:
                return SystemModel(name=self.experiment, **self.system)
            return PlantWithInput(name=self.experiment, **self.plant)
        except ValidationError as e:
            raise _prefixed(e, 'system' if self.system is not None else 'plant')

    def system_model(self):
        model = self.model()
        return model.system() if isinstance(model, PlantWithInput) else model

    def plant_model(self):
        model = self.model()
        if not isinstance(model, PlantWithInput):
            raise ValidationError('experiment {} needs a plant block'.format(self.experiment), 'plant')
        return model

    def to_dict(self):
        d = {'experiment': self.experiment, 'parameters': self.parameters, 'seed': self.seed}
        if self.system is not None:
            d['system'] = self.system
        if self.plant is not None:
            d['plant'] = self.plant
        if self.output_path is not None:
            d['output_path'] = self.output_path
        return d

    def digest(self):
        "SHA-256 of the canonical JSON form, output path excluded."
        d = self.to_dict()
        d.pop('output_path', None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode('utf-8')).hexdigest()

    def __repr__(self):
        return '<ExperimentConfig {} seed={}>'.format(self.experiment, self.seed)


def _rows(M):
    return np.asarray(M, dtype=float).tolist()


def preset(name):
    "The ExperimentConfig of a named parameter set: 'example1' or 'vehicle'."
    if name == 'example1':
        return ExperimentConfig.from_dict({
            'experiment': 'tradeoff',
            'system': {'A': _rows(example1.A), 'C': _rows(example1.C), 'Q': _rows(example1.Q),
                       'R': _rows(example1.R), 'Sigma0': _rows(example1.Sigma0)}})
    elif name == 'vehicle':
        plant = vehicle_preset(1.0)
        return ExperimentConfig.from_dict({
            'experiment': 'sweep',
            'plant': {'A': _rows(plant.A), 'B': _rows(plant.B), 'C': _rows(plant.C),
                      'Q': _rows(plant.Q), 'R': _rows(plant.R), 'Sigma0': _rows(plant.Sigma0),
                      'Ts': plant.Ts},
            'parameters': {'Wx': _rows(vehicle_Wx), 'Wu': _rows(vehicle_Wu),
                           'lambda_robust': vehicle_lambda_robust,
                           'R_adverse': _rows(vehicle_R_adverse)}})
    raise ValidationError('unknown preset {!r}; expected example1 or vehicle'.format(name), 'preset')

# ______________________________________________________________________________
# Experiment parameters


def _param_number(params, key, default=None):
    if key not in params:
        return default
    return _number(params[key], 'parameters.' + key)


def _param_integer(params, key, default, minimum=1):
    if key not in params:
        return default
    return _integer(params[key], 'parameters.' + key, minimum)


def _noise(params, key, default):
    "A NoiseModel from the config block parameters[key], or default."
    if key not in params:
        return default
    block, field = params[key], 'parameters.' + key
    kind = block.get('kind')
    try:
        if kind == 'gaussian':
            return NoiseModel.gaussian(_matrix(block.get('cov'), field + '.cov'))
        elif kind == 'mixture':
            components = block.get('components')
            if not isinstance(components, list):
                raise ValidationError('{}.components must be an array'.format(field),
                                      field + '.components')
            parts = []
            for i, c in enumerate(components):
                cfield = '{}.components[{}]'.format(field, i)
                _check_keys(c, component_keys, cfield)
                parts.append((_number(c.get('weight'), cfield + '.weight'),
                              _matrix([c.get('mean')], cfield + '.mean')[0],
                              _matrix(c.get('cov'), cfield + '.cov')))
            return NoiseModel.mixture(parts)
        elif kind == 'empirical':
            if 'path' in block:
                return NoiseModel.from_csv(block['path'])
            return NoiseModel.empirical(_matrix(block.get('samples'), field + '.samples'))
    except ValidationError as e:
        if e.field and e.field.startswith(field):
            raise
        raise _prefixed(e, field)
    raise ValidationError('{}.kind must be gaussian, mixture or empirical'.format(field),
                          field + '.kind')


def _delta_grid(params, low, high, steps_default):
    """The delta grid from parameters: an explicit delta_grid, or delta_steps
    points from delta_min (default low) to delta_max (default high)."""
    if 'delta_grid' in params:
        return _number_list(params['delta_grid'], 'parameters.delta_grid')
    lo = _param_number(params, 'delta_min', low)
    hi = _param_number(params, 'delta_max', high)
    steps = _param_integer(params, 'delta_steps', steps_default)
    if steps == 1:
        return [lo]
    if not hi > lo:
        raise ValidationError('delta_max must exceed delta_min', 'parameters.delta_max')
    return [float(x) for x in np.linspace(lo, hi, steps)]


def _upper_end(p_low, p_high):
    "The default top of a delta grid: p_high, or twice p_low when p_high is infinite."
    return 2 * p_low if math.isinf(p_high) else p_high


def _design_gain(sys, params):
    "The gain named by parameters: gamma, else lambda, else the Kalman gain."
    if 'gamma' in params:
        gamma = _param_number(params, 'gamma')
        return robust_gain(sys, gamma), 1.0 / gamma if gamma > 0 else math.inf, gamma
    if 'lambda' in params:
        lam = _param_number(params, 'lambda')
        return optimal_gain(sys, lam), lam, 1.0 / lam if lam > 0 else math.inf
    return kalman_gain(sys), math.inf, 0.0


def _weights(params, plant):
    Wx = params.get('Wx', _rows(np.eye(plant.n)))
    Wu = params.get('Wu', _rows(np.eye(plant.p)))
    return np.array(Wx), np.array(Wu)


def _gain_columns(name, rows, cols):
    return ['{}_{}_{}'.format(name, i + 1, j + 1) for i in range(rows) for j in range(cols)]


def _flat(M):
    return [float(x) for x in np.asarray(M).ravel()]

# ______________________________________________________________________________
# Experiments; each returns (columns, rows)


def run_tradeoff(config):
    sys_ = config.system_model()
    params = config.parameters
    p_kf, p_zero = performance_bounds(sys_)
    grid = _delta_grid(params, p_kf, _upper_end(p_kf, p_zero), 25)
    points = tradeoff_curve(sys_, grid)
    columns = ['delta', 'lambda', 'performance', 'sensitivity', 'at_cap'] + \
        _gain_columns('K', sys_.n, sys_.m)
    rows = [[p.delta, p.lam, p.performance, p.sensitivity, p.at_cap] + _flat(p.gain.K)
            for p in points]
    return columns, rows


def run_design(config):
    sys_ = config.system_model()
    gain, lam, gamma = _design_gain(sys_, config.parameters)
    columns = ['lambda', 'gamma', 'performance', 'sensitivity'] + _gain_columns('K', sys_.n, sys_.m)
    return columns, [[lam, gamma, performance(sys_, gain), sensitivity(sys_, gain)] + _flat(gain.K)]


def run_simulate(config):
    sys_ = config.system_model()
    params = config.parameters
    gain = _design_gain(sys_, params)[0]
    T = _param_integer(params, 'horizon', 100000)
    burn_in = _param_integer(params, 'burn_in', 1000, minimum=0)
    trials = _param_integer(params, 'trials', 1)
    w_model = _noise(params, 'w_noise', NoiseModel.gaussian(sys_.Q))
    v_model = _noise(params, 'v_noise', NoiseModel.gaussian(sys_.R))
    analytic = performance(sys_.with_noise(R=v_model.second_moment), gain)
    rows = []
    for run_index, seed in enumerate(trial_seeds(config.seed, trials)):
        run = simulate_filter(sys_, gain, w_model, v_model, T, seed, burn_in)
        rows.append([run_index, seed, empirical_performance(run), analytic])
    return ['run', 'seed', 'empirical_performance', 'analytic_performance'], rows


def run_sweep(config):
    params = config.parameters
    kind = params.get('sweep', 'rmse' if config.plant is not None else 'estimator')
    if kind == 'rmse':
        return _rmse_sweep(config)
    elif kind == 'estimator':
        return _estimator_sweep(config)
    raise ValidationError('parameters.sweep must be rmse or estimator', 'parameters.sweep')


def _adverse_R(params):
    if 'R_adverse' not in params:
        raise ValidationError('parameters.R_adverse is required', 'parameters.R_adverse')
    return np.array(params['R_adverse'])


def _rmse_sweep(config):
    plant = config.plant_model()
    params = config.parameters
    Wx, Wu = _weights(params, plant)
    T = _param_integer(params, 'horizon', 2000)
    trials = _param_integer(params, 'trials', 20)
    burn_in = _param_integer(params, 'burn_in', 0, minimum=0)
    lam = _param_number(params, 'lambda_robust', _param_number(params, 'lambda', 1.0))
    if 'scales' in params:
        scales = _number_list(params['scales'], 'parameters.scales')
    elif 'R_adverse' in params:
        ratio = np.trace(_adverse_R(params)) / np.trace(plant.R)
        scales = [float(s) for s in np.linspace(1, ratio, 10)]
    else:
        scales = [float(s) for s in np.linspace(1, 25, 10)]
    reference = _reference(params, plant, T)
    cfg_kalman = lqg_config(plant, Wx, Wu, reference=reference)
    cfg_robust = lqg_config(plant, Wx, Wu, K=optimal_gain(plant.system(), lam), reference=reference)
    w_model = _noise(params, 'w_noise', NoiseModel.gaussian(plant.Q))
    v_model = _noise(params, 'v_noise', NoiseModel.gaussian(plant.R))
    rows = rmse_sweep(cfg_kalman, cfg_robust, scales, w_model, v_model, T,
                      trial_seeds(config.seed, trials), burn_in)
    crossing = crossing_scale(rows)
    logger.info('rmse curves cross at scale %s', crossing)
    return (['scale', 'rmse_kalman', 'rmse_robust', 'stderr_kalman', 'stderr_robust'],
            [list(r) for r in rows])


def _reference(params, plant, T):
    steps = _param_integer(params, 'steps_per_segment', 10)
    if 'waypoints_path' in params:
        try:
            table = np.loadtxt(params['waypoints_path'], delimiter=',', ndmin=2, comments='#')
        except ValueError as e:
            raise ValidationError('cannot read waypoints: {}'.format(e), 'parameters.waypoints_path')
        return course_reference(plant, T, [row[1:] for row in table], steps)
    if 'waypoints' in params:
        points = _matrix(params['waypoints'], 'parameters.waypoints')
        return course_reference(plant, T, points, steps)
    return course_reference(plant, T, steps_per_segment=steps)


def _estimator_sweep(config):
    sys_ = config.system_model()
    params = config.parameters
    v_nominal = _noise(params, 'v_nominal', NoiseModel.gaussian(sys_.R))
    v_adverse = _noise(params, 'v_adverse', None)
    if v_adverse is None:
        v_adverse = NoiseModel.gaussian(_adverse_R(params))
    design = sys_.with_noise(R=v_nominal.second_moment)
    p_kf, p_zero = performance_bounds(design)
    grid = _delta_grid(params, p_kf, _upper_end(p_kf, p_zero), 6)
    T = _param_integer(params, 'horizon', 20000)
    trials = _param_integer(params, 'trials', 10)
    burn_in = _param_integer(params, 'burn_in', 1000, minimum=0)
    records = estimator_sweep(sys_, grid, v_nominal, v_adverse, T,
                              trial_seeds(config.seed, trials),
                              _noise(params, 'w_noise', None), burn_in)
    inversions = count_inversions([r.sensitivity for r in records])
    if inversions:
        logger.warning('empirical sensitivity fails to decrease %d time(s)', inversions)
    return ['delta', 'lambda', 'p_nom', 'p_adv', 'sensitivity'], [list(r) for r in records]


def run_closedloop_tradeoff(config):
    plant = config.plant_model()
    params = config.parameters
    Wx, Wu = _weights(params, plant)
    mode = params.get('mode', 'optimize-both')
    if mode != 'all' and mode not in modes:
        raise ValidationError('parameters.mode must be one of {} or all'.format(', '.join(modes)),
                              'parameters.mode')
    J_min = closed_loop_cost(lqg_config(plant, Wx, Wu))
    grid = _delta_grid(params, J_min, 2 * J_min, 10)
    starts = _param_integer(params, 'starts', 5)
    curves = {}
    for m in (modes if mode == 'all' else (mode,)):
        curves[m] = closed_loop_tradeoff(plant, Wx, Wu, grid, m, starts, config.seed)
    if len(curves) > 1:
        logger.info('largest difference between modes: %.3g', mode_agreement(curves))
    columns = ['delta', 'mode', 'mu', 'cost', 'sensitivity', 'certified'] + \
        _gain_columns('K', plant.n, plant.m) + _gain_columns('L', plant.p, plant.n)
    rows = [[p.delta, p.mode, p.mu, p.cost, p.sensitivity, p.certified] + _flat(p.K) + _flat(p.L)
            for points in curves.values() for p in points]
    return columns, rows


runners = {
    'tradeoff': run_tradeoff,
    'design': run_design,
    'simulate': run_simulate,
    'sweep': run_sweep,
    'closedloop-tradeoff': run_closedloop_tradeoff,
}


def execute(config):
    "Run the configured experiment and return (columns, rows)."
    logger.info('running %s (seed %d)', config.experiment, config.seed)
    return runners[config.experiment](config)

# ______________________________________________________________________________
# CSV files


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return 'True' if x else 'False'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _parse_cell(s):
    if s in ('True', 'False'):
        return s == 'True'
    for kind in (int, float):
        try:
            return kind(s)
        except ValueError:
            pass
    return s


def provenance(config):
    return 'config_sha256={} seed={} version={}'.format(config.digest(), config.seed, __version__)


def write_csv(path, columns, rows, config):
    """Write the table to path, all at once: it goes to a temporary file in the
    same directory that then replaces path."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='.csv')
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write('# provenance: {}\n'.format(provenance(config)))
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(x) for x in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def read_csv(path):
    """Read a file written by write_csv: returns (provenance, columns, rows),
    with provenance a dict and every cell converted back to bool, int or float
    where it looks like one."""
    info = {}
    with open(path, newline='') as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith('# provenance:'):
            info = dict(item.split('=', 1) for item in line[len('# provenance:'):].split())
        elif not line.startswith('#'):
            body.append(line)
    table = list(csv.reader(body))
    if not table:
        return info, [], []
    return info, table[0], [[_parse_cell(s) for s in row] for row in table[1:]]

# ______________________________________________________________________________
# Entry points


def _error_record(kind, error, code):
    record = {'error': kind, 'message': str(error), 'field': getattr(error, 'field', None),
              'exit_code': code}
    print(json.dumps(record), file=sys.stderr)
    return code


def load_config(config_path=None, preset_name=None):
    "Read a JSON config file, or a preset; returns an ExperimentConfig."
    if preset_name is not None:
        return preset(preset_name)
    if config_path is None:
        raise ValidationError('give --config or --preset', 'config')
    with open(config_path) as f:
        return ExperimentConfig.from_dict(json.load(f))


override_keys = {
    'delta_min': 'delta_min', 'delta_max': 'delta_max', 'delta_steps': 'delta_steps',
    'lam': 'lambda', 'gamma': 'gamma', 'mode': 'mode', 'horizon': 'horizon',
    'trials': 'trials', 'sweep': 'sweep', 'starts': 'starts',
}


def apply_overrides(config, overrides):
    """A new config with overrides applied.  overrides maps 'experiment',
    'seed', 'out' or a parameter name (see override_keys) to its value;
    None values are ignored."""
    d = copy.deepcopy(config.to_dict())
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == 'experiment':
            d['experiment'] = value
        elif key == 'seed':
            d['seed'] = value
        elif key == 'out':
            d['output_path'] = value
        elif key in override_keys:
            d['parameters'][override_keys[key]] = value
        else:
            raise ValidationError('unknown override {!r}'.format(key), key)
    return ExperimentConfig.from_dict(d)


def run(config_path=None, overrides=None, preset_name=None):
    """Load, run and write one experiment; returns the exit status."""
    try:
        config = apply_overrides(load_config(config_path, preset_name), overrides)
        columns, rows = execute(config)
        if config.output_path:
            write_csv(config.output_path, columns, rows, config)
            logger.info('wrote %d rows to %s', len(rows), config.output_path)
        else:
            print('# provenance: {}'.format(provenance(config)))
            print_table(rows, header=columns)
        return EXIT_OK
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
        return _error_record('parse', e, EXIT_PARSE)
    except ValidationError as e:
        return _error_record('validation', e, EXIT_VALIDATION)
    except (InstabilityError, ConvergenceError, InfeasibleTargetError) as e:
        return _error_record(type(e).__name__, e, EXIT_SOLVER)


def make_parser():
    parser = argparse.ArgumentParser(prog='cli.py', description=__doc__.splitlines()[0])
    parser.add_argument('experiment', nargs='?', choices=experiments,
                        help='experiment to run (default: the one in the config)')
    source = parser.add_mutually_exclusive_group()
    source.add_argument('--config', help='JSON experiment file')
    source.add_argument('--preset', choices=('example1', 'vehicle'))
    parser.add_argument('--out', help='CSV output path (default: print a table)')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--delta-min', type=float)
    parser.add_argument('--delta-max', type=float)
    parser.add_argument('--delta-steps', type=int)
    parser.add_argument('--lambda', dest='lam', type=float)
    parser.add_argument('--gamma', type=float)
    parser.add_argument('--mode', choices=modes + ('all',))
    parser.add_argument('--horizon', type=int)
    parser.add_argument('--trials', type=int)
    parser.add_argument('--starts', type=int)
    parser.add_argument('--sweep', choices=('rmse', 'estimator'))
    parser.add_argument('-v', '--verbose', action='count', default=0)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format='%(levelname)s %(name)s: %(message)s')
    overrides = {key: getattr(args, key) for key in override_keys}
    overrides.update(experiment=args.experiment, seed=args.seed, out=args.out)
    return run(args.config, overrides, args.preset)


if __name__ == '__main__':
    sys.exit(main())
