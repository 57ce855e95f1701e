import pytest
from cli import *  # noqa
from cli import __version__

import json

import numpy as np

from filterdesign import example1, robust_gain, performance_bounds


def write_config(tmp_path, d, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def example1_dict(**extra):
    d = preset('example1').to_dict()
    d.update(extra)
    return d


def error_record(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


small_plant = {'A': [[0.9, 0.2], [0.0, 0.7]], 'B': [[0.0], [1.0]], 'C': [[1.0, 0.0]],
               'Q': [[0.1, 0.0], [0.0, 0.1]], 'R': [[0.1]]}

# ______________________________________________________________________________
# Configs


def test_presets():
    config = preset('example1')
    assert config.experiment == 'tradeoff'
    assert np.array_equal(config.system_model().A, example1.A)
    vehicle = preset('vehicle')
    assert vehicle.plant_model().n == 4
    assert vehicle.parameters['lambda_robust'] == 0.307
    assert vehicle.parameters['R_adverse'] == [[2.5, 0.0], [0.0, 2.5]]
    with pytest.raises(ValidationError):
        preset('aircraft')


def test_config_needs_one_model_block():
    with pytest.raises(ValidationError) as e:
        ExperimentConfig.from_dict({'experiment': 'tradeoff'})
    assert e.value.field == 'system'
    d = example1_dict(plant=dict(small_plant))
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(d)


def test_config_field_paths():
    d = example1_dict()
    d['system']['A'] = [[0.9, 0.0], [0.02, 0.8, 1.0]]
    with pytest.raises(ValidationError) as e:
        ExperimentConfig.from_dict(d)
    assert e.value.field == 'system.A[1]'
    d = example1_dict()
    d['system']['R'] = [[1.0, 0.0], [0.0, -1.0]]
    with pytest.raises(ValidationError) as e:
        ExperimentConfig.from_dict(d)
    assert e.value.field.startswith('system.R')
    with pytest.raises(ValidationError) as e:
        ExperimentConfig.from_dict(example1_dict(experiment='optimize'))
    assert e.value.field == 'experiment'
    with pytest.raises(ValidationError) as e:
        ExperimentConfig.from_dict(example1_dict(seed=-1))
    assert e.value.field == 'seed'


def test_digest_ignores_output_path():
    a = preset('example1')
    b = apply_overrides(a, {'out': 'elsewhere.csv'})
    c = apply_overrides(a, {'seed': 5})
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert len(a.digest()) == 64


def test_apply_overrides():
    config = apply_overrides(preset('example1'), {'lam': 0.5, 'experiment': 'design',
                                                  'horizon': None})
    assert config.experiment == 'design'
    assert config.parameters == {'lambda': 0.5}
    with pytest.raises(ValidationError):
        apply_overrides(preset('example1'), {'colour': 'red'})

# ______________________________________________________________________________
# Experiments


def test_tradeoff_experiment():
    columns, rows = execute(preset('example1'))
    assert columns[:5] == ['delta', 'lambda', 'performance', 'sensitivity', 'at_cap']
    assert columns[5:] == ['K_1_1', 'K_1_2', 'K_2_1', 'K_2_2']
    assert len(rows) == 25
    p_kf, p_zero = performance_bounds(example1)
    assert rows[0][0] == pytest.approx(p_kf)
    assert rows[-1][0] == pytest.approx(p_zero)
    sens = [r[3] for r in rows]
    assert all(b < a for a, b in zip(sens, sens[1:]))


def test_design_experiment():
    config = apply_overrides(preset('example1'), {'experiment': 'design', 'gamma': 3.0})
    columns, [row] = execute(config)
    assert columns[:4] == ['lambda', 'gamma', 'performance', 'sensitivity']
    assert row[0] == pytest.approx(1 / 3)
    assert row[4:] == [float(x) for x in robust_gain(example1, 3.0).K.ravel()]
    kalman = execute(apply_overrides(preset('example1'), {'experiment': 'design'}))[1][0]
    assert kalman[2] < row[2]
    assert kalman[3] > row[3]


def test_simulate_seed_changes_only_empirical_values():
    base = {'experiment': 'simulate', 'horizon': 3000}
    a = execute(apply_overrides(preset('example1'), dict(base, seed=1)))[1]
    b = execute(apply_overrides(preset('example1'), dict(base, seed=2)))[1]
    again = execute(apply_overrides(preset('example1'), dict(base, seed=1)))[1]
    assert a == again
    assert a[0][2] != b[0][2]
    assert a[0][3] == b[0][3]


def test_estimator_sweep_needs_adverse_noise():
    config = apply_overrides(preset('example1'), {'experiment': 'sweep'})
    with pytest.raises(ValidationError) as e:
        execute(config)
    assert e.value.field == 'parameters.R_adverse'


def test_closedloop_experiment_needs_plant():
    config = apply_overrides(preset('example1'), {'experiment': 'closedloop-tradeoff'})
    with pytest.raises(ValidationError) as e:
        execute(config)
    assert e.value.field == 'plant'


def test_closedloop_experiment():
    config = ExperimentConfig.from_dict({
        'experiment': 'closedloop-tradeoff', 'plant': small_plant,
        'parameters': {'mode': 'fix-L-lqr', 'delta_steps': 2, 'starts': 1}})
    columns, rows = execute(config)
    assert columns[-4:] == ['K_1_1', 'K_2_1', 'L_1_1', 'L_1_2']
    assert len(rows) == 2
    assert all(r[1] == 'fix-L-lqr' for r in rows)
    assert rows[1][4] < rows[0][4]

# ______________________________________________________________________________
# Files and exit codes


def test_csv_round_trip(tmp_path):
    config = preset('example1')
    columns, rows = execute(config)
    path = str(tmp_path / 'tradeoff.csv')
    write_csv(path, columns, rows, config)
    info, columns_back, rows_back = read_csv(path)
    assert columns_back == columns
    assert rows_back == rows
    assert info == {'config_sha256': config.digest(), 'seed': '0', 'version': __version__}
    assert [p.name for p in tmp_path.iterdir()] == ['tradeoff.csv']


def test_run_writes_output(tmp_path):
    out = str(tmp_path / 'out.csv')
    assert run(preset_name='example1', overrides={'out': out, 'delta_steps': 5}) == EXIT_OK
    assert len(read_csv(out)[2]) == 5


def test_run_prints_table(capsys):
    assert run(preset_name='example1', overrides={'experiment': 'design'}) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith('# provenance: config_sha256=')
    assert out[1].split()[:2] == ['lambda', 'gamma']


def test_malformed_matrix_exit_code(tmp_path, capsys):
    d = example1_dict()
    d['system']['C'] = [[1.0, 0.0], [0.0]]
    assert run(write_config(tmp_path, d)) == EXIT_VALIDATION
    record = error_record(capsys)
    assert record['field'] == 'system.C[1]'
    assert record['exit_code'] == 3


def edited(base, path, value):
    "A copy of the config dict base with base[path[0]][path[1]]... set to value."
    d = json.loads(json.dumps(base))
    block = d
    for key in path[:-1]:
        block = block.setdefault(key, {})
    block[path[-1]] = value
    return d


plant_sweep = {'experiment': 'sweep', 'plant': small_plant, 'parameters': {'sweep': 'rmse'}}
plant_tradeoff = {'experiment': 'closedloop-tradeoff', 'plant': small_plant}

malformed_configs = [
    ([], ''),
    (example1_dict(experiment='optimize'), 'experiment'),
    (example1_dict(plant=small_plant), 'system'),
    (edited(example1_dict(), ['system', 'A'], 'abc'), 'system.A'),
    (edited(example1_dict(), ['system', 'A'], [[0.9, 'x'], [0.02, 0.8]]), 'system.A[0][1]'),
    (edited(example1_dict(), ['system', 'Q'], [[1.0]]), 'system.Q'),
    (edited(example1_dict(), ['system', 'R'], [[1.0, 0.0], [0.0, -1.0]]), 'system.R'),
    (example1_dict(seed=1.5), 'seed'),
    (example1_dict(seed=True), 'seed'),
    (example1_dict(output_path=5), 'output_path'),
    (example1_dict(parameters=[1, 2]), 'parameters'),
    (example1_dict(parameters={'colour': 'red'}), 'parameters.colour'),
    (example1_dict(parameters={'delta_grid': 5}), 'parameters.delta_grid'),
    (example1_dict(parameters={'delta_grid': []}), 'parameters.delta_grid'),
    (example1_dict(parameters={'delta_grid': ['a']}), 'parameters.delta_grid[0]'),
    (example1_dict(parameters={'delta_steps': 0}), 'parameters.delta_steps'),
    (edited(plant_sweep, ['parameters', 'scales'], 5), 'parameters.scales'),
    (edited(plant_sweep, ['parameters', 'scales'], [1, None]), 'parameters.scales[1]'),
    (edited(plant_sweep, ['parameters', 'waypoints_path'], 5), 'parameters.waypoints_path'),
    (edited(plant_sweep, ['parameters', 'sweep'], 'fancy'), 'parameters.sweep'),
    (edited(plant_sweep, ['parameters', 'Wx'], 'big'), 'parameters.Wx'),
    (edited(plant_tradeoff, ['parameters', 'mode'], 'fix-both'), 'parameters.mode'),
    (example1_dict(experiment='simulate', parameters={'v_noise': 'gaussian'}),
     'parameters.v_noise'),
    (example1_dict(experiment='simulate', parameters={'v_noise': {'kind': 'cauchy'}}),
     'parameters.v_noise.kind'),
    (example1_dict(experiment='simulate', parameters={'v_noise': {'kind': 'empirical',
                                                                  'path': 7}}),
     'parameters.v_noise.path'),
    (example1_dict(experiment='simulate', parameters={'horizon': 'long'}), 'parameters.horizon'),
    (example1_dict(experiment='design', parameters={'gamma': -1.0}), 'gamma'),
]


@pytest.mark.parametrize('d, field', malformed_configs)
def test_malformed_config_exit_code(tmp_path, capsys, d, field):
    assert run(write_config(tmp_path, d)) == EXIT_VALIDATION
    record = error_record(capsys)
    assert record['error'] == 'validation'
    assert record['exit_code'] == 3
    assert record['field'].startswith(field)


def test_unknown_key_exit_code(tmp_path, capsys):
    d = example1_dict()
    d['system']['D'] = [[0.0]]
    assert run(write_config(tmp_path, d)) == EXIT_VALIDATION
    assert error_record(capsys)['field'] == 'system.D'


def test_unreadable_input_exit_code(tmp_path, capsys):
    path = tmp_path / 'broken.json'
    path.write_text('{"experiment": "tradeoff", ')
    assert run(str(path)) == EXIT_PARSE
    assert error_record(capsys)['error'] == 'parse'
    assert run(str(tmp_path / 'missing.json')) == EXIT_PARSE


def test_infeasible_target_exit_code(tmp_path, capsys):
    p_kf, _ = performance_bounds(example1)
    d = example1_dict(parameters={'delta_grid': [0.5 * p_kf]})
    assert run(write_config(tmp_path, d)) == EXIT_SOLVER
    assert error_record(capsys)['error'] == 'InfeasibleTargetError'


def test_main(tmp_path):
    out = str(tmp_path / 'main.csv')
    assert main(['tradeoff', '--preset', 'example1', '--delta-steps', '4', '--out', out]) == 0
    info, columns, rows = read_csv(out)
    assert len(rows) == 4
    assert info['seed'] == '0'
    assert main(['design', '--preset', 'example1', '--gamma', '-1']) == EXIT_VALIDATION
    with pytest.raises(SystemExit):
        main(['tradeoff', '--preset', 'aircraft'])
