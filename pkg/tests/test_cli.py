import json

import numpy as np
import pytest

from database.models import Chart, Trajectory
from main import main
from utils import shoot
from utils.artifacts import ArtifactWriter
from utils.experiments import ExperimentManager
from utils.params import validate

REFERENCE_ARGS = ['--m', '3', '--p', '0.5', '--sigma', '3.5', '--N', '4']


def _read(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def test_analyze_writes_report(tmp_path, capsys):
    assert main(['analyze', *REFERENCE_ARGS, '--output', str(tmp_path)]) == 0
    report = _read(tmp_path / 'analysis.json')
    assert report['flags']['regime'] == 'm+p>2'
    assert report['D_sigma'] < 0
    assert report['provenance']['command'] == 'analyze'
    assert report['provenance']['config']['sigma'] == 3.5
    assert json.loads(capsys.readouterr().out)['exponents']['L'] == pytest.approx(6.0)


def test_outputs_are_deterministic(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    main(['analyze', *REFERENCE_ARGS, '--output', str(first)])
    main(['analyze', *REFERENCE_ARGS, '--output', str(second)])
    assert (first / 'analysis.json').read_text() == (second / 'analysis.json').read_text()


def test_range_violation_exit_code(tmp_path, capsys):
    code = main(['analyze', '--m', '0.5', '--p', '0.5', '--sigma', '3', '--N', '4',
                 '--output', str(tmp_path)])
    assert code == 2
    error = json.loads(capsys.readouterr().out)
    assert error['error'] == 'RangeViolation'
    assert error['details']['constraint'] == 'm > 1'


def test_missing_sigma(tmp_path):
    assert main(['analyze', '--m', '3', '--p', '0.5', '--N', '4', '--output', str(tmp_path)]) == 2


def test_config_file_with_flag_override(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'m': 3.0, 'p': 0.5, 'sigma': 6.0, 'N': 4}))
    assert main(['analyze', '--config', str(path), '--sigma', '3.5', '--output', str(tmp_path)]) == 0
    assert _read(tmp_path / 'analysis.json')['params']['sigma'] == 3.5


def test_unknown_config_key(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'m': 3.0, 'p': 0.5, 'sigma': 3.5, 'N': 4, 'colour': 'red'}))
    assert main(['analyze', '--config', str(path), '--output', str(tmp_path)]) == 2


def test_certify_command(tmp_path):
    code = main(['certify', *REFERENCE_ARGS, '--surface', 'Pi1', '--samples', '1000',
                 '--output', str(tmp_path)])
    assert code == 0
    report = _read(tmp_path / 'certificate_Pi1.json')
    assert report['samples'] == 1000
    assert report['verdict'] in ('pass', 'fail')
    assert report['surface']['coefficients']['B'] >= 1.0


def test_certify_wrong_regime_exit_code(tmp_path):
    code = main(['certify', *REFERENCE_ARGS, '--surface', 'PlaneCYZ', '--output', str(tmp_path)])
    assert code == 3


def test_profile_from_trajectory_csv(tmp_path):
    params = validate(3.0, 0.5, 3.5, 4)
    xi = np.geomspace(1e-2, 1.0, 200)
    gamma = 2.2
    states = np.array([shoot.state_from_profile(x, x ** gamma, 3.0 * gamma * x ** (3.0 * gamma - 1.0),
                                                params) for x in xi])
    trajectory = Trajectory(eta=np.arange(len(xi), dtype=float), states=states,
                            chart=Chart.FINITE, direction=1)
    ArtifactWriter(str(tmp_path)).write_csv('trajectory.csv', trajectory.to_frame())

    code = main(['profile', *REFERENCE_ARGS, '--trajectory', str(tmp_path / 'trajectory.csv'),
                 '--output', str(tmp_path)])
    assert code == 0
    report = _read(tmp_path / 'profile.json')
    assert report['interface'] is None
    assert report['diagnostics']['origin']['exponent'] == pytest.approx(gamma, rel=1e-6)
    assert (tmp_path / 'profile.csv').exists()


def test_repro_single_experiment(tmp_path):
    assert main(['repro', '--experiment', 'figure2', '--output', str(tmp_path)]) == 0
    report = _read(tmp_path / 'repro.json')
    assert set(report['experiments']) == {'figure2'}
    assert (tmp_path / 'figure2_regions.csv').exists()


def test_experiments_load():
    experiments = ExperimentManager().get_all_experiments()
    assert set(experiments) == {'figure1', 'figure2', 'figure3', 'figure4', 'lambda_trend'}
    assert experiments['figure3'].bracket == [3.5, 6.0]
    assert experiments['figure3'].sources == ['FromP2', 'FromQ1']
    assert ExperimentManager(data_file='missing.json').get_all_experiments() == {}


@pytest.mark.parametrize("command,key,value", [
    ('certify', 'surface', 'Pi9'),
    ('shoot', 'source', 'FromP7'),
])
def test_unknown_enum_in_config_file(tmp_path, capsys, command, key, value):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'m': 3.0, 'p': 0.5, 'sigma': 3.5, 'N': 4, key: value}))
    assert main([command, '--config', str(path), '--output', str(tmp_path)]) == 2
    error = json.loads(capsys.readouterr().out)
    assert error['error'] == 'ConfigError'
    assert error['details']['key'] == key


def test_repro_unknown_experiment(tmp_path, capsys):
    assert main(['repro', '--experiment', 'figure9', '--output', str(tmp_path)]) == 2
    error = json.loads(capsys.readouterr().out)
    assert error['error'] == 'ConfigError'
    assert not (tmp_path / 'repro.json').exists()


def test_repro_headers_carry_experiment_params(tmp_path):
    assert main(['repro', '--experiment', 'figure2', '--output', str(tmp_path)]) == 0
    with open(tmp_path / 'figure2_regions.csv', 'r', encoding='utf-8') as f:
        header = f.readline()
    assert header.startswith('# config: ')
    params = json.loads(header[len('# config: '):])
    assert params['experiment'] == 'figure2'
    assert (params['m'], params['p'], params['N'], params['sigma']) == (1.5, 0.5, 2, 2.05)
    report = _read(tmp_path / 'repro.json')
    assert report['provenance']['config']['figure2']['m'] == 1.5
