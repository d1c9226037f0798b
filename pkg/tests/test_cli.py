"""
End-to-end runs of the command-line tool through main(), with stdout parsed
back into frames.
"""

import io
import json

import numpy as np
import pandas as pd
import pytest

from harsanyi.cli import main
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.experiment_service import ExperimentService

N_FEATURES = 5


def run(capsys, *args):
    status = main(['--env', 'testing', *args])
    captured = capsys.readouterr()
    return status, captured.out, captured.err


def header_of(out):
    return dict(line[2:].split('=', 1) for line in out.splitlines() if line.startswith('# '))


def frame_of(out):
    return pd.read_csv(io.StringIO(out), comment='#')


@pytest.fixture(scope='module')
def trained(tmp_path_factory):
    """A synthetic dataset and a small model trained on it by the CLI."""
    root = tmp_path_factory.mktemp('cli')
    data_path, model_path = str(root / 'data.csv'), str(root / 'model.harsanyi')
    assert main(['--env', 'testing', 'synth', '--kind', 'and', '--features', str(N_FEATURES), '--rows', '40',
                 '--seed', '1', '--out', data_path]) == 0
    assert main(['--env', 'testing', 'train', '--data', data_path, '--out', model_path, '--blocks', '6,4',
                 '--fanin', '2', '--epochs', '2', '--gamma', '10', '--seed', '1']) == 0
    return {'root': root, 'data': data_path, 'model': model_path}


def test_synth_writes_a_dataset(tmp_path, capsys):
    path = str(tmp_path / 'sep.csv')
    status, out, _ = run(capsys, 'synth', '--kind', 'separable', '--features', '3', '--rows', '12', '--seed', '4',
                         '--out', path)
    assert status == 0
    header = header_of(out)
    assert header['command'] == 'synth'
    assert header['rows'] == '12'
    assert header['wrote'] == path
    frame = pd.read_csv(path)
    assert list(frame.columns) == ['x0', 'x1', 'x2', 'label']
    assert len(frame) == 12


def test_synth_is_reproducible(tmp_path, capsys):
    paths = [str(tmp_path / 'a.csv'), str(tmp_path / 'b.csv')]
    for path in paths:
        assert run(capsys, 'synth', '--features', '4', '--rows', '10', '--seed', '2', '--out', path)[0] == 0
    with open(paths[0], 'rb') as a, open(paths[1], 'rb') as b:
        assert a.read() == b.read()


def test_train_prints_metrics(trained, tmp_path, capsys):
    model_path = str(tmp_path / 'again.harsanyi')
    status, out, _ = run(capsys, 'train', '--data', trained['data'], '--out', model_path, '--blocks', '6,4',
                         '--fanin', '2', '--epochs', '3', '--gamma', '10', '--seed', '1')
    assert status == 0
    header = header_of(out)
    assert header['optimizer'] == 'adam'
    assert header['gamma'] == '10.0'
    assert header['n_players'] == str(N_FEATURES)
    metrics = frame_of(out)
    assert list(metrics.columns) == ['epoch', 'loss', 'train_acc', 'val_acc']
    assert metrics['epoch'].tolist() == [1, 2, 3]


def test_explain_agrees_with_the_oracle(trained, capsys):
    args = ['--model', trained['model'], '--data', trained['data'], '--samples', '0,1,2']
    status, exact_out, _ = run(capsys, 'explain', *args)
    assert status == 0
    status, oracle_out, _ = run(capsys, 'oracle', *args)
    assert status == 0
    exact, oracle = frame_of(exact_out), frame_of(oracle_out)
    assert list(exact.columns) == ['sample_index', 'player', 'phi']
    assert len(exact) == 3 * N_FEATURES
    assert exact['player'].tolist() == oracle['player'].tolist()
    np.testing.assert_allclose(exact['phi'], oracle['phi'], rtol=0, atol=1e-6)
    assert header_of(exact_out)['inferences'] == '3'
    assert header_of(oracle_out)['inferences'] == str(3 * (1 << N_FEATURES))


def test_attributions_sum_to_the_logit(trained, capsys):
    status, out, _ = run(capsys, 'explain', '--model', trained['model'], '--data', trained['data'],
                         '--samples', '4')
    assert status == 0
    saved, dataset = ExperimentService.load_inputs(trained['model'], trained['data'])
    model, sample = saved.model, dataset.sample(4)
    logit = model.model_output(sample, None, AttributionService.resolve_mode(model, None))[dataset.label(4)]
    assert frame_of(out)['phi'].sum() == pytest.approx(logit, abs=1e-9)


def test_restricted_explain(trained, capsys):
    status, out, _ = run(capsys, 'explain', '--model', trained['model'], '--data', trained['data'],
                         '--restrict', '1,3')
    assert status == 0
    assert header_of(out)['restrict'] == '{1,3}'
    assert frame_of(out)['player'].tolist() == [1, 3]


def test_estimate_respects_its_budget(trained, capsys):
    status, out, _ = run(capsys, 'estimate', '--model', trained['model'], '--data', trained['data'],
                         '--estimator', 'sampling', '--budget', '70', '--seed', '3')
    assert status == 0
    header = header_of(out)
    assert header['inferences'] == '66'
    assert header['estimator'] == 'sampling'
    assert len(frame_of(out)) == N_FEATURES


def test_estimate_is_reproducible(trained, capsys):
    args = ['estimate', '--model', trained['model'], '--data', trained['data'], '--estimator', 'antithetical',
            '--budget', '48', '--seed', '5', '--trial', '2']
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_evaluate_reports_tiny_errors(trained, capsys):
    status, out, _ = run(capsys, 'evaluate', '--model', trained['model'], '--data', trained['data'],
                         '--samples', '0,1,2,3')
    assert status == 0
    frame = frame_of(out)
    assert frame['sample_index'].tolist() == [0, 1, 2, 3]
    assert frame['rmse'].max() <= 1e-6
    assert header_of(out)['samples'] == '4'


def test_spectrum_of_an_additive_game(tmp_path, capsys):
    game_path = str(tmp_path / 'additive.game')
    status, _, _ = run(capsys, 'synth', '--kind', 'game', '--game-kind', 'additive', '--features', '5',
                       '--seed', '6', '--out', game_path)
    assert status == 0
    status, out, _ = run(capsys, 'spectrum', '--game', game_path, '--threshold', '1e-9')
    assert status == 0
    frame = frame_of(out)
    assert len(frame) == 5
    assert sorted(frame['players'].tolist()) == ['{0}', '{1}', '{2}', '{3}', '{4}']
    assert header_of(out)['salient'] == '5'
    status, out, _ = run(capsys, 'spectrum', '--game', game_path, '--all')
    assert len(frame_of(out)) == 32


def test_spectrum_of_a_model(trained, tmp_path, capsys):
    game_path = str(tmp_path / 'model.game')
    status, out, _ = run(capsys, 'spectrum', '--model', trained['model'], '--data', trained['data'],
                         '--sample', '2', '--save-game', game_path, '--all')
    assert status == 0
    assert header_of(out)['sample'] == '2'
    with open(game_path, encoding='utf-8') as f:
        assert f.readline() == f"game v1 n={N_FEATURES} kind=reward\n"


def test_fields(trained, capsys):
    status, out, _ = run(capsys, 'fields', '--model', trained['model'])
    assert status == 0
    frame = frame_of(out)
    assert list(frame.columns) == ['block', 'unit', 'size', 'players']
    assert len(frame) == 6 + 4
    assert frame[frame['block'] == 0]['size'].max() <= 2


def test_converge(trained, tmp_path, capsys):
    spec_path = str(tmp_path / 'experiment.json')
    output_path = str(tmp_path / 'convergence.csv')
    with open(spec_path, 'w', encoding='utf-8') as f:
        json.dump({'model_path': trained['model'], 'dataset_path': trained['data'], 'output_path': output_path,
                   'estimators': ['sampling'], 'budgets': [12], 'trials': 2, 'sample_count': 2}, f)
    status, out, _ = run(capsys, 'converge', '--spec', spec_path, '--seed', '7')
    assert status == 0
    header = header_of(out)
    assert header['seed'] == '7'
    assert header['rows'] == '3'
    rows = pd.read_csv(output_path)
    assert rows['estimator'].tolist() == ['sampling', 'sampling', 'harsanyinet']
    assert rows['rmse'].iloc[-1] <= 1e-6


def test_converge_rejects_a_bad_spec(tmp_path, capsys):
    spec_path = str(tmp_path / 'experiment.json')
    with open(spec_path, 'w', encoding='utf-8') as f:
        json.dump({'dataset_path': 'd.csv', 'output_path': 'o.csv', 'estimators': ['bootstrap']}, f)
    status, _, err = run(capsys, 'converge', '--spec', spec_path)
    assert status == 1
    assert 'error:' in err


def test_malformed_game_file_is_an_error(tmp_path, capsys):
    game_path = tmp_path / 'bad.game'
    game_path.write_text('game v1 n=1 kind=reward\n0 0\n1 abc\n', encoding='utf-8')
    status, out, err = run(capsys, 'spectrum', '--game', str(game_path))
    assert status == 1
    assert out == ''
    assert 'Malformed game file row 1' in err


def test_unknown_flag_is_a_usage_error(capsys):
    status, out, _ = run(capsys, 'synth', '--bogus')
    assert status == 2
    assert out == ''


def test_bad_class_is_a_usage_error(trained, capsys):
    status, _, _ = run(capsys, 'explain', '--model', trained['model'], '--data', trained['data'], '--class', 'x')
    assert status == 2


def test_sample_out_of_range_is_an_error(trained, capsys):
    status, out, err = run(capsys, 'explain', '--model', trained['model'], '--data', trained['data'],
                           '--samples', '99')
    assert status == 1
    assert out == ''
    assert 'error:' in err


def test_out_option_writes_the_table(trained, tmp_path, capsys):
    path = str(tmp_path / 'phi.csv')
    status, out, _ = run(capsys, 'explain', '--model', trained['model'], '--data', trained['data'], '--out', path)
    assert status == 0
    assert header_of(out)['wrote'] == path
    with open(path, encoding='utf-8') as f:
        assert len(frame_of(f.read())) == N_FEATURES
