import json
import os

import pandas as pd
import pytest
import yaml

from config.settings import Config
from conftest import SMALL_CORPUS
from main import main

FEATURES = ['route_direction', 'service_window', 'precipitation', 'temperature']


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setattr(Config, 'LOG_FILE', str(tmp_path / 'run.log'))


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    """A generated corpus and a model trained on it through the command line"""
    root = tmp_path_factory.mktemp('cli')
    config = root / 'gen.yaml'
    config.write_text(yaml.safe_dump(SMALL_CORPUS))
    data, model_dir = str(root / 'data'), str(root / 'model')
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(Config, 'LOG_FILE', str(root / 'run.log'))
        assert main(['gen', '--config', str(config), '--out', data]) == 0
        assert main(['forecast', 'train', '--data', data, '--out', model_dir, '--features', *FEATURES]) == 0
    return root, data, model_dir


def read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


class TestGenerateAndTrain:
    def test_corpus_written(self, workspace):
        _, data, _ = workspace
        for name in ('stops.csv', 'trips.csv', 'network.json', 'labeled_trips.csv', 'trip_context.csv',
                     'ridership.csv', 'ground_truth.json', 'manifest.json'):
            assert os.path.exists(os.path.join(data, name)), name
        manifest = read_json(os.path.join(data, 'manifest.json'))
        assert manifest['command'] == 'gen'
        assert manifest['seed'] == SMALL_CORPUS['seed']

    def test_model_and_metrics(self, workspace):
        _, _, model_dir = workspace
        metrics = read_json(os.path.join(model_dir, 'metrics.json'))
        assert metrics['features'] == 'route_direction+service_window+precipitation+temperature'
        assert metrics['n_train'] + metrics['n_calibration'] + metrics['n_test'] == 96
        assert metrics['n_calibration'] > 0
        assert os.path.exists(os.path.join(model_dir, 'calibration_split.csv'))
        assert read_json(os.path.join(model_dir, 'model.json'))['v'] == 1

    def test_eval_reproduces_training_loss(self, workspace, tmp_path):
        _, _, model_dir = workspace
        out = str(tmp_path / 'eval')
        assert main(['forecast', 'eval', '--model', os.path.join(model_dir, 'model.json'),
                     '--labeled', os.path.join(model_dir, 'train_split.csv'),
                     os.path.join(model_dir, 'calibration_split.csv'), os.path.join(model_dir, 'test_split.csv'),
                     '--out', out]) == 0
        metrics = read_json(os.path.join(model_dir, 'metrics.json'))
        results = read_json(os.path.join(out, 'eval.json'))['results']
        assert [r['data'] for r in results] == ['train_split.csv', 'calibration_split.csv', 'test_split.csv']
        assert results[0]['raw_ce'] == metrics['raw']['train_ce']
        assert results[0]['calibrated_ce'] == metrics['calibrated']['train_ce']
        assert results[1]['raw_ce'] == metrics['raw']['calibration_ce']
        assert results[1]['calibrated_ce'] == metrics['calibrated']['calibration_ce']
        assert results[2]['raw_ce'] == metrics['raw']['test_ce']

    def test_unknown_feature(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['forecast', 'train', '--data', data, '--out', str(tmp_path), '--features', 'colour']) == 1

    def test_calibration_fraction_out_of_range(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['forecast', 'train', '--data', data, '--out', str(tmp_path),
                     '--calibration-fraction', '1.5']) == 1

    def test_gen_accepts_threads(self, workspace, tmp_path):
        root, _, _ = workspace
        out = str(tmp_path / 'data')
        assert main(['gen', '--config', str(root / 'gen.yaml'), '--out', out, '--threads', '4']) == 0
        with open(os.path.join(out, 'labeled_trips.csv'), 'rb') as a, \
                open(os.path.join(workspace[1], 'labeled_trips.csv'), 'rb') as b:
            assert a.read() == b.read()

    def test_perm_test(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['forecast', 'perm-test', '--data', data, '--out', str(tmp_path), '--n-perm', '99']) == 0
        matrix = pd.read_csv(tmp_path / 'permutation_matrix.csv', index_col=0)
        assert list(matrix.index) == ['R0', 'R1']
        assert matrix.loc['R0', 'R0'] == 1.0

    def test_select_features(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['forecast', 'select-features', '--data', data, '--out', str(tmp_path),
                     '--candidates', 'route_direction', 'service_window']) == 0
        table = pd.read_csv(tmp_path / 'feature_selection.csv')
        assert len(table) == 4


class TestStationing:
    @pytest.fixture(scope='class')
    def optimized(self, workspace):
        root, data, model_dir = workspace
        out = str(root / 'optimize')
        with pytest.MonkeyPatch.context() as mp:
            mp.setattr(Config, 'LOG_FILE', str(root / 'run.log'))
            code = main(['optimize', '--data', data, '--model', os.path.join(model_dir, 'model.json'),
                         '--out', out, '--k', '2', '--chains', '2', '--iters', '3'])
        assert code == 0
        return out

    def test_optimize_outputs(self, optimized):
        for name in ('plan.json', 'report.json', 'history.csv', 'comparison.csv', 'report.md', 'manifest.json'):
            assert os.path.exists(os.path.join(optimized, name)), name
        report = read_json(os.path.join(optimized, 'report.json'))
        assert set(report['plans']) == {'Garage', 'Hub', 'Agency', 'Greedy', 'Search'}
        plan = read_json(os.path.join(optimized, 'plan.json'))
        assert plan['assignments'] == report['plans'][report['winner']]['plan']['assignments']

    def test_baselines_only(self, workspace, tmp_path):
        _, data, model_dir = workspace
        assert main(['optimize', '--data', data, '--model', os.path.join(model_dir, 'model.json'),
                     '--out', str(tmp_path), '--k', '2', '--chains', '1', '--baselines-only']) == 0
        report = read_json(str(tmp_path / 'report.json'))
        assert set(report['plans']) == {'Garage', 'Hub', 'Agency'}
        assert report['history'] is None

    def test_replay(self, workspace, optimized, tmp_path):
        _, data, _ = workspace
        assert main(['replay', '--data', data, '--plan', os.path.join(optimized, 'plan.json'),
                     '--out', str(tmp_path)]) == 0
        replay = read_json(str(tmp_path / 'replay.json'))
        assert replay['n_chains'] == SMALL_CORPUS['truth_chains']
        assert {'Garage', 'Hub', 'Agency'} <= set(replay['plans'])
        assert 'Fewest passengers left behind' in (tmp_path / 'report.md').read_text()

    def test_simulate_baseline(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['simulate', '--data', data, '--plan', 'Hub', '--k', '2', '--out', str(tmp_path)]) == 0
        costs = pd.read_csv(tmp_path / 'costs.csv')
        assert len(costs) == SMALL_CORPUS['truth_chains']
        summary = read_json(str(tmp_path / 'summary.json'))
        assert summary['plan']['assignments'] == ['HUB', 'HUB']
        with open(tmp_path / 'trace.jsonl', encoding='utf-8') as f:
            assert json.loads(f.readlines()[-1])['kind'] == 'DayEnd'


class TestExitCodes:
    def test_missing_plan_file(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['simulate', '--data', data, '--plan', str(tmp_path / 'absent.json'),
                     '--out', str(tmp_path)]) == 2

    def test_missing_generator_config(self, tmp_path):
        assert main(['gen', '--config', str(tmp_path / 'absent.yaml'), '--out', str(tmp_path)]) == 2

    def test_bad_day(self, workspace, tmp_path):
        _, data, _ = workspace
        assert main(['simulate', '--data', data, '--plan', 'Hub', '--day', '1999-01-01',
                     '--out', str(tmp_path)]) == 1

    def test_bad_arguments(self):
        assert main(['optimize', '--k']) == 1
