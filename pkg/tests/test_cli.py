"""
Test Command Line
Tests the experiment runner subcommands end to end on a tiny configuration
"""

import json
import os
import shutil
import tempfile

import numpy as np
import pandas as pd
import pytest

from experiment_runner import command_dispatch
from nnet.checkpoint import checkpoints_identical, load_checkpoint

TINY_MODEL = {"preset": "toy", "n_filters": 8, "filter_length": 33, "width": 6,
              "n_classes": 3, "input_samples": 400}


def write_run_config(directory, tiny_corpus_spec, out_dir, **overrides):
    tiny_corpus_spec.save(os.path.join(directory, 'corpus_spec.json'))
    config = {
        "model": TINY_MODEL,
        "init": {"scheme": "mel"},
        "seed": 4,
        "optimizer": {"learning_rate": 0.0015, "batch_size": 8},
        "epochs": 1,
        "deterministic": True,
        "adaptation": {"mode": "Sinc", "epochs": 1},
        "corpus": "corpus_spec.json",
        "paths": {"out_dir": out_dir},
    }
    config.update(overrides)
    path = os.path.join(directory, f'{out_dir}.json')
    with open(path, 'w') as f:
        json.dump(config, f)
    return path


@pytest.fixture(scope="module")
def trained_run(tiny_corpus_spec):
    """Config, output directory and written corpus of one trained tiny run"""
    work_dir = tempfile.mkdtemp(prefix="sincadapt_cli_")
    config_path = write_run_config(work_dir, tiny_corpus_spec, 'run')
    assert command_dispatch(['train', config_path]) == 0
    corpus_dir = os.path.join(work_dir, 'corpus')
    assert command_dispatch(['gen-data', os.path.join(work_dir, 'corpus_spec.json'), '--out', corpus_dir]) == 0
    yield {'config': config_path, 'out': os.path.join(work_dir, 'run'), 'corpus': corpus_dir, 'dir': work_dir}
    shutil.rmtree(work_dir, ignore_errors=True)


class TestUsage:
    """Test argument handling"""

    def test_usage_errors_exit_2(self):
        """Test unknown subcommands and missing arguments"""
        assert command_dispatch([]) == 2
        assert command_dispatch(['frobnicate']) == 2
        assert command_dispatch(['adapt', 'config.json']) == 2

    def test_speaker_and_all_speakers_are_exclusive(self):
        """Test --speaker and --all-speakers cannot be combined"""
        assert command_dispatch(['adapt', 'config.json', '--mode', 'Sinc', '--speaker', 'target0',
                                 '--all-speakers']) == 2

    def test_runtime_errors_exit_1(self, test_dir):
        """Test a missing or malformed config fails cleanly"""
        assert command_dispatch(['train', os.path.join(test_dir, 'missing.json')]) == 1
        bad = os.path.join(test_dir, 'bad.json')
        with open(bad, 'w') as f:
            f.write('{not json')
        assert command_dispatch(['param-count', bad]) == 1

    def test_param_count_of_bundled_config(self, configs_dir, capsys):
        """Test the full-scale config reports 9,029,656 parameters"""
        assert command_dispatch(['param-count', os.path.join(configs_dir, 'full_model.json')]) == 0
        assert capsys.readouterr().out.strip().splitlines()[-1] == '9029656'

    def test_param_count_per_layer(self, configs_dir, capsys):
        """Test per-row counts precede the total"""
        assert command_dispatch(['param-count', os.path.join(configs_dir, 'full_model.json'),
                                 '--per-layer']) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == 'sinc\t80'
        assert lines[-1] == '9029656'

    def test_bundled_configs_load(self, configs_dir):
        """Test every bundled config resolves"""
        from run_config import RunConfig
        for name in os.listdir(configs_dir):
            if name.endswith('.json') and name != 'toy_corpus.json':
                RunConfig.load(os.path.join(configs_dir, name))


class TestGenData:
    """Test corpus generation from the command line"""

    def test_twice_identical(self, tiny_corpus_spec, test_dir):
        """Test two gen-data runs write byte-identical corpora"""
        spec_path = os.path.join(test_dir, 'spec.json')
        tiny_corpus_spec.save(spec_path)
        for name in ('a', 'b'):
            assert command_dispatch(['gen-data', spec_path, '--out', os.path.join(test_dir, name)]) == 0
        for root, _, files in os.walk(os.path.join(test_dir, 'a')):
            for name in files:
                a = os.path.join(root, name)
                b = a.replace(os.path.join(test_dir, 'a'), os.path.join(test_dir, 'b'), 1)
                with open(a, 'rb') as fa, open(b, 'rb') as fb:
                    assert fa.read() == fb.read(), name

    def test_missing_spec(self, test_dir):
        """Test gen-data without a spec file"""
        assert command_dispatch(['gen-data', os.path.join(test_dir, 'none.json')]) == 1


class TestTrainAdapt:
    """Test training and adaptation runs"""

    def test_train_outputs(self, trained_run):
        """Test checkpoint, metrics and resolved config are written"""
        out = trained_run['out']
        for name in ('checkpoint', 'metrics.jsonl', 'resolved_config.json'):
            assert os.path.exists(os.path.join(out, name))
        with open(os.path.join(out, 'metrics.jsonl')) as f:
            records = [json.loads(line) for line in f]
        assert {(r['epoch'], r['split']) for r in records} == {(1, 'train'), (1, 'dev')}

    def test_train_is_deterministic(self, trained_run, tiny_corpus_spec):
        """Test a second training run writes a byte-identical checkpoint"""
        config_path = write_run_config(trained_run['dir'], tiny_corpus_spec, 'run_again')
        assert command_dispatch(['train', config_path]) == 0
        assert checkpoints_identical(os.path.join(trained_run['out'], 'checkpoint'),
                                     os.path.join(trained_run['dir'], 'run_again', 'checkpoint'))

    def test_zero_epoch_adaptation_is_identity(self, trained_run):
        """Test Sinc adaptation for zero epochs rewrites the input checkpoint byte for byte"""
        assert command_dispatch(['adapt', trained_run['config'], '--mode', 'Sinc', '--epochs', '0',
                                 '--speaker', 'target0']) == 0
        adapted = os.path.join(trained_run['out'], 'adapt_Sinc', 'target0', 'checkpoint')
        assert checkpoints_identical(os.path.join(trained_run['out'], 'checkpoint'), adapted)

    def test_all_speakers_adapts_every_target(self, trained_run):
        """Test --all-speakers writes one adapted checkpoint per target speaker"""
        assert command_dispatch(['adapt', trained_run['config'], '--mode', 'LHUC0', '--epochs', '0',
                                 '--all-speakers']) == 0
        for speaker in ('target0', 'target1'):
            assert os.path.isdir(os.path.join(trained_run['out'], 'adapt_LHUC0', speaker, 'checkpoint'))

    def test_adaptation_is_deterministic(self, trained_run):
        """Test two adaptation runs agree and only the cut-offs move"""
        paths = []
        for workers in ('1', '2'):
            assert command_dispatch(['adapt', trained_run['config'], '--mode', 'SincLHUC0',
                                     '--workers', workers]) == 0
            speaker_dir = os.path.join(trained_run['out'], 'adapt_SincLHUC0', 'target1')
            copy = os.path.join(trained_run['dir'], f'adapted_{workers}')
            shutil.copytree(os.path.join(speaker_dir, 'checkpoint'), copy)
            paths.append(copy)
        assert checkpoints_identical(*paths)

        base, _, _ = load_checkpoint(os.path.join(trained_run['out'], 'checkpoint'))
        adapted, _, _ = load_checkpoint(paths[0])
        np.testing.assert_array_equal(adapted.params['conv1.weight'], base.params['conv1.weight'])
        assert 'lhuc0.scale' in adapted.params
        with open(os.path.join(trained_run['out'], 'adapt_SincLHUC0', 'target1', 'report.json')) as f:
            report = json.load(f)
        assert report['trainable_parameters'] == 24

    def test_unknown_mode(self, trained_run):
        """Test an invalid mode label fails"""
        assert command_dispatch(['adapt', trained_run['config'], '--mode', 'Dense']) == 1


class TestEvalAndExports:
    """Test evaluation, inspection and CSV exports"""

    def test_eval(self, trained_run, capsys):
        """Test per-split accuracy JSON"""
        out_path = os.path.join(trained_run['dir'], 'eval.json')
        assert command_dispatch(['eval', os.path.join(trained_run['out'], 'checkpoint'),
                                 trained_run['corpus'], '--out', out_path]) == 0
        with open(out_path) as f:
            results = json.load(f)
        assert set(results) == {'train', 'dev', 'adapt', 'test'}
        assert results['test']['frames'] == 24
        assert 0.0 <= results['dev']['frame_accuracy'] <= 1.0

    def test_inspect(self, trained_run, capsys):
        """Test the manifest summary"""
        assert command_dispatch(['inspect', os.path.join(trained_run['out'], 'checkpoint')]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary['format_version'] == 1
        assert summary['n_classes'] == 3
        assert summary['metadata']['epochs'] == 1

    def test_export_filters_and_response(self, trained_run):
        """Test filter and response CSVs with sidecars"""
        checkpoint = os.path.join(trained_run['out'], 'checkpoint')
        filters = os.path.join(trained_run['dir'], 'filters.csv')
        response = os.path.join(trained_run['dir'], 'response.csv')
        assert command_dispatch(['export-filters', checkpoint, '--out', filters]) == 0
        assert command_dispatch(['export-response', checkpoint, '--n-fft', '256', '--out', response]) == 0
        assert len(pd.read_csv(filters)) == 8
        assert len(pd.read_csv(response)) == 8 * 129
        with open(response + '.json') as f:
            assert json.load(f)['n_fft'] == 256

    def test_export_scaling(self, trained_run):
        """Test adapted-vs-reference CSV after an adaptation run"""
        assert command_dispatch(['adapt', trained_run['config'], '--mode', 'Sinc', '--speaker', 'target1']) == 0
        out = os.path.join(trained_run['dir'], 'scaling.csv')
        assert command_dispatch(['export-scaling',
                                 os.path.join(trained_run['out'], 'adapt_Sinc', 'target1', 'checkpoint'),
                                 os.path.join(trained_run['out'], 'checkpoint'),
                                 '--speaker', 'target1', '--out', out]) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 8 and (frame['speaker'] == 'target1').all()

    def test_export_spectra(self, trained_run):
        """Test per-speaker average spectra"""
        out = os.path.join(trained_run['dir'], 'spectra.csv')
        assert command_dispatch(['export-spectra', trained_run['corpus'], '--split', 'test',
                                 '--speaker', 'target0', '--n-mels', '20', '--out', out]) == 0
        assert len(pd.read_csv(out)) == 20
