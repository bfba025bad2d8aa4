"""
Test Mismatch Experiment
Full-pipeline runs on the synthetic warped-speaker corpus (run with --run-slow)
"""

import json
import os

import numpy as np
import pytest

from adapt.adaptation import AdaptConfig, AdaptMode, utterance_sweep
from adapt.mismatch import REPORT_FILE, run_mismatch_experiment
from corpus.generator import default_mismatch_spec, gen_corpus
from run_config import RunConfig

MISMATCH_CONFIG = {
    "model": {"preset": "toy", "n_filters": 16, "filter_length": 65, "width": 16, "n_classes": 4},
    "init": {"scheme": "mel"},
    "seed": 7,
    "optimizer": {"learning_rate": 0.0015, "batch_size": 16},
    "epochs": 16,
    "adaptation": {"mode": "Sinc", "epochs": 6},
}


@pytest.fixture(scope="module")
def mismatch_report(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("mismatch"))
    report = run_mismatch_experiment(RunConfig.from_dict(MISMATCH_CONFIG), out_dir)
    report['out_dir'] = out_dir
    return report


@pytest.mark.slow
class TestMismatchRecovery:
    """Test sinc adaptation on warped target speakers"""

    def test_base_model_learns_the_task(self, mismatch_report):
        """Test at least 90% frame accuracy on held-out base speakers"""
        assert mismatch_report['base_accuracy'] >= 0.9

    def test_warp_opens_a_gap(self, mismatch_report):
        """Test target speakers lose at least 15 points"""
        assert mismatch_report['accuracy_gap'] >= 0.15

    def test_sinc_adaptation_recovers_half_the_gap(self, mismatch_report):
        """Test adapting 2N cut-offs recovers at least half the lost accuracy"""
        assert mismatch_report['trainable_parameters'] == 2 * MISMATCH_CONFIG["model"]["n_filters"]
        assert mismatch_report['recovered_fraction'] >= 0.5

    def test_fitted_warp_matches_applied(self, mismatch_report):
        """Test the scaling-function slope over the occupied band is within 0.1 of 1.25"""
        _, high = mismatch_report['fit_band_hz']
        assert high == max(max(p.frequencies) for p in default_mismatch_spec().prototypes)
        assert abs(mismatch_report['fitted_alpha'] - 1.25) <= 0.1

    def test_artifacts(self, mismatch_report):
        """Test checkpoints, exports and the JSON report are written"""
        out_dir = mismatch_report['out_dir']
        for name in ('base', 'adapted', 'filters_adapted.csv', 'scaling.csv', REPORT_FILE):
            assert os.path.exists(os.path.join(out_dir, name))
        with open(os.path.join(out_dir, REPORT_FILE)) as f:
            saved = json.load(f)
        assert saved['applied_alpha'] == 1.25
        assert saved['fitted_alpha'] == pytest.approx(mismatch_report['fitted_alpha'])


@pytest.mark.slow
class TestUtteranceSweep:
    """Test accuracy against the amount of adaptation data"""

    SWEEP_COUNTS = (1, 2, 3, 20)

    @pytest.fixture(scope="class")
    def sweep_rows(self, mismatch_report):
        splits = gen_corpus(default_mismatch_spec(MISMATCH_CONFIG["seed"]))
        cfg = AdaptConfig(mode=AdaptMode.ALL_MINUS_SINC, epochs=15, batch_size=16,
                          learning_rate=0.01, seed=MISMATCH_CONFIG["seed"])
        return utterance_sweep(mismatch_report['base_model'], splits, cfg, utt_counts=self.SWEEP_COUNTS)

    def test_every_count_is_available(self, sweep_rows):
        """Test the corpus holds 20 adaptation utterances per target speaker"""
        assert [r['utterances_used'] for r in sweep_rows] == list(self.SWEEP_COUNTS)

    def test_accuracy_never_drops_with_more_data(self, sweep_rows):
        """Test mean test accuracy is non-decreasing over 1, 2, 3 and 20 utterances"""
        accuracies = np.array([r['mean_accuracy'] for r in sweep_rows])
        assert np.all(np.isfinite(accuracies))
        assert np.all(np.diff(accuracies) >= 0), accuracies

