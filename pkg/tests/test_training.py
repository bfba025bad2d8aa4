"""
Test Training and Checkpoints
Tests the mini-batch trainer and directory checkpoint format
"""

import json
import os

import numpy as np
import pytest

from corpus.generator import gen_corpus
from nnet import config
from nnet.checkpoint import (
    checkpoints_identical,
    inspect_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from nnet.model import model_forward
from nnet.trainer import Trainer, batch_indices, evaluate_model
from optim.adam import AdamState


@pytest.fixture(scope="module")
def tiny_splits(tiny_corpus_spec):
    return gen_corpus(tiny_corpus_spec)


class TestBatching:
    """Test mini-batch ordering"""

    def test_batches_cover_every_example(self):
        """Test shuffled batches partition the index range"""
        batches = batch_indices(10, 4, seed=3, epoch=1)
        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    def test_order_depends_on_seed_and_epoch(self):
        """Test the permutation is a function of (seed, epoch)"""
        a = np.concatenate(batch_indices(50, 8, 3, 1))
        np.testing.assert_array_equal(a, np.concatenate(batch_indices(50, 8, 3, 1)))
        assert not np.array_equal(a, np.concatenate(batch_indices(50, 8, 3, 2)))
        assert not np.array_equal(a, np.concatenate(batch_indices(50, 8, 4, 1)))

    def test_unshuffled_without_seed(self):
        """Test seed None keeps natural order"""
        np.testing.assert_array_equal(np.concatenate(batch_indices(5, 2, None, 0)), np.arange(5))


class TestTrainer:
    """Test training loops"""

    def test_fit_records_metrics(self, small_model, tiny_splits):
        """Test one record per epoch and split"""
        trainer = Trainer(small_model, batch_size=8, seed=1)
        train = (tiny_splits.train.frames, tiny_splits.train.labels)
        dev = (tiny_splits.dev.frames, tiny_splits.dev.labels)
        records = trainer.fit(train, dev, epochs=2)
        assert [(r['epoch'], r['split']) for r in records] == [(1, 'train'), (1, 'dev'), (2, 'train'), (2, 'dev')]
        for record in records:
            assert np.isfinite(record['loss'])
            assert 0.0 <= record['frame_accuracy'] <= 1.0

    def test_training_is_deterministic(self, small_spec, tiny_splits):
        """Test identical seeds give bit-identical parameters"""
        from filterbank.filterbank_init import InitScheme
        from nnet.model import build_model

        results = []
        for _ in range(2):
            model = build_model(small_spec, InitScheme.mel(), seed=5)
            Trainer(model, batch_size=8, seed=2).fit((tiny_splits.train.frames, tiny_splits.train.labels), epochs=1)
            results.append(model)
        for name in results[0].params:
            np.testing.assert_array_equal(results[0].params[name], results[1].params[name])
        for name in results[0].stats:
            np.testing.assert_array_equal(results[0].stats[name], results[1].stats[name])

    def test_sinc_edges_stay_feasible(self, small_model, tiny_splits):
        """Test cut-offs satisfy the constraints after a high-rate epoch"""
        trainer = Trainer(small_model, learning_rate=0.5, batch_size=8, seed=0)
        trainer.train_epoch(tiny_splits.train.frames, tiny_splits.train.labels, 1)
        assert small_model.filterbank.satisfies_constraints()

    def test_non_finite_loss_raises(self, small_model, tiny_splits):
        """Test NaN frames abort the epoch with FloatingPointError"""
        frames = tiny_splits.train.frames.copy()
        frames[0, 0] = np.nan
        trainer = Trainer(small_model, batch_size=len(frames), seed=0)
        with np.errstate(invalid='ignore'):
            with pytest.raises(FloatingPointError):
                trainer.train_epoch(frames, tiny_splits.train.labels, 1)

    def test_empty_sets_rejected(self, small_model):
        """Test training and evaluation need frames"""
        trainer = Trainer(small_model)
        with pytest.raises(ValueError):
            trainer.train_epoch(np.zeros((0, 400)), np.zeros(0, dtype=int), 1)
        with pytest.raises(ValueError):
            evaluate_model(small_model, np.zeros((0, 400)), np.zeros(0, dtype=int))

    def test_evaluate_matches_forward(self, small_model, tiny_splits):
        """Test batched evaluation equals a single eval-mode forward pass"""
        frames, labels = tiny_splits.dev.frames, tiny_splits.dev.labels
        _, accuracy = evaluate_model(small_model, frames, labels, batch_size=5)
        logits, _ = model_forward(small_model, frames)
        assert accuracy == pytest.approx(np.mean(logits.argmax(axis=1) == labels))


class TestCheckpoint:
    """Test checkpoint save/load"""

    def test_round_trip(self, small_model, test_dir, rng):
        """Test parameters, statistics, gains and spec survive a round trip"""
        small_model.stats['bn1.running_mean'] = rng.normal(size=6)
        path = save_checkpoint(small_model, os.path.join(test_dir, 'ckpt'), metadata={'epochs': 2})
        model, manifest, state = load_checkpoint(path)
        assert state is None
        assert model.spec == small_model.spec
        assert manifest['metadata'] == {'epochs': 2}
        assert list(model.params) == list(small_model.params)
        for name in small_model.params:
            np.testing.assert_array_equal(model.params[name], small_model.params[name])
        for name in small_model.stats:
            np.testing.assert_array_equal(model.stats[name], small_model.stats[name])
        np.testing.assert_array_equal(model.gains, small_model.gains)
        assert model.init == small_model.init and model.seed == small_model.seed

    def test_blob_is_little_endian_float64(self, small_model, test_dir):
        """Test blob length equals 8 bytes per stored value"""
        path = save_checkpoint(small_model, os.path.join(test_dir, 'ckpt'))
        size = os.path.getsize(os.path.join(path, config.CHECKPOINT_BLOB))
        values = sum(p.size for p in small_model.params.values()) + \
            sum(s.size for s in small_model.stats.values()) + small_model.gains.size
        assert size == 8 * values
        blob = np.fromfile(os.path.join(path, config.CHECKPOINT_BLOB), dtype='<f8')
        np.testing.assert_array_equal(blob[:8], small_model.params['sinc.f_low'])

    def test_optimizer_state_round_trip(self, small_model, test_dir):
        """Test Adam moments are restored when saved"""
        state = AdamState({'conv1.bias': np.arange(6.0)}, {'conv1.bias': np.ones(6)}, step=7)
        path = save_checkpoint(small_model, os.path.join(test_dir, 'ckpt'), optimizer_state=state)
        _, manifest, loaded = load_checkpoint(path)
        assert manifest['has_optimizer_state'] is True
        assert loaded.step == 7
        np.testing.assert_array_equal(loaded.m['conv1.bias'], np.arange(6.0))
        np.testing.assert_array_equal(loaded.v['conv1.bias'], np.ones(6))

    def test_saving_twice_is_byte_identical(self, small_model, test_dir):
        """Test checkpoints carry no timestamps or paths"""
        a = save_checkpoint(small_model, os.path.join(test_dir, 'a'))
        b = save_checkpoint(small_model, os.path.join(test_dir, 'b'))
        assert checkpoints_identical(a, b)
        small_model.params['conv1.bias'][0] += 1.0
        c = save_checkpoint(small_model, os.path.join(test_dir, 'c'))
        assert not checkpoints_identical(a, c)

    def test_missing_checkpoint(self, test_dir):
        """Test a missing directory raises FileNotFoundError"""
        with pytest.raises(FileNotFoundError):
            load_checkpoint(os.path.join(test_dir, 'nope'))

    def test_version_mismatch(self, small_model, test_dir):
        """Test an unknown format version is refused"""
        path = save_checkpoint(small_model, os.path.join(test_dir, 'ckpt'))
        manifest_path = os.path.join(path, config.CHECKPOINT_MANIFEST)
        with open(manifest_path) as f:
            manifest = json.load(f)
        manifest['format_version'] = 99
        with open(manifest_path, 'w') as f:
            json.dump(manifest, f)
        with pytest.raises(ValueError):
            inspect_checkpoint(path)

    def test_truncated_blob(self, small_model, test_dir):
        """Test a blob shorter than the manifest is refused"""
        path = save_checkpoint(small_model, os.path.join(test_dir, 'ckpt'))
        blob_path = os.path.join(path, config.CHECKPOINT_BLOB)
        with open(blob_path, 'rb') as f:
            data = f.read()
        with open(blob_path, 'wb') as f:
            f.write(data[:-8])
        with pytest.raises(ValueError):
            load_checkpoint(path)
