"""
Test Acoustic Model
Tests topology, parameter counts, forward pass and end-to-end gradients
"""

import numpy as np
import pytest

from adapt.lhuc import attach_lhuc
from filterbank.filterbank_init import InitScheme
from nnet.layers import softmax_xent
from nnet.model import (
    CONV,
    LayerSpec,
    MAX_POOL,
    ModelSpec,
    SINC_CONV,
    SOFTMAX,
    build_model,
    count_parameters,
    layer_param_counts,
    lhuc_site_positions,
    model_backward,
    model_forward,
    output_lengths,
    param_count,
    full_spec,
    toy_spec,
)


def loss_of(model, frames, labels, mode):
    logits, _ = model_forward(model, frames, mode=mode)
    return softmax_xent(logits, labels)[0]


def assert_gradients_match(model, frames, labels, mode):
    """Sampled central differences (6 entries per parameter) against model_backward"""
    logits, cache = model_forward(model, frames, mode=mode)
    _, grad_logits = softmax_xent(logits, labels)
    grads = model_backward(model, cache, grad_logits)
    assert set(grads) == set(model.params)

    pick = np.random.default_rng(77)
    for name, value in model.params.items():
        step = 1e-3 if name.startswith('sinc.') else 1e-6
        flat = value.reshape(-1)
        indices = pick.choice(flat.size, size=min(6, flat.size), replace=False)
        fd = np.zeros(len(indices))
        for j, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + step
            plus = loss_of(model, frames, labels, mode)
            flat[idx] = original - step
            minus = loss_of(model, frames, labels, mode)
            flat[idx] = original
            fd[j] = (plus - minus) / (2 * step)
        analytic = grads[name].reshape(-1)[indices]
        scale = max(np.max(np.abs(analytic)), 1e-10)
        assert np.max(np.abs(fd - analytic)) / scale < 1e-4, name


class TestTopology:
    """Test topology presets and their parameter counts"""

    def test_full_model_parameter_count(self):
        """Test the full-scale model totals 9,029,656 parameters"""
        assert count_parameters(full_spec()) == 9029656

    def test_full_model_rows(self):
        """Test per-row parameter counts of the full-scale model"""
        rows = layer_param_counts(full_spec())
        assert [count for _, count in rows] == [80, 68000, 1284000, 1284000, 1284000, 1284000,
                                                640800, 3184776]
        assert rows[0] == ('sinc', 80)
        assert [name for name, _ in rows[1:]] == [f'conv{k}' for k in range(1, 8)]

    def test_full_model_built_model_matches_count(self):
        """Test the allocated model holds exactly the counted parameters"""
        model = build_model(full_spec(), InitScheme.mel(), seed=0)
        assert param_count(model) == 9029656

    def test_full_model_output_lengths(self):
        """Test time lengths after the sinc, pooling and conv layers"""
        spec = full_spec()
        lengths = output_lengths(spec)
        shaping = [n for layer, n in zip(spec.layers, lengths)
                   if layer.kind in (SINC_CONV, CONV, MAX_POOL)]
        assert shaping == [3072, 1024, 1023, 341, 338, 112, 106, 35, 26, 13, 7, 7, 7]
        assert lengths[-1] == 1

    def test_toy_closed_form(self):
        """Test the toy count against 2N + sum(conv weights+biases) + 4*BN channels"""
        n, width, classes = 8, 16, 4
        expected = (2 * n
                    + (width * n * 2 + width) + 4 * width
                    + (width * width * 2 + width) + 4 * width
                    + (classes * width + classes))
        assert count_parameters(toy_spec()) == expected == 1012

    def test_collapsing_time_axis_rejected(self):
        """Test inputs too short for the stack are refused"""
        with pytest.raises(ValueError):
            output_lengths(toy_spec(input_samples=100))
        with pytest.raises(ValueError):
            build_model(toy_spec(input_samples=100), InitScheme.mel(), seed=0)

    def test_invalid_specs(self):
        """Test structural validation of layer lists"""
        conv = LayerSpec(CONV, channels=3, kernel_size=1)
        with pytest.raises(ValueError):
            ModelSpec((conv, LayerSpec(SOFTMAX)), 400, 3)
        with pytest.raises(ValueError):
            ModelSpec((LayerSpec(SINC_CONV, channels=4, kernel_size=33), conv), 400, 3)
        with pytest.raises(ValueError):
            ModelSpec((LayerSpec(SINC_CONV, channels=4, kernel_size=33), conv, LayerSpec(SOFTMAX)), 400, 5)
        with pytest.raises(ValueError):
            LayerSpec(SINC_CONV, channels=4, kernel_size=32)
        with pytest.raises(ValueError):
            LayerSpec('Dense', channels=4)

    def test_spec_dict_round_trip(self, small_spec):
        """Test ModelSpec survives to_dict/from_dict"""
        assert ModelSpec.from_dict(small_spec.to_dict()) == small_spec

    def test_lhuc_positions(self):
        """Test LHUC sites follow the sinc layer and the first conv block"""
        spec = toy_spec()
        positions = lhuc_site_positions(spec)
        assert positions['sinc_output'] == 0
        assert [layer.kind for layer in spec.layers[2:5]] == [CONV, 'ReLU', 'BatchNorm']
        assert positions['conv1_output'] == 4


class TestForward:
    """Test the forward pass"""

    def test_output_shapes(self, small_model, rng):
        """Test single frames and batches"""
        frame = rng.normal(size=400)
        logits, _ = model_forward(small_model, frame)
        assert logits.shape == (3,)
        batch_logits, _ = model_forward(small_model, np.stack([frame, frame]))
        assert batch_logits.shape == (2, 3)
        np.testing.assert_allclose(batch_logits[0], logits, rtol=1e-12)

    def test_zero_frame_gives_equal_logits(self, small_model):
        """Test an all-zero frame through zero biases yields identical logits"""
        logits, _ = model_forward(small_model, np.zeros(400))
        assert np.all(logits == logits[0])

    def test_zero_gains_give_bias_only_logits(self, small_model, rng):
        """Test zero gains make the output independent of the frame"""
        small_model.gains = np.zeros(8)
        a, _ = model_forward(small_model, rng.normal(size=400))
        b, _ = model_forward(small_model, rng.normal(size=400))
        np.testing.assert_array_equal(a, b)

    def test_wrong_frame_length(self, small_model):
        """Test frames of the wrong length are rejected"""
        with pytest.raises(ValueError):
            model_forward(small_model, np.zeros(399))
        with pytest.raises(ValueError):
            model_forward(small_model, np.zeros(400), mode='bogus')

    def test_eval_mode_is_pure(self, small_model, rng):
        """Test eval leaves running statistics untouched while train updates them"""
        frames = rng.normal(size=(4, 400))
        before = {k: v.copy() for k, v in small_model.stats.items()}
        model_forward(small_model, frames, mode='eval')
        for key in before:
            np.testing.assert_array_equal(small_model.stats[key], before[key])
        model_forward(small_model, frames, mode='train')
        assert any(not np.array_equal(small_model.stats[k], before[k]) for k in before)

    def test_build_is_deterministic(self, small_spec):
        """Test equal seeds give equal parameters and different seeds differ"""
        a = build_model(small_spec, InitScheme.mel(), seed=9)
        b = build_model(small_spec, InitScheme.mel(), seed=9)
        c = build_model(small_spec, InitScheme.mel(), seed=10)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])
        assert not np.array_equal(a.params['conv1.weight'], c.params['conv1.weight'])

    def test_clone_is_independent(self, small_model):
        """Test mutating a clone leaves the original intact"""
        clone = small_model.clone()
        clone.params['conv1.weight'][...] = 0.0
        assert np.any(small_model.params['conv1.weight'] != 0.0)


class TestBackward:
    """Test gradients through the full model"""

    @pytest.mark.parametrize("mode", ["eval", "train"])
    def test_gradients_match_finite_differences(self, small_model, rng, mode):
        """Test every parameter group, including LHUC scalers, against central differences"""
        model = attach_lhuc(attach_lhuc(small_model, 'sinc_output'), 'conv1_output')
        model.params['lhuc0.scale'] = rng.uniform(0.5, 1.5, 8)
        model.params['lhuc1.scale'] = rng.uniform(0.5, 1.5, 6)
        assert_gradients_match(model, rng.normal(size=(3, 400)), np.array([0, 2, 1]), mode)

    @pytest.mark.parametrize("mode", ["eval", "train"])
    def test_toy_model_gradients_match_finite_differences(self, rng, mode):
        """Test the default toy model (8 filters, L=65, 16-wide convs, 4 classes, 3200 samples)"""
        spec = toy_spec()
        assert (spec.input_samples, spec.n_classes, spec.layers[0].channels,
                spec.layers[0].kernel_size) == (3200, 4, 8, 65)
        model = attach_lhuc(attach_lhuc(build_model(spec, InitScheme.mel(), seed=9), 'sinc_output'),
                            'conv1_output')
        model.params['lhuc0.scale'] = rng.uniform(0.5, 1.5, 8)
        model.params['lhuc1.scale'] = rng.uniform(0.5, 1.5, 16)
        assert_gradients_match(model, rng.normal(size=(2, 3200)), np.array([3, 1]), mode)

    def test_subset_gradients_match_full_backward(self, small_model, rng):
        """Test restricting trainable names returns the same gradients for those names"""
        model = attach_lhuc(attach_lhuc(small_model, 'sinc_output'), 'conv1_output')
        frames = rng.normal(size=(2, 400))
        logits, cache = model_forward(model, frames)
        _, grad_logits = softmax_xent(logits, np.array([1, 0]))
        full = model_backward(model, cache, grad_logits)
        for subset in (['lhuc0.scale'], ['lhuc1.scale'], ['sinc.f_low', 'sinc.f_high'],
                       ['conv3.weight'], ['bn2.scale', 'lhuc1.scale']):
            partial = model_backward(model, cache, grad_logits, subset)
            assert set(partial) == set(subset)
            for name in subset:
                np.testing.assert_array_equal(partial[name], full[name])

    def test_zero_upstream_gradient(self, small_model, rng):
        """Test a zero logits gradient yields all-zero parameter gradients"""
        logits, cache = model_forward(small_model, rng.normal(size=(2, 400)))
        grads = model_backward(small_model, cache, np.zeros_like(logits))
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_frozen_sinc_gets_no_gradient(self, small_model, rng):
        """Test parameters outside the trainable set receive no gradient"""
        logits, cache = model_forward(small_model, rng.normal(size=(2, 400)))
        trainable = [n for n in small_model.params if not n.startswith('sinc.')]
        grads = model_backward(small_model, cache, np.ones_like(logits), trainable)
        assert 'sinc.f_low' not in grads and 'sinc.f_high' not in grads
        assert set(grads) == set(trainable)

    def test_backward_needs_cache(self, small_model):
        """Test missing cache and unknown names are rejected"""
        with pytest.raises(ValueError):
            model_backward(small_model, None, np.zeros(3))
        _, cache = model_forward(small_model, np.zeros(400))
        with pytest.raises(KeyError):
            model_backward(small_model, cache, np.zeros(3), ['nope.weight'])
