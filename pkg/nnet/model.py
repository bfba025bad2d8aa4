"""
Acoustic Model Module
Layer topology, parameter store and forward/backward passes of the SincNet model
"""

import copy
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from filterbank.filterbank_init import (
    InitScheme,
    SincFilterbank,
    constrain_edges,
    init_filterbank,
)
from . import config
from .layers import (
    batchnorm_backward,
    batchnorm_forward,
    conv1d_backward,
    conv1d_forward,
    maxpool1d_backward,
    maxpool1d_forward,
    normalize_frames,
    relu_backward,
    relu_forward,
    scale_channels_backward,
    scale_channels_forward,
    sinc_conv_backward,
    sinc_conv_forward,
    time_average_backward,
    time_average_forward,
)

logger = logging.getLogger(__name__)

SINC_CONV = 'SincConv'
CONV = 'Conv'
MAX_POOL = 'MaxPool'
BATCH_NORM = 'BatchNorm'
RELU = 'ReLU'
SOFTMAX = 'Softmax'
LAYER_KINDS = (SINC_CONV, CONV, MAX_POOL, BATCH_NORM, RELU, SOFTMAX)

FORWARD_MODES = ('train', 'eval', 'frozen')

# LHUC attachment points and their parameter names
LHUC_SITES = {'sinc_output': 'lhuc0.scale', 'conv1_output': 'lhuc1.scale'}


@dataclass(frozen=True)
class LayerSpec:
    """One row of the layer topology"""
    kind: str
    channels: Optional[int] = None
    kernel_size: Optional[int] = None
    dilation: int = 1
    pool_size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"Unknown layer kind '{self.kind}' (expected one of {LAYER_KINDS})")
        if self.kind in (SINC_CONV, CONV):
            if not self.channels or self.channels < 1:
                raise ValueError(f"{self.kind} layer needs channels >= 1")
            if not self.kernel_size or self.kernel_size < 1:
                raise ValueError(f"{self.kind} layer needs kernel_size >= 1")
            if self.dilation < 1:
                raise ValueError(f"Dilation must be >= 1, got {self.dilation}")
        if self.kind == SINC_CONV and self.kernel_size % 2 == 0:
            raise ValueError(f"SincConv kernel_size must be odd, got {self.kernel_size}")
        if self.kind == MAX_POOL and (not self.pool_size or self.pool_size < 1):
            raise ValueError("MaxPool layer needs pool_size >= 1")

    def to_dict(self) -> Dict:
        data = {'kind': self.kind}
        if self.kind in (SINC_CONV, CONV):
            data.update(channels=self.channels, kernel_size=self.kernel_size)
        if self.kind == CONV:
            data['dilation'] = self.dilation
        if self.kind == MAX_POOL:
            data['pool_size'] = self.pool_size
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'LayerSpec':
        return cls(kind=data['kind'], channels=data.get('channels'),
                   kernel_size=data.get('kernel_size'), dilation=data.get('dilation', 1),
                   pool_size=data.get('pool_size'))


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layer list plus input/output sizes"""
    layers: Tuple[LayerSpec, ...]
    input_samples: int
    n_classes: int
    sample_rate: int = 16000

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        if not self.layers or self.layers[0].kind != SINC_CONV:
            raise ValueError("First layer must be SincConv")
        if self.layers[-1].kind != SOFTMAX:
            raise ValueError("Last layer must be Softmax")
        if any(layer.kind == SINC_CONV for layer in self.layers[1:]):
            raise ValueError("Only the first layer may be SincConv")
        if sum(layer.kind == SOFTMAX for layer in self.layers) != 1:
            raise ValueError("Exactly one Softmax layer is allowed")
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.input_channels()[-1] != self.n_classes:
            raise ValueError(f"Layer before Softmax has {self.input_channels()[-1]} channels, "
                             f"expected n_classes={self.n_classes}")

    @property
    def sinc(self) -> LayerSpec:
        return self.layers[0]

    def input_channels(self) -> List[int]:
        """Channel count entering each layer"""
        channels, current = [], 1
        for layer in self.layers:
            channels.append(current)
            if layer.kind in (SINC_CONV, CONV):
                current = layer.channels
        return channels

    def to_dict(self) -> Dict:
        return {
            'layers': [layer.to_dict() for layer in self.layers],
            'input_samples': self.input_samples,
            'n_classes': self.n_classes,
            'sample_rate': self.sample_rate,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelSpec':
        try:
            return cls(layers=tuple(LayerSpec.from_dict(l) for l in data['layers']),
                       input_samples=int(data['input_samples']),
                       n_classes=int(data['n_classes']),
                       sample_rate=int(data.get('sample_rate', 16000)))
        except KeyError as e:
            raise ValueError(f"Model spec missing field: {e}")


def _conv_block(channels: int, kernel_size: int, dilation: int, batchnorm: bool = True) -> List[LayerSpec]:
    block = [LayerSpec(CONV, channels=channels, kernel_size=kernel_size, dilation=dilation),
             LayerSpec(RELU)]
    if batchnorm:
        block.append(LayerSpec(BATCH_NORM))
    return block


def full_spec(n_filters: int = 40, filter_length: int = 129, n_classes: int = 3976,
              width: int = 800, input_samples: int = 3200, sample_rate: int = 16000) -> ModelSpec:
    """Full-scale topology: sinc layer, five BN(ReLU(Conv)) blocks, ReLU(Conv), Softmax(Conv)"""
    layers = [LayerSpec(SINC_CONV, channels=n_filters, kernel_size=filter_length),
              LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 1) + [LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 3) + [LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 6) + [LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 9) + [LayerSpec(MAX_POOL, pool_size=2)]
    layers += _conv_block(width, 2, 6)
    layers += _conv_block(width, 1, 1, batchnorm=False)
    layers += [LayerSpec(CONV, channels=n_classes, kernel_size=1, dilation=1), LayerSpec(SOFTMAX)]
    return ModelSpec(tuple(layers), input_samples, n_classes, sample_rate)


def toy_spec(n_filters: int = 8, filter_length: int = 65, width: int = 16, n_classes: int = 4,
             input_samples: int = 3200, sample_rate: int = 16000) -> ModelSpec:
    """Desk-scale topology: sinc layer, two BN(ReLU(Conv)) blocks, Softmax(Conv)"""
    layers = [LayerSpec(SINC_CONV, channels=n_filters, kernel_size=filter_length),
              LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 1) + [LayerSpec(MAX_POOL, pool_size=3)]
    layers += _conv_block(width, 2, 3)
    layers += [LayerSpec(CONV, channels=n_classes, kernel_size=1, dilation=1), LayerSpec(SOFTMAX)]
    return ModelSpec(tuple(layers), input_samples, n_classes, sample_rate)


def output_lengths(spec: ModelSpec) -> List[int]:
    """Time length after each layer; raises if the time axis collapses"""
    lengths, current = [], spec.input_samples
    for i, layer in enumerate(spec.layers):
        if layer.kind in (SINC_CONV, CONV):
            current -= (layer.kernel_size - 1) * layer.dilation
        elif layer.kind == MAX_POOL:
            current //= layer.pool_size
        elif layer.kind == SOFTMAX:
            current = 1
        if current < 1:
            raise ValueError(f"Time axis collapses at layer {i} ({layer.kind}) "
                             f"for input_samples={spec.input_samples}")
        lengths.append(current)
    return lengths


def _layer_names(spec: ModelSpec) -> List[Optional[str]]:
    """Parameter prefix per layer: 'sinc', 'conv<k>', 'bn<k>' (k = index of the preceding conv)"""
    names, conv_index = [], 0
    for layer in spec.layers:
        if layer.kind == SINC_CONV:
            names.append('sinc')
        elif layer.kind == CONV:
            conv_index += 1
            names.append(f'conv{conv_index}')
        elif layer.kind == BATCH_NORM:
            if conv_index == 0:
                raise ValueError("BatchNorm must follow a Conv layer")
            names.append(f'bn{conv_index}')
        else:
            names.append(None)
    bn_names = [n for n in names if n and n.startswith('bn')]
    if len(bn_names) != len(set(bn_names)):
        raise ValueError("At most one BatchNorm per Conv layer")
    return names


def lhuc_site_positions(spec: ModelSpec) -> Dict[str, int]:
    """
    Layer index after which each LHUC site scales the activations

    sinc_output follows the sinc layer; conv1_output follows the first Conv and
    the ReLU/BatchNorm layers directly after it.
    """
    positions = {'sinc_output': 0}
    for i, layer in enumerate(spec.layers):
        if layer.kind == CONV:
            j = i
            while j + 1 < len(spec.layers) and spec.layers[j + 1].kind in (RELU, BATCH_NORM):
                j += 1
            positions['conv1_output'] = j
            break
    return positions


def lhuc_site_channels(spec: ModelSpec) -> Dict[str, int]:
    channels = {'sinc_output': spec.sinc.channels}
    convs = [layer for layer in spec.layers if layer.kind == CONV]
    if convs:
        channels['conv1_output'] = convs[0].channels
    return channels


def layer_param_counts(spec: ModelSpec) -> List[Tuple[str, int]]:
    """
    Parameter count per topology row: the sinc layer, then each Conv together
    with the BatchNorm that follows it (4 values per batchnorm channel)
    """
    rows: List[Tuple[str, int]] = []
    names = _layer_names(spec)
    in_channels = spec.input_channels()
    for layer, name, c_in in zip(spec.layers, names, in_channels):
        if layer.kind == SINC_CONV:
            rows.append((name, 2 * layer.channels))
        elif layer.kind == CONV:
            rows.append((name, layer.channels * c_in * layer.kernel_size + layer.channels))
        elif layer.kind == BATCH_NORM:
            label, count = rows[-1]
            rows[-1] = (label, count + 4 * c_in)
    return rows


def count_parameters(spec: ModelSpec) -> int:
    """Parameter count of a spec without allocating it"""
    return int(sum(count for _, count in layer_param_counts(spec)))


class Model:
    """
    Parameter store for a ModelSpec

    params: trainable-capable arrays by name ('sinc.f_low', 'sinc.f_high',
            'conv<k>.weight', 'conv<k>.bias', 'bn<k>.scale', 'bn<k>.shift',
            'lhuc0.scale', 'lhuc1.scale')
    stats:  batchnorm running statistics ('bn<k>.running_mean', 'bn<k>.running_var')
    gains:  fixed per-filter gains of the sinc layer
    """

    def __init__(self, spec: ModelSpec, params: Dict[str, np.ndarray], stats: Dict[str, np.ndarray],
                 gains: np.ndarray, seed: Optional[int] = None, init: Optional[InitScheme] = None,
                 normalize_input: bool = True):
        self.spec = spec
        self.params = OrderedDict(params)
        self.stats = OrderedDict(stats)
        self.gains = np.array(gains, dtype=np.float64)
        self.seed = seed
        self.init = init
        self.normalize_input = normalize_input
        self._names = _layer_names(spec)
        self._check_shapes()

    def _check_shapes(self):
        expected = self.expected_shapes()
        for name, shape in expected.items():
            store = self.stats if '.running_' in name else self.params
            if name not in store:
                raise ValueError(f"Missing parameter '{name}'")
            if store[name].shape != shape:
                raise ValueError(f"Parameter '{name}' has shape {store[name].shape}, expected {shape}")
        site_channels = lhuc_site_channels(self.spec)
        for site, name in LHUC_SITES.items():
            if name in self.params:
                if site not in site_channels:
                    raise ValueError(f"Model has no {site} for '{name}'")
                if self.params[name].shape != (site_channels[site],):
                    raise ValueError(f"LHUC '{name}' has shape {self.params[name].shape}")
        if self.gains.shape != (self.spec.sinc.channels,):
            raise ValueError(f"Expected {self.spec.sinc.channels} gains, got {self.gains.shape}")

    def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = OrderedDict()
        for layer, name, c_in in zip(self.spec.layers, self._names, self.spec.input_channels()):
            if layer.kind == SINC_CONV:
                shapes['sinc.f_low'] = (layer.channels,)
                shapes['sinc.f_high'] = (layer.channels,)
            elif layer.kind == CONV:
                shapes[f'{name}.weight'] = (layer.channels, c_in, layer.kernel_size)
                shapes[f'{name}.bias'] = (layer.channels,)
            elif layer.kind == BATCH_NORM:
                for key in ('scale', 'shift', 'running_mean', 'running_var'):
                    shapes[f'{name}.{key}'] = (c_in,)
        return shapes

    @property
    def filterbank(self) -> SincFilterbank:
        sinc = self.spec.sinc
        return SincFilterbank(self.params['sinc.f_low'], self.params['sinc.f_high'],
                              sinc.kernel_size, self.spec.sample_rate, self.gains)

    def set_filterbank(self, fb: SincFilterbank):
        if fb.n_filters != self.spec.sinc.channels or fb.filter_length != self.spec.sinc.kernel_size:
            raise ValueError(f"Filterbank {fb} does not fit the sinc layer of this model")
        self.params['sinc.f_low'] = np.array(fb.f_low)
        self.params['sinc.f_high'] = np.array(fb.f_high)
        self.gains = np.array(fb.gains)

    def effective_filterbank(self) -> SincFilterbank:
        """Filterbank whose gains include attached sinc-output LHUC scalers"""
        fb = self.filterbank
        if LHUC_SITES['sinc_output'] in self.params:
            return fb.with_gains(fb.gains * self.params[LHUC_SITES['sinc_output']])
        return fb

    def constrain_sinc_params(self, params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Project the sinc cut-offs of a parameter dict onto the feasible set"""
        f_low, f_high = constrain_edges(params['sinc.f_low'], params['sinc.f_high'],
                                        self.spec.sample_rate)
        params = dict(params)
        params['sinc.f_low'], params['sinc.f_high'] = f_low, f_high
        return params

    def has_lhuc(self, site: str) -> bool:
        return LHUC_SITES[site] in self.params

    def group_names(self) -> Dict[str, List[str]]:
        """Parameter names per group: sinc, conv, batchnorm, lhuc0, lhuc1"""
        groups: Dict[str, List[str]] = OrderedDict(
            (g, []) for g in ('sinc', 'conv', 'batchnorm', 'lhuc0', 'lhuc1'))
        for name in self.params:
            prefix = name.split('.')[0]
            if prefix == 'sinc':
                groups['sinc'].append(name)
            elif prefix.startswith('conv'):
                groups['conv'].append(name)
            elif prefix.startswith('bn'):
                groups['batchnorm'].append(name)
            else:
                groups[prefix].append(name)
        return OrderedDict((g, names) for g, names in groups.items() if names)

    def clone(self) -> 'Model':
        return Model(self.spec, copy.deepcopy(self.params), copy.deepcopy(self.stats),
                     self.gains.copy(), self.seed, self.init, self.normalize_input)

    def __repr__(self):
        return (f"Model(layers={len(self.spec.layers)}, filters={self.spec.sinc.channels}, "
                f"classes={self.spec.n_classes}, params={param_count(self)})")


def build_model(spec: ModelSpec, init: InitScheme, seed: int, normalize_input: bool = True) -> Model:
    """
    Allocate all parameter groups of a spec

    Conv weights are He-uniform, U(-sqrt(6/fan_in), +sqrt(6/fan_in)) drawn in
    layer order from one generator seeded with `seed`; biases start at zero;
    batchnorm starts at scale 1, shift 0, running mean 0, running variance 1.

    Args:
        spec: Model topology
        init: Sinc filterbank initialization
        seed: Weight initialization seed
        normalize_input: Standardize each frame before the sinc layer

    Returns:
        Freshly initialized model
    """
    output_lengths(spec)
    names = _layer_names(spec)
    rng = np.random.default_rng(seed)
    fb = init_filterbank(init, spec.sinc.channels, spec.sinc.kernel_size, spec.sample_rate)
    params: Dict[str, np.ndarray] = OrderedDict()
    stats: Dict[str, np.ndarray] = OrderedDict()
    params['sinc.f_low'] = np.array(fb.f_low)
    params['sinc.f_high'] = np.array(fb.f_high)

    for layer, name, c_in in zip(spec.layers, names, spec.input_channels()):
        if layer.kind == CONV:
            fan_in = c_in * layer.kernel_size
            bound = np.sqrt(6.0 / fan_in)
            params[f'{name}.weight'] = rng.uniform(-bound, bound, size=(layer.channels, c_in, layer.kernel_size))
            params[f'{name}.bias'] = np.zeros(layer.channels)
        elif layer.kind == BATCH_NORM:
            params[f'{name}.scale'] = np.ones(c_in)
            params[f'{name}.shift'] = np.zeros(c_in)
            stats[f'{name}.running_mean'] = np.zeros(c_in)
            stats[f'{name}.running_var'] = np.ones(c_in)

    model = Model(spec, params, stats, np.array(fb.gains), seed, init, normalize_input)
    logger.info(f"Built model: {len(spec.layers)} layers, {param_count(model)} parameters")
    return model


def param_count(m: Model) -> int:
    """All parameters including batchnorm running statistics and attached LHUC scalers"""
    return int(sum(p.size for p in m.params.values()) + sum(s.size for s in m.stats.values()))


def model_forward(m: Model, frames: np.ndarray, mode: str = 'eval') -> Tuple[np.ndarray, Dict]:
    """
    Forward pass from raw frames to logits

    Args:
        m: Model
        frames: (samples,) or (batch, samples) with samples = spec.input_samples
        mode: 'train' (batch statistics, running statistics updated in m.stats),
              'eval' or 'frozen' (running statistics, nothing updated)

    Returns:
        (logits (classes,) or (batch, classes), cache for model_backward)
    """
    if mode not in FORWARD_MODES:
        raise ValueError(f"Unknown forward mode '{mode}' (expected one of {FORWARD_MODES})")
    frames = np.asarray(frames, dtype=np.float64)
    single = frames.ndim == 1
    batch = frames[None, :] if single else frames
    if batch.ndim != 2 or batch.shape[1] != m.spec.input_samples:
        raise ValueError(f"Expected frames of {m.spec.input_samples} samples, got shape {frames.shape}")
    if m.normalize_input:
        batch = normalize_frames(batch)

    sites = {pos: site for site, pos in lhuc_site_positions(m.spec).items() if m.has_lhuc(site)}
    x = batch[:, None, :]
    caches: List[Tuple[str, Dict]] = []
    for i, (layer, name) in enumerate(zip(m.spec.layers, m._names)):
        if layer.kind == SINC_CONV:
            x, cache = sinc_conv_forward(x, m.params['sinc.f_low'], m.params['sinc.f_high'],
                                         m.gains, layer.kernel_size, m.spec.sample_rate)
        elif layer.kind == CONV:
            x, cache = conv1d_forward(x, m.params[f'{name}.weight'], m.params[f'{name}.bias'],
                                      layer.dilation)
        elif layer.kind == MAX_POOL:
            x, cache = maxpool1d_forward(x, layer.pool_size)
        elif layer.kind == RELU:
            x, mask = relu_forward(x)
            cache = {'mask': mask}
        elif layer.kind == BATCH_NORM:
            bn_params = {
                'scale': m.params[f'{name}.scale'],
                'shift': m.params[f'{name}.shift'],
                'running_mean': m.stats[f'{name}.running_mean'],
                'running_var': m.stats[f'{name}.running_var'],
            }
            x, cache, updated = batchnorm_forward(x, bn_params, mode)
            if updated is not None:
                m.stats[f'{name}.running_mean'] = updated['running_mean']
                m.stats[f'{name}.running_var'] = updated['running_var']
        else:
            x, cache = time_average_forward(x)
        caches.append((layer.kind, cache))

        if i in sites:
            x, cache = scale_channels_forward(x, m.params[LHUC_SITES[sites[i]]])
            caches.append(('LHUC:' + sites[i], cache))

    logits = x[0] if single else x
    return logits, {'caches': caches, 'single': single, 'mode': mode}


def _needed_depth(m: Model, trainable: set) -> Tuple[int, List[int]]:
    """Lowest layer index with a trainable parameter, and positions of trainable LHUC sites"""
    positions = lhuc_site_positions(m.spec)
    lowest = len(m.spec.layers)
    for i, name in enumerate(m._names):
        if name and any(p.startswith(name + '.') for p in trainable):
            lowest = min(lowest, i)
    lhuc = [positions[site] for site, pname in LHUC_SITES.items()
            if pname in trainable and site in positions]
    return lowest, lhuc


def model_backward(m: Model, cache: Optional[Dict], grad_logits: np.ndarray,
                   trainable: Optional[Iterable[str]] = None) -> Dict[str, np.ndarray]:
    """
    Backpropagate a logits gradient to the parameters

    Args:
        m: Model used in the forward pass
        cache: Cache returned by model_forward
        grad_logits: dLoss/dlogits, same shape as the logits
        trainable: Parameter names to return gradients for (default: all params);
                   parameters outside this set receive no gradient

    Returns:
        Gradients by parameter name
    """
    if not cache or 'caches' not in cache:
        raise ValueError("model_backward needs the cache of a forward pass")
    trainable = set(m.params) if trainable is None else set(trainable)
    unknown = trainable - set(m.params)
    if unknown:
        raise KeyError(f"Unknown parameters: {sorted(unknown)}")

    grads: Dict[str, np.ndarray] = {}
    layer_stop, lhuc_positions = _needed_depth(m, trainable)

    def needed_below(index: int) -> bool:
        return index > layer_stop or any(p < index for p in lhuc_positions)

    g = np.asarray(grad_logits, dtype=np.float64)
    if cache['single']:
        g = g[None, :]

    layer_index = len(m.spec.layers)
    for kind, layer_cache in reversed(cache['caches']):
        if kind.startswith('LHUC:'):
            site = kind.split(':', 1)[1]
            g, grad_r = scale_channels_backward(g, layer_cache)
            if LHUC_SITES[site] in trainable:
                grads[LHUC_SITES[site]] = grad_r
            position = lhuc_site_positions(m.spec)[site]
            if position < layer_stop and not any(p < position for p in lhuc_positions):
                break
            continue

        layer_index -= 1
        name = m._names[layer_index]
        if kind == SOFTMAX:
            g = time_average_backward(g, layer_cache)
        elif kind == RELU:
            g = relu_backward(g, layer_cache['mask'])
        elif kind == MAX_POOL:
            g = maxpool1d_backward(g, layer_cache)
        elif kind == BATCH_NORM:
            g, g_scale, g_shift = batchnorm_backward(g, layer_cache)
            if f'{name}.scale' in trainable:
                grads[f'{name}.scale'] = g_scale
            if f'{name}.shift' in trainable:
                grads[f'{name}.shift'] = g_shift
        elif kind == CONV:
            g, g_w, g_b = conv1d_backward(g, layer_cache, need_input_grad=needed_below(layer_index))
            if f'{name}.weight' in trainable:
                grads[f'{name}.weight'] = g_w
            if f'{name}.bias' in trainable:
                grads[f'{name}.bias'] = g_b
        elif kind == SINC_CONV:
            g_low, g_high = sinc_conv_backward(g, layer_cache)
            if 'sinc.f_low' in trainable:
                grads['sinc.f_low'] = g_low
            if 'sinc.f_high' in trainable:
                grads['sinc.f_high'] = g_high
        if not needed_below(layer_index):
            break

    return grads
