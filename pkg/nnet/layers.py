"""
Layer Functions
Forward/backward pairs for the fixed layer set of the acoustic model
"""

import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from filterbank.sinc_filters import windowed_kernels, windowed_kernel_partials
from . import config

logger = logging.getLogger(__name__)

BN_MODES = ('train', 'eval', 'frozen')


def _batched(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None, :, :], True
    if x.ndim != 3:
        raise ValueError(f"Expected (channels, time) or (batch, channels, time), got shape {x.shape}")
    return x, False


def normalize_frames(frames: np.ndarray) -> np.ndarray:
    """Shift/scale each frame (last axis) to zero mean and unit variance"""
    frames = np.asarray(frames, dtype=np.float64)
    mean = frames.mean(axis=-1, keepdims=True)
    std = frames.std(axis=-1, keepdims=True)
    return (frames - mean) / np.maximum(std, config.NORM_EPSILON)


def conv1d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                   dilation: int = 1) -> Tuple[np.ndarray, Dict]:
    """
    Valid dilated cross-correlation, stride 1

    Args:
        x: Input (batch, in_channels, time) or (in_channels, time)
        weight: Kernels (out_channels, in_channels, kernel_size)
        bias: Biases (out_channels,)
        dilation: Spacing between kernel taps (>= 1)

    Returns:
        (output, cache) with output time length time - (kernel_size-1)*dilation
    """
    xb, squeeze = _batched(x)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if dilation < 1:
        raise ValueError(f"Dilation must be >= 1, got {dilation}")
    if weight.ndim != 3 or weight.shape[1] != xb.shape[1]:
        raise ValueError(f"Weight shape {weight.shape} incompatible with input channels {xb.shape[1]}")
    if bias.shape != (weight.shape[0],):
        raise ValueError(f"Bias shape {bias.shape} does not match {weight.shape[0]} output channels")
    kernel_size = weight.shape[2]
    out_len = xb.shape[2] - (kernel_size - 1) * dilation
    if out_len < 1:
        raise ValueError(f"Input length {xb.shape[2]} too short for kernel {kernel_size} "
                         f"with dilation {dilation}")

    y = np.empty((xb.shape[0], weight.shape[0], out_len))
    y[...] = bias[None, :, None]
    for k in range(kernel_size):
        start = k * dilation
        y += np.matmul(weight[:, :, k], xb[:, :, start:start + out_len])

    cache = {'x': xb, 'weight': weight, 'dilation': dilation, 'squeeze': squeeze}
    return (y[0] if squeeze else y), cache


def conv1d_backward(grad_y: np.ndarray, cache: Dict,
                    need_input_grad: bool = True) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """
    Gradients of conv1d w.r.t. input, weight and bias

    Returns:
        (grad_x or None, grad_weight, grad_bias)
    """
    x, weight, dilation = cache['x'], cache['weight'], cache['dilation']
    gy, _ = _batched(grad_y)
    kernel_size = weight.shape[2]
    out_len = gy.shape[2]

    grad_bias = gy.sum(axis=(0, 2))
    grad_weight = np.empty_like(weight)
    grad_x = np.zeros_like(x) if need_input_grad else None
    for k in range(kernel_size):
        start = k * dilation
        xs = x[:, :, start:start + out_len]
        grad_weight[:, :, k] = np.matmul(gy, xs.transpose(0, 2, 1)).sum(axis=0)
        if need_input_grad:
            grad_x[:, :, start:start + out_len] += np.matmul(weight[:, :, k].T, gy)

    if grad_x is not None and cache['squeeze']:
        grad_x = grad_x[0]
    return grad_x, grad_weight, grad_bias


def conv1d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, dilation: int = 1) -> np.ndarray:
    return conv1d_forward(x, weights, bias, dilation)[0]


def maxpool1d_forward(x: np.ndarray, pool: int) -> Tuple[np.ndarray, Dict]:
    """
    Non-overlapping max pooling (stride = pool), trailing remainder dropped

    The backward pass routes the gradient to the first maximum of each window.
    """
    if pool < 1:
        raise ValueError(f"Pool size must be >= 1, got {pool}")
    xb, squeeze = _batched(x)
    batch, channels, length = xb.shape
    out_len = length // pool
    if out_len < 1:
        raise ValueError(f"Input length {length} shorter than pool size {pool}")
    windows = xb[:, :, :out_len * pool].reshape(batch, channels, out_len, pool)
    arg = windows.argmax(axis=3)
    y = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
    positions = np.arange(out_len)[None, None, :] * pool + arg
    cache = {'positions': positions, 'shape': xb.shape, 'squeeze': squeeze}
    return (y[0] if squeeze else y), cache


def maxpool1d_backward(grad_y: np.ndarray, cache: Dict) -> np.ndarray:
    gy, _ = _batched(grad_y)
    grad_x = np.zeros(cache['shape'])
    np.put_along_axis(grad_x, cache['positions'], gy, axis=2)
    return grad_x[0] if cache['squeeze'] else grad_x


def maxpool1d(x: np.ndarray, pool: int) -> np.ndarray:
    return maxpool1d_forward(x, pool)[0]


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(grad_y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, grad_y, 0.0)


def batchnorm_forward(x: np.ndarray, params: Dict[str, np.ndarray], mode: str,
                      momentum: float = config.BN_MOMENTUM,
                      eps: float = config.BN_EPSILON) -> Tuple[np.ndarray, Dict, Optional[Dict[str, np.ndarray]]]:
    """
    Per-channel batch normalization

    Args:
        x: Input (batch, channels, time) or (channels, time)
        params: 'scale', 'shift', 'running_mean', 'running_var' arrays (channels,)
        mode: 'train' normalizes with batch statistics and returns updated
              running statistics; 'eval' and 'frozen' use the running statistics
        momentum: Running-statistics momentum
        eps: Variance floor

    Returns:
        (output, cache, updated running stats or None)
    """
    if mode not in BN_MODES:
        raise ValueError(f"Unknown batchnorm mode '{mode}' (expected one of {BN_MODES})")
    xb, squeeze = _batched(x)
    channels = xb.shape[1]
    for key in ('scale', 'shift', 'running_mean', 'running_var'):
        if params[key].shape != (channels,):
            raise ValueError(f"Batchnorm '{key}' shape {params[key].shape} does not match "
                             f"{channels} channels")

    updated = None
    if mode == 'train':
        mean = xb.mean(axis=(0, 2))
        var = xb.var(axis=(0, 2))
        updated = {
            'running_mean': momentum * params['running_mean'] + (1.0 - momentum) * mean,
            'running_var': momentum * params['running_var'] + (1.0 - momentum) * var,
        }
    else:
        mean = params['running_mean']
        var = params['running_var']

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (xb - mean[None, :, None]) * inv_std[None, :, None]
    y = params['scale'][None, :, None] * x_hat + params['shift'][None, :, None]
    cache = {'x_hat': x_hat, 'inv_std': inv_std, 'scale': params['scale'],
             'batch_stats': mode == 'train', 'squeeze': squeeze}
    return (y[0] if squeeze else y), cache, updated


def batchnorm_backward(grad_y: np.ndarray, cache: Dict) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns:
        (grad_x, grad_scale, grad_shift)
    """
    gy, _ = _batched(grad_y)
    x_hat, inv_std, scale = cache['x_hat'], cache['inv_std'], cache['scale']
    grad_scale = (gy * x_hat).sum(axis=(0, 2))
    grad_shift = gy.sum(axis=(0, 2))
    g_hat = gy * scale[None, :, None]
    if cache['batch_stats']:
        count = gy.shape[0] * gy.shape[2]
        grad_x = (inv_std[None, :, None] / count) * (
            count * g_hat
            - g_hat.sum(axis=(0, 2))[None, :, None]
            - x_hat * (g_hat * x_hat).sum(axis=(0, 2))[None, :, None]
        )
    else:
        grad_x = g_hat * inv_std[None, :, None]
    if cache['squeeze']:
        grad_x = grad_x[0]
    return grad_x, grad_scale, grad_shift


def batchnorm(x: np.ndarray, params: Dict[str, np.ndarray], mode: str) -> np.ndarray:
    return batchnorm_forward(x, params, mode)[0]


def scale_channels_forward(y: np.ndarray, r: np.ndarray) -> Tuple[np.ndarray, Dict]:
    """Multiply channel i by r[i]"""
    yb, squeeze = _batched(y)
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (yb.shape[1],):
        raise ValueError(f"Expected {yb.shape[1]} channel scalers, got shape {r.shape}")
    out = yb * r[None, :, None]
    cache = {'y': yb, 'r': r, 'squeeze': squeeze}
    return (out[0] if squeeze else out), cache


def scale_channels_backward(grad_out: np.ndarray, cache: Dict) -> Tuple[np.ndarray, np.ndarray]:
    g, _ = _batched(grad_out)
    grad_r = (g * cache['y']).sum(axis=(0, 2))
    grad_y = g * cache['r'][None, :, None]
    if cache['squeeze']:
        grad_y = grad_y[0]
    return grad_y, grad_r


def time_average_forward(y: np.ndarray) -> Tuple[np.ndarray, Dict]:
    """Average logits over the remaining time axis: (batch, classes, time) -> (batch, classes)"""
    yb, _ = _batched(y)
    return yb.mean(axis=2), {'length': yb.shape[2]}


def time_average_backward(grad_logits: np.ndarray, cache: Dict) -> np.ndarray:
    length = cache['length']
    return np.repeat(grad_logits[:, :, None] / length, length, axis=2)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, label: Union[int, np.ndarray]) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy of softmax(logits) against integer labels

    Args:
        logits: (classes,) with an int label, or (batch, classes) with a label array
        label: Class index / indices

    Returns:
        (loss, gradient w.r.t. logits) with gradient softmax - onehot (batch-averaged)
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    lg = logits[None, :] if single else logits
    labels = np.atleast_1d(np.asarray(label)).astype(np.int64)
    n_classes = lg.shape[1]
    if labels.shape != (lg.shape[0],):
        raise ValueError(f"Expected {lg.shape[0]} labels, got {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"Label out of range for {n_classes} classes: {labels}")

    shifted = lg - lg.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(lg.shape[0])
    losses = log_norm - shifted[rows, labels]
    probs = np.exp(shifted - log_norm[:, None])
    grad = probs
    grad[rows, labels] -= 1.0
    grad /= lg.shape[0]
    loss = float(losses.mean())
    return loss, (grad[0] if single else grad)


def sinc_conv_forward(x: np.ndarray, f_low: np.ndarray, f_high: np.ndarray, gains: np.ndarray,
                      filter_length: int, sample_rate: int) -> Tuple[np.ndarray, Dict]:
    """
    Convolve a single-channel waveform batch with gain-scaled windowed sinc kernels

    Args:
        x: Input (batch, 1, samples)
        f_low, f_high: Cut-offs in Hz (N,)
        gains: Per-filter gains (N,)

    Returns:
        (output (batch, N, samples - L + 1), cache)
    """
    kernels = windowed_kernels(f_low, f_high, filter_length, sample_rate)
    weight = (gains[:, None] * kernels)[:, None, :]
    y, conv_cache = conv1d_forward(x, weight, np.zeros(kernels.shape[0]), 1)
    cache = {'conv': conv_cache, 'f_low': f_low, 'f_high': f_high, 'gains': gains,
             'filter_length': filter_length, 'sample_rate': sample_rate}
    return y, cache


def sinc_conv_backward(grad_y: np.ndarray, cache: Dict) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients w.r.t. the cut-offs: the kernel gradient contracted with the kernel partials

    Returns:
        (grad_f_low, grad_f_high)
    """
    _, grad_weight, _ = conv1d_backward(grad_y, cache['conv'], need_input_grad=False)
    grad_kernels = grad_weight[:, 0, :] * cache['gains'][:, None]
    d_low, d_high = windowed_kernel_partials(cache['f_low'], cache['f_high'],
                                             cache['filter_length'], cache['sample_rate'])
    return (grad_kernels * d_low).sum(axis=1), (grad_kernels * d_high).sum(axis=1)
