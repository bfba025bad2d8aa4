"""
Spectra Module
Average log-mel filterbank spectra of waveform frames
"""

import logging
from typing import Optional, Tuple

import numpy as np

from filterbank.filterbank_init import inverse_mel_scale, mel_scale

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-10


def mel_band_edges(n_mels: int, sample_rate: float) -> np.ndarray:
    """n_mels + 2 edge frequencies equally spaced on the mel scale over [0, sr/2]"""
    return inverse_mel_scale(np.linspace(0.0, mel_scale(sample_rate / 2.0), n_mels + 2))


def mel_filterbank_matrix(n_mels: int, n_fft: int, sample_rate: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Triangular mel filterbank

    Returns:
        (weights (n_mels, n_fft//2 + 1), band centre frequencies (n_mels,))
    """
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    edges = mel_band_edges(n_mels, sample_rate)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    weights = np.zeros((n_mels, len(freqs)))
    for m in range(n_mels):
        left, centre, right = edges[m:m + 3]
        rising = (freqs - left) / (centre - left)
        falling = (right - freqs) / (right - centre)
        weights[m] = np.maximum(0.0, np.minimum(rising, falling))
    return weights, edges[1:-1]


def log_mel_frames(frames: np.ndarray, n_mels: int = 40, sample_rate: float = 16000,
                   n_fft: Optional[int] = None) -> np.ndarray:
    """Per-frame log mel energies of the magnitude spectrum, floored at 1e-10"""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n_fft = n_fft or frames.shape[1]
    magnitude = np.abs(np.fft.rfft(frames, n=n_fft, axis=1))
    weights, _ = mel_filterbank_matrix(n_mels, n_fft, sample_rate)
    return np.log(np.maximum(magnitude @ weights.T, LOG_FLOOR))


def avg_log_mel(frames, n_mels: int = 40, sample_rate: float = 16000,
                n_fft: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and standard deviation of log mel spectra across frames

    Args:
        frames: Sequence or (n_frames, samples) array of frames
        n_mels: Number of mel bands
        sample_rate: Sample rate in Hz
        n_fft: DFT size (default: frame length)

    Returns:
        (mean (n_mels,), std (n_mels,))
    """
    if frames is None or len(frames) == 0:
        raise ValueError("avg_log_mel needs at least one frame")
    log_mel = log_mel_frames(np.asarray(frames), n_mels, sample_rate, n_fft)
    return log_mel.mean(axis=0), log_mel.std(axis=0)
