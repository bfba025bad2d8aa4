"""
WAV I/O Module
PCM 16-bit mono WAV reading and writing
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.io import wavfile

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0


@dataclass
class Waveform:
    """Samples in [-1, 1] at a sample rate"""
    samples: np.ndarray
    sample_rate: int
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"Waveform must be mono, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"Sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path: str, expected_rate: Optional[int] = None) -> Waveform:
    """
    Decode a PCM 16-bit mono WAV file

    Args:
        path: WAV file path
        expected_rate: Model sample rate; a mismatch is logged and recorded
                       in the waveform metadata

    Returns:
        Waveform scaled by 1/32768
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"WAV file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise ValueError(f"Malformed WAV file {path}: {e}")

    if data.dtype != np.int16:
        raise ValueError(f"Unsupported WAV encoding in {path}: {data.dtype} (expected PCM 16-bit)")
    if data.ndim != 1:
        raise ValueError(f"Unsupported channel count in {path}: {data.shape[1]} (expected mono)")

    waveform = Waveform(data.astype(np.float64) / PCM_SCALE, int(rate), {'path': path})
    if expected_rate is not None and rate != expected_rate:
        logger.warning(f"Sample rate mismatch in {path}: {rate} Hz (expected {expected_rate} Hz)")
        waveform.metadata['sample_rate_mismatch'] = {'found': int(rate), 'expected': int(expected_rate)}
    return waveform


def write_wav(path: str, waveform: Waveform) -> str:
    """Encode as PCM 16-bit mono: round(x * 32768) clipped to the int16 range"""
    pcm = np.round(waveform.samples * PCM_SCALE)
    clipped = int(np.count_nonzero((pcm > 32767) | (pcm < -32768)))
    if clipped:
        logger.warning(f"Clipping {clipped} samples while writing {path}")
    pcm = np.clip(pcm, -32768, 32767).astype(np.int16)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    wavfile.write(path, int(waveform.sample_rate), pcm)
    return path
