"""
Framing Module
Overlapping fixed-length frames from a waveform
"""

import logging

import numpy as np

from .wav_io import Waveform

logger = logging.getLogger(__name__)

DEFAULT_WIN_S = 0.200
DEFAULT_HOP_S = 0.010


def frame_signal(w: Waveform, win_s: float = DEFAULT_WIN_S, hop_s: float = DEFAULT_HOP_S) -> np.ndarray:
    """
    Cut a waveform into frames at offsets 0, hop, 2*hop, ...

    The last partial frame is dropped, giving floor((len - win) / hop) + 1 frames.

    Returns:
        (n_frames, win) array
    """
    win = int(round(win_s * w.sample_rate))
    hop = int(round(hop_s * w.sample_rate))
    if win < 1 or hop < 1:
        raise ValueError(f"Window and hop must be at least one sample (win={win}, hop={hop})")
    if len(w.samples) < win:
        raise ValueError(f"Signal of {len(w.samples)} samples is shorter than one "
                         f"{win}-sample window")
    windows = np.lib.stride_tricks.sliding_window_view(w.samples, win)[::hop]
    return np.ascontiguousarray(windows)
