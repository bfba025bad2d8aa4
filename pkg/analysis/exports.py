"""
Exports Module
CSV exports of filter edges, scaling functions, frequency responses and spectra
"""

import json
import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

from filterbank.filterbank_init import SincFilterbank, kernel_bank
from filterbank.sinc_filters import frequency_response
from .scaling import ScalingFunction

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9g'
DB_FLOOR = 1e-10

FILTER_COLUMNS = ['index', 'f_low_hz', 'f_high_hz', 'centre_hz', 'gain']
SCALING_COLUMNS = ['index', 'ref_centre_hz', 'adapted_centre_hz', 'speaker']
RESPONSE_COLUMNS = ['freq_hz', 'filter_index', 'magnitude_db']
SPECTRA_COLUMNS = ['band', 'centre_hz', 'mean_log_mel', 'std_log_mel']


def _write_csv(frame: pd.DataFrame, path: str, sidecar: Optional[Dict]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    if sidecar is not None:
        write_sidecar(path, sidecar)
    logger.info(f"Exported {len(frame)} rows to {path}")
    return path


def write_sidecar(path: str, params: Dict) -> str:
    """JSON file of generation parameters next to an export (<path>.json)"""
    sidecar_path = f"{path}.json"
    with open(sidecar_path, 'w') as f:
        json.dump(params, f, indent=2, sort_keys=True, default=str)
    return sidecar_path


def export_filters(fb: SincFilterbank, path: str, sidecar: Optional[Dict] = None) -> str:
    frame = pd.DataFrame({
        'index': np.arange(fb.n_filters),
        'f_low_hz': fb.f_low,
        'f_high_hz': fb.f_high,
        'centre_hz': fb.centres,
        'gain': fb.gains,
    }, columns=FILTER_COLUMNS)
    return _write_csv(frame, path, sidecar)


def import_filters(path: str, sample_rate: int, filter_length: int) -> SincFilterbank:
    """Rebuild a filterbank from an export_filters CSV"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Filter export not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in FILTER_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"Filter export {path} is missing columns {missing}")
    frame = frame.sort_values('index')
    return SincFilterbank(frame['f_low_hz'].to_numpy(dtype=np.float64),
                          frame['f_high_hz'].to_numpy(dtype=np.float64),
                          filter_length, sample_rate,
                          frame['gain'].to_numpy(dtype=np.float64))


def export_scaling(s: ScalingFunction, path: str, sidecar: Optional[Dict] = None) -> str:
    frame = pd.DataFrame({
        'index': s.filter_index,
        'ref_centre_hz': s.reference,
        'adapted_centre_hz': s.adapted,
        'speaker': [s.speaker or ''] * len(s),
    }, columns=SCALING_COLUMNS)
    return _write_csv(frame, path, sidecar)


def export_response(fb: SincFilterbank, n_fft: int, path: str, sidecar: Optional[Dict] = None) -> str:
    """Magnitude response in dB of every gain-scaled kernel, (n_fft/2 + 1) rows per filter"""
    kernels = kernel_bank(fb)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / fb.sample_rate)
    blocks = []
    for i, kernel in enumerate(kernels):
        magnitude = frequency_response(kernel, n_fft)
        blocks.append(pd.DataFrame({
            'freq_hz': freqs,
            'filter_index': i,
            'magnitude_db': 20.0 * np.log10(np.maximum(magnitude, DB_FLOOR)),
        }, columns=RESPONSE_COLUMNS))
    return _write_csv(pd.concat(blocks, ignore_index=True), path, sidecar)


def export_spectra(mean: np.ndarray, std: np.ndarray, centres: np.ndarray, path: str,
                   sidecar: Optional[Dict] = None) -> str:
    if not len(mean) == len(std) == len(centres):
        raise ValueError(f"Length mismatch: mean {len(mean)}, std {len(std)}, centres {len(centres)}")
    frame = pd.DataFrame({
        'band': np.arange(len(mean)),
        'centre_hz': centres,
        'mean_log_mel': mean,
        'std_log_mel': std,
    }, columns=SPECTRA_COLUMNS)
    return _write_csv(frame, path, sidecar)
