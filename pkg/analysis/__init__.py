"""
Analysis Module
Scaling functions, log-mel spectra and CSV exports of adapted filterbanks
"""

from .scaling import ScalingFunction, scaling_pairs, fit_alpha
from .spectra import mel_filterbank_matrix, log_mel_frames, avg_log_mel
from .exports import (
    export_filters,
    import_filters,
    export_scaling,
    export_response,
    export_spectra,
    write_sidecar,
)

__all__ = [
    'ScalingFunction',
    'scaling_pairs',
    'fit_alpha',
    'mel_filterbank_matrix',
    'log_mel_frames',
    'avg_log_mel',
    'export_filters',
    'import_filters',
    'export_scaling',
    'export_response',
    'export_spectra',
    'write_sidecar',
]
