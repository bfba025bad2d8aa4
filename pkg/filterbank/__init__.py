"""
Filterbank Module
Learnable windowed-sinc band-pass filterbank
"""

from .sinc_filters import (
    sinc_eval,
    ideal_kernel,
    hamming_window,
    centred_hamming_window,
    windowed_kernel,
    kernel_partials,
    frequency_response,
)
from .filterbank_init import (
    SincFilter,
    SincFilterbank,
    InitScheme,
    init_filterbank,
    constrain_filterbank,
    kernel_bank,
    mel_scale,
    inverse_mel_scale,
    filterbank_to_dict,
    filterbank_from_dict,
    save_filterbank,
    load_filterbank,
)

__all__ = [
    'sinc_eval',
    'ideal_kernel',
    'hamming_window',
    'centred_hamming_window',
    'windowed_kernel',
    'kernel_partials',
    'frequency_response',
    'kernel_bank',
    'SincFilter',
    'SincFilterbank',
    'InitScheme',
    'init_filterbank',
    'constrain_filterbank',
    'mel_scale',
    'inverse_mel_scale',
    'filterbank_to_dict',
    'filterbank_from_dict',
    'save_filterbank',
    'load_filterbank',
]
