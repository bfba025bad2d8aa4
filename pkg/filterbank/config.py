"""
Filterbank Configuration
Constants for the learnable sinc filterbank
"""

import os

# Frequency constraints (Hz)
F_MIN_HZ = float(os.getenv('SINCADAPT_F_MIN_HZ', '30'))  # lowest allowed lower cut-off
MIN_BAND_HZ = float(os.getenv('SINCADAPT_MIN_BAND_HZ', '50'))  # minimum bandwidth b

# Layer defaults
DEFAULT_SAMPLE_RATE = 16000
DEFAULT_FILTER_LENGTH = 129
DEFAULT_N_FILTERS = 40

# Mel scale (O'Shaughnessy)
MEL_FACTOR = 2595.0
MEL_BREAK_HZ = 700.0
