"""
Network Configuration
Numerical constants for the layer stack and checkpoint format
"""

import os

# Batch normalization
BN_MOMENTUM = float(os.getenv('SINCADAPT_BN_MOMENTUM', '0.99'))
BN_EPSILON = 1e-5

# Per-frame input normalization floor
NORM_EPSILON = 1e-8

# Checkpoint files
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_MANIFEST = 'manifest.json'
CHECKPOINT_BLOB = 'params.bin'
