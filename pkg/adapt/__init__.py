"""
Adaptation Module
LHUC scalers, adaptation modes and per-speaker adaptation of a trained model
"""

from .lhuc import LhucScalers, apply_lhuc, attach_lhuc, detach_lhuc, get_lhuc
from .adaptation import (
    AdaptMode,
    AdaptConfig,
    AdaptResult,
    select_trainable,
    trainable_count,
    adapt_run,
    adapt_speakers,
    utterance_sweep,
    write_adaptation_report,
)
from .mismatch import run_mismatch_experiment

__all__ = [
    'LhucScalers',
    'apply_lhuc',
    'attach_lhuc',
    'detach_lhuc',
    'get_lhuc',
    'AdaptMode',
    'AdaptConfig',
    'AdaptResult',
    'select_trainable',
    'trainable_count',
    'adapt_run',
    'adapt_speakers',
    'utterance_sweep',
    'write_adaptation_report',
    'run_mismatch_experiment',
]
