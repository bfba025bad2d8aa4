"""
Optim Module
Adam optimizer over named parameter groups
"""

from .adam import ParamGroup, AdamState, adam_step, AdamOptimizer

__all__ = [
    'ParamGroup',
    'AdamState',
    'adam_step',
    'AdamOptimizer'
]
