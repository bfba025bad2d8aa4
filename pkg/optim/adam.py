"""
Adam Optimizer Module
Bias-corrected Adam with per-group learning rates, freezing and projections
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8

Params = Dict[str, np.ndarray]


@dataclass
class ParamGroup:
    """
    Named set of parameters sharing a learning rate

    `step_scale` converts an optimizer step into parameter units: sinc cut-offs
    are stored in Hz but stepped in units of the sample rate, so their group
    uses step_scale = sample_rate. `constraint`, when set, maps the updated
    parameter dict to a projected one and runs after every step (used to keep
    sinc cut-offs feasible).
    """
    name: str
    param_names: List[str]
    learning_rate: float
    frozen: bool = False
    step_scale: float = 1.0
    constraint: Optional[Callable[[Params], Params]] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.frozen and not self.learning_rate > 0:
            raise ValueError(f"Group '{self.name}' needs a positive learning rate, "
                             f"got {self.learning_rate}")
        if not self.step_scale > 0:
            raise ValueError(f"Group '{self.name}' needs a positive step scale, got {self.step_scale}")

    def size(self, params: Params) -> int:
        return int(sum(params[n].size for n in self.param_names))


@dataclass
class AdamState:
    """First/second moment estimates per parameter and the step counter"""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def _check_gradient(name: str, grad: np.ndarray, param: np.ndarray):
    if grad.shape != param.shape:
        raise ValueError(f"Gradient shape {grad.shape} does not match parameter "
                         f"'{name}' shape {param.shape}")
    if not np.all(np.isfinite(grad)):
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise FloatingPointError(f"Non-finite gradient for '{name}' ({bad} entries)")


def adam_step(params: Params, grads: Params, state: AdamState,
              groups: Sequence[ParamGroup]) -> Tuple[Params, AdamState]:
    """
    One Adam update over the non-frozen groups

    Args:
        params: Current parameters by name
        grads: Gradients by name (none for frozen groups)
        state: Current Adam state
        groups: Parameter groups with learning rates

    Returns:
        (updated params, updated state); inputs are not modified
    """
    for group in groups:
        for name in group.param_names:
            if name not in params:
                raise KeyError(f"Group '{group.name}' refers to unknown parameter '{name}'")
            if group.frozen and name in grads:
                raise ValueError(f"Frozen group '{group.name}' received a gradient for '{name}'")
            if name in grads:
                _check_gradient(name, grads[name], params[name])

    step = state.step + 1
    correction1 = 1.0 - BETA1 ** step
    correction2 = 1.0 - BETA2 ** step
    new_params = dict(params)
    new_m = dict(state.m)
    new_v = dict(state.v)

    for group in groups:
        if group.frozen:
            continue
        for name in group.param_names:
            grad = grads.get(name)
            if grad is None:
                continue
            m = new_m.get(name, np.zeros_like(params[name]))
            v = new_v.get(name, np.zeros_like(params[name]))
            m = BETA1 * m + (1.0 - BETA1) * grad
            v = BETA2 * v + (1.0 - BETA2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            new_params[name] = params[name] - group.learning_rate * group.step_scale * m_hat / (np.sqrt(v_hat) + EPSILON)
            new_m[name] = m
            new_v[name] = v
        if group.constraint is not None:
            new_params = group.constraint(new_params)

    return new_params, AdamState(new_m, new_v, step)


class AdamOptimizer:
    """Holds parameter groups and Adam state across steps"""

    def __init__(self, groups: Sequence[ParamGroup], state: Optional[AdamState] = None):
        """
        Initialize optimizer

        Args:
            groups: Parameter groups to update
            state: Existing state to resume from (optional)
        """
        self.groups = list(groups)
        self.state = state or AdamState()

    @property
    def trainable_names(self) -> List[str]:
        return [n for g in self.groups if not g.frozen for n in g.param_names]

    def step(self, params: Params, grads: Params) -> Params:
        new_params, self.state = adam_step(params, grads, self.state, self.groups)
        return new_params
