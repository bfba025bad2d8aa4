"""
LHUC Module
Per-channel hidden unit scalers at the sinc output and the first convolution output
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from nnet.layers import scale_channels_forward
from nnet.model import LHUC_SITES, Model, lhuc_site_channels

logger = logging.getLogger(__name__)


@dataclass
class LhucScalers:
    """One multiplicative scaler per channel at an attachment site"""
    site: str
    values: np.ndarray

    def __post_init__(self):
        if self.site not in LHUC_SITES:
            raise ValueError(f"Unknown LHUC site '{self.site}' (expected one of {list(LHUC_SITES)})")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"LHUC values must be a vector, got shape {self.values.shape}")

    @classmethod
    def ones(cls, site: str, channels: int) -> 'LhucScalers':
        return cls(site, np.ones(channels))

    @property
    def param_name(self) -> str:
        return LHUC_SITES[self.site]


def apply_lhuc(y: np.ndarray, r: Union[LhucScalers, np.ndarray]) -> np.ndarray:
    """Multiply channel i of y ((channels, time) or (batch, channels, time)) by r[i]"""
    values = r.values if isinstance(r, LhucScalers) else r
    return scale_channels_forward(y, values)[0]


def attach_lhuc(model: Model, site: str) -> Model:
    """
    Attach scalers initialized to 1.0 at a site (no-op if already attached)

    Returns:
        The same model
    """
    channels = lhuc_site_channels(model.spec)
    if site not in LHUC_SITES:
        raise ValueError(f"Unknown LHUC site '{site}' (expected one of {list(LHUC_SITES)})")
    if site not in channels:
        raise ValueError(f"Model has no {site} to attach LHUC scalers to")
    name = LHUC_SITES[site]
    if name not in model.params:
        model.params[name] = LhucScalers.ones(site, channels[site]).values
        logger.info(f"Attached LHUC scalers at {site} ({channels[site]} channels)")
    return model


def detach_lhuc(model: Model, site: str) -> Model:
    model.params.pop(LHUC_SITES[site], None)
    return model


def get_lhuc(model: Model, site: str) -> LhucScalers:
    name = LHUC_SITES[site]
    if name not in model.params:
        raise ValueError(f"No LHUC scalers attached at {site}")
    return LhucScalers(site, model.params[name])
