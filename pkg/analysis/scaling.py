"""
Scaling Function Module
Adapted-vs-reference filter centre frequencies and their warp slope
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from filterbank.filterbank_init import SincFilterbank

logger = logging.getLogger(__name__)


@dataclass
class ScalingFunction:
    """(reference centre, adapted centre) pairs ordered by reference centre"""
    reference: np.ndarray
    adapted: np.ndarray
    filter_index: np.ndarray
    speaker: Optional[str] = None

    def __len__(self) -> int:
        return len(self.reference)

    def pairs(self):
        return list(zip(self.reference.tolist(), self.adapted.tolist()))


def scaling_pairs(adapted: SincFilterbank, reference: SincFilterbank,
                  speaker: Optional[str] = None) -> ScalingFunction:
    """
    Match filters by index, then sort by reference centre frequency

    Args:
        adapted: Filterbank after adaptation
        reference: Unadapted filterbank (same filter order)
        speaker: Optional speaker tag

    Returns:
        ScalingFunction
    """
    if adapted.n_filters != reference.n_filters:
        raise ValueError(f"Filter count mismatch: adapted {adapted.n_filters}, "
                         f"reference {reference.n_filters}")
    ref_centres = reference.centres
    order = np.argsort(ref_centres, kind='stable')
    if np.any(np.diff(ref_centres[order]) <= 0):
        logger.warning("Reference centre frequencies are tied; scaling function is not strictly increasing")
    return ScalingFunction(ref_centres[order], adapted.centres[order], order, speaker)


def fit_alpha(s: ScalingFunction, f_lo: float, f_hi: float) -> float:
    """Least-squares slope through the origin of adapted vs reference centres in [f_lo, f_hi]"""
    mask = (s.reference >= f_lo) & (s.reference <= f_hi)
    if np.count_nonzero(mask) < 2:
        raise ValueError(f"Need at least 2 pairs in [{f_lo}, {f_hi}] Hz, "
                         f"found {int(np.count_nonzero(mask))}")
    x = s.reference[mask]
    y = s.adapted[mask]
    slope, _, _, _ = np.linalg.lstsq(x[:, None], y, rcond=None)
    return float(slope[0])
