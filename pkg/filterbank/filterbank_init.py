"""
Filterbank Initialization Module
Sinc filterbank container, initialization schemes, constraints and serialization
"""

import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from . import config
from .sinc_filters import SincFilter, windowed_kernels, _check_length

logger = logging.getLogger(__name__)


def mel_scale(f):
    """Hz to mel: 2595 log10(1 + f/700)"""
    return config.MEL_FACTOR * np.log10(1.0 + np.asarray(f, dtype=np.float64) / config.MEL_BREAK_HZ)


def inverse_mel_scale(m):
    """Mel to Hz"""
    return config.MEL_BREAK_HZ * (10.0 ** (np.asarray(m, dtype=np.float64) / config.MEL_FACTOR) - 1.0)


def frequency_limits(sample_rate: float) -> Tuple[float, float]:
    """
    Initialization range (f_min, f_max) for a sample rate

    f_max = sr/2 - (f_min + b)
    """
    f_min = config.F_MIN_HZ
    return f_min, sample_rate / 2.0 - (f_min + config.MIN_BAND_HZ)


@dataclass(frozen=True)
class InitScheme:
    """Filterbank initialization scheme: mel, uniform (seeded) or flat"""
    kind: str
    seed: Optional[int] = None

    KINDS = ('mel', 'uniform', 'flat')

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in self.KINDS:
            raise ValueError(f"Unknown init scheme '{self.kind}' (expected one of {self.KINDS})")
        object.__setattr__(self, 'kind', kind)
        if kind == 'uniform' and self.seed is None:
            raise ValueError("Uniform init requires an explicit seed")

    @classmethod
    def mel(cls) -> 'InitScheme':
        return cls('mel')

    @classmethod
    def uniform(cls, seed: int) -> 'InitScheme':
        return cls('uniform', int(seed))

    @classmethod
    def flat(cls) -> 'InitScheme':
        return cls('flat')

    @classmethod
    def from_dict(cls, data: Dict) -> 'InitScheme':
        return cls(data.get('scheme', 'mel'), data.get('seed'))

    def to_dict(self) -> Dict:
        return {'scheme': self.kind, 'seed': self.seed}


class SincFilterbank:
    """
    Ordered set of sinc band-pass filters sharing one length and sample rate

    Cut-offs are kept as two float64 arrays; `filters` gives the per-filter view.
    Instances are treated as immutable: the arrays are read-only and every
    transformation returns a new filterbank.
    """

    def __init__(self, f_low: Iterable[float], f_high: Iterable[float], filter_length: int,
                 sample_rate: int, gains: Optional[Iterable[float]] = None):
        """
        Initialize filterbank

        Args:
            f_low: Lower cut-offs in Hz
            f_high: Upper cut-offs in Hz
            filter_length: Odd kernel length L
            sample_rate: Sample rate in Hz
            gains: Per-filter output gains (default all 1.0)
        """
        _check_length(filter_length)
        f_low = np.array(f_low, dtype=np.float64).reshape(-1)
        f_high = np.array(f_high, dtype=np.float64).reshape(-1)
        if f_low.shape != f_high.shape:
            raise ValueError(f"Cut-off arrays differ in length: {f_low.size} vs {f_high.size}")
        if gains is None:
            gains = np.ones_like(f_low)
        gains = np.array(gains, dtype=np.float64).reshape(-1)
        if gains.shape != f_low.shape:
            raise ValueError(f"Expected {f_low.size} gains, got {gains.size}")
        for arr in (f_low, f_high, gains):
            arr.setflags(write=False)
        self.f_low = f_low
        self.f_high = f_high
        self.gains = gains
        self.filter_length = int(filter_length)
        self.sample_rate = int(sample_rate)

    @classmethod
    def from_filters(cls, filters: Iterable[SincFilter], filter_length: int, sample_rate: int,
                     gains: Optional[Iterable[float]] = None) -> 'SincFilterbank':
        filters = list(filters)
        return cls([f.f_low for f in filters], [f.f_high for f in filters],
                   filter_length, sample_rate, gains)

    @property
    def filters(self) -> Tuple[SincFilter, ...]:
        return tuple(SincFilter(float(lo), float(hi)) for lo, hi in zip(self.f_low, self.f_high))

    @property
    def n_filters(self) -> int:
        return int(self.f_low.size)

    @property
    def centres(self) -> np.ndarray:
        return 0.5 * (self.f_low + self.f_high)

    def with_edges(self, f_low, f_high) -> 'SincFilterbank':
        return SincFilterbank(f_low, f_high, self.filter_length, self.sample_rate, self.gains)

    def with_gains(self, gains) -> 'SincFilterbank':
        return SincFilterbank(self.f_low, self.f_high, self.filter_length, self.sample_rate, gains)

    def satisfies_constraints(self) -> bool:
        nyquist = self.sample_rate / 2.0
        return bool(np.all(self.f_low >= config.F_MIN_HZ)
                    and np.all(self.f_high >= self.f_low + config.MIN_BAND_HZ)
                    and np.all(self.f_high <= nyquist))

    def equals(self, other: 'SincFilterbank') -> bool:
        """Bit-level equality of all fields"""
        return (self.filter_length == other.filter_length
                and self.sample_rate == other.sample_rate
                and np.array_equal(self.f_low, other.f_low)
                and np.array_equal(self.f_high, other.f_high)
                and np.array_equal(self.gains, other.gains))

    def __repr__(self):
        return (f"SincFilterbank(n_filters={self.n_filters}, filter_length={self.filter_length}, "
                f"sample_rate={self.sample_rate})")


def constrain_edges(f_low: np.ndarray, f_high: np.ndarray,
                    sample_rate: float) -> Tuple[np.ndarray, np.ndarray]:
    """Project raw cut-off arrays onto the feasible set"""
    nyquist = sample_rate / 2.0
    b = config.MIN_BAND_HZ
    f_low = np.clip(np.asarray(f_low, dtype=np.float64), config.F_MIN_HZ, nyquist - b)
    f_high = np.clip(np.asarray(f_high, dtype=np.float64), f_low + b, nyquist)
    return f_low, f_high


def constrain_filterbank(fb: SincFilterbank) -> SincFilterbank:
    """
    Clamp every filter so that f_min <= f_low <= sr/2 - b and f_low + b <= f_high <= sr/2

    Args:
        fb: Filterbank, possibly violating the constraints after an update

    Returns:
        Projected filterbank (gains untouched)
    """
    f_low, f_high = constrain_edges(fb.f_low, fb.f_high, fb.sample_rate)
    return fb.with_edges(f_low, f_high)


def init_filterbank(scheme: InitScheme, N: int, L: int, sr: int) -> SincFilterbank:
    """
    Build an initial filterbank

    Mel and uniform schemes produce contiguous bands: the upper edge of filter i
    is the lower edge of filter i+1, the first lower edge is f_min and the last
    upper edge is f_max. Flat gives every filter (f_min, f_min + b).

    Args:
        scheme: Initialization scheme
        N: Number of filters
        L: Odd filter length
        sr: Sample rate in Hz

    Returns:
        Constrained filterbank with unit gains
    """
    if N < 1:
        raise ValueError(f"Filterbank needs at least one filter, got N={N}")
    if sr <= 2.0 * (config.F_MIN_HZ + config.MIN_BAND_HZ):
        raise ValueError(f"Sample rate {sr} Hz too low for f_min={config.F_MIN_HZ} Hz "
                         f"and b={config.MIN_BAND_HZ} Hz")
    _check_length(L)
    f_min, f_max = frequency_limits(sr)

    if scheme.kind == 'mel':
        edges = inverse_mel_scale(np.linspace(mel_scale(f_min), mel_scale(f_max), N + 1))
        edges[0], edges[-1] = f_min, f_max
        f_low, f_high = edges[:-1], edges[1:]
    elif scheme.kind == 'uniform':
        rng = np.random.default_rng(scheme.seed)
        f_low = np.sort(rng.uniform(f_min, f_max, size=N))
        f_low[0] = f_min
        f_high = np.append(f_low[1:], f_max)
    else:
        f_low = np.full(N, f_min)
        f_high = np.full(N, f_min + config.MIN_BAND_HZ)

    fb = constrain_filterbank(SincFilterbank(f_low, f_high, L, sr))
    logger.info(f"Initialized {N} sinc filters ({scheme.kind}, L={L}, sr={sr})")
    return fb


def kernel_bank(fb: SincFilterbank) -> np.ndarray:
    """Gain-scaled windowed kernels of a filterbank, shape (N, L)"""
    return fb.gains[:, None] * windowed_kernels(fb.f_low, fb.f_high, fb.filter_length, fb.sample_rate)


def filterbank_to_dict(fb: SincFilterbank) -> Dict:
    return {
        'sample_rate': fb.sample_rate,
        'filter_length': fb.filter_length,
        'filters': [{'f_low_hz': float(lo), 'f_high_hz': float(hi)}
                    for lo, hi in zip(fb.f_low, fb.f_high)],
        'gains': [float(g) for g in fb.gains],
    }


def filterbank_from_dict(data: Dict) -> SincFilterbank:
    try:
        filters = data['filters']
        return SincFilterbank(
            [f['f_low_hz'] for f in filters],
            [f['f_high_hz'] for f in filters],
            int(data['filter_length']),
            int(data['sample_rate']),
            data.get('gains'),
        )
    except KeyError as e:
        raise ValueError(f"Filterbank JSON missing field: {e}")


def save_filterbank(fb: SincFilterbank, path: str):
    with open(path, 'w') as f:
        json.dump(filterbank_to_dict(fb), f, indent=2)
    logger.info(f"Filterbank saved: {path}")


def load_filterbank(path: str) -> SincFilterbank:
    with open(path, 'r') as f:
        return filterbank_from_dict(json.load(f))
