"""
Sinc Filter Kernels
Windowed ideal band-pass kernels and their cut-off frequency derivatives
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SincFilter:
    """Rectangular band-pass filter defined by its two cut-off frequencies (Hz)"""
    f_low: float
    f_high: float

    @property
    def centre(self) -> float:
        return 0.5 * (self.f_low + self.f_high)


def sinc_eval(x):
    """
    Unnormalized sinc, sin(x)/x, with the removable singularity filled in

    Args:
        x: Scalar or array of finite reals

    Returns:
        float for scalar input, ndarray otherwise
    """
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x == 0.0, 1.0, x)
    out = np.where(x == 0.0, 1.0, np.sin(safe) / safe)
    if out.ndim == 0:
        return float(out)
    return out


def _check_length(L: int):
    if int(L) != L or L < 1 or L % 2 == 0:
        raise ValueError(f"Filter length must be a positive odd integer, got {L}")


def _check_band(f_low, f_high, sr: float):
    f_low = np.asarray(f_low, dtype=np.float64)
    f_high = np.asarray(f_high, dtype=np.float64)
    if sr <= 0:
        raise ValueError(f"Sample rate must be positive, got {sr}")
    if not (np.all(np.isfinite(f_low)) and np.all(np.isfinite(f_high))):
        raise ValueError("Cut-off frequencies must be finite")
    if np.any(f_low < 0) or np.any(f_high < f_low) or np.any(f_high > sr / 2.0):
        raise ValueError(
            f"Cut-offs must satisfy 0 <= f_low <= f_high <= sr/2 ({sr / 2.0} Hz)"
        )


def symmetric_index(L: int) -> np.ndarray:
    """Time index -(L-1)/2 ... +(L-1)/2 for an odd length L"""
    _check_length(L)
    half = (L - 1) // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def hamming_window(L: int) -> np.ndarray:
    """
    Hamming window exactly as w[n] = 0.54 - 0.46 cos(2 pi n / L), n = 0..L-1

    Args:
        L: Window length (>= 2)

    Returns:
        Window of length L
    """
    if int(L) != L or L < 2:
        raise ValueError(f"Window length must be >= 2, got {L}")
    n = np.arange(L, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / L)


def centred_hamming_window(L: int) -> np.ndarray:
    """
    The same window read at n = m + L/2 for the symmetric index m

    The maximum multiplies the centre tap and the result is exactly even.
    """
    m = np.abs(symmetric_index(L))
    return 0.54 + 0.46 * np.cos(2.0 * np.pi * m / L)


def _ideal_kernels(f_low: np.ndarray, f_high: np.ndarray, L: int, sr: float) -> np.ndarray:
    """Ideal kernels for arrays of cut-offs, shape (N, L)"""
    n = np.abs(symmetric_index(L))[None, :]
    fl = (np.atleast_1d(f_low) / sr)[:, None]
    fh = (np.atleast_1d(f_high) / sr)[:, None]
    return (2.0 * fh * sinc_eval(2.0 * np.pi * fh * n)
            - 2.0 * fl * sinc_eval(2.0 * np.pi * fl * n))


def windowed_kernels(f_low: np.ndarray, f_high: np.ndarray, L: int, sr: float) -> np.ndarray:
    """Windowed kernels for arrays of cut-offs, shape (N, L)"""
    return _ideal_kernels(f_low, f_high, L, sr) * centred_hamming_window(L)[None, :]


def windowed_kernel_partials(f_low: np.ndarray, f_high: np.ndarray, L: int,
                             sr: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partials of the windowed kernels w.r.t. the cut-offs in Hz, each (N, L)

    d/df [2 f sinc(2 pi f n)] = 2 cos(2 pi f n), with f normalized by sr.
    """
    n = np.abs(symmetric_index(L))[None, :]
    w = centred_hamming_window(L)[None, :]
    fl = (np.atleast_1d(f_low) / sr)[:, None]
    fh = (np.atleast_1d(f_high) / sr)[:, None]
    d_low = -2.0 * np.cos(2.0 * np.pi * fl * n) * w / sr
    d_high = 2.0 * np.cos(2.0 * np.pi * fh * n) * w / sr
    return d_low, d_high


def ideal_kernel(f: SincFilter, L: int, sr: float) -> np.ndarray:
    """
    Ideal band-pass kernel as the difference of two low-pass sinc kernels

    Args:
        f: Filter cut-offs in Hz
        L: Odd kernel length
        sr: Sample rate in Hz

    Returns:
        Even-symmetric kernel of length L
    """
    _check_length(L)
    _check_band(f.f_low, f.f_high, sr)
    return _ideal_kernels(np.array([f.f_low]), np.array([f.f_high]), L, sr)[0]


def windowed_kernel(f: SincFilter, L: int, sr: float) -> np.ndarray:
    """Ideal kernel multiplied by the centred Hamming window"""
    _check_length(L)
    _check_band(f.f_low, f.f_high, sr)
    return windowed_kernels(np.array([f.f_low]), np.array([f.f_high]), L, sr)[0]


def kernel_partials(f: SincFilter, L: int, sr: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Analytic derivatives of the windowed kernel w.r.t. f_low and f_high (Hz)

    Returns:
        Tuple (d_kernel/d_f_low, d_kernel/d_f_high), each of length L
    """
    _check_length(L)
    _check_band(f.f_low, f.f_high, sr)
    d_low, d_high = windowed_kernel_partials(np.array([f.f_low]), np.array([f.f_high]), L, sr)
    return d_low[0], d_high[0]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def frequency_response(kernel: np.ndarray, n_fft: int) -> np.ndarray:
    """
    Magnitude of the DFT of the zero-padded kernel

    Args:
        kernel: Real kernel
        n_fft: DFT size, a power of two not shorter than the kernel

    Returns:
        Magnitudes for bins 0..n_fft/2
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if n_fft < kernel.shape[-1]:
        raise ValueError(f"n_fft ({n_fft}) shorter than kernel ({kernel.shape[-1]})")
    if not _is_power_of_two(int(n_fft)):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    return np.abs(np.fft.rfft(kernel, n=int(n_fft), axis=-1))
