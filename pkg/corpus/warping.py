"""
Frequency Warping Module
Piecewise-linear VTLN-style frequency warp
"""

import numpy as np

KNEE_RATIO = 0.85


def warp_knee(alpha: float, f_nyq: float) -> float:
    """Knee frequency 0.85 * f_nyq / max(alpha, 1)"""
    return KNEE_RATIO * f_nyq / max(alpha, 1.0)


def warp_alpha(f, alpha: float, f_nyq: float):
    """
    Warp frequencies: alpha * f up to the knee, then the straight line to (f_nyq, f_nyq)

    Args:
        f: Frequency or array of frequencies in [0, f_nyq]
        alpha: Warp factor (> 0)
        f_nyq: Nyquist frequency

    Returns:
        Warped frequency (same shape as f)
    """
    if alpha <= 0:
        raise ValueError(f"Warp factor must be positive, got {alpha}")
    freqs = np.asarray(f, dtype=np.float64)
    if np.any(freqs < 0) or np.any(freqs > f_nyq):
        raise ValueError(f"Frequency out of range [0, {f_nyq}]: {f}")
    knee = warp_knee(alpha, f_nyq)
    upper = alpha * knee + (f_nyq - alpha * knee) * (freqs - knee) / (f_nyq - knee)
    warped = np.where(freqs <= knee, alpha * freqs, upper)
    return float(warped) if warped.ndim == 0 else warped
