"""Scalar Gaussian numerics shared by the quantizers, detectors and threshold design.

``upper_tail`` is the Gaussian Q-function P(Z > x), *not* the CDF. Every
probability of exceedance in this package goes through it.
"""

import numpy as np
from scipy import special, stats

__all__ = [
    "upper_tail",
    "upper_tail_inverse",
    "normal_pdf",
    "g_func",
    "f_func",
]

_SQRT2 = np.sqrt(2.0)


def _finite(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def upper_tail(x):
    """Standard normal upper tail P(Z > x).

    Evaluated through ``erfc`` so that the relative accuracy holds far into
    the tail, where ``1 - cdf`` would cancel to zero.

    Parameters
    ----------
    x : float or array_like
        Finite argument(s).

    Returns
    -------
    float or ndarray
    """
    x = _finite(x)
    return _unwrap(0.5 * special.erfc(x / _SQRT2))


def upper_tail_inverse(p):
    """Inverse of :func:`upper_tail`, i.e. the x with P(Z > x) = p."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise ValueError("p must lie strictly inside (0, 1)")
    return _unwrap(stats.norm.isf(p))


def normal_pdf(x):
    x = _finite(x)
    return _unwrap(np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi))


def g_func(x):
    """(x^2 / 2 pi) exp(-x^2): numerator kernel of the 1-bit Fisher information."""
    x = _finite(x)
    return _unwrap(x * x / (2.0 * np.pi) * np.exp(-x * x))


def f_func(x, t, h_norm_sq, sigma0_sq, sigma_w_sq):
    """Standardize ``x`` by the H1 observation scale at sparsity ``t``.

    Returns ``x / sqrt(t * sigma0_sq * h_norm_sq + sigma_w_sq)``.
    """
    if np.any(np.asarray(sigma_w_sq) <= 0):
        raise ValueError("sigma_w_sq must be positive")
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(h_norm_sq) < 0) or np.any(np.asarray(sigma0_sq) < 0):
        raise ValueError("t, h_norm_sq and sigma0_sq must be nonnegative")
    x = _finite(x)
    return _unwrap(x / np.sqrt(t * sigma0_sq * h_norm_sq + sigma_w_sq))
