"""Daubechies-2 discrete wavelet transform (Mallat cascade).

Boundaries use half-sample symmetric extension (``x1 x0 | x0 x1 ...``).
With a non-symmetric orthogonal filter this extension is only invertible
when the transform is slightly expansive, so each level keeps
``floor((n + 3) / 2)`` coefficients instead of ``ceil(n / 2)``; synthesis then
reproduces the input to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSeries
from .errors import BadLevel, BadLevels, TooShort

_S3 = np.sqrt(3.0)
# Scaling (reconstruction low-pass) filter of db2.
REC_LO = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * np.sqrt(2.0))
DEC_LO = REC_LO[::-1].copy()
REC_HI = np.array([(-1) ** k * REC_LO[len(REC_LO) - 1 - k] for k in range(len(REC_LO))])
DEC_HI = REC_HI[::-1].copy()
FILTER_LEN = len(REC_LO)


@dataclass(frozen=True)
class WaveletDecomposition:
    approx: np.ndarray
    details: tuple
    lengths: tuple
    fs: float = None
    wavelet: str = "db2"

    @property
    def levels(self):
        return len(self.details)

    @property
    def original_length(self):
        return self.lengths[0]

    def band(self, level):
        """Nominal frequency band (Hz) of detail `level`."""
        return self.fs / 2 ** (level + 1), self.fs / 2 ** level


def _analysis(x):
    n = x.shape[-1]
    ext = FILTER_LEN - 1
    widths = [(0, 0)] * (x.ndim - 1) + [(ext, ext)]
    xe = np.pad(x, widths, mode="symmetric")
    n_out = (n + FILTER_LEN - 1) // 2
    # Sliding windows over the extended signal; coefficient k reads
    # xe[2k+1 : 2k+1+L] against the time-reversed analysis filter.
    win = np.lib.stride_tricks.sliding_window_view(xe, FILTER_LEN, axis=-1)
    win = win[..., 1:1 + 2 * n_out:2, :]
    a = win @ DEC_LO[::-1]
    d = win @ DEC_HI[::-1]
    return a, d


def _synthesis(a, d, n):
    m = a.shape[-1]
    up_shape = a.shape[:-1] + (2 * m,)
    ua = np.zeros(up_shape)
    ud = np.zeros(up_shape)
    ua[..., ::2] = a
    ud[..., ::2] = d
    full_len = 2 * m + FILTER_LEN - 1
    y = np.zeros(a.shape[:-1] + (full_len,))
    for k in range(FILTER_LEN):
        y[..., k:k + 2 * m] += REC_LO[k] * ua + REC_HI[k] * ud
    start = FILTER_LEN - 2
    return y[..., start:start + n]


def max_level(n):
    """Deepest level whose input is still at least one filter long."""
    level = 0
    while n >= FILTER_LEN:
        n = (n + FILTER_LEN - 1) // 2
        level += 1
    return level


def dwt_decompose(x, levels, fs=None):
    """Multi-level db2 analysis along the last axis."""
    if isinstance(x, TimeSeries):
        arr, fs = np.asarray(x.samples), x.fs
    else:
        arr = np.asarray(x, dtype=float)
    if not isinstance(levels, (int, np.integer)) or levels < 1:
        raise BadLevels(f"levels must be a positive integer, got {levels}")
    lengths = [arr.shape[-1]]
    details = []
    a = arr
    for lev in range(levels):
        if a.shape[-1] < FILTER_LEN:
            raise TooShort(f"signal of length {arr.shape[-1]} too short for {levels} levels")
        a, d = _analysis(a)
        details.append(d)
        lengths.append(a.shape[-1])
    return WaveletDecomposition(a, tuple(details), tuple(lengths), fs)


def dwt_reconstruct(dec, keep_approx=True, keep_levels=None):
    """Synthesis from the selected coefficients (others treated as zero)."""
    keep = set(range(1, dec.levels + 1)) if keep_levels is None else set(keep_levels)
    a = dec.approx if keep_approx else np.zeros_like(dec.approx)
    for lev in range(dec.levels, 0, -1):
        d = dec.details[lev - 1]
        if lev not in keep:
            d = np.zeros_like(d)
        a = _synthesis(a, d, dec.lengths[lev - 1])
    return a


def dwt_component(dec, level):
    """Time-domain contribution of detail `level` alone."""
    if not isinstance(level, (int, np.integer)) or not 1 <= level <= dec.levels:
        raise BadLevel(f"level must be in 1..{dec.levels}, got {level}")
    out = dwt_reconstruct(dec, keep_approx=False, keep_levels=[level])
    if dec.fs is not None and out.ndim == 1:
        return TimeSeries(out, dec.fs)
    return out


def approx_component(dec):
    return dwt_reconstruct(dec, keep_approx=True, keep_levels=[])


def level_for_frequency(freq, fs):
    """Detail level whose nominal band (fs/2^(k+1), fs/2^k] contains `freq`."""
    if not 0 < freq <= fs / 2:
        raise BadLevel(f"{freq} Hz outside (0, {fs / 2}] Hz")
    level = 1
    while not fs / 2 ** (level + 1) < freq:
        level += 1
    return level
