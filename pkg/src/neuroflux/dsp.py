"""Generic signal processing.

Every operation works along the last axis, so the same call handles a single
:class:`~neuroflux.core.TimeSeries`, a channels x samples matrix or an
epochs x channels x samples block. Passing a ``TimeSeries`` returns a
``TimeSeries``; passing an array returns an array (``fs`` must then be given
where the operation needs it).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

from .core import TimeSeries
from .errors import (BadRatio, BadWindow, CutoffOutOfRange, RateMismatch, TooShort,
                     UnsupportedOrder, ZeroVariance)

MAX_ORDER = 20


def _unwrap(x, fs=None):
    if isinstance(x, TimeSeries):
        return np.asarray(x.samples), x.fs, lambda y, fs_out=x.fs: TimeSeries(y, fs_out, x.unit_label)
    return np.asarray(x, dtype=float), fs, lambda y, fs_out=None: y


# --- IIR design and filtering -------------------------------------------

@dataclass(frozen=True)
class FilterDesign:
    kind: str
    order: int
    cutoffs: tuple
    fs: float


@dataclass(frozen=True)
class FilterCascade:
    """Second-order sections in scipy's ``sos`` layout ``[b0 b1 b2 1 a1 a2]``."""

    sos: np.ndarray
    design: FilterDesign

    @property
    def sections(self):
        return [(s[0], s[1], s[2], s[4], s[5]) for s in self.sos]

    def poles(self):
        return np.concatenate([np.roots([1.0, s[4], s[5]]) for s in self.sos])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs):
        """Complex frequency response at `freqs` (Hz)."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(np.asarray(freqs, float)),
                               fs=self.design.fs)
        return h


def design_butterworth(kind, order, cutoffs, fs):
    """Digital Butterworth filter as a cascade of biquads.

    For ``kind="bandpass"`` the total order is `order` (so ``order // 2``
    prototype poles), which keeps one biquad per pole pair.
    """
    kind = kind.lower()
    if kind not in ("lowpass", "bandpass"):
        raise UnsupportedOrder(f"unsupported filter kind {kind!r}")
    if not isinstance(order, (int, np.integer)) or order < 1 or order > MAX_ORDER:
        raise UnsupportedOrder(f"order must be an integer in 1..{MAX_ORDER}, got {order}")
    cut = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    nyq = fs / 2.0
    if kind == "lowpass":
        if cut.size != 1:
            raise CutoffOutOfRange("lowpass needs exactly one cutoff")
        proto_order = int(order)
    else:
        if cut.size != 2:
            raise CutoffOutOfRange("bandpass needs two cutoffs")
        if order % 2:
            raise UnsupportedOrder(f"bandpass order must be even, got {order}")
        if not cut[0] < cut[1]:
            raise CutoffOutOfRange(f"band edges must increase, got {tuple(cut)}")
        proto_order = int(order) // 2
    if np.any(cut <= 0) or np.any(cut >= nyq):
        raise CutoffOutOfRange(f"cutoffs {tuple(cut)} Hz outside (0, {nyq}) Hz")
    wn = cut[0] if kind == "lowpass" else cut
    sos = signal.butter(proto_order, wn, btype=kind, fs=fs, output="sos")
    return FilterCascade(sos, FilterDesign(kind, int(order), tuple(float(c) for c in cut), float(fs)))


def apply_filter(f, x, fs=None):
    """Causal cascade filtering (direct form II transposed), zero initial state."""
    arr, fs_in, wrap = _unwrap(x, fs)
    if fs_in is not None and not np.isclose(fs_in, f.design.fs, rtol=1e-12, atol=0):
        raise RateMismatch(f"signal at {fs_in} Hz, filter designed for {f.design.fs} Hz")
    return wrap(signal.sosfilt(f.sos, arr, axis=-1))


# --- smoothing -----------------------------------------------------------

def savitzky_golay(x, window=11, polyorder=3):
    """Least-squares polynomial smoothing; edges use the first/last full window fit."""
    arr, _, wrap = _unwrap(x)
    if (not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0
            or polyorder >= window or polyorder < 0 or window > arr.shape[-1]):
        raise BadWindow(f"window={window}, polyorder={polyorder}, length={arr.shape[-1]}")
    return wrap(signal.savgol_filter(arr, window, polyorder, axis=-1, mode="interp"))


# --- rational resampling ---------------------------------------------------

KAISER_BETA = 8.0
TAPS_FACTOR = 10


def _polyphase_filter(up, down):
    half = TAPS_FACTOR * max(up, down)
    h = signal.firwin(2 * half + 1, 1.0 / max(up, down), window=("kaiser", KAISER_BETA))
    # Unit DC gain per polyphase branch: constants pass exactly at any ratio.
    h = h.copy()
    for r in range(up):
        h[r::up] /= h[r::up].sum()
    return h, half


def resample(x, up, down, fs=None):
    """Polyphase windowed-sinc resampling by ``up/down``.

    The anti-alias cutoff is ``min(pi/up, pi/down)``. The filter delay is
    removed, so sample ``k`` of the output sits at time ``k * down / up`` input
    samples. Ends are padded with the edge values before filtering.
    """
    if (not isinstance(up, (int, np.integer)) or not isinstance(down, (int, np.integer))
            or up < 1 or down < 1):
        raise BadRatio(f"up and down must be positive integers, got {up}/{down}")
    arr, fs_in, wrap = _unwrap(x, fs)
    g = gcd(int(up), int(down))
    up, down = int(up) // g, int(down) // g
    fs_out = None if fs_in is None else fs_in * up / down
    n = arr.shape[-1]
    if up == down:
        return wrap(arr.copy(), fs_out)
    n_out = -(-n * up // down)
    h, half = _polyphase_filter(up, down)
    # Pad by enough input samples to cover the filter support on both sides.
    pad = -(-half // up) + 1
    widths = [(0, 0)] * (arr.ndim - 1) + [(pad, pad)]
    xp = np.pad(arr, widths, mode="edge")
    # Output sample k must read upsampled index (pad*up + k*down) + half;
    # leading zeros on h move that index onto the decimation grid.
    start = pad * up + half
    shift = (-start) % down
    h = np.concatenate([np.zeros(shift), h])
    y = signal.upfirdn(h, xp, up=up, down=down, axis=-1)
    j0 = (start + shift) // down
    return wrap(np.take(y, j0 + np.arange(n_out), axis=-1), fs_out)


def rational_ratio(fs_in, fs_out, max_denominator=1000):
    """``(up, down)`` with ``fs_in * up / down == fs_out`` (approximately)."""
    frac = Fraction(fs_out / fs_in).limit_denominator(max_denominator)
    return frac.numerator, frac.denominator


def resample_to_length(x, length):
    """Resample along the last axis onto exactly `length` samples.

    Uses :func:`resample` with a rational approximation of the length ratio and
    a final linear interpolation to land on the exact length.
    """
    arr = np.asarray(x, dtype=float)
    n = arr.shape[-1]
    if n == length:
        return arr.copy()
    frac = Fraction(length, n).limit_denominator(1000)
    y = resample(arr, frac.numerator, frac.denominator)
    if y.shape[-1] == length:
        return y
    m = y.shape[-1]
    src = np.linspace(0.0, 1.0, m)
    dst = np.linspace(0.0, 1.0, length)
    flat = y.reshape(-1, m)
    out = np.stack([np.interp(dst, src, row) for row in flat])
    return out.reshape(arr.shape[:-1] + (length,))


# --- analytic signal ------------------------------------------------------

def analytic_signal(x):
    """FFT construction: keep DC (and Nyquist), double positive, zero negative bins."""
    arr, _, _ = _unwrap(x)
    n = arr.shape[-1]
    if n < 4:
        raise TooShort(f"analytic signal needs at least 4 samples, got {n}")
    spec = sp_fft.fft(arr, axis=-1)
    w = np.zeros(n)
    w[0] = 1.0
    if n % 2 == 0:
        w[n // 2] = 1.0
        w[1:n // 2] = 2.0
    else:
        w[1:(n + 1) // 2] = 2.0
    return sp_fft.ifft(spec * w, axis=-1)


def envelope(x):
    arr, _, wrap = _unwrap(x)
    return wrap(np.abs(analytic_signal(arr)))


# --- normalization --------------------------------------------------------

def zscore(x, rtol=1e-8):
    """Remove the mean and scale to unit sample standard deviation (ddof=1).

    A series counts as constant when its standard deviation is at most `rtol`
    times its largest absolute value.
    """
    arr, _, wrap = _unwrap(x)
    if arr.shape[-1] < 2:
        raise ZeroVariance("need at least two samples")
    mu = arr.mean(axis=-1, keepdims=True)
    sd = arr.std(axis=-1, ddof=1, keepdims=True)
    scale = np.max(np.abs(arr), axis=-1, keepdims=True)
    flat = sd <= rtol * scale
    if np.any(flat):
        raise ZeroVariance("constant signal cannot be z-scored")
    z = (arr - mu) / sd
    # One refinement pass pins mean/std to rounding level.
    z = z - z.mean(axis=-1, keepdims=True)
    z = z / z.std(axis=-1, ddof=1, keepdims=True)
    return wrap(z)


def degenerate_mask(arr, rtol=1e-8):
    """True where a series along the last axis would fail :func:`zscore`."""
    arr = np.asarray(arr, dtype=float)
    sd = arr.std(axis=-1, ddof=1)
    scale = np.max(np.abs(arr), axis=-1)
    return sd <= rtol * scale
