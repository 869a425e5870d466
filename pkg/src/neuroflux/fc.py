"""Functional connectivity: Pearson correlation, phase locking and coherence.

Each metric is computed per epoch (or, for coherence, from spectra pooled over
segments and epochs) and returned as a symmetric matrix with unit diagonal.
Inputs are a :class:`~neuroflux.pipeline.FusedEpochSet` or a plain
``epochs x channels x samples`` array.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .core import ConnectivityMatrix, Metric
from .dsp import analytic_signal
from .errors import BadBand, TooFewSegments, TooShort, ZeroVariance


def _unpack(f, fs=None):
    if hasattr(f, "fs_effective"):
        return np.asarray(f.data), f.fs_effective, f.labels
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    return arr, fs, None


def _symmetric(m):
    """Mirror the upper triangle so the result is exactly symmetric."""
    up = np.triu(m, 1)
    out = up + up.T
    np.fill_diagonal(out, 1.0)
    return out


def pcc(f, fisher=False):
    """Mean over epochs of the per-epoch Pearson correlation matrix.

    Parameters
    ----------
    f : FusedEpochSet or ndarray
    fisher : bool
        Average in Fisher-z space and transform back instead of averaging r.
    """
    x, _, labels = _unpack(f)
    if x.shape[-1] < 2:
        raise TooShort("PCC needs at least two samples per epoch")
    xc = x - x.mean(axis=-1, keepdims=True)
    # einsum keeps one summation order for every pair, so r(x, x) is exactly 1.
    g = np.einsum("eit,ejt->eij", xc, xc)
    d = np.einsum("eii->ei", g)
    if np.any(d <= 0):
        e, ch = np.argwhere(d <= 0)[0]
        raise ZeroVariance(f"channel {ch} has zero variance in epoch {e}", channel=int(ch),
                           epoch=int(e))
    norm = np.sqrt(d)
    r = np.clip(g / norm[:, :, None] / norm[:, None, :], -1.0, 1.0)
    if fisher:
        z = np.arctanh(np.clip(r, -1 + 1e-15, 1 - 1e-15))
        m = np.tanh(z.mean(axis=0))
    else:
        m = r.mean(axis=0)
    return ConnectivityMatrix(_symmetric(m), Metric.PCC, labels=labels)


def plv(f):
    """Phase locking value from analytic-signal phases, averaged over epochs."""
    x, _, labels = _unpack(f)
    u = analytic_signal(x)
    u = u / np.where(np.abs(u) == 0, 1.0, np.abs(u))
    t = x.shape[-1]
    c = np.einsum("eit,ejt->eij", u, np.conj(u)) / t
    m = np.clip(np.abs(c), 0.0, 1.0).mean(axis=0)
    return ConnectivityMatrix(_symmetric(m), Metric.PLV, labels=labels)


def welch_segments(x, seg_len, overlap):
    """Hann-windowed, mean-removed segments: ``(..., n_seg, seg_len)``."""
    step = seg_len - int(round(overlap * seg_len))
    if step < 1:
        raise TooFewSegments(f"overlap {overlap} leaves no step between segments")
    n = x.shape[-1]
    starts = np.arange(0, n - seg_len + 1, step)
    idx = starts[:, None] + np.arange(seg_len)[None, :]
    seg = x[..., idx]
    seg = seg - seg.mean(axis=-1, keepdims=True)
    return seg * signal.get_window("hann", seg_len)


def cross_spectra(f, seg_len=None, overlap=0.5, fs=None):
    """Welch cross-spectral matrices pooled over segments and epochs.

    Returns
    -------
    freqs : ndarray
    S : ndarray, shape (n_freqs, n, n)
        ``S[k, i, j] = sum X_i conj(X_j)`` (unnormalized).
    n_avg : int
        Number of segment spectra averaged.
    """
    x, fs_f, _ = _unpack(f, fs)
    fs = fs_f if fs is None else fs
    if seg_len is None:
        seg_len = x.shape[-1] // 4
    seg_len = int(seg_len)
    if seg_len < 2 or seg_len > x.shape[-1]:
        raise TooFewSegments(f"segment length {seg_len} invalid for {x.shape[-1]} samples")
    seg = welch_segments(x, seg_len, overlap)  # e, ch, s, t
    spec = np.fft.rfft(seg, axis=-1)
    S = np.einsum("eisk,ejsk->kij", spec, np.conj(spec))
    freqs = np.fft.rfftfreq(seg_len, d=1.0 / fs)
    return freqs, S, seg.shape[0] * seg.shape[2]


def msc(f, seg_len=None, overlap=0.5, band=None, fs=None):
    """Band-mean magnitude-squared coherence.

    Parameters
    ----------
    seg_len : int, optional
        Welch segment length, default a quarter of the epoch.
    overlap : float
        Fractional segment overlap.
    band : (float, float), optional
        Frequencies (Hz, inclusive) to average; default ``(0.01, 0.1 * fs)``.
    """
    x, fs_f, labels = _unpack(f, fs)
    fs = fs_f if fs is None else fs
    if band is None:
        band = (0.01, 0.1 * fs)
    lo, hi = band
    if not 0 < lo < hi < fs / 2:
        raise BadBand(f"band {band} not inside (0, {fs / 2}) Hz")
    freqs, S, n_avg = cross_spectra(x, seg_len, overlap, fs)
    if n_avg < 2:
        raise TooFewSegments(f"only {n_avg} spectral average(s); coherence would be 1")
    sel = (freqs >= lo) & (freqs <= hi)
    if not np.any(sel):
        raise BadBand(f"no frequency bins in {band} at resolution {freqs[1]:g} Hz")
    S = S[sel]
    auto = np.real(np.einsum("kii->ki", S))
    c = np.abs(S) ** 2 / (auto[:, :, None] * auto[:, None, :])
    m = np.clip(c, 0.0, 1.0).mean(axis=0)
    return ConnectivityMatrix(_symmetric(m), Metric.MSC, labels=labels)
