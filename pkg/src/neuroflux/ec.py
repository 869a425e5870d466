"""MVAR fitting and the directed spectral measures gPDC and dDTF.

The model is ``x(t) = sum_k A_k x(t-k) + w(t)`` with ``cov(w) = sigma``. In
the frequency domain

    Abar(f) = I - sum_k A_k exp(-i 2 pi f k / fs),  H(f) = Abar(f)^-1,
    S(f) = H(f) sigma H(f)^*.

Matrix element ``[i, j]`` of every measure is the influence of source ``j`` on
sink ``i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import ConnectivityMatrix, Metric
from .errors import (BadBand, BadOrder, InsufficientData, MetricMismatch, SingularAbar,
                     SingularSpectrum, UnstableModelWarning, ZeroNoiseVariance)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class MvarModel:
    """Fitted (or specified) MVAR model.

    Attributes
    ----------
    A : ndarray, shape (p, n, n)
        ``A[k-1]`` multiplies ``x(t-k)``.
    sigma : ndarray, shape (n, n)
        Innovation covariance.
    fs : float
    n_samples_used : int
        Number of regression targets.
    """

    A: np.ndarray
    sigma: np.ndarray
    fs: float = 1.0
    n_samples_used: int = 0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 2:
            A = A[None]
        sigma = np.array(self.sigma, dtype=float)
        A.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def companion(self):
        p, n = self.p, self.n
        c = np.zeros((n * p, n * p))
        c[:n, :] = np.concatenate(list(self.A), axis=1)
        c[n:, :-n] = np.eye(n * (p - 1))
        return c

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    @property
    def stable(self):
        return self.spectral_radius < 1.0

    def to_dict(self):
        return {"p": self.p, "A": self.A.tolist(), "sigma": self.sigma.tolist(),
                "fs": self.fs, "n_samples_used": self.n_samples_used,
                "spectral_radius": self.spectral_radius}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A"]), np.asarray(d["sigma"]), d["fs"], d["n_samples_used"])


def _epochs(data, fs=None):
    if hasattr(data, "fs_effective"):
        return np.asarray(data.data), data.fs_effective
    if hasattr(data, "data") and hasattr(data, "fs"):
        arr = np.asarray(data.data)
        return (arr[None] if arr.ndim == 2 else arr), data.fs
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    return arr, 1.0 if fs is None else fs


def _design(x, p, p_lag=None):
    """Pooled regression ``Y = Z B``; targets start at ``p_lag`` in every epoch."""
    p_lag = p if p_lag is None else p_lag
    e, n, t = x.shape
    rows = t - p_lag
    Y = x[:, :, p_lag:].transpose(0, 2, 1).reshape(e * rows, n)
    Z = np.concatenate([x[:, :, p_lag - k:t - k].transpose(0, 2, 1) for k in range(1, p + 1)],
                       axis=2).reshape(e * rows, n * p)
    return Y, Z


def _solve_ls(Z, Y):
    """Least squares via Cholesky-solved normal equations, QR if ill-conditioned."""
    G = Z.T @ Z
    try:
        c = linalg.cho_factor(G)
        if np.linalg.cond(G) < 1e10:
            return linalg.cho_solve(c, Z.T @ Y)
    except linalg.LinAlgError:
        pass
    return np.linalg.lstsq(Z, Y, rcond=None)[0]


def _check_order(p):
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise BadOrder(f"model order must be a positive integer, got {p}")


def fit_mvar(data, p, fs=None, warn=True):
    """Multi-trial least-squares MVAR fit without intercept.

    Parameters
    ----------
    data : FusedEpochSet, MultichannelSeries or array
        ``epochs x channels x samples`` (a 2-D array is one epoch).
    p : int
        Model order.

    Returns
    -------
    MvarModel
        ``sigma`` is the residual covariance (divided by the number of
        targets). An unstable fit is returned with an
        :class:`UnstableModelWarning`.
    """
    _check_order(p)
    x, fs = _epochs(data, fs)
    e, n, t = x.shape
    usable = e * max(t - p, 0)
    if usable < 10 * n * p:
        raise InsufficientData(f"{usable} usable samples < 10*n*p = {10 * n * p}")
    Y, Z = _design(x, p)
    B = _solve_ls(Z, Y)
    res = Y - Z @ B
    sigma = res.T @ res / res.shape[0]
    sigma = (sigma + sigma.T) / 2
    A = B.T.reshape(n, p, n).transpose(1, 0, 2)
    model = MvarModel(A, sigma, fs, res.shape[0])
    if warn and not model.stable:
        warnings.warn(f"fitted MVAR(p={p}) has spectral radius {model.spectral_radius:.4f}",
                      UnstableModelWarning, stacklevel=2)
    return model


def information_criteria(data, p_max, fs=None):
    """SBC and AIC for orders 1..p_max on a common set of targets."""
    _check_order(p_max)
    x, _ = _epochs(data, fs)
    e, n, t = x.shape
    if e * max(t - p_max, 0) < 10 * n * p_max:
        raise InsufficientData(f"too few samples for orders up to {p_max}")
    Y, Z = _design(x, p_max)
    N = Y.shape[0]
    sbc, aic = [], []
    for p in range(1, p_max + 1):
        Zp = Z[:, :n * p]
        B = _solve_ls(Zp, Y)
        res = Y - Zp @ B
        _, logdet = np.linalg.slogdet(res.T @ res / N)
        k = p * n * n
        sbc.append(logdet + np.log(N) * k / N)
        aic.append(logdet + 2.0 * k / N)
    return np.array(sbc), np.array(aic)


def max_order(data, fs=None):
    """Largest order whose fit still has ``10 * n * p`` usable samples."""
    x, _ = _epochs(data, fs)
    e, n, t = x.shape
    p = (e * t) // (10 * n + e)
    while p > 0 and e * (t - p) < 10 * n * p:
        p -= 1
    return int(p)


def select_order(data, p_max, criterion="SBC", fs=None, clip=False):
    """Order in 1..p_max minimizing the criterion (smallest on ties).

    With ``clip=True`` the search stops at :func:`max_order` when the data
    cannot support `p_max`.
    """
    _check_order(p_max)
    if clip:
        cap = max_order(data, fs)
        if cap < 1:
            raise InsufficientData("too few samples for an order-1 model")
        p_max = min(p_max, cap)
    sbc, aic = information_criteria(data, p_max, fs)
    crit = {"SBC": sbc, "BIC": sbc, "AIC": aic}[str(criterion).upper()]
    return int(np.argmin(crit)) + 1


# --- spectral machinery ------------------------------------------------------

@dataclass(frozen=True)
class SpectralSet:
    freqs: np.ndarray
    Abar: np.ndarray
    H: np.ndarray
    S: np.ndarray
    fs: float


def abar(model, freqs):
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    k = np.arange(1, model.p + 1)
    ph = np.exp(-2j * np.pi * np.outer(freqs, k) / model.fs)
    return np.eye(model.n)[None] - np.einsum("fk,kij->fij", ph, model.A)


def spectra_at(model, freqs):
    """Abar, H and S on an arbitrary frequency grid (0 and Nyquist allowed)."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    Ab = abar(model, freqs)
    cond = np.linalg.cond(Ab)
    bad = np.flatnonzero(~(cond < COND_LIMIT))
    if bad.size:
        raise SingularAbar(float(freqs[bad[0]]))
    H = np.linalg.inv(Ab)
    S = H @ model.sigma @ np.conj(np.swapaxes(H, 1, 2))
    S = (S + np.conj(np.swapaxes(S, 1, 2))) / 2
    return SpectralSet(freqs, Ab, H, S, model.fs)


def spectra(model, n_freqs=64, band=(0.01, 1.0)):
    """Spectral matrices on ``n_freqs`` uniform points spanning `band`."""
    lo, hi = band
    if not 0 < lo < hi < model.fs / 2:
        raise BadBand(f"band {band} not inside (0, {model.fs / 2}) Hz")
    if n_freqs < 2:
        raise BadBand("need at least two frequencies")
    return spectra_at(model, np.linspace(lo, hi, int(n_freqs)))


def _band_mean(values, freqs, band):
    if band is None:
        return values.mean(axis=0)
    sel = (freqs >= band[0] - 1e-12) & (freqs <= band[1] + 1e-12)
    if not np.any(sel):
        raise BadBand(f"no evaluated frequency in {band}")
    return values[sel].mean(axis=0)


def gpdc_spectrum(s, sigma):
    """gPDC per frequency, shape ``(n_freqs, n, n)``; columns have unit norm."""
    var = np.diag(np.asarray(sigma, dtype=float))
    if np.any(var <= 0):
        raise ZeroNoiseVariance(f"innovation variance not positive: {var}")
    w = np.abs(s.Abar) / np.sqrt(var)[None, :, None]
    return w / np.sqrt(np.sum(w ** 2, axis=1, keepdims=True))


def gpdc(s, model, band=None):
    """Band-mean generalized partial directed coherence."""
    return ConnectivityMatrix(_band_mean(gpdc_spectrum(s, model.sigma), s.freqs, band),
                              Metric.GPDC)


def ffdtf_spectrum(s):
    """Full-frequency DTF, normalized per row over all evaluated frequencies."""
    h2 = np.abs(s.H) ** 2
    return np.sqrt(h2 / h2.sum(axis=(0, 2))[None, :, None])


def partial_coherence_spectrum(s):
    """|M_ij| / sqrt(M_ii M_jj) with ``M = S^-1``."""
    cond = np.linalg.cond(s.S)
    bad = np.flatnonzero(~(cond < COND_LIMIT))
    if bad.size:
        raise SingularSpectrum(float(s.freqs[bad[0]]))
    M = np.linalg.inv(s.S)
    d = np.real(np.einsum("fii->fi", M))
    return np.abs(M) / np.sqrt(d[:, :, None] * d[:, None, :])


def ddtf_spectrum(s):
    return ffdtf_spectrum(s) * partial_coherence_spectrum(s)


def ddtf(s, band=None):
    """Band-mean direct DTF (ffDTF weighted by partial coherence)."""
    return ConnectivityMatrix(np.clip(_band_mean(ddtf_spectrum(s), s.freqs, band), 0, 1),
                              Metric.DDTF)


def group_mean(matrices):
    """Elementwise mean of same-metric, same-size matrices."""
    matrices = list(matrices)
    if not matrices:
        raise MetricMismatch("no matrices to average")
    first = matrices[0]
    for m in matrices[1:]:
        if m.metric != first.metric or m.values.shape != first.values.shape:
            raise MetricMismatch(f"cannot average {first.metric.value} with {m.metric.value}")
    vals = np.mean([m.values for m in matrices], axis=0)
    if not first.directed:
        vals = (np.triu(vals, 1) + np.triu(vals, 1).T) + np.diag(np.diag(vals))
    return ConnectivityMatrix(vals, first.metric, first.directed, first.labels)


def cross_modal_flow(matrix, n_eeg=9):
    """Mean EEG-to-fNIRS and fNIRS-to-EEG entries of a directed matrix.

    Regions ``0..n_eeg-1`` are EEG, the rest fNIRS; entry ``[i, j]`` is the
    influence of source ``j`` on sink ``i``.

    Returns
    -------
    (float, float)
        ``(eeg_to_fnirs, fnirs_to_eeg)``.
    """
    v = np.asarray(getattr(matrix, "values", matrix), dtype=float)
    return float(v[n_eeg:, :n_eeg].mean()), float(v[:n_eeg, n_eeg:].mean())
