"""Ground-truth generators.

:func:`simulate_var` draws from a stable VAR process with known coefficients.
:func:`simulate_neurovascular` builds EEG-like and fNIRS-like recordings in
which hemodynamics follow the EEG alpha envelope through a double-gamma
response, so the true direction of influence is EEG to fNIRS.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal, stats

from .core import Channel, Condition, Modality, MultichannelSeries, RegionMap, StimulusClass
from .errors import UnstableSpec
from .io import Event
from .pipeline import SubjectRecording

BURN_IN = 1000


@dataclass(frozen=True)
class VarSpec:
    """VAR(p) process definition; ``A`` has shape ``(p, n, n)``."""

    A: np.ndarray
    sigma: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 2:
            A = A[None]
        n = A.shape[1]
        sigma = np.eye(n) if self.sigma is None else np.array(self.sigma, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def spectral_radius(self):
        p, n = self.p, self.n
        c = np.zeros((n * p, n * p))
        c[:n] = np.concatenate(list(self.A), axis=1)
        c[n:, :-n] = np.eye(n * (p - 1))
        return float(np.max(np.abs(np.linalg.eigvals(c))))

    def validate(self):
        if not self.spectral_radius < 1:
            raise UnstableSpec(f"companion spectral radius {self.spectral_radius:.4f} >= 1")
        try:
            np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as exc:
            raise UnstableSpec("noise covariance is not positive definite") from exc
        return self


def simulate_var(spec, N, fs=1.0, names=None, burn_in=BURN_IN):
    """Draw ``N`` samples (after `burn_in`) from the VAR process `spec`."""
    spec.validate()
    if N < 10 * spec.p:
        raise UnstableSpec(f"N={N} shorter than 10*p")
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n, spec.p
    total = N + burn_in
    w = rng.standard_normal((total, n)) @ np.linalg.cholesky(spec.sigma).T
    x = np.zeros((total + p, n))
    At = [a.T.copy() for a in spec.A]
    for t in range(total):
        acc = w[t].copy()
        for k in range(p):
            acc += x[t + p - 1 - k] @ At[k]
        x[t + p] = acc
    data = x[p + burn_in:].T
    names = names or [f"X{k + 1}" for k in range(n)]
    return MultichannelSeries(tuple(Channel(nm, Modality.EEG) for nm in names), data, fs)


def lyapunov_covariance(spec):
    """Stationary lag-0 covariance of a VAR(1) (discrete Lyapunov equation)."""
    from scipy.linalg import solve_discrete_lyapunov
    if spec.p != 1:
        raise ValueError("closed form implemented for VAR(1) only")
    return solve_discrete_lyapunov(spec.A[0], spec.sigma)


# --- neurovascular toy model -----------------------------------------------

@dataclass(frozen=True)
class NeuroVascSpec:
    """Parameters of the synthetic multimodal dataset.

    Attributes
    ----------
    coupling_gain : float
        Weight of the EEG-envelope-driven hemodynamic response in OXY.
    kappa : float
        Depth of the log-amplitude modulation of the EEG carrier.
    mod_cutoff : float
        Cut-off (Hz) of the low-pass noise forming the modulator.
    hrf : (float, float, float)
        Double-gamma peak (s), undershoot (s) and undershoot ratio.
    eeg_noise, oxy_noise, deoxy_noise : float
        White EEG noise and pink fNIRS noise levels, relative to unit-std
        signal components.
    deoxy_factor : float
        DEOXY = deoxy_factor * OXY + noise.
    """

    n_subjects: int = 26
    epochs_per_condition: int = 10
    conditions: tuple = ("NBACK0", "NBACK3")
    target_fraction: float = 0.3
    spacing: float = 11.0
    eeg_fs: float = 200.0
    fnirs_fs: float = 10.0
    carrier_hz: float = 10.0
    coupling_gain: float = 1.0
    kappa: float = 0.5
    mod_cutoff: float = 2.0
    hrf: tuple = (6.0, 16.0, 1.0 / 6.0)
    eeg_noise: float = 0.05
    oxy_noise: float = 1e-5
    deoxy_noise: float = 1e-2
    deoxy_factor: float = -0.4
    lead: float = 6.0
    tail: float = 31.0
    seed: int = 0

    def validate(self):
        if self.coupling_gain < 0:
            raise ValueError("coupling_gain must be >= 0")
        if min(self.hrf[:2]) <= 0 or self.mod_cutoff <= 0 or self.spacing <= 0:
            raise ValueError("time constants must be positive")
        if self.n_subjects < 1 or self.epochs_per_condition < 1:
            raise ValueError("need at least one subject and one epoch")
        return self

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def double_gamma_hrf(fs, peak=6.0, undershoot=16.0, ratio=1.0 / 6.0, duration=32.0):
    """Canonical double-gamma impulse response, unit sum."""
    t = np.arange(0.0, duration, 1.0 / fs)
    # Shape k+1 with unit scale puts the mode of each lobe at k seconds.
    h = stats.gamma.pdf(t, peak + 1) - ratio * stats.gamma.pdf(t, undershoot + 1)
    return h / h.sum()


def pink_noise(rng, shape):
    """1/f-power noise along the last axis, unit standard deviation."""
    n = shape[-1]
    spec = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    f = np.fft.rfftfreq(n)
    f[0] = f[1]
    y = np.fft.irfft(spec / np.sqrt(f), n=n, axis=-1)
    return y / y.std(axis=-1, keepdims=True)


def _event_schedule(spec, rng):
    conds = [Condition.parse(c) for c in spec.conditions]
    labels = [c for c in conds for _ in range(spec.epochs_per_condition)]
    order = rng.permutation(len(labels))
    n_target = int(round(spec.target_fraction * spec.epochs_per_condition))
    events = []
    seen = {c: 0 for c in conds}
    for k, idx in enumerate(order):
        c = labels[idx]
        cls = StimulusClass.TARGET if seen[c] < n_target else StimulusClass.NONTARGET
        seen[c] += 1
        events.append((spec.lead + k * spec.spacing, c, cls))
    return events


def simulate_subject(spec, subject, rmap=None):
    """One synthetic subject as a :class:`SubjectRecording` (in memory)."""
    rmap = RegionMap.default() if rmap is None else rmap
    rng = np.random.default_rng([spec.seed, subject])
    schedule = _event_schedule(spec, rng)
    n_ev = len(schedule)
    duration = spec.lead + (n_ev - 1) * spec.spacing + spec.tail
    decim = int(round(spec.eeg_fs / spec.fnirs_fs))
    n_f = int(np.ceil(duration * spec.fnirs_fs))
    n_e = n_f * decim
    eeg_regions = rmap.for_modality(Modality.EEG)
    oxy_regions = rmap.for_modality(Modality.OXY)
    deoxy_regions = rmap.for_modality(Modality.DEOXY)

    # Slow log-amplitude modulators, one per EEG region.
    sos = signal.butter(4, spec.mod_cutoff, fs=spec.eeg_fs, output="sos")
    m = signal.sosfilt(sos, rng.standard_normal((len(eeg_regions), n_e)), axis=-1)
    m /= m.std(axis=1, keepdims=True)
    t = np.arange(n_e) / spec.eeg_fs
    phase = rng.uniform(0, 2 * np.pi, (len(eeg_regions), 1))
    src = np.exp(spec.kappa * m) * np.cos(2 * np.pi * spec.carrier_hz * t + phase)

    eeg_names = [ch for r in eeg_regions for ch in r.members]
    owner = [k for k, r in enumerate(eeg_regions) for _ in r.members]
    eeg = src[owner] + spec.eeg_noise * rng.standard_normal((len(eeg_names), n_e))

    # Hemodynamic drive: modulator at the fNIRS rate through the HRF.
    h = double_gamma_hrf(spec.fnirs_fs, *spec.hrf)
    md = m[:, ::decim]
    drive = signal.lfilter(h, [1.0], md, axis=-1)
    drive /= drive.std(axis=1, keepdims=True)

    f_names = [ch for r in oxy_regions for ch in r.members]
    f_owner = [k % len(eeg_regions) for k, r in enumerate(oxy_regions) for _ in r.members]
    oxy = spec.coupling_gain * drive[f_owner] + spec.oxy_noise * pink_noise(rng, (len(f_names), n_f))
    deoxy = spec.deoxy_factor * oxy + spec.deoxy_noise * pink_noise(rng, (len(f_names), n_f))

    d_names = [ch for r in deoxy_regions for ch in r.members]
    eeg_ev = [Event(int(round(te * spec.eeg_fs)), c, cls) for te, c, cls in schedule]
    f_ev = [Event(int(round(te * spec.fnirs_fs)), c, cls) for te, c, cls in schedule]
    eeg_s = MultichannelSeries(tuple(Channel(n, Modality.EEG) for n in eeg_names), eeg,
                               spec.eeg_fs, "a.u.")
    oxy_s = MultichannelSeries(tuple(Channel(n, Modality.OXY) for n in f_names), oxy,
                               spec.fnirs_fs, "mM")
    deoxy_s = MultichannelSeries(tuple(Channel(n, Modality.DEOXY) for n in d_names), deoxy,
                                 spec.fnirs_fs, "mM")
    return SubjectRecording(eeg_s, eeg_ev, oxy_s, deoxy_s, f_ev,
                            meta={"subject": subject, "seed": [spec.seed, subject]})


def simulate_neurovascular(spec, rmap=None):
    """All subjects of the synthetic dataset, in subject order."""
    spec.validate()
    return [simulate_subject(spec, s, rmap) for s in range(spec.n_subjects)]
