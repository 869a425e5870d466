"""From raw recordings to the fused 25-region epoch representation.

EEG chain: resample to 200 Hz, causal 1-40 Hz Butterworth band-pass, epoch,
region average, then the envelope of the db2 detail component around 10 Hz
resampled to 10 Hz. fNIRS chain: (MBLL), resample to 10 Hz, causal 0.2 Hz
low-pass, Savitzky-Golay smoothing, epoch, region average, then the db2
detail component around 1 Hz. Every track is z-scored per channel and epoch;
a track with no variance marks its epoch degenerate.

:func:`fuse` puts the three modalities on a common per-epoch length ``L``.
By default each modality is mapped over its own epoch window (10.5 s for
EEG, 35 s for fNIRS), so sample ``k`` of an EEG region and sample ``k`` of an
fNIRS region are at the same *fraction* of their windows, not the same time.
``window_mode="common"`` instead crops the fNIRS tracks to the EEG window
before resampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import floor
from typing import Callable, Optional

import numpy as np

from . import dsp, wavelet
from .core import (Channel, Condition, EpochSet, Modality, MultichannelSeries, N_REGIONS,
                   REGION_IDS, RegionMap, StimulusClass, _frozen)
from .errors import (EpochCountMismatch, LengthMismatch, MissingChannel, RateMismatch,
                     WindowOutOfBounds, ZeroVariance)
from .mbll import OpticalConfig, od_to_hemoglobin

log = logging.getLogger(__name__)

DEGENERATE_RTOL = 1e-8


@dataclass(frozen=True)
class PipelineParams:
    """Every tunable of the preprocessing and fusion chain."""

    eeg_fs: float = 200.0
    eeg_band: tuple = (1.0, 40.0)
    eeg_order: int = 6
    eeg_window: tuple = (0.5, 10.0)
    eeg_target_hz: float = 10.0
    eeg_level: Optional[int] = None
    fnirs_fs: float = 10.0
    fnirs_lowpass: Optional[float] = 0.2
    fnirs_order: int = 6
    sg_window: int = 11
    sg_polyorder: int = 3
    fnirs_window: tuple = (5.0, 30.0)
    fnirs_target_hz: float = 1.0
    fnirs_level: Optional[int] = None
    track_fs: float = 10.0
    L: int = 256
    window_mode: str = "own"
    stimulus_classes: tuple = ("TARGET", "NONTARGET")

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class FusedEpochSet:
    """Fused tracks, ``data[epoch, region, sample]`` with regions R1..R25.

    ``fs_effective`` is ``L`` divided by the EEG window length; it is the
    rate the spectral metrics assume.
    """

    data: np.ndarray
    fs_effective: float
    condition: Optional[Condition] = None
    trial_ids: np.ndarray = None
    labels: tuple = REGION_IDS
    n_excluded: int = 0
    window_mode: str = "own"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3:
            raise LengthMismatch(f"fused data must be 3-D, got {data.shape}")
        ids = np.arange(data.shape[0]) if self.trial_ids is None else np.asarray(self.trial_ids)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "trial_ids", _frozen(ids, dtype=ids.dtype))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "fs_effective", float(self.fs_effective))

    @property
    def L(self):
        return self.data.shape[2]

    @property
    def n_epochs(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]


# --- continuous preprocessing --------------------------------------------

def _to_rate(series, fs_target):
    if np.isclose(series.fs, fs_target, rtol=1e-12, atol=0):
        return series
    up, down = dsp.rational_ratio(series.fs, fs_target)
    return series.with_data(dsp.resample(series.data, up, down), fs=series.fs * up / down)


def preprocess_eeg(series, params=PipelineParams(), artifact_hook: Callable = None):
    """Resample to ``params.eeg_fs`` and band-pass.

    `artifact_hook`, if given, receives and returns the resampled
    :class:`MultichannelSeries` before filtering; it is where externally
    cleaned data (e.g. after ocular artifact removal) can be substituted.
    """
    x = _to_rate(series, params.eeg_fs)
    if artifact_hook is not None:
        x = artifact_hook(x)
    bp = dsp.design_butterworth("bandpass", params.eeg_order, params.eeg_band, x.fs)
    return x.with_data(dsp.apply_filter(bp, x.data, x.fs))


def optical_to_hemoglobin(wl1, wl2, cfg: OpticalConfig, quantity="od"):
    """Channel-wise MBLL on two recordings holding the same optodes.

    `quantity` is ``"od"`` for optical density changes or ``"intensity"`` for
    raw light intensity (converted against the per-channel mean).
    """
    if wl1.names != wl2.names or wl1.n_samples != wl2.n_samples or wl1.fs != wl2.fs:
        raise LengthMismatch("wavelength recordings differ in channels, length or rate")
    a, b = np.asarray(wl1.data), np.asarray(wl2.data)
    if quantity == "intensity":
        a, b = -np.log10(a / a.mean(axis=1, keepdims=True)), -np.log10(b / b.mean(axis=1, keepdims=True))
    hbo, hbr = od_to_hemoglobin(a, b, cfg)
    oxy = MultichannelSeries(tuple(Channel(n, Modality.OXY) for n in wl1.names), hbo, wl1.fs, "mM")
    deoxy = MultichannelSeries(tuple(Channel(n, Modality.DEOXY) for n in wl1.names), hbr, wl1.fs, "mM")
    return oxy, deoxy


def preprocess_fnirs(series, params=PipelineParams()):
    """Resample to ``params.fnirs_fs``, optional low-pass, then SG smoothing."""
    x = _to_rate(series, params.fnirs_fs)
    data = x.data
    if params.fnirs_lowpass is not None:
        lp = dsp.design_butterworth("lowpass", params.fnirs_order, params.fnirs_lowpass, x.fs)
        data = dsp.apply_filter(lp, data, x.fs)
    data = dsp.savitzky_golay(data, params.sg_window, params.sg_polyorder)
    return x.with_data(data)


def rescale_events(events, fs_in, fs_out):
    """Map event sample indices between sampling rates (nearest sample)."""
    from .io import Event
    return [Event(int(round(ev.sample_index * fs_out / fs_in)), ev.condition, ev.stimulus_class)
            for ev in events]


# --- epoching and regions --------------------------------------------------

def window_samples(pre_s, post_s, fs):
    """``(n_pre, n_post)``; the stimulus sample belongs to the post window."""
    eps = 1e-9
    return floor(pre_s * fs + eps), floor(post_s * fs + eps) + 1


def epoch(x, events, pre_s, post_s, condition=None, stimulus_classes=None, trial_ids=None):
    """Cut stimulus-locked epochs.

    Parameters
    ----------
    x : MultichannelSeries
    events : sequence of Event or int
        Stimulus positions in samples of `x`.
    pre_s, post_s : float
        Window in seconds before and after each stimulus.
    condition, stimulus_classes : optional
        Keep only events with this condition / one of these classes.
    trial_ids : array_like, optional
        Identity per kept event; defaults to the event's position in `events`.

    Returns
    -------
    EpochSet
        Epochs ordered by stimulus time.
    """
    items = []
    for k, ev in enumerate(events):
        idx = int(getattr(ev, "sample_index", ev))
        if condition is not None and Condition.parse(ev.condition) != Condition.parse(condition):
            continue
        if stimulus_classes is not None:
            allowed = {StimulusClass.parse(c) for c in stimulus_classes}
            if StimulusClass.parse(ev.stimulus_class) not in allowed:
                continue
        items.append((idx, k))
    if not items:
        raise LengthMismatch("no events left to epoch")
    items.sort()
    n_pre, n_post = window_samples(pre_s, post_s, x.fs)
    n = x.n_samples
    for idx, k in items:
        if idx - n_pre < 0 or idx + n_post > n:
            raise WindowOutOfBounds(k)
    offsets = np.arange(-n_pre, n_post)
    rows = np.array([idx for idx, _ in items])[:, None] + offsets[None, :]
    data = np.asarray(x.data)[:, rows].transpose(1, 0, 2)
    ids = np.array([k for _, k in items]) if trial_ids is None else np.asarray(trial_ids)
    cls = None
    if stimulus_classes is not None and len(stimulus_classes) == 1:
        cls = stimulus_classes[0]
    return EpochSet(data, x.fs, x.channels, condition=condition, stimulus_class=cls,
                    window=(pre_s, post_s), trial_ids=ids)


def region_average(e, rmap: RegionMap, modality=None):
    """Average member channels into regions, in region-map order.

    With `modality` given only that modality's regions are formed; otherwise
    the modality is taken from the epoch set's channels (which must agree).
    """
    if modality is None:
        mods = {c.modality for c in e.channels}
        if len(mods) != 1:
            raise MissingChannel("mixed-modality epoch set: pass `modality` explicitly")
        modality = mods.pop()
    modality = Modality(modality)
    names = e.names
    out, chans = [], []
    for r in rmap.for_modality(modality):
        missing = [m for m in r.members if m not in names]
        if missing:
            raise MissingChannel(f"{r.region_id}: channel(s) {missing} not in recording")
        idx = [names.index(m) for m in r.members]
        out.append(e.data[:, idx, :].mean(axis=1))
        chans.append(Channel(r.region_id, modality))
    return e.replace(data=np.stack(out, axis=1), channels=tuple(chans))


# --- low-frequency tracks ------------------------------------------------

def _zscore_flag(arr, reference, rtol=DEGENERATE_RTOL):
    """z-score rows of `arr`; rows without variance become 0 and are flagged.

    Variance is judged against the peak magnitude of `reference` (the signal
    the track was derived from), so a numerically empty component of a
    constant input counts as flat.
    """
    sd = arr.std(axis=-1, ddof=1)
    scale = np.maximum(np.max(np.abs(reference), axis=-1), np.max(np.abs(arr), axis=-1))
    flat = sd <= rtol * scale
    out = np.zeros_like(arr)
    ok = ~flat
    if np.any(ok):
        out[ok] = dsp.zscore(arr[ok], rtol=0.0)
    return out, flat


def _track_epochs(e, data, flat, fs):
    deg = np.asarray(e.degenerate) | flat.any(axis=1)
    if np.any(flat):
        bad = np.argwhere(flat)
        log.info("%d epoch(s) with zero-variance tracks, first at epoch %d channel %s",
                 int(flat.any(axis=1).sum()), bad[0][0], e.names[bad[0][1]])
    return e.replace(data=data, fs=fs, degenerate=deg)


def eeg_lowfreq_track(e, target_hz=10.0, level=None, track_fs=10.0):
    """Envelope of the db2 detail component containing `target_hz`, at `track_fs`."""
    if level is None:
        level = wavelet.level_for_frequency(target_hz, e.fs)
    x = np.asarray(e.data)
    comp = wavelet.dwt_component(wavelet.dwt_decompose(x, level), level)
    env = dsp.envelope(comp)
    up, down = dsp.rational_ratio(e.fs, track_fs)
    if not np.isclose(e.fs * up / down, track_fs, rtol=1e-9):
        raise RateMismatch(f"cannot resample {e.fs} Hz to {track_fs} Hz")
    tr = dsp.resample(env, up, down)
    z, flat = _zscore_flag(tr, x)
    return _track_epochs(e, z, flat, track_fs)


def fnirs_lowfreq_track(e, target_hz=1.0, level=None):
    """db2 detail component containing `target_hz`, z-scored."""
    if level is None:
        level = wavelet.level_for_frequency(target_hz, e.fs)
    x = np.asarray(e.data)
    comp = wavelet.dwt_component(wavelet.dwt_decompose(x, level), level)
    z, flat = _zscore_flag(comp, x)
    return _track_epochs(e, z, flat, e.fs)


# --- fusion ----------------------------------------------------------------

def fuse(eeg, oxy, deoxy, L=256, window_mode="own"):
    """Stack EEG, OXY and DEOXY region tracks into ``epochs x 25 x L``.

    Epochs flagged degenerate in any modality are dropped from all three.
    """
    sets = (eeg, oxy, deoxy)
    counts = [s.n_epochs for s in sets]
    if len(set(counts)) != 1:
        raise EpochCountMismatch(f"epoch counts differ across modalities: {counts}")
    if not (np.array_equal(eeg.trial_ids, oxy.trial_ids)
            and np.array_equal(eeg.trial_ids, deoxy.trial_ids)):
        raise EpochCountMismatch("trial identities differ across modalities")
    n_ch = sum(s.data.shape[1] for s in sets)
    if n_ch != N_REGIONS:
        raise LengthMismatch(f"fusion needs {N_REGIONS} region channels, got {n_ch}")
    keep = ~(eeg.degenerate | oxy.degenerate | deoxy.degenerate)
    n_excluded = int((~keep).sum())
    if n_excluded:
        log.info("excluding %d degenerate epoch(s) of %d", n_excluded, counts[0])
    if not np.any(keep):
        raise ZeroVariance("every epoch is degenerate")
    eeg_span = sum(eeg.window)
    blocks = []
    for s in sets:
        x = np.asarray(s.data)[keep]
        if window_mode == "common" and s is not eeg:
            x = _crop_to_window(x, s.fs, s.window, eeg.window, eeg.data.shape[2])
        elif window_mode not in ("own", "common"):
            raise ValueError(f"unknown window_mode {window_mode!r}")
        y = dsp.resample_to_length(x, L)
        blocks.append(dsp.zscore(y))
    data = np.concatenate(blocks, axis=1)
    return FusedEpochSet(data, L / eeg_span, eeg.condition, eeg.trial_ids[keep],
                         REGION_IDS, n_excluded, window_mode)


def _crop_to_window(x, fs, window, target, n_target):
    start = floor((window[0] - target[0]) * fs + 1e-9)
    if start < 0 or start + n_target > x.shape[-1]:
        raise WindowOutOfBounds(-1, "fNIRS window does not cover the EEG window")
    return x[..., start:start + n_target]


# --- whole-subject convenience -------------------------------------------

@dataclass
class SubjectRecording:
    """One subject's preprocessed-ready inputs."""

    eeg: MultichannelSeries
    eeg_events: list
    oxy: MultichannelSeries
    deoxy: MultichannelSeries
    fnirs_events: list
    meta: dict = field(default_factory=dict)


def process_subject(rec: SubjectRecording, rmap: RegionMap, condition,
                    params=PipelineParams(), artifact_hook=None):
    """Full chain for one subject and condition, returning a FusedEpochSet."""
    eeg = preprocess_eeg(rec.eeg, params, artifact_hook)
    oxy = preprocess_fnirs(rec.oxy, params)
    deoxy = preprocess_fnirs(rec.deoxy, params)
    ev_e = rescale_events(rec.eeg_events, rec.eeg.fs, eeg.fs)
    ev_f = rescale_events(rec.fnirs_events, rec.oxy.fs, oxy.fs)
    classes = params.stimulus_classes
    ee = epoch(eeg, ev_e, *params.eeg_window, condition=condition, stimulus_classes=classes)
    eo = epoch(oxy, ev_f, *params.fnirs_window, condition=condition, stimulus_classes=classes)
    ed = epoch(deoxy, ev_f, *params.fnirs_window, condition=condition, stimulus_classes=classes)
    ee = region_average(ee, rmap, Modality.EEG)
    eo = region_average(eo, rmap, Modality.OXY)
    ed = region_average(ed, rmap, Modality.DEOXY)
    te = eeg_lowfreq_track(ee, params.eeg_target_hz, params.eeg_level, params.track_fs)
    to = fnirs_lowfreq_track(eo, params.fnirs_target_hz, params.fnirs_level)
    td = fnirs_lowfreq_track(ed, params.fnirs_target_hz, params.fnirs_level)
    return fuse(te, to, td, params.L, params.window_mode)
