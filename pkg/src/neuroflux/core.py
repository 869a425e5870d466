"""Shared domain types.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be passed between threads without copying. Construction only checks
structure (shapes, names); :func:`validate` checks the numeric invariants.

Connectivity matrices use a single orientation everywhere: row index is the
sink, column index is the source, i.e. ``values[i, j]`` is the influence of
region ``j`` on region ``i``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadRegionMap, LengthMismatch, NonFinite, NonPositiveRate

CONVENTION = "element [i][j] = influence of source region j on sink region i"

N_REGIONS = 25
REGION_IDS = tuple(f"R{k}" for k in range(1, N_REGIONS + 1))


class Modality(str, enum.Enum):
    EEG = "EEG"
    OXY = "OXY"
    DEOXY = "DEOXY"


class Condition(str, enum.Enum):
    NBACK0 = "NBACK0"
    NBACK2 = "NBACK2"
    NBACK3 = "NBACK3"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().upper().replace("-", "").replace("_", "")
        aliases = {"0BACK": "NBACK0", "2BACK": "NBACK2", "3BACK": "NBACK3"}
        return cls(aliases.get(key, key))


class StimulusClass(str, enum.Enum):
    TARGET = "TARGET"
    NONTARGET = "NONTARGET"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        return cls(str(text).strip().upper().replace("-", "").replace("_", ""))


class Metric(str, enum.Enum):
    PCC = "PCC"
    PLV = "PLV"
    MSC = "MSC"
    DDTF = "DDTF"
    GPDC = "GPDC"

    @property
    def directed(self):
        return self in (Metric.DDTF, Metric.GPDC)


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    fs: float
    unit_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(np.ravel(self.samples)))
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self):
        return self.samples.shape[0]

    def validate(self):
        if not self.fs > 0:
            raise NonPositiveRate(f"sampling rate must be positive, got {self.fs}")
        if len(self) < 1:
            raise LengthMismatch("time series is empty")
        bad = np.flatnonzero(~np.isfinite(self.samples))
        if bad.size:
            raise NonFinite(0, int(bad[0]))
        return self


@dataclass(frozen=True)
class Channel:
    name: str
    modality: Modality

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality(self.modality))


@dataclass(frozen=True)
class MultichannelSeries:
    channels: tuple
    data: np.ndarray
    fs: float
    unit: str = ""

    def __post_init__(self):
        chans = tuple(c if isinstance(c, Channel) else Channel(*c) for c in self.channels)
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise LengthMismatch(f"data must be channels x samples, got shape {data.shape}")
        if data.shape[0] != len(chans):
            raise LengthMismatch(
                f"{len(chans)} channel descriptors for {data.shape[0]} data rows")
        names = [c.name for c in chans]
        if len(set(names)) != len(names):
            raise LengthMismatch("channel names must be unique")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def names(self):
        return [c.name for c in self.channels]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def channel(self, name):
        idx = self.names.index(name)
        return TimeSeries(self.data[idx], self.fs, self.unit)

    def select(self, names):
        idx = [self.names.index(n) for n in names]
        return MultichannelSeries(tuple(self.channels[i] for i in idx), self.data[idx],
                                  self.fs, self.unit)

    def with_data(self, data, fs=None, unit=None):
        return MultichannelSeries(self.channels, data, self.fs if fs is None else fs,
                                  self.unit if unit is None else unit)


def validate(series):
    """Check numeric invariants and return `series` unchanged.

    Raises
    ------
    NonPositiveRate
        ``fs <= 0``.
    LengthMismatch
        Empty recording.
    NonFinite
        First NaN/Inf sample, reported as ``(channel, index)``.
    """
    if isinstance(series, TimeSeries):
        return series.validate()
    if not series.fs > 0:
        raise NonPositiveRate(f"sampling rate must be positive, got {series.fs}")
    if series.data.shape[1] < 1:
        raise LengthMismatch("series has no samples")
    bad = np.argwhere(~np.isfinite(series.data))
    if bad.size:
        ch, idx = bad[0]
        raise NonFinite(int(ch), int(idx))
    return series


@dataclass(frozen=True)
class EpochSet:
    """Stimulus-locked segments, ``data[epoch, channel, sample]``.

    ``degenerate`` marks epochs dropped downstream (e.g. a zero-variance
    track); ``trial_ids`` carry trial identity across modalities.
    """

    data: np.ndarray
    fs: float
    channels: tuple
    condition: Optional[Condition] = None
    stimulus_class: Optional[StimulusClass] = None
    window: tuple = (0.0, 0.0)
    trial_ids: np.ndarray = None
    degenerate: np.ndarray = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3:
            raise LengthMismatch(f"epoch data must be 3-D, got shape {data.shape}")
        if data.shape[0] < 1:
            raise LengthMismatch("epoch set is empty")
        chans = tuple(c if isinstance(c, Channel) else Channel(*c) for c in self.channels)
        if len(chans) != data.shape[1]:
            raise LengthMismatch(f"{len(chans)} channels for data with {data.shape[1]}")
        n = data.shape[0]
        ids = np.arange(n) if self.trial_ids is None else np.asarray(self.trial_ids)
        deg = np.zeros(n, bool) if self.degenerate is None else np.asarray(self.degenerate, bool)
        if ids.shape != (n,) or deg.shape != (n,):
            raise LengthMismatch("trial_ids/degenerate must have one entry per epoch")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "window", tuple(float(w) for w in self.window))
        object.__setattr__(self, "trial_ids", _frozen(ids, dtype=ids.dtype))
        object.__setattr__(self, "degenerate", _frozen(deg, dtype=bool))
        if self.condition is not None:
            object.__setattr__(self, "condition", Condition.parse(self.condition))
        if self.stimulus_class is not None:
            object.__setattr__(self, "stimulus_class", StimulusClass.parse(self.stimulus_class))

    @property
    def n_epochs(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[2]

    @property
    def names(self):
        return [c.name for c in self.channels]

    def replace(self, **changes):
        kw = dict(data=self.data, fs=self.fs, channels=self.channels,
                  condition=self.condition, stimulus_class=self.stimulus_class,
                  window=self.window, trial_ids=self.trial_ids, degenerate=self.degenerate)
        kw.update(changes)
        return EpochSet(**kw)


@dataclass(frozen=True)
class Region:
    region_id: str
    modality: Modality
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "members", tuple(self.members))


_EXPECTED_MODALITY = {**{f"R{k}": Modality.EEG for k in range(1, 10)},
                      **{f"R{k}": Modality.OXY for k in range(10, 18)},
                      **{f"R{k}": Modality.DEOXY for k in range(18, 26)}}


@dataclass(frozen=True)
class RegionMap:
    regions: tuple

    def __post_init__(self):
        regions = tuple(r if isinstance(r, Region) else Region(*r) for r in self.regions)
        object.__setattr__(self, "regions", regions)
        counts = {m: sum(r.modality == m for r in regions) for m in Modality}
        if (counts[Modality.EEG], counts[Modality.OXY], counts[Modality.DEOXY]) != (9, 8, 8):
            raise BadRegionMap(
                "region map needs 9 EEG, 8 OXY and 8 DEOXY regions, got "
                f"{counts[Modality.EEG]}/{counts[Modality.OXY]}/{counts[Modality.DEOXY]}")
        ids = tuple(r.region_id for r in regions)
        if ids != REGION_IDS:
            raise BadRegionMap(f"region ids must be R1..R25 in order, got {ids}")
        seen = {m: set() for m in Modality}
        for r in regions:
            if r.modality != _EXPECTED_MODALITY[r.region_id]:
                raise BadRegionMap(f"{r.region_id} must be {_EXPECTED_MODALITY[r.region_id].value}")
            if not r.members:
                raise BadRegionMap(f"{r.region_id} has no member channels")
            dup = seen[r.modality].intersection(r.members)
            if dup:
                raise BadRegionMap(f"channel(s) {sorted(dup)} assigned to two {r.modality.value} regions")
            seen[r.modality].update(r.members)

    def for_modality(self, modality):
        modality = Modality(modality)
        return [r for r in self.regions if r.modality == modality]

    @classmethod
    def from_dict(cls, d):
        try:
            items = d["regions"]
            return cls(tuple(Region(r["id"], r["modality"], tuple(r["members"])) for r in items))
        except (KeyError, TypeError) as exc:
            raise BadRegionMap(f"malformed region map: {exc!r}") from exc

    def to_dict(self):
        return {"regions": [{"id": r.region_id, "modality": r.modality.value,
                             "members": list(r.members)} for r in self.regions]}

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls):
        from importlib import resources
        text = resources.files("neuroflux").joinpath("data/default_regions.json").read_text()
        return cls.from_dict(json.loads(text))


def _default_labels(n):
    return tuple(f"R{k}" for k in range(1, n + 1))


@dataclass(frozen=True)
class ConnectivityMatrix:
    values: np.ndarray
    metric: Metric
    directed: bool = None
    labels: tuple = None
    convention: str = field(default=CONVENTION)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise LengthMismatch(f"connectivity matrix must be square, got {vals.shape}")
        metric = Metric(self.metric)
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "metric", metric)
        if self.directed is None:
            object.__setattr__(self, "directed", metric.directed)
        labels = _default_labels(vals.shape[0]) if self.labels is None else tuple(self.labels)
        if len(labels) != vals.shape[0]:
            raise LengthMismatch("one label per row/column required")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.values.shape[0]

    def check_invariants(self, atol=1e-12):
        v = self.values
        lo = -1.0 if self.metric == Metric.PCC else 0.0
        if np.any(v < lo - atol) or np.any(v > 1 + atol):
            raise ValueError(f"{self.metric.value} values outside [{lo}, 1]")
        if not self.directed:
            if not np.array_equal(v, v.T):
                raise ValueError(f"{self.metric.value} matrix not symmetric")
            if not np.all(np.diag(v) == 1.0):
                raise ValueError(f"{self.metric.value} diagonal must be 1")
        return self


@dataclass(frozen=True)
class PValueMatrix:
    p: np.ndarray
    statistic: np.ndarray
    n_effective: np.ndarray
    metric: Optional[Metric] = None
    degenerate: np.ndarray = None
    labels: tuple = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("p-values must lie in [0, 1]")
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "statistic", _frozen(self.statistic))
        object.__setattr__(self, "n_effective", _frozen(self.n_effective, dtype=int))
        deg = np.zeros(p.shape, bool) if self.degenerate is None else self.degenerate
        object.__setattr__(self, "degenerate", _frozen(deg, dtype=bool))
        if self.metric is not None:
            object.__setattr__(self, "metric", Metric(self.metric))
        labels = _default_labels(p.shape[0]) if self.labels is None else tuple(self.labels)
        object.__setattr__(self, "labels", labels)


# --- serialization -------------------------------------------------------
# Floats go through json's repr, which round-trips IEEE doubles exactly.

def _enc(v):
    if isinstance(v, np.ndarray):
        return {"__array__": v.tolist(), "dtype": str(v.dtype)}
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, tuple):
        return [_enc(x) for x in v]
    if isinstance(v, (Channel, Region)):
        return {k: _enc(getattr(v, k)) for k in v.__dataclass_fields__}
    return v


def _dec_array(d):
    return np.array(d["__array__"], dtype=d["dtype"])


_TYPES = {t.__name__: t for t in (TimeSeries, MultichannelSeries, EpochSet, RegionMap,
                                  ConnectivityMatrix, PValueMatrix)}


def to_json(obj):
    """Serialize any core type to a JSON string."""
    name = type(obj).__name__
    if name not in _TYPES:
        raise TypeError(f"cannot serialize {name}")
    payload = {k: _enc(getattr(obj, k)) for k in obj.__dataclass_fields__}
    return json.dumps({"type": name, "fields": payload})


def from_json(text):
    blob = json.loads(text)
    cls = _TYPES[blob["type"]]
    f = blob["fields"]
    kw = {}
    for k, v in f.items():
        if isinstance(v, dict) and "__array__" in v:
            v = _dec_array(v)
        kw[k] = v
    if cls is MultichannelSeries or cls is EpochSet:
        kw["channels"] = tuple(Channel(c["name"], c["modality"]) for c in kw["channels"])
    if cls is EpochSet:
        kw["window"] = tuple(kw["window"])
    if cls is RegionMap:
        kw["regions"] = tuple(Region(r["region_id"], r["modality"], tuple(r["members"]))
                              for r in kw["regions"])
    if "labels" in kw and kw["labels"] is not None:
        kw["labels"] = tuple(kw["labels"])
    return cls(**kw)


def region_labels(n=N_REGIONS) -> Sequence[str]:
    return _default_labels(n)
