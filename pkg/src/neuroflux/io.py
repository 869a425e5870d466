"""Interchange files for recordings, events and result matrices.

A recording is a CSV file with header ``time,<ch1>,<ch2>,...`` (or a raw
little-endian float64 ``.bin`` file holding the channels x samples matrix in
row-major order) plus a JSON sidecar with the same stem::

    {"fs": 200.0, "modality_per_channel": {...}, "unit": "uV",
     "channels": [...], "quantity": "signal", "format": "csv"}

``quantity`` records what an optical recording holds (``intensity``, ``od``
or ``hb``). Event files are CSV ``sample_index,condition,stimulus_class``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Channel, Condition, MultichannelSeries, StimulusClass
from .errors import IoError


@dataclass(frozen=True)
class Event:
    sample_index: int
    condition: Condition
    stimulus_class: StimulusClass


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def _write_text(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_bytes(path, data):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def format_float(v):
    return repr(float(v))


def write_series(path, series, quantity="signal"):
    """Write `series` to ``path`` (``.csv`` or ``.bin``) plus its sidecar."""
    path = Path(path)
    binary = path.suffix == ".bin"
    meta = {"fs": series.fs,
            "channels": series.names,
            "modality_per_channel": {c.name: c.modality.value for c in series.channels},
            "unit": series.unit,
            "quantity": quantity,
            "format": "bin" if binary else "csv",
            "n_samples": int(series.n_samples)}
    if binary:
        _write_bytes(path, np.ascontiguousarray(series.data, dtype="<f8").tobytes())
    else:
        buf = _io.StringIO()
        t = np.arange(series.n_samples) / series.fs
        # %.17g round-trips every double exactly.
        np.savetxt(buf, np.column_stack([t, series.data.T]), fmt="%.17g", delimiter=",",
                   header=",".join(["time"] + series.names), comments="")
        _write_text(path, buf.getvalue())
    _write_text(sidecar_path(path), json.dumps(meta, indent=1, sort_keys=True))
    return path


def read_series(path):
    """Load a recording written by :func:`write_series`.

    Returns
    -------
    series : MultichannelSeries
    meta : dict
        The sidecar contents.
    """
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text())
        chans = tuple(Channel(n, meta["modality_per_channel"][n]) for n in meta["channels"])
        if path.suffix == ".bin":
            raw = np.frombuffer(path.read_bytes(), dtype="<f8")
            data = raw.reshape(len(chans), -1)
        else:
            with open(path, newline="") as fh:
                header = fh.readline().strip().split(",")
                if header[0] != "time" or header[1:] != [c.name for c in chans]:
                    raise IoError(f"{path}: header does not match sidecar channel list")
                table = np.loadtxt(fh, delimiter=",", ndmin=2)
            data = table[:, 1:].T
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise IoError(f"malformed recording {path}: {exc}") from exc
    return MultichannelSeries(chans, data, float(meta["fs"]), meta.get("unit", "")), meta


def write_events(path, events):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "condition", "stimulus_class"])
    for ev in events:
        w.writerow([int(ev.sample_index), ev.condition.value, ev.stimulus_class.value])
    _write_text(path, buf.getvalue())
    return Path(path)


def read_events(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return [Event(int(r["sample_index"]), Condition.parse(r["condition"]),
                      StimulusClass.parse(r["stimulus_class"])) for r in rows]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise IoError(f"malformed event file {path}: {exc}") from exc


def matrix_csv(values, labels):
    """CSV text of a square matrix with a header of region labels."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(labels))
    for lab, row in zip(labels, np.asarray(values)):
        w.writerow([lab] + [format_float(v) for v in row])
    return buf.getvalue()


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    values = np.array([r[1:] for r in rows[1:]], dtype=float)
    return values, labels


def ensure_writable_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise IoError(f"{path} is not writable")
    return path
