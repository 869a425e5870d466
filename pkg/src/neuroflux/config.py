"""YAML configuration with defaults, validation and environment overrides.

Every key has a default (see :data:`DEFAULTS`); a config file only lists what
it changes. Unknown keys and ill-typed values raise :class:`BadConfig` naming
the field and the line. Environment variables ``NEUROFLUX_<SECTION>__<KEY>``
(nested keys joined by ``__``) override file values, e.g.
``NEUROFLUX_EC__ORDER=5``; the shorthands ``NEUROFLUX_THREADS``,
``NEUROFLUX_SEED`` and ``NEUROFLUX_OUT`` map to ``run.threads``, ``run.seed``
and ``io.out_dir``.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import BadConfig

DEFAULTS = {
    "io": {
        "data_dir": "data",
        "out_dir": "results",
        "region_map": None,
        "eeg_file": "eeg.bin",
        "oxy_file": "oxy.csv",
        "deoxy_file": "deoxy.csv",
        "eeg_events": "eeg_events.csv",
        "fnirs_events": "fnirs_events.csv",
    },
    "pipeline": {
        "eeg": {"fs": 200.0, "band": [1.0, 40.0], "order": 6, "window": [0.5, 10.0],
                "target_hz": 10.0, "level": None},
        "fnirs": {"fs": 10.0, "lowpass": 0.2, "order": 6, "sg_window": 11, "sg_polyorder": 3,
                  "window": [5.0, 30.0], "target_hz": 1.0, "level": None},
        "track_fs": 10.0,
        "L": 256,
        "window_mode": "own",
        "stimulus_classes": ["TARGET", "NONTARGET"],
    },
    "optical": {"wavelengths": None, "extinction": None, "dpf": None, "separation": None},
    "fc": {"fisher": False, "msc": {"seg_len": None, "overlap": 0.5, "band": None}},
    "ec": {"order": None, "p_max": 20, "criterion": "SBC", "band": [0.01, 1.0], "n_freqs": 64},
    "stats": {"conditions": ["NBACK0", "NBACK3"], "mode": "AUTO", "zero_method": "wilcox",
              "correction": None, "alpha": 0.05},
    "synth": {"n_subjects": 26, "epochs_per_condition": 10, "coupling_gain": 1.0,
              "kappa": 0.5, "mod_cutoff": 2.0, "hrf": [6.0, 16.0, 1.0 / 6.0],
              "eeg_noise": 0.05, "oxy_noise": 1e-5, "deoxy_noise": 1e-2,
              "deoxy_factor": -0.4, "spacing": 11.0, "target_fraction": 0.3},
    "run": {"threads": 1, "seed": 0},
}

CHOICES = {
    "pipeline.window_mode": ("own", "common"),
    "ec.criterion": ("SBC", "AIC", "BIC"),
    "stats.mode": ("EXACT", "APPROX", "AUTO"),
    "stats.zero_method": ("wilcox", "pratt"),
    "stats.correction": (None, "holm", "none"),
}

SHORTHANDS = {"NEUROFLUX_THREADS": "run.threads", "NEUROFLUX_SEED": "run.seed",
              "NEUROFLUX_OUT": "io.out_dir"}


def _lines(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}{k.value}"
            out[key] = k.start_mark.line + 1
            _lines(v, key + ".", out)
    return out


def _check(value, default, field, line):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise BadConfig(f"expected true/false, got {value!r}", field, line)
    elif isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadConfig(f"expected a number, got {value!r}", field, line)
        if isinstance(default, int) and not isinstance(default, bool) and not float(value).is_integer():
            raise BadConfig(f"expected an integer, got {value!r}", field, line)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise BadConfig(f"expected text, got {value!r}", field, line)
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise BadConfig(f"expected a list, got {value!r}", field, line)
    return value


def _merge(base, user, lines, prefix=""):
    if not isinstance(user, dict):
        raise BadConfig(f"expected a mapping, got {type(user).__name__}",
                        prefix.rstrip(".") or None, lines.get(prefix.rstrip(".")))
    for key, value in user.items():
        field = f"{prefix}{key}"
        line = lines.get(field)
        if key not in base:
            raise BadConfig("unknown key", field, line)
        if isinstance(base[key], dict):
            _merge(base[key], value if value is not None else {}, lines, field + ".")
        else:
            base[key] = _check(value, DEFAULTS_FLAT.get(field), field, line)
            if field in CHOICES and base[key] not in CHOICES[field]:
                raise BadConfig(f"must be one of {CHOICES[field]}, got {base[key]!r}", field, line)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


DEFAULTS_FLAT = _flatten(DEFAULTS)


@dataclass
class Config:
    """Resolved configuration: defaults + file + environment."""

    data: dict
    base_dir: Path
    source: str = None

    def get(self, dotted):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def set(self, dotted, value):
        parts = dotted.split(".")
        node = self.data
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value

    def path(self, dotted):
        v = self.get(dotted)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else (self.base_dir / p)

    def pipeline_params(self):
        from .pipeline import PipelineParams
        p = self.data["pipeline"]
        e, f = p["eeg"], p["fnirs"]
        return PipelineParams(
            eeg_fs=float(e["fs"]), eeg_band=tuple(e["band"]), eeg_order=int(e["order"]),
            eeg_window=tuple(e["window"]), eeg_target_hz=float(e["target_hz"]),
            eeg_level=e["level"], fnirs_fs=float(f["fs"]),
            fnirs_lowpass=None if f["lowpass"] in (None, False) else float(f["lowpass"]),
            fnirs_order=int(f["order"]), sg_window=int(f["sg_window"]),
            sg_polyorder=int(f["sg_polyorder"]), fnirs_window=tuple(f["window"]),
            fnirs_target_hz=float(f["target_hz"]), fnirs_level=f["level"],
            track_fs=float(p["track_fs"]), L=int(p["L"]), window_mode=p["window_mode"],
            stimulus_classes=tuple(p["stimulus_classes"]))

    def synth_spec(self):
        from .synth import NeuroVascSpec
        s = dict(self.data["synth"])
        s["hrf"] = tuple(s["hrf"])
        s["n_subjects"] = int(s["n_subjects"])
        s["epochs_per_condition"] = int(s["epochs_per_condition"])
        s["conditions"] = tuple(self.data["stats"]["conditions"])
        p = self.data["pipeline"]
        s["eeg_fs"] = float(p["eeg"]["fs"])
        s["fnirs_fs"] = float(p["fnirs"]["fs"])
        return NeuroVascSpec(seed=int(self.data["run"]["seed"]), **s)

    def optical_config(self):
        from .mbll import OpticalConfig
        o = self.data["optical"]
        base = OpticalConfig.default().to_dict()
        base.update({k: v for k, v in o.items() if v is not None})
        return OpticalConfig.from_dict(base)

    def echo(self):
        return copy.deepcopy(self.data)


def _env_overrides(data, env, lines):
    items = []
    for name, value in sorted(env.items()):
        if name in SHORTHANDS:
            items.append((SHORTHANDS[name], value, name))
        elif name.startswith("NEUROFLUX_") and "__" in name:
            dotted = name[len("NEUROFLUX_"):].lower().replace("__", ".")
            items.append((dotted, value, name))
    for dotted, raw, name in items:
        keys = {k.lower(): k for k in DEFAULTS_FLAT}
        if dotted.lower() not in keys:
            raise BadConfig(f"unknown key from environment variable {name}", dotted)
        field = keys[dotted.lower()]
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise BadConfig(f"unparsable value in {name}: {exc}", field) from exc
        _check(value, DEFAULTS_FLAT[field], field, None)
        node = data
        parts = field.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value


def load_config(path=None, env=None, text=None):
    """Load and validate a configuration.

    Parameters
    ----------
    path : str or Path, optional
        YAML file; ``None`` gives the defaults.
    env : mapping, optional
        Environment to read overrides from (default ``os.environ``).
    text : str, optional
        YAML text used instead of reading `path`.
    """
    env = os.environ if env is None else env
    data = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None and text is None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from exc
        base_dir = path.resolve().parent
    if text is not None:
        try:
            node = yaml.compose(text)
            user = yaml.safe_load(text)
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark or exc.context_mark
            raise BadConfig(f"YAML syntax error: {exc.problem}",
                            line=None if mark is None else mark.line + 1) from exc
        except yaml.YAMLError as exc:
            raise BadConfig(f"YAML error: {exc}") from exc
        if user is not None:
            _merge(data, user, _lines(node))
    _env_overrides(data, env, {})
    return Config(data, base_dir, None if path is None else str(path))
