"""Command-line driver: ``neuroflux synth | run | report``.

``synth`` writes a synthetic dataset in the interchange format, ``run``
turns a dataset into per-subject and group connectivity matrices plus
condition contrasts, and ``report`` renders every matrix of a result tree as
an SVG heatmap. Subjects are processed concurrently (``--threads``); all files
are written afterwards from the main thread in a fixed order, so the result
tree does not depend on the level of parallelism.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ec, fc, io, pipeline, report, stats, synth
from .config import Config, load_config
from .core import CONVENTION, Condition, Metric, RegionMap
from .errors import BadConfig, BadRegionMap, IncompleteResults, IoError, NeurofluxError
from .errors import UnstableModelWarning

log = logging.getLogger("neuroflux")

METRICS = (Metric.PCC, Metric.PLV, Metric.MSC, Metric.DDTF, Metric.GPDC)
MANIFEST = "manifest.json"


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


class Writer:
    """Single point of file output; remembers what it wrote for the manifest."""

    def __init__(self, root):
        self.root = io.ensure_writable_dir(root)
        self.files = {}

    def text(self, rel, text):
        path = self.root / rel
        io._write_text(path, text)
        self.files[str(Path(rel).as_posix())] = sha256(path)
        return path

    def register(self, path):
        rel = Path(path).relative_to(self.root).as_posix()
        self.files[rel] = sha256(path)

    def manifest(self, extra):
        body = dict(extra)
        body["files"] = dict(sorted(self.files.items()))
        io._write_text(self.root / MANIFEST, _dumps(body))


# --- synth -------------------------------------------------------------------

def cmd_synth(cfg: Config, out_dir=None, threads=1):
    """Write the synthetic dataset described by ``cfg['synth']``."""
    spec = cfg.synth_spec()
    try:
        spec.validate()
    except ValueError as exc:
        raise BadConfig(str(exc), "synth") from exc
    rmap = _region_map(cfg, allow_dataset=False)
    out = Path(out_dir) if out_dir is not None else cfg.path("io.data_dir")
    w = Writer(out)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        subjects = list(pool.map(lambda s: synth.simulate_subject(spec, s, rmap),
                                 range(spec.n_subjects)))
    names = cfg.get("io")
    for s, rec in enumerate(subjects):
        sub = f"sub-{s + 1:02d}"
        for key, series, quantity in (("eeg_file", rec.eeg, "signal"), ("oxy_file", rec.oxy, "hb"),
                                      ("deoxy_file", rec.deoxy, "hb")):
            path = io.write_series(w.root / sub / names[key], series, quantity)
            w.register(path)
            w.register(io.sidecar_path(path))
        w.register(io.write_events(w.root / sub / names["eeg_events"], rec.eeg_events))
        w.register(io.write_events(w.root / sub / names["fnirs_events"], rec.fnirs_events))
    w.text("region_map.json", _dumps(rmap.to_dict()))
    spec_dict = spec.to_dict()
    w.manifest({"kind": "synthetic-dataset", "seed": spec.seed, "spec": spec_dict,
                "spec_hash": hashlib.sha256(_dumps(spec_dict).encode()).hexdigest(),
                "n_subjects": spec.n_subjects})
    return out


# --- run ---------------------------------------------------------------------

def _region_map(cfg, allow_dataset=True):
    path = cfg.path("io.region_map")
    if path is None:
        if allow_dataset:
            ds = cfg.path("io.data_dir") / "region_map.json"
            if ds.exists():
                path = ds
        if path is None:
            return RegionMap.default()
    if not Path(path).exists():
        raise BadConfig(f"region map {path} not found", "io.region_map")
    try:
        return RegionMap.load(path)
    except (BadRegionMap, ValueError) as exc:
        raise BadConfig(f"invalid region map {path}: {exc}", "io.region_map") from exc


def load_subject(cfg, sub_dir):
    names = cfg.get("io")
    eeg, _ = io.read_series(sub_dir / names["eeg_file"])
    oxy, meta_o = io.read_series(sub_dir / names["oxy_file"])
    deoxy, _ = io.read_series(sub_dir / names["deoxy_file"])
    if meta_o.get("quantity") in ("od", "intensity"):
        # The two optical files then hold the two wavelengths.
        oxy, deoxy = pipeline.optical_to_hemoglobin(oxy, deoxy, cfg.optical_config(),
                                                    meta_o["quantity"])
    return pipeline.SubjectRecording(eeg, io.read_events(sub_dir / names["eeg_events"]),
                                     oxy, deoxy, io.read_events(sub_dir / names["fnirs_events"]))


@dataclass
class SubjectResult:
    name: str
    matrices: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)


def analyse_fused(fused, cfg):
    """All five metrics for one fused epoch set; returns (matrices, info)."""
    fcc, ecc = cfg.get("fc"), cfg.get("ec")
    out = {Metric.PCC: fc.pcc(fused, fisher=bool(fcc["fisher"])),
           Metric.PLV: fc.plv(fused),
           Metric.MSC: fc.msc(fused, fcc["msc"]["seg_len"], fcc["msc"]["overlap"],
                              None if fcc["msc"]["band"] is None else tuple(fcc["msc"]["band"]))}
    order = ecc["order"]
    if order is None:
        order = ec.select_order(fused, int(ecc["p_max"]), ecc["criterion"], clip=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnstableModelWarning)
        model = ec.fit_mvar(fused, int(order))
    s = ec.spectra(model, int(ecc["n_freqs"]), tuple(ecc["band"]))
    out[Metric.GPDC] = ec.gpdc(s, model)
    out[Metric.DDTF] = ec.ddtf(s)
    info = {"order": int(order), "unstable": bool(caught), "model": model.to_dict(),
            "n_epochs": fused.n_epochs, "n_excluded": fused.n_excluded,
            "fs_effective": fused.fs_effective}
    return out, info


def process_one(cfg, sub_dir, rmap, params):
    res = SubjectResult(sub_dir.name)
    try:
        rec = load_subject(cfg, sub_dir)
    except NeurofluxError as exc:
        res.errors.append(f"{sub_dir.name}: {type(exc).__name__}: {exc}")
        return res
    for cond in cfg.get("stats.conditions"):
        c = Condition.parse(cond)
        try:
            fused = pipeline.process_subject(rec, rmap, c, params)
            mats, info = analyse_fused(fused, cfg)
        except (NeurofluxError, np.linalg.LinAlgError) as exc:
            res.errors.append(f"{sub_dir.name}/{c.value}: {type(exc).__name__}: {exc}")
            continue
        for m, mat in mats.items():
            res.matrices[(c, m)] = mat
        res.info[c.value] = info
    return res


def _matrix_meta(mat, **extra):
    d = {"metric": mat.metric.value, "directed": mat.directed, "labels": list(mat.labels),
         "convention": CONVENTION}
    d.update(extra)
    return d


def _echo(cfg):
    echo = cfg.echo()
    # Output location and parallelism do not change results.
    echo["run"].pop("threads", None)
    echo["io"].pop("out_dir", None)
    return echo


def cmd_run(cfg: Config, out_dir=None, threads=1):
    """Run the analysis; returns ``(out_dir, failures)``."""
    rmap = _region_map(cfg)
    params = cfg.pipeline_params()
    data_dir = cfg.path("io.data_dir")
    if data_dir is None or not data_dir.is_dir():
        raise IoError(f"data directory {data_dir} not found")
    subs = sorted(p for p in data_dir.iterdir() if p.is_dir() and p.name.startswith("sub-"))
    if not subs:
        raise IoError(f"no sub-* directories in {data_dir}")
    out = Path(out_dir) if out_dir is not None else cfg.path("io.out_dir")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda d: process_one(cfg, d, rmap, params), subs))

    w = Writer(out)
    conds = [Condition.parse(c) for c in cfg.get("stats.conditions")]
    failures = [e for r in results for e in r.errors]
    for r in results:
        for (c, m), mat in sorted(r.matrices.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
            base = f"subjects/{r.name}/{c.value}/{m.value}"
            w.text(base + ".csv", io.matrix_csv(mat.values, mat.labels))
            w.text(base + ".json", _dumps(_matrix_meta(mat, subject=r.name, condition=c.value)))
        for c, info in sorted(r.info.items()):
            w.text(f"subjects/{r.name}/{c}/mvar.json", _dumps(info))

    complete = [r for r in results if all((c, m) in r.matrices for c in conds for m in METRICS)]
    for c in conds:
        for m in METRICS:
            mats = [r.matrices[(c, m)] for r in complete]
            if not mats:
                continue
            g = ec.group_mean(mats)
            base = f"group/{c.value}/{m.value}"
            w.text(base + ".csv", io.matrix_csv(g.values, g.labels))
            w.text(base + ".json", _dumps(_matrix_meta(g, condition=c.value,
                                                       subjects=[r.name for r in complete])))
    st = cfg.get("stats")
    if len(conds) >= 2 and len(complete) >= 1:
        a_c, b_c = conds[0], conds[-1]
        for m in METRICS:
            A = [r.matrices[(a_c, m)] for r in complete]
            B = [r.matrices[(b_c, m)] for r in complete]
            pm = stats.pairwise_matrix_test(A, B, st["mode"], st["correction"], st["zero_method"])
            base = f"stats/{m.value}"
            w.text(base + "_p.csv", io.matrix_csv(pm.p, pm.labels))
            w.text(base + "_W.csv", io.matrix_csv(pm.statistic, pm.labels))
            w.text(base + "_mask.csv", io.matrix_csv(stats.significance_mask(pm, st["alpha"]),
                                                     pm.labels))
            w.text(base + "_p.json", _dumps({
                "metric": m.value, "contrast": [a_c.value, b_c.value], "alpha": st["alpha"],
                "n_effective": pm.n_effective.tolist(), "degenerate": pm.degenerate.tolist(),
                "labels": list(pm.labels), "subjects": [r.name for r in complete]}))
    w.manifest({"kind": "results", "parameters": _echo(cfg),
                "subjects": [r.name for r in results],
                "complete_subjects": [r.name for r in complete],
                "failures": failures})
    return out, failures


# --- report ------------------------------------------------------------------

def verify_tree(root):
    root = Path(root)
    mpath = root / MANIFEST
    if not mpath.exists():
        raise IncompleteResults(f"{root} has no {MANIFEST}")
    manifest = json.loads(mpath.read_text())
    files = manifest.get("files", {})
    if not files:
        raise IncompleteResults(f"{root}: manifest lists no files")
    for rel, digest in files.items():
        p = root / rel
        if not p.exists():
            raise IncompleteResults(f"{rel} listed in manifest but missing")
        if sha256(p) != digest:
            raise IncompleteResults(f"{rel} does not match its manifest hash")
    return manifest


def cmd_report(root, alpha=None):
    """Render an SVG next to every matrix of a verified result tree."""
    root = Path(root)
    manifest = verify_tree(root)
    if alpha is None:
        alpha = manifest.get("parameters", {}).get("stats", {}).get("alpha", 0.05)
    written = []
    for rel in sorted(manifest["files"]):
        if not rel.endswith(".csv") or rel.endswith("_mask.csv") or rel.endswith("_W.csv"):
            continue
        values, labels = io.read_matrix_csv(root / rel)
        fig_path = root / "figures" / Path(rel).with_suffix(".svg")
        fig_path.parent.mkdir(parents=True, exist_ok=True)
        title = rel[:-4].replace("/", " ")
        if rel.endswith("_p.csv"):
            report.pvalue_figure(values, labels, title, fig_path, alpha)
        else:
            metric = Metric(Path(rel).stem)
            report.matrix_figure(values, metric, labels, title, fig_path)
        written.append(fig_path)
    return written


# --- entry point -------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="neuroflux", description="EEG-fNIRS connectivity pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("synth", "write a synthetic dataset"),
                           ("run", "compute connectivity and statistics"),
                           ("report", "render SVG heatmaps of a result tree")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", help="output directory (dataset, results or tree to report)")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--seed", type=int, default=None, help="random seed (synth)")
        if name == "report":
            p.add_argument("results", nargs="?", help="result tree (default: --out or io.out_dir)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise BadConfig("seed must be an unsigned 64-bit integer", "run.seed")
            cfg.set("run.seed", args.seed)
        threads = args.threads if args.threads is not None else int(cfg.get("run.threads"))
        if threads < 1:
            raise BadConfig("threads must be >= 1", "run.threads")
        if args.command == "synth":
            out = cmd_synth(cfg, args.out, threads)
            print(f"dataset written to {out}")
            return 0
        if args.command == "run":
            out, failures = cmd_run(cfg, args.out, threads)
            for f in failures:
                print(f"FAILED {f}", file=sys.stderr)
            print(f"results written to {out}")
            return 1 if failures else 0
        root = args.results or args.out or cfg.path("io.out_dir")
        figs = cmd_report(root)
        print(f"{len(figs)} figure(s) written under {Path(root) / 'figures'}")
        return 0
    except NeurofluxError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
