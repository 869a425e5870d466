import base64
import io as pyio
import json
import re
import shutil

import numpy as np
import pytest

from neuroflux import cli, report
from neuroflux.config import load_config
from neuroflux.core import Metric
from neuroflux.errors import BadConfig, IncompleteResults, IoError

SMALL = "synth:\n  epochs_per_condition: {epochs}\n  n_subjects: {subjects}\n"


def write_config(tmp, body, name="config.yaml"):
    p = tmp / name
    p.write_text(body)
    return p


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


# --- configuration ----------------------------------------------------------------

def test_defaults_load():
    cfg = load_config(env={})
    assert cfg.get("pipeline.L") == 256 and cfg.get("synth.n_subjects") == 26


def test_unknown_key_reports_field_and_line():
    with pytest.raises(BadConfig) as err:
        load_config(text="ec:\n  order: 3\n  bogus: 1\n", env={})
    assert err.value.field == "ec.bogus" and err.value.line == 3


def test_bad_type_reports_field_and_line():
    with pytest.raises(BadConfig) as err:
        load_config(text="pipeline:\n  L: lots\n", env={})
    assert err.value.field == "pipeline.L" and err.value.line == 2
    with pytest.raises(BadConfig) as err:
        load_config(text="stats:\n  mode: MAYBE\n", env={})
    assert err.value.field == "stats.mode"


def test_yaml_syntax_error_has_line():
    with pytest.raises(BadConfig) as err:
        load_config(text="ec:\n  order: [1, 2\n", env={})
    assert err.value.line is not None


def test_env_overrides():
    cfg = load_config(text="ec:\n  order: 3\n",
                      env={"NEUROFLUX_EC__ORDER": "5", "NEUROFLUX_THREADS": "4",
                           "NEUROFLUX_FC__MSC__OVERLAP": "0.25"})
    assert cfg.get("ec.order") == 5 and cfg.get("run.threads") == 4
    assert cfg.get("fc.msc.overlap") == 0.25
    with pytest.raises(BadConfig):
        load_config(env={"NEUROFLUX_EC__NOPE": "1"})
    with pytest.raises(BadConfig):
        load_config(env={"NEUROFLUX_PIPELINE__L": "abc"})


def test_main_exit_code_on_bad_config(tmp_path, capsys):
    cfg = write_config(tmp_path, "synth:\n  kappa: [1\n")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 2
    assert "BadConfig" in capsys.readouterr().err


# --- synth ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root, SMALL.format(epochs=4, subjects=26))
    data = root / "data"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(data), "--seed", "3"]) == 0
    return root, cfg, data


def test_synth_writes_26_subjects(dataset):
    _, _, data = dataset
    subs = sorted(p.name for p in data.iterdir() if p.is_dir())
    assert subs == [f"sub-{k:02d}" for k in range(1, 27)]
    man = json.loads((data / "manifest.json").read_text())
    assert man["seed"] == 3 and len(man["spec_hash"]) == 64
    assert {"eeg.bin", "eeg.json", "oxy.csv", "deoxy.csv", "eeg_events.csv",
            "fnirs_events.csv"} <= {p.name for p in (data / "sub-01").iterdir()}


def test_synth_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = load_config(text=SMALL.format(epochs=1, subjects=1), env={})
    with pytest.raises(IoError):
        cli.cmd_synth(cfg, blocker / "out")


# --- run ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def results(dataset):
    root, cfg, data = dataset
    out = root / "res1"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
    return out


def test_run_counts(results):
    subj = list((results / "subjects").rglob("*.csv"))
    assert len(subj) == 26 * 2 * 5
    assert len(list((results / "group").rglob("*.csv"))) == 2 * 5
    assert len(list((results / "stats").glob("*_p.csv"))) == 5
    man = json.loads((results / "manifest.json").read_text())
    assert man["failures"] == [] and len(man["complete_subjects"]) == 26
    assert "threads" not in man["parameters"]["run"]
    for rel, digest in man["files"].items():
        assert cli.sha256(results / rel) == digest


def test_run_rerun_is_byte_identical(dataset, results):
    root, cfg, _ = dataset
    out = root / "res2"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    assert tree_bytes(out) == tree_bytes(results)


def test_run_missing_region_map(dataset, tmp_path):
    root, _, data = dataset
    cfg = load_config(text=f"io:\n  data_dir: {data}\n  region_map: {tmp_path / 'none.json'}\n",
                      env={})
    with pytest.raises(BadConfig) as err:
        cli.cmd_run(cfg, tmp_path / "out")
    assert err.value.field == "io.region_map"


def test_run_tags_failures_with_subject(dataset, tmp_path):
    root, cfg, data = dataset
    broken = tmp_path / "data"
    for sub in ("sub-01", "sub-02"):
        shutil.copytree(data / sub, broken / sub)
    (broken / "sub-02" / "oxy.csv").write_text("garbage\n")
    cfg = load_config(text=SMALL.format(epochs=4, subjects=2) + f"io:\n  data_dir: {broken}\n",
                      env={})
    out, failures = cli.cmd_run(cfg, tmp_path / "out")
    assert failures and all(f.startswith("sub-02") for f in failures)


# --- report -----------------------------------------------------------------------

def test_report_empty_tree(tmp_path):
    with pytest.raises(IncompleteResults):
        cli.cmd_report(tmp_path)
    assert cli.main(["report", str(tmp_path)]) == 2


def test_report_rejects_tampered_tree(results, tmp_path):
    copy = tmp_path / "t"
    shutil.copytree(results, copy)
    (copy / "group" / "NBACK0" / "PCC.csv").write_text("tampered\n")
    with pytest.raises(IncompleteResults):
        cli.cmd_report(copy)


def test_report_small_tree(tmp_path):
    cfg = write_config(tmp_path, SMALL.format(epochs=4, subjects=2) + "ec:\n  order: 2\n")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 0
    cfg2 = write_config(tmp_path, SMALL.format(epochs=4, subjects=2)
                        + f"ec:\n  order: 2\nio:\n  data_dir: {tmp_path / 'd'}\n", "c2.yaml")
    assert cli.main(["run", "--config", str(cfg2), "--out", str(tmp_path / "r")]) == 0
    figs = cli.cmd_report(tmp_path / "r")
    assert len(figs) == 2 * 2 * 5 + 2 * 5 + 5
    assert all(f.suffix == ".svg" for f in figs)


def _embedded_image(svg_text):
    import matplotlib.image as mpimg
    m = re.search(r'data:image/png;base64,([A-Za-z0-9+/=\s]+)"', svg_text)
    return mpimg.imread(pyio.BytesIO(base64.b64decode(m.group(1))), format="png")


def test_pvalue_figure_all_significant_is_dark(tmp_path):
    labels = [f"R{k}" for k in range(1, 26)]
    path = report.pvalue_figure(np.full((25, 25), 1e-4), labels, "t", tmp_path / "p.svg")
    img = _embedded_image(path.read_text())
    dark = np.array([0x1a, 0x1a, 0x1a]) / 255
    assert np.allclose(img[..., :3], dark, atol=1 / 255)


def test_matrix_figure_grid_and_labels(tmp_path):
    labels = [f"R{k}" for k in range(1, 26)]
    vals = np.random.default_rng(0).uniform(-0.5, 1, (25, 25))
    path = report.matrix_figure(vals, Metric.PCC, labels, "t", tmp_path / "m.svg")
    text = path.read_text()
    for lab in labels:
        assert len(re.findall(rf">{lab}<", text)) == 2
    img = _embedded_image(text)
    assert img.shape[:2] == (25, 25)


def test_figures_are_deterministic(tmp_path):
    labels = [f"R{k}" for k in range(1, 26)]
    vals = np.eye(25)
    a = report.matrix_figure(vals, "PLV", labels, "t", tmp_path / "a.svg").read_bytes()
    b = report.matrix_figure(vals, "PLV", labels, "t", tmp_path / "b.svg").read_bytes()
    assert a == b
