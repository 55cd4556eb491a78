import csv
import json
import re

import numpy as np
import pytest

from sdca.algorithms import ConfigError
from sdca.bench import ExperimentConfig, load_config, run_experiment, summarize
from sdca.cli import main
from sdca.svg import line_chart


def _tiny(tmp_path, **over):
    doc = {"experiment": "exp1", "dataset": {"kind": "synthetic", "n": 5, "count": 800, "seed": 1},
           "trials": 2, "seed": 3, "eval_every": 100, "max_iterations": 300, "timing": False,
           "reference": {"starts": 3, "tol": 1e-3}}
    doc.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


@pytest.mark.parametrize("doc, msg", [
    ({"bogus": 1}, "unknown config keys"),
    ({"experiment": "exp9"}, "unknown experiment"),
    ({"experiment": "custom"}, "nonempty"),
    ({"experiment": "exp1", "trials": 0}, "trials"),
    ({"experiment": "exp1", "dataset": {"kind": "csv"}}, "dataset kind"),
    ({"experiment": "custom", "algorithms": [{"variant": "SDCA1"}, {"variant": "SDCA1"}]}, "duplicate"),
    ({"experiment": "custom", "algorithms": [{"variant": "SDCA1", "decomposition": 3}]}, "decomposition"),
    ({"experiment": "custom", "algorithms": [{"variant": "PSS"}]}, "stepsize"),
    ({"experiment": "custom", "algorithms": [{"variant": "SDCA1", "colour": "red"}]}, "algorithm keys"),
])
def test_config_validation(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(doc)


def test_roster_defaults():
    cfg = ExperimentConfig.from_dict({"experiment": "exp3"})
    assert [a["label"] for a in cfg.algorithms] == ["SDCA1-type1", "SDCA1-type2", "SDCA2-type1", "SDCA2-type2"]
    assert ExperimentConfig.from_dict({"experiment": "exp2"}).max_iterations == 5000


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    return run_experiment(load_config(_tiny(tmp)), tmp / "out"), tmp


def _read(path):
    return path.read_bytes()


def test_bundle_layout(bundle):
    out, _ = bundle
    for name in ("config.json", "manifest.json", "summary.csv", "gap_vs_iteration.svg"):
        assert (out / name).exists()
    assert not (out / "gap_vs_time.svg").exists()  # timing disabled
    man = json.loads((out / "manifest.json").read_text())
    assert man["failures"] == [] and len(man["input_sha256"]) == 64
    runs = sorted(p.name for p in (out / "runs").iterdir())
    assert runs == sorted(["SDCA1", "SDCA2", "SDCA3", "SDCA4", "PSS-constant", "PSS-diminishing"])
    assert sorted(p.name for p in (out / "runs" / "SDCA1").iterdir()) == ["trial_000.csv", "trial_001.csv"]


def test_rerun_is_byte_identical(bundle):
    out, tmp = bundle
    again = run_experiment(load_config(_tiny(tmp, workers=3)), tmp / "again")
    files = sorted(p.relative_to(out) for p in out.rglob("*.csv"))
    assert files
    for f in files:
        assert _read(out / f) == _read(again / f), f


def test_summary_rows(bundle):
    out, _ = bundle
    rows = summarize(out)
    by = {r["algorithm"]: r for r in rows}
    assert by["SDCA1"]["trials"] == 2 and by["SDCA1"]["final_k"] == 300
    assert all(r["final_gap_mean"] >= -1e-9 for r in rows)


def test_single_trial_std_zero(tmp_path):
    out = run_experiment(load_config(_tiny(tmp_path, trials=1, experiment="exp3")), tmp_path / "o")
    for p in (out / "curves").glob("*.csv"):
        with open(p) as fh:
            assert all(float(r["std_gap"]) == 0.0 for r in csv.DictReader(fh))


def test_svg_vertices_match_curve_rows(bundle):
    out, _ = bundle
    svg = (out / "gap_vs_iteration.svg").read_text()
    for m in re.finditer(r'<polyline data-label="([^"]+)"[^>]*points="([^"]*)"', svg):
        label, pts = m.group(1), m.group(2).split()
        with open(out / "curves" / f"{label}.csv") as fh:
            nrows = sum(1 for _ in csv.DictReader(fh))
        assert len(pts) == nrows, label


def test_line_chart_log_floor():
    svg = line_chart({"a": ([1, 2, 3], [1.0, 0.0, 1e-3])}, logy=True)
    pts = re.search(r'points="([^"]*)"', svg).group(1).split()
    assert len(pts) == 3


def test_cli_verify_schedule(tmp_path, capsys):
    csv_path = tmp_path / "t.csv"
    assert main(["verify-schedule", "subexp:5,0.2", "--horizon", "2000", "--csv", str(csv_path)]) == 0
    assert "overall" in capsys.readouterr().out
    assert len(csv_path.read_text().splitlines()) == 2002
    assert main(["verify-schedule", "subexp:5,0.3", "--horizon", "2000"]) == 1
    assert main(["verify-schedule", "constant", "--horizon", "10"]) == 1


def test_cli_gen_data(tmp_path):
    out = tmp_path / "d.libsvm"
    assert main(["gen-data", "kind=spiked,n=4,count=50,seed=2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 50
    assert main(["gen-data", "kind=phase,m=20,n=3", "--out", str(tmp_path / "p.libsvm")]) == 0
    assert main(["gen-data", "kind=spiked,q=1"]) == 1
    assert main(["gen-data", "kind=cubes"]) == 1


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = _tiny(tmp_path, trials=1, experiment="exp2", max_iterations=100)
    assert main(["run", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert "SDCA4" in capsys.readouterr().out
    assert main(["summarize", str(tmp_path / "r")]) == 0


def test_cli_exit_codes(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 1
    assert main(["frobnicate"]) == 1
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1 1:x\n")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "exp1", "dataset": {"kind": "libsvm", "path": "bad.libsvm"}}))
    assert main(["run", str(cfg)]) == 1
    # runtime failure: the output location is a regular file
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", str(_tiny(tmp_path, trials=1)), "--out", str(blocker / "sub")]) == 2
    assert main(["summarize", str(tmp_path / "empty")]) in (1, 2)
