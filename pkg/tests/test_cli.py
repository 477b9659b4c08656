import csv
import json
from pathlib import Path

import numpy as np
import pytest

from dmfreq.cli import main

SMALL_CV = ["--k", "2,4", "--costs", "1,100", "--repeats", "1", "--folds", "2",
            "--inner-folds", "2"]


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--trials", "10", "--subjects", "4",
                 "--windows", "3"]) == 0
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_layout(sim):
    for cond in ("stationary", "nonstationary"):
        assert len(list((sim / cond).glob("*.dmk1"))) == 10
        meta = rows(sim / f"{cond}_trials.csv")
        assert len(meta) == 11
    assert len(list((sim / "cohort").glob("*.dmk1"))) == 8
    man = json.loads((sim / "manifest.json").read_text())
    assert man["schema"] == "dmfreq.manifest/1"
    assert "stationary/trial_001.dmk1" in man["outputs"]


def test_simulate_nonstationary_metadata(sim):
    meta = rows(sim / "nonstationary_trials.csv")
    dirs = [r[2] for r in meta[1:]]
    assert dirs == ["off->on"] * 5 + ["on->off"] * 5


@pytest.mark.parametrize("fmt", ["csv", "edf"])
def test_simulate_other_formats(tmp_path, fmt):
    assert main(["simulate", "--out", str(tmp_path), "--trials", "2", "--format", fmt]) == 0
    assert len(list((tmp_path / "stationary").glob(f"*.{fmt}"))) == 2


def test_analyze_outputs(sim, tmp_path):
    out = tmp_path / "an"
    assert main(["analyze", "--data", str(sim / "stationary"), "--out", str(out), "--k", "4"]) == 0
    hist = rows(out / "histogram.csv")
    assert hist[0] == ["bin_lo", "bin_hi", "mean", "ci_low", "ci_high"] and len(hist) == 251
    assert sum(float(r[2]) for r in hist[1:]) == pytest.approx(4.0)
    assert len(rows(out / "spectrum.csv")) == 258
    sdm = rows(out / "sdm.csv")
    assert len(sdm) == 11 and len(sdm[0]) == 11
    modes = rows(out / "modes.csv")
    assert len(modes) == 1 + 10 * 4
    for name in ("histogram.svg", "spectrum.svg", "sdm.svg"):
        assert (out / name).read_text().lstrip().startswith("<?xml")


def test_analyze_empty_dir_fails_cleanly(tmp_path):
    (tmp_path / "empty").mkdir()
    out = tmp_path / "out"
    assert main(["analyze", "--data", str(tmp_path / "empty"), "--out", str(out)]) == 3
    assert not out.exists()


def test_analyze_k_too_large(sim, tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", "--data", str(sim / "stationary"), "--out", str(out),
                 "--k", "455"]) == 2
    assert not out.exists()


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_drop_unknown_channel_is_data_error(sim, tmp_path):
    assert main(["analyze", "--data", str(sim / "stationary"), "--out", str(tmp_path / "o"),
                 "--drop-channels", "XX"]) == 3


def test_classify_outputs(sim, tmp_path):
    out = tmp_path / "cl"
    assert main(["classify", "--data", str(sim / "cohort"), "--groups",
                 str(sim / "cohort_groups.csv"), "--out", str(out),
                 "--kinds", "amplitude,tfdm,sdm+tfdm", *SMALL_CV, "--sweep-k"]) == 0
    acc = rows(out / "accuracy.csv")
    assert acc[0] == ["repeat", "fold", "kind", "chosen_c", "chosen_k", "inner_score",
                      "balanced_accuracy"]
    assert len(acc) == 1 + 3 * 2
    assert {r[4] for r in acc[1:] if r[2] == "amplitude"} == {"-"}
    conf = json.loads((out / "confusion.json").read_text())
    assert np.sum(conf["kinds"]["tfdm"]["counts"]) == 8
    assert len(rows(out / "sweep_k.csv")) == 1 + 2 * 2
    assert (out / "accuracy.svg").exists()


def test_classify_missing_subject(sim, tmp_path):
    groups = tmp_path / "g.csv"
    groups.write_text("subject_id,group\nnobody,a\nsta001,b\n")
    assert main(["classify", "--data", str(sim / "cohort"), "--groups", str(groups),
                 "--out", str(tmp_path / "o"), *SMALL_CV]) == 3


@pytest.mark.parametrize("path,n", [("spectra", 256), ("dm", 250)])
def test_anova_rows(sim, tmp_path, path, n):
    out = tmp_path / path
    assert main(["anova", "--data", str(sim / "cohort"), "--groups",
                 str(sim / "cohort_groups.csv"), "--out", str(out), "--path", path,
                 "--k", "4"]) == 0
    table = rows(out / "anova.csv")
    assert len(table) == n + 1
    assert table[0] == ["frequency", "F", "p", "p_adjusted", "significant"]
    if path == "spectra":
        assert float(table[1][0]) == pytest.approx(0.9765625)


def _snapshot(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_outputs_identical_across_jobs(sim, tmp_path):
    runs = {}
    for jobs in ("1", "2"):
        base = tmp_path / f"j{jobs}"
        cmds = [
            ["simulate", "--out", str(base / "sim"), "--trials", "6", "--subjects", "3",
             "--windows", "2", "--seed", "5"],
            ["analyze", "--data", str(sim / "nonstationary"), "--out", str(base / "an")],
            ["classify", "--data", str(sim / "cohort"), "--groups",
             str(sim / "cohort_groups.csv"), "--out", str(base / "cl"), *SMALL_CV],
            ["anova", "--data", str(sim / "cohort"), "--groups", str(sim / "cohort_groups.csv"),
             "--out", str(base / "av"), "--path", "dm", "--k", "4"],
        ]
        for cmd in cmds:
            assert main(cmd + ["--jobs", jobs]) == 0
        runs[jobs] = _snapshot(base)
    assert runs["1"].keys() == runs["2"].keys()
    for name in runs["1"]:
        assert runs["1"][name] == runs["2"][name], name


def test_analyze_first_p_modes(sim, tmp_path):
    out = tmp_path / "fp"
    assert main(["analyze", "--data", str(sim / "stationary"), "--out", str(out), "--k", "20",
                 "--first-p-modes"]) == 0
    modes = rows(out / "modes.csv")
    assert len(modes) == 1 + 10 * 10
    assert json.loads((out / "manifest.json").read_text())["config"]["first_p_modes"] is True
