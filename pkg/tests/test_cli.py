import json
import subprocess
import sys

import pytest

from phenoclust.cli import main
from phenoclust.synth import blob_spec


@pytest.fixture
def synth_dir(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(blob_spec(k=3, n_meals=60).to_json()))
    assert main(["synth", str(spec), "--out", str(tmp_path / "synth")]) == 0
    return tmp_path / "synth"


def run(args):
    try:
        code = main([str(a) for a in args])
    except SystemExit as exc:
        code = exc.code
    return code


def load(path):
    return json.loads(path.read_text())


def test_synth_outputs(synth_dir):
    assert sorted(p.name for p in synth_dir.iterdir()) == ["meals.csv", "planted_gs.txt", "planted_partition.json"]
    planted = load(synth_dir / "planted_partition.json")
    assert planted["labels"][:3] == [1, 2, 3]
    assert planted["config"]["command"] == "synth"


def test_ingest(synth_dir, capsys):
    assert run(["ingest", synth_dir / "meals.csv"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["meals_accepted"] == 60 and data["rows_rejected"] == []


def test_cluster_writes_artifacts(synth_dir, tmp_path):
    out = tmp_path / "c"
    assert run(["cluster", synth_dir / "meals.csv", "--out", out]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "ch_curve.json", "ch_curve.svg", "cluster_means.json", "cluster_means.svg", "heatmap.svg", "partition.json",
    ]
    part = load(out / "partition.json")
    assert part["k"] == 3 and part["config"]["k"] == "auto"
    for name in ("ch_curve.json", "cluster_means.json"):
        assert "config" in load(out / name)


def test_cluster_fixed_k(synth_dir, tmp_path):
    out = tmp_path / "c"
    assert run(["cluster", synth_dir / "meals.csv", "--k", 4, "--out", out]) == 0
    assert load(out / "partition.json")["k"] == 4


def test_cluster_k_zero_is_usage_error(synth_dir, tmp_path, capsys):
    assert run(["cluster", synth_dir / "meals.csv", "--k", 0, "--out", tmp_path / "c"]) == 1
    assert "KOutOfRange" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [[], ["bogus"], ["cluster"], ["compare", "x.csv", "y.txt", "--alpha", "2"], ["compare", "x", "y", "--replicates", "10"]],
)
def test_usage_errors(args):
    assert run(args) == 1


def test_data_errors(tmp_path, capsys):
    assert run(["ingest", tmp_path / "missing.csv"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("meal_id,carbs_g\nm1,3\n")
    assert run(["ingest", bad]) == 2
    assert "MissingColumn" in capsys.readouterr().err


def test_bad_dsl_is_data_error(synth_dir, tmp_path, capsys):
    gs = tmp_path / "gs.txt"
    gs.write_text("(fat_g > 1 || bg_change > 3)\n")
    assert run(["evaluate-gs", synth_dir / "meals.csv", gs, "--out", tmp_path / "e"]) == 2
    assert "MixedOrGroup" in capsys.readouterr().err


def test_evaluate_empty_gold_standard(synth_dir, tmp_path):
    gs = tmp_path / "empty.txt"
    gs.write_text("# nothing yet\n")
    out = tmp_path / "e"
    assert run(["evaluate-gs", synth_dir / "meals.csv", gs, "--out", out]) == 0
    data = load(out / "gold_standard.json")
    assert data["pct_meals_supported"] == 0 and data["pct_meals_contradicted"] == 0


def test_evaluate_planted(synth_dir, tmp_path):
    out = tmp_path / "e"
    assert run(["evaluate-gs", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out]) == 0
    data = load(out / "gold_standard.json")
    assert len(data["observations"]) == 3
    assert data["n_contradictory"] == 0


def test_compare_against_gold_standard(synth_dir, tmp_path):
    out = tmp_path / "cmp"
    assert run(["compare", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out]) == 0
    data = load(out / "compare.json")
    assert data["ari_target"] == "gold_standard"
    # meals outside every planted bracket are UNMATCHED and form their own block
    assert 0 < data["ari"]["ari"] < 1
    assert data["rediscovery"]["n_whole_rediscovered"] == 3


def test_compare_against_planted_partition(synth_dir, tmp_path):
    out = tmp_path / "cmp"
    args = ["compare", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out]
    assert run(args + ["--reference", synth_dir / "planted_partition.json"]) == 0
    data = load(out / "compare.json")
    assert data["ari_target"] == "reference"
    assert data["ari"]["ari"] >= 0.95
    assert "gold_standard_ari" in data
    assert data["config"]["inputs"]["reference"].endswith("planted_partition.json")


def test_compare_reference_must_match(synth_dir, tmp_path, capsys):
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps({"labels": [1, 2]}))
    args = ["compare", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", tmp_path / "c"]
    assert run(args + ["--reference", ref]) == 2
    assert "MismatchedElements" in capsys.readouterr().err


def test_reruns_are_byte_identical(synth_dir, tmp_path):
    out = tmp_path / "cmp"
    args = ["compare", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out, "--seed", 5]
    assert run(args) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run(args) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_seed_from_environment(synth_dir, tmp_path, monkeypatch):
    base = ["compare", synth_dir / "meals.csv", synth_dir / "planted_gs.txt"]
    monkeypatch.setenv("PHENOCLUST_SEED", "17")
    assert run(base + ["--out", tmp_path / "a"]) == 0
    assert load(tmp_path / "a" / "compare.json")["config"]["seed"] == 17
    assert run(base + ["--out", tmp_path / "b", "--seed", 3]) == 0
    assert load(tmp_path / "b" / "compare.json")["config"]["seed"] == 3
    monkeypatch.setenv("PHENOCLUST_SEED", "abc")
    assert run(base + ["--out", tmp_path / "c"]) == 1


def test_feature_select(synth_dir, tmp_path, capsys):
    out = tmp_path / "fs"
    assert run(["feature-select", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out]) == 0
    ranking = load(out / "feature_select.json")["ranking"]
    assert len(ranking) == 4
    assert sum(r["best"] for r in ranking) == 1
    assert capsys.readouterr().err.count("\n") == 4


def test_plot_with_clusters(synth_dir, tmp_path):
    clusters = tmp_path / "c"
    assert run(["cluster", synth_dir / "meals.csv", "--out", clusters]) == 0
    out = tmp_path / "p"
    assert run(["plot", synth_dir / "meals.csv", "--clusters", clusters / "partition.json", "--out", out]) == 0
    assert {"parallel_meals.svg", "heatmap.svg", "cluster_means.svg", "plot_config.json"} <= {
        p.name for p in out.iterdir()
    }


def test_report(synth_dir, tmp_path):
    out = tmp_path / "r"
    assert run(["report", synth_dir / "meals.csv", synth_dir / "planted_gs.txt", "--out", out]) == 0
    data = load(out / "report.json")
    for key in ("config", "ingest", "gold_standard", "feature_selection", "ari", "rediscovery", "ch_curve"):
        assert key in data
    assert data["chosen_feature_set"] in {r["feature_set"] for r in data["feature_selection"]}


def test_module_entry_point(synth_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "phenoclust", "ingest", str(synth_dir / "meals.csv")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["meals_accepted"] == 60
