import json
import subprocess
import sys

import numpy as np
import pytest

from r2km.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_no_arguments_prints_usage(capsys):
    code, _, err = run(capsys)
    assert code == EXIT_USAGE
    assert "usage: r2km" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "stats", "cd", "--k", "5")
    assert code == EXIT_USAGE
    assert "--n" in err


def test_help_exits_cleanly(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == EXIT_OK and "bench" in out


def test_stats_cd(capsys):
    code, out, _ = run(capsys, "stats", "cd", "--k", "5", "--n", "38", "--q", "2.728")
    assert code == EXIT_OK
    assert abs(float(out.strip()) - 0.9895) <= 0.0005


def test_stats_cd_json(capsys):
    code, out, _ = run(capsys, "stats", "cd", "--k", "5", "--n", "9", "--json")
    doc = json.loads(out)
    assert abs(doc["cd"] - 2.0333) <= 0.0005
    assert doc["seed"] == 42


def test_stats_friedman_rank_row(capsys, tmp_path):
    path = tmp_path / "ranks.csv"
    path.write_text("R2KM,RKM,RVFLwoDL,RVFL,X\n1.57,3.80,4.09,2.96,2.58\n", encoding="utf-8")
    code, out, _ = run(capsys, "stats", "friedman", str(path), "--ranks", "--n", "38")
    assert code == EXIT_OK
    assert "chi2_F = 61.575" in out
    assert "F_F = 25.195" in out
    code, out, _ = run(capsys, "stats", "friedman", str(path), "--ranks", "--n", "38", "--json")
    doc = json.loads(out)
    assert abs(doc["chi2"] - 61.5752) <= 0.01
    assert doc["df_f"] == [4, 148]


def test_stats_friedman_needs_n_with_ranks(capsys, tmp_path):
    path = tmp_path / "ranks.csv"
    path.write_text("A,B\n1,2\n", encoding="utf-8")
    code, _, _ = run(capsys, "stats", "friedman", str(path), "--ranks")
    assert code == EXIT_USAGE


def test_stats_friedman_from_scores(capsys, tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("dataset,A,B,C\nd1,0.9,0.8,0.7\nd2,0.8,0.9,0.1\nd3,0.7,0.6,0.5\n",
                    encoding="utf-8")
    code, out, _ = run(capsys, "stats", "friedman", str(path), "--json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["average_ranks"] == pytest.approx([4 / 3, 5 / 3, 3.0])


def test_degenerate_statistic_is_numerical_failure(capsys, tmp_path):
    path = tmp_path / "ranks.csv"
    path.write_text("A,B\n1,2\n", encoding="utf-8")
    code, _, err = run(capsys, "stats", "friedman", str(path), "--ranks", "--n", "6")
    assert code == EXIT_NUMERIC
    assert "numerical error" in err


def test_missing_file_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "stats", "friedman", str(tmp_path / "none.csv"))
    assert code == EXIT_DATA
    assert "none.csv" in err


def test_bound(capsys, tmp_path):
    diag = tmp_path / "diag.csv"
    diag.write_text("psi\n1\n", encoding="utf-8")
    code, out, _ = run(capsys, "bound", "--diag-csv", str(diag), "--norm", "1", "--eps", "2",
                       "--json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["bound"] == 4.0 and doc["confidence"] == 0.0
    code, _, _ = run(capsys, "bound", "--diag-csv", str(diag), "--norm", "1", "--eps", "3")
    assert code == EXIT_DATA


def test_bench_predict_and_map(capsys, blob_scene, tmp_path):
    out_dir = tmp_path / "results"
    code, out, _ = run(capsys, "bench", "run", str(blob_scene), "--out", str(out_dir), "--json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["seed"] == 42
    assert all(m["oa"] == 1.0 for m in doc["metrics"].values())

    features = tmp_path / "pixels.csv"
    features.write_text("f1,f2,f3\n-3,-3,0\n3,3,1\n", encoding="utf-8")
    code, out, _ = run(capsys, "predict", str(out_dir / "r2km" / "model.npz"), str(features),
                       "--json")
    assert code == EXIT_OK
    assert json.loads(out)["predictions"] == ["A", "B"]

    palette = blob_scene.parent / "blob_palette.csv"
    target = tmp_path / "map.ppm"
    code, _, _ = run(capsys, "map", str(out_dir / "report.json"), str(palette),
                     "--model", "rkm", "--out", str(target))
    assert code == EXIT_OK
    # the separable scene is predicted perfectly, so the map is the ground truth
    assert target.read_bytes() == (blob_scene.parent / "blob_scene_truth.ppm").read_bytes()


def test_predict_with_label_column(capsys, blob_scene, tmp_path):
    out_dir = tmp_path / "res"
    assert run(capsys, "bench", "run", str(blob_scene), "--out", str(out_dir))[0] == EXIT_OK
    labelled = tmp_path / "labelled.csv"
    labelled.write_text("row,col,f1,f2,f3,label\n0,0,-3,-3,0,A\n0,1,3,3,1,B\n", encoding="utf-8")
    code, out, _ = run(capsys, "predict", str(out_dir / "rvfl" / "model.npz"), str(labelled),
                       "--label-column", "label", "--coord-columns", "row", "col")
    assert code == EXIT_OK
    assert out.split() == ["A", "B"]


def test_output_dir_from_environment(capsys, blob_scene, tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv("R2KM_OUTPUT_DIR", str(target))
    code, out, _ = run(capsys, "tune", str(blob_scene), "--seed", "5")
    assert code == EXIT_OK
    assert "seed: 5" in out
    assert (target / "tuning_scores_r2km.csv").is_file()


def test_bad_config_is_data_error(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[dataset]\npath = "missing.csv"\n', encoding="utf-8")
    code, _, err = run(capsys, "bench", "run", str(cfg), "--out", str(tmp_path / "o"))
    assert code == EXIT_DATA
    assert "[load]" in err


def test_jobs_do_not_change_outputs(capsys, blob_scene, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "bench", "run", str(blob_scene), "--out", str(a))[0] == EXIT_OK
    assert run(capsys, "bench", "run", str(blob_scene), "--out", str(b), "--jobs", "2")[0] == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    ra.pop("timings"), rb.pop("timings")
    assert ra == rb
    assert (a / "r2km" / "map.ppm").read_bytes() == (b / "r2km" / "map.ppm").read_bytes()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "r2km", "stats", "cd", "--k", "5", "--n", "38"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert np.isclose(float(proc.stdout), 0.9895, atol=5e-4)
