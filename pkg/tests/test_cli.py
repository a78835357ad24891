import csv
import json
from pathlib import Path

import pytest

from nssbm.cli import main

DATA = Path(__file__).parent / "data"
BENCH_SIM = ["simulate", "--nodes", "50", "--bins", "24", "--k", "3", "--d", "3",
             "--s1", "0,2,4", "--s2", "0.5,1,1.5", "--s3", "0.5,1,1.5", "--seed", "7"]


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    assert main(BENCH_SIM + ["--out", str(root / "sim")]) == 0
    assert main(["fit", str(root / "sim" / "events.csv"), "--kmax", "10", "--dmax", "10",
                 "--out", str(root / "fit")]) == 0
    return root


def test_simulate_writes_files(bench_run):
    sim = bench_run / "sim"
    truth = json.loads((sim / "truth.json").read_text())
    assert truth["mode"] == "directed"
    assert len(truth["node_labels"]) == 50 and len(truth["time_labels"]) == 24
    assert truth["rates"][2][2][2] == pytest.approx(7.0)
    manifest = json.loads((sim / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 7


def test_simulate_is_byte_reproducible(tmp_path, bench_run):
    assert main(BENCH_SIM + ["--out", str(tmp_path)]) == 0
    for name in ("events.csv", "truth.json", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (bench_run / "sim" / name).read_bytes()


def test_simulate_single_cell(tmp_path):
    argv = ["simulate", "--nodes", "1", "--bins", "1", "--k", "1", "--d", "1",
            "--s1", "0.5", "--s2", "0.25", "--s3", "0.25", "--out", str(tmp_path)]
    assert main(argv) == 0
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth["rates"] == [[[1.0]]]


@pytest.mark.parametrize("extra", [
    ["--s1", "0,1", "--s2", "0,1", "--s3", "0"],         # zero rate
    ["--s1", "1", "--s2", "1", "--s3", "1", "--k", "2"],  # K mismatch
    ["--s1", "1", "--s2", "1", "--s3", "1", "--node-weights", "0.3"],
    ["--s1", "1,2", "--s2", "1,2", "--s3", "1", "--node-weights", "0.2,0.2"],
])
def test_simulate_invalid_flags(tmp_path, extra):
    argv = ["simulate", "--nodes", "4", "--bins", "2", "--out", str(tmp_path)] + extra
    assert main(argv) != 0


def test_fit_recovers_benchmark_design(bench_run, capsys):
    fit = json.loads((bench_run / "fit" / "fit.json").read_text())
    assert (fit["K"], fit["D"]) == (3, 3)
    assert fit["mode"] == "directed"
    assert main(["eval", "--pred", str(bench_run / "fit" / "fit.json"),
                 "--truth", str(bench_run / "sim" / "truth.json")]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores == {"ari_nodes": 1.0, "ari_time": 1.0}


def test_fit_json_schema(bench_run):
    fit = json.loads((bench_run / "fit" / "fit.json").read_text())
    icl = fit["icl"]
    assert icl["total"] == icl["emission_term"] + icl["label_term"]
    for key in ("node_labels", "time_labels", "rates", "S", "R", "bin_totals", "trace_summary",
                "hyperparameters", "restart_id"):
        assert key in fit
    manifest = json.loads((bench_run / "fit" / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {"events.csv"}
    assert manifest["parameters"]["search"]["k_max"] == 10


def test_fit_zero_csv(tmp_path):
    path = tmp_path / "zeros.csv"
    path.write_text("person_a,person_b,bin,count\n0,1,0,0\n3,2,2,0\n")
    assert main(["fit", str(path), "--mode", "directed", "--kmax", "4", "--dmax", "3",
                 "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert (fit["K"], fit["D"], fit["num_nodes"], fit["num_bins"]) == (1, 1, 4, 3)


def test_fit_missing_input(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) != 0


def test_fit_inconsistent_dims(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("person_a,person_b,bin,count\n0,5,0,1\n")
    assert main(["fit", str(path), "--num-nodes", "3", "--out", str(tmp_path)]) != 0


def test_fit_raw_log_excerpt(tmp_path, capsys):
    log = DATA / "ht09_excerpt.dat"
    assert main(["fit", str(log), "--bin-width", "900", "--num-bins", "96", "--restarts", "2",
                 "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["mode"] == "undirected" and fit["num_bins"] == 96
    assert fit["total_count"] == 199
    assert len(fit["node_ids"]) == fit["num_nodes"]
    rows = _read_csv(tmp_path / "node_map.csv")
    assert [int(r["dense_id"]) for r in rows] == list(range(fit["num_nodes"]))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["parameters"]["binning"]["bin_width"] == 900


def test_fit_is_byte_reproducible(tmp_path, bench_run):
    assert main(["fit", str(bench_run / "sim" / "events.csv"), "--out", str(tmp_path)]) == 0
    for name in ("fit.json", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (bench_run / "fit" / name).read_bytes()


def _labels_file(path, node, time):
    path.write_text(json.dumps({"node_labels": node, "time_labels": time}))
    return str(path)


def test_eval_examples(tmp_path, capsys):
    a = _labels_file(tmp_path / "a.json", [0, 0, 1, 1], [0, 1])
    b = _labels_file(tmp_path / "b.json", [0, 1, 0, 1], [1, 0])
    assert main(["eval", "--pred", a, "--truth", b]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["ari_nodes"] == pytest.approx(-0.5)
    assert scores["ari_time"] == 1.0


def test_eval_length_mismatch(tmp_path):
    a = _labels_file(tmp_path / "a.json", [0, 0, 1], [0])
    b = _labels_file(tmp_path / "b.json", [0, 1], [0])
    assert main(["eval", "--pred", a, "--truth", b]) != 0


def test_summarize_benchmark_fit(bench_run, tmp_path):
    assert main(["summarize", "--fit", str(bench_run / "fit" / "fit.json"), "--out", str(tmp_path)]) == 0
    fit = json.loads((bench_run / "fit" / "fit.json").read_text())
    rows = _read_csv(tmp_path / "time_clusters.csv")
    assert len(rows) == 24
    assert sum(int(r["total_interactions"]) for r in rows) == fit["total_count"]
    blocks = _read_csv(tmp_path / "block_rates.csv")
    assert len(blocks) == 27
    assert sum(int(r["S"]) for r in blocks) == fit["total_count"]
    assert len(_read_csv(tmp_path / "node_clusters.csv")) == 50


def test_summarize_single_block(tmp_path):
    path = tmp_path / "zeros.csv"
    path.write_text("person_a,person_b,bin,count\n0,1,0,2\n")
    assert main(["fit", str(path), "--mode", "directed", "--out", str(tmp_path)]) == 0
    assert main(["summarize", "--fit", str(tmp_path / "fit.json")]) == 0
    assert len(_read_csv(tmp_path / "block_rates.csv")) == 1
    # summarize must not clobber the fit manifest
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "fit"


def test_summarize_missing_fields(tmp_path):
    path = tmp_path / "fit.json"
    path.write_text(json.dumps({"K": 1}))
    assert main(["summarize", "--fit", str(path)]) != 0
