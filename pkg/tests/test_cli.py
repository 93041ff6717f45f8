import csv
import json
import subprocess
import sys

import pytest

from xtalk_pqc import __version__
from xtalk_pqc.circuit import read_circuit
from xtalk_pqc.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_no_command_and_bad_flags(tmp_path):
    assert main([]) == 2
    assert main(["schedule", "--omega", "x", "--out", str(tmp_path)]) == 2
    assert main(["frobnicate"]) == 2


def test_schedule_edges(tmp_path, capsys):
    assert main(["schedule", "--edges", "0,1;2,3;1,2", "--omega", "0", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "schedule.json").read_text())
    assert sorted(map(tuple, doc["gates"])) == [(0, 1), (1, 2), (2, 3)]
    assert "R=2" in capsys.readouterr().out
    m = manifest(tmp_path)
    assert m["exit_code"] == 0 and m["outputs"] == ["schedule.json"] and m["command"] == "schedule"


def test_schedule_single_edge(tmp_path):
    assert main(["schedule", "--edges", "0,1", "--out", str(tmp_path)]) == 0


def test_schedule_non_edge_is_input_error(tmp_path):
    assert main(["schedule", "--edges", "0,5", "--out", str(tmp_path)]) == 2


def test_schedule_needs_a_layer(tmp_path):
    assert main(["schedule", "--out", str(tmp_path)]) == 2


def test_schedule_from_circuit(tmp_path):
    assert main(["build-ansatz", "--family", "base1", "--n", "4", "--layers", "1", "--out", str(tmp_path)]) == 0
    path = tmp_path / "base1_n4_L1.txt"
    assert read_circuit(path.read_text()).count("cx") == 3
    assert main(["schedule", "--circuit", str(path), "--omega", "1", "--out", str(tmp_path / "s")]) == 0
    assert len(json.loads((tmp_path / "s" / "schedule.json").read_text())["sublayers"]) >= 2


def test_malformed_device(tmp_path):
    bad = tmp_path / "dev.json"
    bad.write_text("{not json")
    assert main(["schedule", "--edges", "0,1", "--device", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text(json.dumps({"num_qubits": 2}))
    assert main(["schedule", "--edges", "0,1", "--device", str(bad), "--out", str(tmp_path)]) == 2


def test_sweep_stats_grid(tmp_path):
    assert main(["sweep", "--n", "5", "--layers", "1,2,3,4", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "sweep_stats.csv")
    assert len(table) == 20
    assert {r["family"] for r in table} == {"base1", "base2", "high_xtalk", "medium_xtalk", "low_xtalk"}
    assert all(r["error"] == "" for r in table)
    for r in table:
        if r["family"] == "base1":
            assert float(r["speedup_vs_base1"]) == 1.0
        if r["family"] == "base2":
            assert float(r["speedup_vs_base1"]) > 1.0


def test_sweep_is_thread_count_independent(tmp_path):
    args = ["sweep", "--n", "3,4", "--layers", "2", "--metrics", "expressibility,entropy,gradvar",
            "--pairs", "300", "--bins", "20", "--samples", "20", "--shots", "200", "--seed", "5"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "4", "--out", str(tmp_path / "b")]) == 0
    for name in ("sweep_expressibility.csv", "sweep_entropy.csv", "sweep_gradvar.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_records_row_errors(tmp_path):
    assert main(["sweep", "--n", "14", "--layers", "1", "--families", "base1", "--out", str(tmp_path)]) == 0
    (row,) = rows(tmp_path / "sweep_stats.csv")
    assert "MappingError" in row["error"]


def test_sweep_usage_errors(tmp_path):
    assert main(["sweep", "--n", "3", "--layers", "1", "--metrics", "beauty", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--n", "3", "--layers", "1", "--families", "base9", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--n", "3", "--layers", "1", "--cost", "most", "--out", str(tmp_path)]) == 2


def test_vqe_and_manifest_replay(tmp_path):
    out = tmp_path / "a"
    assert main(["vqe", "--family", "base1", "--layers", "2", "--iters", "5", "--shots", "200",
                 "--seed", "3", "--out", str(out)]) == 0
    summary = json.loads((out / "vqe_summary.json").read_text())
    assert summary["evaluations"] == 10
    assert len(rows(out / "vqe_trace.csv")) == 5
    assert main(["--manifest", str(out / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert (out / "vqe_trace.csv").read_bytes() == (tmp_path / "b" / "vqe_trace.csv").read_bytes()


def test_vqe_custom_hamiltonian(tmp_path):
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"n": 1, "terms": [{"coeff": 1.0, "pauli": "Z"}]}))
    assert main(["vqe", "--hamiltonian", str(h), "--family", "base1", "--layers", "0", "--iters", "3",
                 "--exact", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "vqe_summary.json").read_text())["exact_ground"] == -1.0
    h.write_text(json.dumps({"n": 1, "terms": [{"coeff": 1.0, "pauli": "Q"}]}))
    assert main(["vqe", "--hamiltonian", str(h), "--out", str(tmp_path)]) == 2


def test_pairs_need_two_edges(tmp_path):
    assert main(["characterize", "--pairs", "0,1|2,3", "--out", str(tmp_path)]) == 2


def test_bad_manifest(tmp_path):
    (tmp_path / "m.json").write_text("[]")
    assert main(["--manifest", str(tmp_path / "m.json")]) == 2


@pytest.mark.slow
def test_characterize_pair(tmp_path):
    assert main(["characterize", "--pairs", "0,1;2,3", "--k", "4", "--shots", "2000",
                 "--lengths", "1,10,30", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "ratios.csv")
    assert {(r["edge"], r["paired_edge"]) for r in table} == {("0-1", "2-3"), ("2-3", "0-1")}
    assert all(0.5 < float(r["conditional_over_independent"]) < 3 for r in table)
    doc = json.loads((tmp_path / "xtalk_table.json").read_text())
    assert doc["independent_epc"]


def test_characterize_unfittable_is_numeric_error(tmp_path):
    dev = json.loads(subprocess.run(
        [sys.executable, "-c", "import json; from xtalk_pqc.device import default_device, device_to_dict;"
         "print(json.dumps(device_to_dict(default_device())))"], capture_output=True, text=True, check=True).stdout)
    for g in dev["gates"]:
        if g["name"] == "cx" and sorted(g["qubits"]) == [0, 1]:
            g["epc"] = 0.74
    (tmp_path / "d.json").write_text(json.dumps(dev))
    code = main(["characterize", "--device", str(tmp_path / "d.json"), "--edges", "0,1", "--k", "2",
                 "--shots", "200", "--lengths", "1,5,10", "--out", str(tmp_path)])
    assert code == 1
    assert manifest(tmp_path)["exit_code"] == 1


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "xtalk_pqc.cli", "schedule", "--edges", "0,1;2,3",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
