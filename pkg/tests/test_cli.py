import json
import re

import jsonschema

from tiered_spgemm import read_matrix_market
from tiered_spgemm.cli import main

RUN_SCHEMA = {
    "type": "object",
    "required": ["rep", "flops", "multiplications", "c_nnz",
                 "simulated_seconds", "kernel_seconds", "copy_seconds",
                 "copy_bytes_slow_to_fast", "copy_bytes_fast_to_slow",
                 "ledger_events", "wall_seconds_informational"],
    "properties": {
        "rep": {"type": "integer"},
        "flops": {"type": "integer", "minimum": 0},
        "multiplications": {"type": "integer", "minimum": 0},
        "c_nnz": {"type": "integer", "minimum": 0},
        "simulated_seconds": {"type": "number", "minimum": 0},
        "kernel_seconds": {"type": "number", "minimum": 0},
        "copy_seconds": {"type": "number", "minimum": 0},
        "copy_bytes_slow_to_fast": {"type": "integer", "minimum": 0},
        "copy_bytes_fast_to_slow": {"type": "integer", "minimum": 0},
        "ledger_events": {"type": "integer", "minimum": 0},
        "wall_seconds_informational": {"type": "number", "minimum": 0},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "spec", "runs", "median"],
    "properties": {
        "schema_version": {"const": 1},
        "spec": {"type": "object",
                 "required": ["problem", "product", "grid", "mode", "seed",
                              "reps", "workers"]},
        "runs": {"type": "array", "minItems": 1, "items": RUN_SCHEMA},
        "median": {"type": "object"},
    },
}


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def scrub_wall_fields(text):
    return re.sub(r'"wall_seconds_informational": [0-9.e+-]+',
                  '"wall_seconds_informational": 0', text)


BASE = ["--grid", "9", "9", "9", "--reps", "2", "--workers", "1", "--seed", "3"]


def test_generate_stencil_and_interpolation(tmp_path, capsys):
    for matrix, shape in (("A", (729, 729)), ("P", (729, 125)), ("R", (125, 729))):
        out_file = tmp_path / ("%s.mtx" % matrix)
        code, _ = run_cli(["generate", "--problem", "laplace3d", "--grid", "9", "9", "9",
                           "--matrix", matrix, str(out_file)], capsys)
        assert code == 0
        m = read_matrix_market(str(out_file))
        assert (m.num_rows, m.num_cols) == shape


def test_generate_rhs(tmp_path, capsys):
    out_file = tmp_path / "rhs.mtx"
    code, _ = run_cli(["generate", "--matrix", "rhs", "--rows", "50", "--cols", "60",
                       "--delta", "4", "--seed", "9", str(out_file)], capsys)
    assert code == 0
    m = read_matrix_market(str(out_file))
    assert m.nnz == 200


def test_multiply_json_report_schema(capsys):
    code, out = run_cli(["multiply", "--problem", "laplace3d", "--product", "AxP",
                         "--mode", "all_slow"] + BASE, capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    run = report["runs"][0]
    assert run["flops"] == 2 * run["multiplications"]


def test_multiply_csv_row_count(capsys):
    code, out = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_slow",
                         "--format", "csv"] + BASE, capsys)
    assert code == 0
    lines = [l for l in out.strip().split("\n") if l]
    assert len(lines) == 1 + 2 + 1  # header + reps + median row
    assert lines[-1].split(",")[4] == "median"


def test_placement_modes_order(capsys):
    times = {}
    for mode in ("all_slow", "b_in_fast"):
        code, out = run_cli(["multiply", "--problem", "laplace3d", "--product", "AxP",
                             "--mode", mode] + BASE, capsys)
        assert code == 0
        times[mode] = json.loads(out)["median"]["simulated_seconds"]
    assert times["b_in_fast"] <= times["all_slow"]


def test_chunk_mode_ledger_matches_plan(capsys, tmp_path):
    ledger_file = tmp_path / "ledger.jsonl"
    code, out = run_cli(["multiply", "--problem", "laplace3d", "--product", "RxA",
                         "--mode", "chunk", "--fast-size", "200k",
                         "--ledger-out", str(ledger_file), "--verify"] + BASE, capsys)
    assert code == 0
    report = json.loads(out)
    run = report["runs"][0]
    total = run["copy_bytes_slow_to_fast"] + run["copy_bytes_fast_to_slow"]
    assert total == run["predicted_copy_bytes"]
    assert report["chunk_plan"]["algorithm"] == run["algorithm"]
    events = [json.loads(l) for l in ledger_file.read_text().strip().split("\n")]
    assert sum(e["bytes"] for e in events) == total


def test_chunk_mode_requires_fast_size(capsys):
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--mode", "chunk"]
                      + BASE, capsys)
    assert code == 2


def test_reps_must_be_positive(capsys):
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_slow",
                       "--grid", "5", "5", "5", "--reps", "0"], capsys)
    assert code == 2


def test_file_problem_roundtrip(tmp_path, capsys):
    a_path = tmp_path / "a.mtx"
    p_path = tmp_path / "p.mtx"
    run_cli(["generate", "--problem", "laplace3d", "--grid", "9", "9", "9",
             "--matrix", "A", str(a_path)], capsys)
    run_cli(["generate", "--problem", "laplace3d", "--grid", "9", "9", "9",
             "--matrix", "P", str(p_path)], capsys)
    code, out = run_cli(["multiply", "--problem", "file", "--file-a", str(a_path),
                         "--file-b", str(p_path), "--mode", "all_slow",
                         "--reps", "1", "--workers", "1"], capsys)
    assert code == 0
    assert json.loads(out)["runs"][0]["c_nnz"] > 0


def test_file_problem_missing_operand(capsys):
    code, _ = run_cli(["multiply", "--problem", "file", "--mode", "all_slow"], capsys)
    assert code == 2


def test_target_bytes_scaling(capsys):
    code, out = run_cli(["multiply", "--problem", "laplace3d", "--target-bytes",
                         "500k", "--mode", "all_slow", "--reps", "1",
                         "--workers", "1"], capsys)
    assert code == 0
    spec = json.loads(out)["spec"]
    assert spec["grid"] == "17x17x17"
    assert spec["target_bytes"] == 512000


def test_target_bytes_conflicts_with_grid(capsys):
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--grid", "9", "9", "9",
                       "--target-bytes", "1m", "--mode", "all_slow"], capsys)
    assert code == 2


def test_all_fast_capacity_validation(capsys):
    # A 9x9x9 laplace problem cannot fit a 1-byte fast tier.
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_fast",
                       "--fast-size", "1"] + BASE, capsys)
    assert code == 2


def test_verify_mismatch_exit_code(capsys, monkeypatch):
    import tiered_spgemm.cli as cli_mod
    monkeypatch.setattr(cli_mod, "products_match", lambda *a, **k: (False, 1.0))
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_slow",
                       "--verify"] + BASE, capsys)
    assert code == 3


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("problem=brick3d\ngrid=5x5x5\nreps=1\nseed=4\nworkers=1\n"
                   "mode=all_slow\n")
    code, out = run_cli(["multiply", "--config", str(cfg)], capsys)
    assert code == 0
    assert json.loads(out)["spec"]["problem"] == "brick3d"
    # Flags win over the config file.
    code, out = run_cli(["multiply", "--config", str(cfg), "--problem", "laplace3d"],
                        capsys)
    assert code == 0
    assert json.loads(out)["spec"]["problem"] == "laplace3d"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("fastsize=10\n")
    code, _ = run_cli(["multiply", "--config", str(cfg)], capsys)
    assert code == 2


def test_sweep_grid_of_experiments(capsys):
    code, out = run_cli(["sweep", "--problem", "laplace3d", "--product", "RxA",
                         "--grids", "5x5x5", "9x9x9",
                         "--modes", "all_slow,b_in_fast",
                         "--reps", "1", "--workers", "1", "--seed", "1"], capsys)
    assert code == 0
    report = json.loads(out)
    assert len(report["experiments"]) == 4
    labels = {(e["spec"]["grid"], e["spec"]["mode"]) for e in report["experiments"]}
    assert ("5x5x5", "all_slow") in labels and ("9x9x9", "b_in_fast") in labels


def test_sweep_deterministic_across_runs_and_workers(capsys):
    args = ["sweep", "--problem", "laplace3d", "--product", "RxA",
            "--grids", "7x7x7", "--modes", "all_slow,chunk",
            "--fast-size", "60k", "--reps", "2", "--seed", "5"]
    _, out1 = run_cli(args + ["--workers", "1"], capsys)
    _, out2 = run_cli(args + ["--workers", "1"], capsys)
    assert scrub_wall_fields(out1) == scrub_wall_fields(out2)
    _, out_many = run_cli(args + ["--workers", "4"], capsys)
    scrubbed_many = scrub_wall_fields(out_many).replace(
        '"workers": 4', '"workers": 1')
    assert scrubbed_many == scrub_wall_fields(out1)


def test_triangles_subcommand(tmp_path, capsys):
    graph = tmp_path / "g.txt"
    graph.write_text("0 1\n1 2\n2 0\n2 3\n3 0\n")
    code, out = run_cli(["triangles", str(graph)], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["triangles"] == 2
    assert report["vertices"] == 4 and report["edges"] == 5
    code, out = run_cli(["triangles", str(graph), "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[1].split(",")[3] == "2"


def test_output_file_writing(tmp_path, capsys):
    out_file = tmp_path / "report.json"
    code, out = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_slow",
                         "--out", str(out_file)] + BASE, capsys)
    assert code == 0 and out == ""
    jsonschema.validate(json.loads(out_file.read_text()), REPORT_SCHEMA)


def test_unwritable_output_path(tmp_path, capsys):
    code, _ = run_cli(["multiply", "--problem", "laplace3d", "--mode", "all_slow",
                       "--out", str(tmp_path / "no" / "dir" / "r.json")] + BASE,
                      capsys)
    assert code == 2
