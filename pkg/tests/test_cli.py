import csv
import json

import pytest

from boundlab.cli import main, parse_config, write_report


def test_exponents_command(tmp_path, capsys):
    out = tmp_path / "exp.json"
    status = main(["exponents", "--N", "3", "--p", "2", "--output", str(out)])
    captured = capsys.readouterr().out
    assert status == 0
    assert "identities: pass" in captured
    assert "A=2" in captured
    doc = json.loads(out.read_text())
    assert doc["header"]["version"]
    assert doc["records"][0]["m"] == "9/2"
    assert doc["records"][0]["identities"] == "pass"


def test_exponents_rejects_bad_power(capsys):
    assert main(["exponents", "--N", "3", "--p", "5"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_mesh_info(tmp_path, capsys):
    dump = tmp_path / "mesh.txt"
    status = main(["mesh-info", "--n", "2", "--dump", str(dump)])
    out = capsys.readouterr().out
    assert status == 0
    assert "27 vertices" in out
    assert "integrity: pass" in out
    assert dump.exists()
    first = dump.read_text().splitlines()[0]
    assert first.startswith("v ")


def test_solve_linear_orders(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    status = main([
        "solve-linear", "--case", "exp-x1", "--n", "4,8,16",
        "--tol", "1e-10", "--output", str(out), "--format", "csv",
    ])
    assert status == 0
    with open(out) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    assert len(rows) == 3
    orders_h1 = [float(r["h1_order"]) for r in rows[1:]]
    orders_l2 = [float(r["l2_order"]) for r in rows[1:]]
    assert all(o >= 0.9 for o in orders_h1)
    assert all(o >= 1.8 for o in orders_l2)


def test_solve_nonlinear(tmp_path, capsys):
    out = tmp_path / "gs.json"
    status = main([
        "solve-nonlinear", "--p", "2", "--n", "4", "--tol", "1e-8",
        "--seed", "11", "--output", str(out),
    ])
    assert status == 0
    doc = json.loads(out.read_text())
    rec = doc["records"][0]
    assert rec["positive"] is True
    assert rec["weak_residual"] <= 1e-8
    assert len(rec["values"]) == 125


def test_verify_requires_seed(capsys):
    assert main(["verify", "--suite", "universal", "--n", "4"]) == 2
    assert "seed" in capsys.readouterr().err


def test_verify_universal_deterministic(tmp_path, capsys):
    args = ["verify", "--suite", "universal", "--n", "4", "--samples", "20", "--seed", "7"]
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    assert main(args + ["--output", str(out1)]) == 0
    assert main(args + ["--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_verify_regularity_csv(tmp_path):
    out = tmp_path / "reg.csv"
    status = main([
        "verify", "--suite", "regularity", "--n", "2,4", "--samples", "2",
        "--seed", "5", "--output", str(out), "--format", "csv",
    ])
    assert status == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "n,sample,q,m,ratio_w1m,ratio_linf"
    assert len(lines) == 2 + 4


def test_config_file_with_flag_override(tmp_path, capsys):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"p_list": ["2"], "n_list": [2], "seed": 3, "samples": 5}))
    out = tmp_path / "rep.json"
    status = main([
        "--config", str(conf), "verify", "--suite", "universal",
        "--samples", "10", "--output", str(out),
    ])
    assert status == 0
    doc = json.loads(out.read_text())
    assert doc["header"]["config"]["samples"] == 10  # flag wins
    assert doc["header"]["config"]["seed"] == 3      # file value survives


def test_verify_chain_suite(tmp_path, capsys):
    out = tmp_path / "chain.json"
    status = main([
        "verify", "--suite", "chain", "--n", "4", "--samples", "12",
        "--seed", "7", "--tol", "1e-8", "--output", str(out),
    ])
    assert status == 0
    doc = json.loads(out.read_text())
    steps = {r["step"] for r in doc["records"]}
    assert {
        "boundary_growth", "boundary_holder", "boundary_max_vs_volume_max",
        "gn_interpolation", "main_estimate", "h1_trace_bound",
        "norm_equivalence", "energy_bound",
    } <= steps
    verdicts = {r["step"]: r["verdict"] for r in doc["records"]}
    assert verdicts["h1_trace_bound"] == "pass"
    assert verdicts["energy_bound"] == "pass"


def test_verify_energy_and_equivalence_suites(tmp_path):
    for suite in ("energy", "equivalence"):
        out = tmp_path / f"{suite}.json"
        status = main([
            "verify", "--suite", suite, "--n", "4", "--samples", "4",
            "--seed", "7", "--tol", "1e-8", "--output", str(out),
        ])
        assert status == 0
        doc = json.loads(out.read_text())
        assert doc["records"]


def test_sweep_deterministic_and_reports_c0(tmp_path, capsys):
    args = ["sweep", "--p", "2", "--n", "4", "--seed", "11", "--tol", "1e-8"]
    out1 = tmp_path / "s1.json"
    out2 = tmp_path / "s2.json"
    assert main(args + ["--output", str(out1)]) == 0
    assert main(args + ["--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    rec = doc["records"][0]
    assert rec["fitted_C0"] == rec["rho"] > 0
    assert rec["trace_bound"] == "pass"


def test_write_report_round_trip(tmp_path):
    records = [{"name": "a", "value": 1.0 / 3.0, "count": 2}]
    jpath = tmp_path / "r.json"
    cpath = tmp_path / "r.csv"
    write_report(records, "json", str(jpath), header={"version": "x"})
    write_report(records, "csv", str(cpath), header={"version": "x"})
    jdoc = json.loads(jpath.read_text())
    with open(cpath) as fh:
        crow = list(csv.DictReader(line for line in fh if not line.startswith("#")))[0]
    assert jdoc["records"][0]["value"] == float(crow["value"])
    assert jdoc["records"][0]["count"] == int(crow["count"])
    # 17 significant digits are enough to round-trip binary64 exactly
    assert float(crow["value"]) == 1.0 / 3.0


def test_write_report_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_report([], "json", str(tmp_path / "x.json"))


def test_unwritable_output_is_status_3(capsys):
    status = main([
        "exponents", "--N", "3", "--p", "2",
        "--output", "/nonexistent-dir/report.json",
    ])
    assert status == 3


def test_unknown_command_is_usage_error(capsys):
    assert main([]) == 2


def test_parse_config_validates_lists():
    config = parse_config(["verify", "--suite", "gn", "--n", "2,4", "--p", "3/2", "--seed", "1"])
    assert config.n_list == (2, 4)
    assert str(config.p_list[0]) == "3/2"
