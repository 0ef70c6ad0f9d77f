import json
import os

import pytest

from lngossip.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main


def run_cli(*args):
    return main(list(args))


@pytest.fixture()
def synth_files(tmp_path):
    snap = str(tmp_path / "net.jsonl")
    trace = str(tmp_path / "trace.jsonl")
    rc = run_cli(
        "synth", "--nodes", "60", "--attach-m", "3", "--duration", "120",
        "--synth-messages", "80", "--seed", "5",
        "--out-snapshot", snap, "--out-trace", trace,
    )
    assert rc == EXIT_OK
    return snap, trace


def test_simulate_smoke(tmp_path):
    out = str(tmp_path / "report.json")
    rc = run_cli(
        "simulate", "--synth-nodes", "60", "--synth-m", "3", "--protocol", "flooding-8",
        "--duration", "120", "--synth-messages", "60", "--payments", "50",
        "--seed", "1", "--out", out,
    )
    assert rc == EXIT_OK
    data = json.loads(open(out).read())
    assert data["protocol"] == "flooding-8"
    assert os.path.exists(str(tmp_path / "report.curve.csv"))


def test_simulate_deterministic_bytes(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = str(tmp_path / name)
        rc = run_cli(
            "simulate", "--synth-nodes", "50", "--synth-m", "3", "--protocol", "lnd",
            "--duration", "150", "--synth-messages", "60", "--payments", "20",
            "--seed", "9", "--out", out,
        )
        assert rc == EXIT_OK
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1]


def test_simulate_loaded_workload(tmp_path, synth_files):
    snap, trace = synth_files
    out = str(tmp_path / "r.json")
    rc = run_cli(
        "simulate", "--snapshot", snap, "--trace", trace, "--protocol", "c-lightning",
        "--duration", "120", "--seed", "2", "--out", out,
    )
    assert rc == EXIT_OK


def test_unknown_preset_usage_error(tmp_path):
    rc = run_cli(
        "simulate", "--synth-nodes", "20", "--synth-messages", "5",
        "--protocol", "nope", "--out", str(tmp_path / "x.json"),
    )
    assert rc == EXIT_USAGE


def test_missing_trace_input_error(tmp_path):
    rc = run_cli(
        "simulate", "--snapshot", str(tmp_path / "missing.jsonl"),
        "--trace", str(tmp_path / "missing2.jsonl"),
        "--protocol", "lnd", "--out", str(tmp_path / "x.json"),
    )
    assert rc == EXIT_INPUT


def test_compare_two_presets(tmp_path):
    out = str(tmp_path / "cmp.csv")
    rc = run_cli(
        "compare", "--synth-nodes", "80", "--synth-m", "3", "--duration", "200",
        "--synth-messages", "120", "--payments", "100", "--seed", "3",
        "--protocols", "lnd,c-lightning", "--out", out,
    )
    assert rc == EXIT_OK
    lines = open(out).read().splitlines()
    assert lines[0] == "protocol,p95_delay_s,total_bytes,unconverged_payments"
    rows = {l.split(",")[0]: l.split(",") for l in lines[1:]}
    assert set(rows) == {"lnd", "c-lightning"}
    # staggered broadcast with the longer interval converges slower
    assert float(rows["lnd"][1]) > float(rows["c-lightning"][1])


def test_compare_flooding_bandwidth_scales(tmp_path):
    out = str(tmp_path / "cmp.csv")
    rc = run_cli(
        "compare", "--synth-nodes", "80", "--synth-m", "3", "--duration", "120",
        "--synth-messages", "60", "--seed", "3",
        "--protocols", "flooding-4,flooding-32", "--out", out,
    )
    assert rc == EXIT_OK
    rows = {l.split(",")[0]: l.split(",") for l in open(out).read().splitlines()[1:]}
    assert int(rows["flooding-32"][2]) > int(rows["flooding-4"][2])


def test_compare_single_preset_usage_error():
    assert run_cli("compare", "--synth-nodes", "20", "--synth-messages", "5",
                   "--protocols", "lnd") == EXIT_USAGE


def test_compare_consistent_with_simulate(tmp_path):
    common = ["--synth-nodes", "60", "--synth-m", "3", "--duration", "150",
              "--synth-messages", "80", "--payments", "40", "--seed", "4"]
    out_cmp = str(tmp_path / "cmp.csv")
    assert run_cli("compare", *common, "--protocols", "lnd,spanning", "--out", out_cmp) == EXIT_OK
    out_sim = str(tmp_path / "lnd.json")
    assert run_cli("simulate", *common, "--protocol", "lnd", "--out", out_sim) == EXIT_OK
    sim = json.loads(open(out_sim).read())
    row = [l for l in open(out_cmp).read().splitlines() if l.startswith("lnd,")][0].split(",")
    assert int(row[2]) == sim["bandwidth"]["total_bytes"]
    assert abs(float(row[1]) - sim["convergence"]["delay_p95_s"]) < 1e-6


def test_analyze_outputs(tmp_path, synth_files):
    _snap, trace = synth_files
    out_dir = str(tmp_path / "catalog")
    rc = run_cli("analyze", "--trace", trace, "--out-dir", out_dir)
    assert rc == EXIT_OK
    data = json.loads(open(os.path.join(out_dir, "catalog.json")).read())
    assert "category_shares" in data
    assert os.path.exists(os.path.join(out_dir, "keepalive_interarrival.csv"))
    assert os.path.exists(os.path.join(out_dir, "closure_durations.csv"))


def test_analyze_empty_trace(tmp_path):
    trace = str(tmp_path / "empty.jsonl")
    open(trace, "w").close()
    out_dir = str(tmp_path / "catalog")
    assert run_cli("analyze", "--trace", trace, "--out-dir", out_dir) == EXIT_OK
    data = json.loads(open(os.path.join(out_dir, "catalog.json")).read())
    assert sum(data["category_counts"].values()) == 0


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("LNGOSSIP_SEED", "123")
    out1 = str(tmp_path / "env.json")
    rc = run_cli("simulate", "--synth-nodes", "30", "--synth-m", "2", "--protocol", "spanning",
                 "--duration", "60", "--synth-messages", "20", "--out", out1)
    assert rc == EXIT_OK
    out2 = str(tmp_path / "explicit.json")
    rc = run_cli("simulate", "--synth-nodes", "30", "--synth-m", "2", "--protocol", "spanning",
                 "--duration", "60", "--synth-messages", "20", "--seed", "123", "--out", out2)
    assert rc == EXIT_OK
    assert open(out1, "rb").read() == open(out2, "rb").read()
