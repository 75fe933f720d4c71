import json
import subprocess
import sys

import numpy as np
import pytest

from handwave import formats
from handwave.cli import main


def run_cli(args, **kw):
    return main(list(args))


def capture(capsys):
    out = capsys.readouterr()
    return out.out, out.err


def test_dataset_train_inspect_roundtrip(tmp_path, capsys):
    ds_dir = tmp_path / "ds"
    assert run_cli(["dataset", "--out", str(ds_dir), "--n-synth", "6",
                    "--n-hifi", "2", "--seed", "3"]) == 0
    out, _ = capture(capsys)
    info = json.loads(out)
    assert info["pairs"] == 8
    assert (ds_dir / "manifest.json").exists()

    model_path = tmp_path / "m.fcnn"
    assert run_cli(["train", "--dataset", str(ds_dir), "--out",
                    str(model_path), "--epochs", "1", "--seed", "3"]) == 0
    out, err = capture(capsys)
    payload = json.loads(out)
    assert payload["epochs"] == 1
    assert len(payload["loss_curve"]) == 1
    assert "epoch 0" in err

    assert run_cli(["inspect", str(model_path)]) == 0
    out, _ = capture(capsys)
    arch = json.loads(out)["architecture"]
    assert arch["kernel_sizes"] == [9, 7, 5, 3]


def test_train_loss_curve_decreases(tmp_path, capsys):
    model_path = tmp_path / "m.fcnn"
    assert run_cli(["train", "--out", str(model_path), "--epochs", "2",
                    "--n-synth", "24", "--n-hifi", "0", "--seed", "1"]) == 0
    out, _ = capture(capsys)
    curve = json.loads(out)["loss_curve"]
    assert curve[-1] < curve[0]


def test_track_writes_log(tmp_path, capsys):
    log = tmp_path / "run.track"
    assert run_cli(["track", "--variant", "pf", "--frames", "48",
                    "--seed", "2", "--out", str(log)]) == 0
    out, _ = capture(capsys)
    row = json.loads(out)
    assert row["variant"] == "pf"
    records = formats.read_track(log)
    assert len(records) == 48
    assert set(records[0]) == set(formats.TRACK_FIELDS)


def test_bench_runs_and_reports(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    # tiny run: override frames via a config file to keep this fast
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seed": 4}))
    assert run_cli(["bench", "run", "--variants", "simple,pf",
                    "--seeds", "4", "--config", str(cfg_path),
                    "--out", str(report_path)]) == 0
    out, _ = capture(capsys)
    summary = json.loads(out)
    assert "simple" in summary and "pf" in summary
    report = formats.read_report(report_path)
    assert report["seeds"] == [4]
    assert {row["variant"] for row in report["rows"]} == {"simple", "pf"}
    assert summary["pf"]["mean_latency_ms"] > 0


def test_bench_rejects_unknown_variant(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["bench", "--variants", "simple,quantum"])
    assert exc.value.code == 2
    _, err = capture(capsys)
    assert "quantum" in json.loads(err)["error"]


def test_fcnn_variant_needs_model_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["bench", "--variants", "fcnn-dpf"])
    assert exc.value.code == 2
    _, err = capture(capsys)
    assert "model" in json.loads(err)["error"]


def test_invalid_config_lists_paths(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"grid": {"bogus_key": 1},
                                    "mystery": {}}))
    with pytest.raises(SystemExit) as exc:
        run_cli(["track", "--config", str(cfg_path), "--out",
                 str(tmp_path / "x.track")])
    assert exc.value.code == 2
    _, err = capture(capsys)
    problems = json.loads(err)["problems"]
    assert any("grid.bogus_key" in p for p in problems)
    assert any("mystery" in p for p in problems)


def test_seed_propagates_to_replayable_outputs(tmp_path, capsys):
    a = tmp_path / "a.track"
    b = tmp_path / "b.track"
    for path in (a, b):
        assert run_cli(["track", "--variant", "dpf", "--frames", "40",
                        "--seed", "9", "--out", str(path)]) == 0
        capture(capsys)
    assert a.read_text() == b.read_text()


def test_replay_mode_headless(tmp_path, capsys):
    script = tmp_path / "hands.jsonl"
    with open(script, "w") as fh:
        for i in range(30):
            fh.write(json.dumps({"type": "hand", "t": i * 0.016, "y": 0.0,
                                 "z": 0.15 + i * 0.008}) + "\n")
    events_path = tmp_path / "events.jsonl"
    assert run_cli(["serve", "--replay", str(script), "--out",
                    str(events_path), "--variant", "simple", "--seed", "1"]) == 0
    _, err = capture(capsys)
    assert json.loads(err.strip().splitlines()[-1])["events"] > 0
    events = [json.loads(line) for line in events_path.read_text().splitlines()]
    seqs = [e["seq"] for e in events if e.get("type") == "event"]
    assert seqs == sorted(seqs)
    assert any(e.get("kind") == "note_on" for e in events)


def test_cli_as_subprocess():
    # the installed entry point works end to end
    proc = subprocess.run([sys.executable, "-m", "handwave.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
