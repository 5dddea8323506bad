import json

import pytest

from obeskit import cli, pipeline


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]


def test_unknown_config_key_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"sede": 1}))
    assert cli.main(["ingest", "--config", str(p)]) == 2
    assert _err(capsys)["code"] == "config_error"


def test_bad_arguments_exit_2():
    assert cli.main(["frobnicate", "--config", "x"]) == 2


def test_missing_input_exit_3(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"inputs": [{"subject": "a", "accel": str(tmp_path / "none.jsonl")}],
                             "out_dir": str(tmp_path / "out")}))
    assert cli.main(["ingest", "--config", str(p)]) == 3
    assert _err(capsys)["code"] == "data_error"


def test_malformed_input_reports_line(tmp_path, capsys):
    acc = tmp_path / "a.jsonl"
    acc.write_text('{"t": 0, "x": 0, "y": 0, "z": 9.8}\n{"t": 50, "x": 0}\n')
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"inputs": [{"subject": "a", "accel": str(acc)}], "out_dir": str(tmp_path / "out")}))
    assert cli.main(["ingest", "--config", str(p)]) == 3
    assert _err(capsys)["line"] == 2


def test_internal_error_exit_4(tmp_path, capsys, monkeypatch):
    def boom(cfg):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(pipeline.STAGES, "ingest", boom)
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert cli.main(["ingest", "--config", str(p)]) == 4
    assert _err(capsys)["code"] == "internal_error"


def test_simulate_rejects_overlapping_blocks(tmp_path, capsys):
    spec = {"scenarios": [{"subject": "a", "start": "2024-03-04T08:00:00", "places": {"h": {"lat": 1, "lon": 2}},
                           "blocks": [{"type": "stay", "duration_min": 60},
                                      {"type": "stay", "duration_min": 10, "start": "2024-03-04T08:30:00"}]}]}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec))
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "sim")]) == 3


@pytest.mark.slow
def test_aggregate_before_extract(cohort, tmp_path, capsys):
    assert cli.main(["aggregate", "--config", str(cohort), "--out", str(tmp_path / "fresh")]) == 3
    assert _err(capsys)["code"] == "missing_dependency"


@pytest.mark.slow
def test_run_outputs_and_scan(cohort_runs, cohort, capsys):
    out = cohort_runs[0]
    for rel in ("evaluate/report.md", "export/cells.csv", "export/catalog.json", "aggregate/votes.jsonl"):
        assert (out / rel).exists(), rel
    assert cli.main(["scan", "--config", str(cohort), "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["findings"] == []
