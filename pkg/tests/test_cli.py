"""End-to-end CLI runs against the packaged sample cache, plus exit-code
contracts for the usual failure modes."""

import shutil

import pytest
from click.testing import CliRunner

import cverisk.cli as cli_module
from cverisk import __version__
from cverisk.cli import main
from cverisk.nvd import NetworkError

from conftest import SAMPLE_CACHE, make_record


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def cache_copy(tmp_path):
    dest = tmp_path / "cache.jsonl"
    shutil.copy(SAMPLE_CACHE, dest)
    return dest


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_full_offline_flow(runner, cache_copy, tmp_path):
    cal_dir = tmp_path / "cal"
    result = runner.invoke(
        main,
        ["calibrate", "--cache", str(cache_copy), "--out", str(cal_dir), "--n-cal", "100",
         "--seed", "3", "--grid-step", "0.25"],
    )
    assert result.exit_code == 0, result.output
    assert "calibrated on 100 records" in result.output
    config_path = cal_dir / "model_config.txt"
    ids_path = cal_dir / "calibration_ids.txt"
    assert config_path.exists()
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    assert len(ids) == 100
    assert ids == sorted(ids)

    out_dir = tmp_path / "bundle"
    result = runner.invoke(
        main,
        ["analyze", "--cache", str(cache_copy), "--config", str(config_path),
         "--out", str(out_dir), "--seed", "1", "--exclude-ids", str(ids_path)],
    )
    assert result.exit_code == 0, result.output
    assert (out_dir / "summary.json").exists()
    assert (out_dir / "executive_summary.txt").exists()

    result = runner.invoke(main, ["report", "--bundle", str(out_dir)])
    assert result.exit_code == 0, result.output
    assert result.output == (out_dir / "executive_summary.txt").read_text(encoding="utf-8")


def test_analyze_runs_are_byte_identical(runner, cache_copy, tmp_path):
    outputs = []
    for name in ("one", "two"):
        out_dir = tmp_path / name
        result = runner.invoke(
            main, ["analyze", "--cache", str(cache_copy), "--out", str(out_dir), "--seed", "5"]
        )
        assert result.exit_code == 0, result.output
        outputs.append({p.name: p.read_bytes() for p in out_dir.iterdir()})
    assert outputs[0] == outputs[1]


def test_score_command_writes_scores_and_skips(runner, cache_copy, tmp_path):
    out_dir = tmp_path / "scores"
    result = runner.invoke(main, ["score", "--cache", str(cache_copy), "--out", str(out_dir)])
    assert result.exit_code == 0, result.output
    assert "scored 193 records (7 skipped)" in result.output
    scores = (out_dir / "scores.csv").read_text(encoding="utf-8").splitlines()
    assert scores[0] == "cve_id,official_score,base_risk,impact_score,composite_score,severity"
    assert len(scores) == 194
    skips = (out_dir / "skip_report.csv").read_text(encoding="utf-8").splitlines()
    assert len(skips) == 8


def test_score_with_uniform_baseline(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["score", "--cache", str(cache_copy), "--baseline", "uniform", "--out", str(tmp_path / "u")],
    )
    assert result.exit_code == 0, result.output


def test_config_and_baseline_are_mutually_exclusive(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["score", "--cache", str(cache_copy), "--config", "x.txt", "--baseline", "uniform",
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "mutually exclusive" in result.output


def test_unknown_baseline_is_usage_error(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["score", "--cache", str(cache_copy), "--baseline", "zipf", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2


def test_missing_cache_is_io_error(runner, tmp_path):
    result = runner.invoke(
        main, ["score", "--cache", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]
    )
    assert result.exit_code == 5
    assert "cache not found" in result.output


def test_corrupt_cache_is_data_error(runner, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"schema": "cve-cache/1", "count": 1}\n{broken\n', encoding="utf-8")
    result = runner.invoke(main, ["score", "--cache", str(bad), "--out", str(tmp_path / "o")])
    assert result.exit_code == 3
    assert "bad cache" in result.output


def test_lenient_mode_rides_over_corrupt_lines(runner, cache_copy, tmp_path):
    with cache_copy.open("a", encoding="utf-8") as fh:
        fh.write("{broken json\n")
    strict = runner.invoke(main, ["score", "--cache", str(cache_copy), "--out", str(tmp_path / "s")])
    assert strict.exit_code == 3
    lenient = runner.invoke(
        main, ["score", "--cache", str(cache_copy), "--lenient", "--out", str(tmp_path / "l")]
    )
    assert lenient.exit_code == 0, lenient.output
    assert "scored 193 records" in lenient.output


def test_calibrate_insufficient_records(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["calibrate", "--cache", str(cache_copy), "--out", str(tmp_path), "--n-cal", "500"],
    )
    assert result.exit_code == 3
    assert "need 500" in result.output


def test_calibrate_bad_grid_step(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["calibrate", "--cache", str(cache_copy), "--out", str(tmp_path),
         "--n-cal", "50", "--grid-step", "0.3"],
    )
    assert result.exit_code == 3


def test_analyze_bad_config_file(runner, cache_copy, tmp_path):
    bad = tmp_path / "weights.txt"
    bad.write_text("alpha = banana\n", encoding="utf-8")
    result = runner.invoke(
        main,
        ["analyze", "--cache", str(cache_copy), "--config", str(bad), "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 3
    assert "bad config" in result.output


def test_analyze_missing_exclude_file(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["analyze", "--cache", str(cache_copy), "--exclude-ids", str(tmp_path / "none.txt"),
         "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 5


def test_analyze_format_choice_is_validated(runner, cache_copy, tmp_path):
    result = runner.invoke(
        main,
        ["analyze", "--cache", str(cache_copy), "--out", str(tmp_path / "o"), "--format", "yaml"],
    )
    assert result.exit_code == 2


def test_report_on_missing_bundle(runner, tmp_path):
    result = runner.invoke(main, ["report", "--bundle", str(tmp_path / "ghost")])
    assert result.exit_code == 5
    assert "no summary.json" in result.output


def test_report_detects_missing_tables(runner, cache_copy, tmp_path):
    out_dir = tmp_path / "bundle"
    assert runner.invoke(
        main, ["analyze", "--cache", str(cache_copy), "--out", str(out_dir)]
    ).exit_code == 0
    (out_dir / "ecdf.csv").unlink()
    result = runner.invoke(main, ["report", "--bundle", str(out_dir)])
    assert result.exit_code == 3
    assert "ecdf" in result.output


# --- ingest (network layer monkeypatched) -----------------------------------


def test_ingest_writes_cache(runner, tmp_path, monkeypatch):
    captured = {}

    def fake_fetch(window, **kwargs):
        captured["window"] = window
        return [make_record(cve_id=f"CVE-2024-{40000 + k}") for k in range(3)]

    monkeypatch.setattr(cli_module, "fetch_window", fake_fetch)
    out = tmp_path / "jan.jsonl"
    result = runner.invoke(
        main, ["ingest", "--window", "2024-01-01..2024-01-15", "--out-cache", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "wrote 3 records" in result.output
    assert out.exists()
    window = captured["window"]
    assert window.start.isoformat() == "2024-01-01T00:00:00+00:00"
    # END is a bare date, so the window runs through the end of that day
    assert window.end.isoformat() == "2024-01-15T23:59:59.999999+00:00"


def test_ingest_passes_api_key_from_environment(runner, tmp_path, monkeypatch):
    captured = {}
    monkeypatch.setattr(
        cli_module, "fetch_window", lambda w, **k: captured.setdefault("window", w) and []
    )
    monkeypatch.setenv("NVD_API_KEY", "sekrit")
    runner.invoke(
        main,
        ["ingest", "--window", "2024-01-01..2024-01-02", "--out-cache", str(tmp_path / "c.jsonl")],
    )
    assert captured["window"].api_key == "sekrit"


def test_ingest_network_failure_exit_code(runner, tmp_path, monkeypatch):
    def fake_fetch(window, **kwargs):
        raise NetworkError(0, 5, "HTTP 503")

    monkeypatch.setattr(cli_module, "fetch_window", fake_fetch)
    result = runner.invoke(
        main,
        ["ingest", "--window", "2024-01-01..2024-01-15", "--out-cache", str(tmp_path / "c.jsonl")],
    )
    assert result.exit_code == 4
    assert "HTTP 503" in result.output


def test_ingest_rejects_oversized_window(runner, tmp_path):
    result = runner.invoke(
        main,
        ["ingest", "--window", "2024-01-01..2024-12-31", "--out-cache", str(tmp_path / "c.jsonl")],
    )
    assert result.exit_code == 2
    assert "120 days" in result.output


def test_ingest_rejects_malformed_window(runner, tmp_path):
    for bad in ("2024-01-01", "2024-01-01..not-a-date", "..2024-01-05"):
        result = runner.invoke(
            main, ["ingest", "--window", bad, "--out-cache", str(tmp_path / "c.jsonl")]
        )
        assert result.exit_code == 2, bad
