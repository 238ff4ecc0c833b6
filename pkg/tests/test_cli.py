from __future__ import annotations

from pathlib import Path

from click.testing import CliRunner

from defect_sage.cli import _build_runtime, main


def test_repl_offline_lists_and_quits():
    runner = CliRunner()
    result = runner.invoke(main, ["repl", "--offline"], input="2\nquit\n")
    assert result.exit_code == 0
    assert "LPBF Defect Agent" in result.output
    assert "Solidification cracking" in result.output
    assert "Goodbye." in result.output


def test_repl_explore_card_offline():
    runner = CliRunner()
    result = runner.invoke(main, ["repl", "--offline"],
                           input="4\n2\nno\nquit\n")
    assert result.exit_code == 0
    assert "Exploring: Balling" in result.output
    assert "Keep O₂ < 0.1 %" in result.output


def test_repl_export_writes_html(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    result = runner.invoke(main, ["repl", "--offline"], input="1\n5\nquit\n")
    assert result.exit_code == 0
    saved = tmp_path / "defect_report.html"
    assert saved.exists()
    assert "LPBF Defect Analysis Report" in saved.read_text(encoding="utf-8")


def test_eval_prints_table_and_writes_reports(tmp_path):
    manifest = Path(__file__).resolve().parents[1] / "data" / "ablation" / \
        "manifest.json"
    runner = CliRunner()
    result = runner.invoke(
        main, ["eval", "--manifest", str(manifest), "--out-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "accuracy" in result.output
    for config_id in ["A", "B", "C", "D"]:
        assert f"\n{config_id:<10}" in "\n" + result.output
    assert "substantial agreement" in result.output
    assert (tmp_path / "ablation_report.csv").exists()
    assert (tmp_path / "ablation_report.html").exists()


def test_eval_rejects_missing_manifest(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["eval", "--manifest",
                                  str(tmp_path / "nope.json")])
    assert result.exit_code != 0


def test_export_round_trips_a_saved_transcript(tmp_path, offline_session):
    offline_session.start()
    offline_session.handle_input("1")
    saved = tmp_path / "session.json"
    offline_session.transcript.save(saved)

    out = tmp_path / "report.html"
    runner = CliRunner()
    result = runner.invoke(main, ["export", "--session", str(saved),
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert out.exists()
    assert "LPBF Defect Analysis Report" in out.read_text(encoding="utf-8")


def test_export_refuses_empty_transcript(tmp_path):
    saved = tmp_path / "empty.json"
    saved.write_text('{"version": 1, "entries": []}', encoding="utf-8")
    runner = CliRunner()
    result = runner.invoke(main, ["export", "--session", str(saved),
                                  "--out", str(tmp_path / "x.html")])
    assert result.exit_code != 0
    assert "no entries" in result.output


def test_offline_runtime_wires_no_live_clients(monkeypatch):
    monkeypatch.setenv("SEARCH_API_KEY", "k1")
    monkeypatch.setenv("MODEL_API_KEY", "k2")
    config, kb, descriptors, search, text, vision = _build_runtime(
        None, None, offline=True)
    assert search is None and text is None and vision is None
    assert config.external_retrieval_enabled is False
    assert config.image_flow_enabled is False
    assert len(kb.leaves()) == 27
    assert len(descriptors) == 4


def test_keys_enable_live_clients(monkeypatch):
    monkeypatch.setenv("SEARCH_API_KEY", "k1")
    monkeypatch.setenv("MODEL_API_KEY", "k2")
    config, _, _, search, text, vision = _build_runtime(None, None, offline=False)
    assert search is not None and text is not None and vision is not None
    assert config.external_retrieval_enabled is True
    assert config.image_flow_enabled is True
