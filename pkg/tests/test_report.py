from pathlib import Path

from taskteach import report
from taskteach.dsl import ExecutionTrace
from taskteach.screenworld import launch_app

from conftest import make_world


def test_render_screen_with_highlights(apps, tmp_path):
    world = make_world(apps)
    world.perform(launch_app("Maps"))
    snapshot = world.snapshot()
    highlights = report.entity_highlights(snapshot, "duration")
    assert highlights == {"dur_home_work", "dur_work_gym", "dur_home_airport"}
    path = report.render_screen(snapshot, tmp_path / "maps.png", highlights)
    data = Path(path).read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_write_trace_tsv(tmp_path):
    trace = ExecutionTrace()
    trace.record_branch("then")
    trace.record_action("click item", "Iced Coffee")
    path = report.write_trace_tsv(trace, tmp_path / "trace.tsv")
    lines = Path(path).read_text().splitlines()
    assert lines[0] == "step\tkind\tlabel\tdetail"
    assert lines[1] == "1\tbranch\tthen\t"
    assert lines[2] == "2\taction\tclick item\tIced Coffee"


def test_cli_report_path(apps, tmp_path, capsys):
    from taskteach.cli import main

    code = main(
        [
            "--transcript", str(Path("src/taskteach/transcripts/task2.transcript")),
            "--run", "rule_1",
            "--env", "maps.commuteMinutes=45",
            "--report-dir", str(tmp_path),
            "--kb", str(tmp_path / "kb.json"),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "TRANSCRIPT PASS" in out
    assert (tmp_path / "trace.tsv").exists()
    assert (tmp_path / "transcript.tsv").exists()
    assert (tmp_path / "kb.json").exists()
    assert list(tmp_path.glob("screen_*.png"))
