import pytest

from taskteach import gateway as gw
from taskteach import kb as kbmod
from taskteach.gateway import (
    BadFixture,
    Gateway,
    UnknownScript,
    UnknownSession,
    bundled_fixture_dir,
    bundled_transcript,
    replay_transcript,
    replay_transcript_file,
)


@pytest.fixture
def gateway():
    return Gateway()


def new_session(gateway, **env):
    merged = dict(gw.DEFAULT_ENV)
    merged.update({k: str(v) for k, v in env.items()})
    return gateway.create_session(None, bundled_fixture_dir(), merged)


def test_create_session_greets(gateway):
    sid = new_session(gateway)
    session = gateway.sessions[sid]
    kinds = [m.kind for m in session.messages]
    assert kinds[0] == "agentText"
    assert session.messages[0].payload["templateId"] == "greeting"
    assert "screenUpdate" in kinds


def test_missing_fixture_dir_is_bad_fixture(gateway, tmp_path):
    with pytest.raises(BadFixture):
        gateway.create_session(None, tmp_path / "nope", {})


def test_unknown_session(gateway):
    with pytest.raises(UnknownSession):
        gateway.send_turn("missing", {"kind": "userText", "text": "hi"})


def test_sequence_numbers_are_gap_free(gateway):
    sid = new_session(gateway)
    gateway.send_turn(sid, {"kind": "userText", "text": "If it's hot, order a cup of Iced Cappuccino."})
    gateway.send_turn(sid, {"kind": "userText", "text": "undo"})
    seqs = [m.seq for m in gateway.sessions[sid].messages]
    assert seqs == list(range(1, len(seqs) + 1))


def test_sessions_have_independent_undo_stacks(gateway):
    a = new_session(gateway)
    b = new_session(gateway)
    gateway.send_turn(a, {"kind": "userText", "text": "If it's hot, order a cup of Iced Cappuccino."})
    gateway.send_turn(b, {"kind": "userText", "text": "If it is cheap, make a hotel reservation."})
    gateway.send_turn(a, {"kind": "userText", "text": "undo"})
    sa = gateway.sessions[a].teaching
    sb = gateway.sessions[b].teaching
    assert sa.state.root_expr is None  # undone
    assert sb.state.root_expr is not None  # untouched
    assert len(sa.undo_stack) != len(sb.undo_stack) or sa.state != sb.state


def test_demo_actions_emit_screen_updates_and_highlights(gateway):
    sid = new_session(gateway)
    gateway.send_turn(sid, {"kind": "userText", "text": "If there is heavy traffic, set an alarm for 7:00 am."})
    gateway.send_turn(sid, {"kind": "userText", "text": "It is heavy traffic when the commute takes more than 30 minutes."})
    out = gateway.send_turn(sid, {"kind": "userText", "text": "Let me demonstrate for you."})
    kinds = [m.kind for m in out]
    assert "demonstrationMode" in kinds and "screenUpdate" in kinds
    out = gateway.send_turn(
        sid,
        {"kind": "demonstrationMode", "payload": {"action": {"kind": "launchApp", "appName": "Maps"}}},
    )
    highlight = next(m for m in out if m.kind == "highlight")
    assert highlight.payload["objectIds"] == [
        "dur_home_airport", "dur_home_work", "dur_work_gym",
    ]


def test_run_script_unknown(gateway):
    sid = new_session(gateway)
    with pytest.raises(UnknownScript):
        gateway.run_script(sid, "rule_99", {})


def test_bundled_task_transcripts_pass(gateway):
    for task in ("task1", "task2", "task3", "task4"):
        sid = new_session(gateway)
        report = replay_transcript_file(gateway, sid, bundled_transcript(task))
        assert report.passed, f"{task}: {report.first_mismatch}"


def test_empty_transcript_passes_vacuously(gateway):
    sid = new_session(gateway)
    report = replay_transcript(gateway, sid, "\n# only a comment\n")
    assert report.passed
    assert report.results == []


def test_transcript_mismatch_reports_first_divergence(gateway):
    sid = new_session(gateway)
    text = "U: If it's hot, order a cup of Iced Cappuccino.\nA: ask_else\n"
    report = replay_transcript(gateway, sid, text)
    assert not report.passed
    mismatch = report.first_mismatch
    assert mismatch.lineno == 2
    assert "ask_bool_concept" in mismatch.message


def test_message_log_is_deterministic(gateway):
    def drive():
        sid = new_session(gateway)
        gateway.send_turn(sid, {"kind": "userText", "text": "If it's hot, order a cup of Iced Cappuccino."})
        gateway.send_turn(sid, {"kind": "userText", "text": "It is hot when the temperature is above 85 degrees Fahrenheit."})
        session = gateway.sessions[sid]
        # session ids differ; compare logs with the id blanked
        return session.render_message_log().replace(session.session_id, "SID")

    assert drive() == drive()


def test_kb_persist_and_reload_between_sessions(gateway, tmp_path):
    kb_path = tmp_path / "kb.json"
    sid = new_session(gateway)
    report = replay_transcript_file(gateway, sid, bundled_transcript("task2"))
    assert report.passed
    kbmod.persist(gateway.sessions[sid].teaching.kb, kb_path)

    reloaded = gateway.create_session(kb_path, bundled_fixture_dir(), dict(gw.DEFAULT_ENV))
    trace = gateway.run_script(reloaded, "rule_1", {"maps.commuteMinutes": "45"})
    assert trace.branch == "then"
    trace = gateway.run_script(reloaded, "rule_1", {"maps.commuteMinutes": "20"})
    assert trace.branch == "none"
