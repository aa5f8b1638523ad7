"""Server-side half of the UI protocol-purity check.

The browser client maps every gesture to exactly one wire message.  This
test drives one session with that exact message stream (taps on home-
screen icons instead of the runner's launch actions) and asserts the
session transcript is byte-identical to the one the headless transcript
runner produces.  It also exports the golden fixtures the frontend's own
tests replay: the input stream, the resulting message log, and a captured
Maps demonstration with its expected highlight overlays.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from taskteach import gateway as gw
from taskteach.gateway import Gateway, bundled_fixture_dir, bundled_transcript, replay_transcript

FIXTURES = Path(__file__).parent.parent / "frontend" / "tests" / "fixtures"


def _text(text: str) -> dict:
    return {"kind": "userText", "text": text}


def _tap(object_id: str) -> dict:
    return {
        "kind": "demonstrationMode",
        "payload": {"action": {"kind": "click", "objectId": object_id}},
    }


def _long_press(object_id: str) -> dict:
    return {
        "kind": "demonstrationMode",
        "payload": {"action": {"kind": "longClickSelect", "objectId": object_id}},
    }


def _done(selected: str | None) -> dict:
    return {"kind": "demonstrationMode", "payload": {"done": True, "selectedObjectId": selected}}


# Task 1 as a browser user performs it: chat entries plus screen gestures.
TASK1_UI_INPUTS = [
    _text("If it's hot, turn on the air conditioner."),
    _text("It is hot when the temperature is above 85 degrees Fahrenheit."),
    _text("Let me demonstrate for you."),
    _tap("icon_Weather"),
    _long_press("temp_value"),
    _done("temp_value"),
    _text("I can demonstrate."),
    _tap("icon_Thermostat"),
    _tap("btn_cool"),
    _done(None),
    _text("nothing"),
    _text("yes"),
    _text("If it's hot, order a cup of iced coffee."),
    _text("yes"),
    _text("I can demonstrate."),
    _tap("icon_Starbucks"),
    _tap("btn_menu"),
    _tap("item_iced_coffee"),
    _tap("btn_order"),
    _done(None),
    _text("Order a cup of hot coffee."),
    _text("yes"),
]


def _new_session(gateway: Gateway) -> str:
    return gateway.create_session(None, bundled_fixture_dir(), dict(gw.DEFAULT_ENV))


def _normalized_log(gateway: Gateway, session_id: str) -> str:
    session = gateway.sessions[session_id]
    return session.render_message_log().replace(session.session_id, "SID")


def _teaching_only_transcript() -> str:
    lines = bundled_transcript("task1").read_text(encoding="utf-8").splitlines()
    kept = [line for line in lines if not line.startswith("ASSERT-")]
    return "\n".join(kept) + "\n"


def _check_fixture(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        path.write_text(content, encoding="utf-8")
    assert path.read_text(encoding="utf-8") == content, (
        f"{path} is stale; delete it and re-run to regenerate"
    )


def test_ui_input_stream_yields_byte_identical_transcript():
    gateway = Gateway()

    headless = _new_session(gateway)
    report = replay_transcript(gateway, headless, _teaching_only_transcript())
    assert report.passed, report.first_mismatch

    ui_driven = _new_session(gateway)
    for message in TASK1_UI_INPUTS:
        gateway.send_turn(ui_driven, message)

    headless_log = _normalized_log(gateway, headless)
    ui_log = _normalized_log(gateway, ui_driven)
    assert ui_log == headless_log  # byte-identical transcripts

    _check_fixture(
        FIXTURES / "task1_ui_inputs.json",
        json.dumps(TASK1_UI_INPUTS, indent=1, sort_keys=True) + "\n",
    )
    _check_fixture(FIXTURES / "task1_message_log.txt", ui_log)


def test_maps_demo_capture_for_highlight_overlays():
    gateway = Gateway()
    sid = _new_session(gateway)
    gateway.send_turn(sid, _text("If there is heavy traffic, set an alarm for 7:00 am."))
    gateway.send_turn(
        sid, _text("It is heavy traffic when the commute takes more than 30 minutes.")
    )
    gateway.send_turn(sid, _text("Let me demonstrate for you."))
    outgoing = gateway.send_turn(sid, _tap("icon_Maps"))
    kinds = [m.kind for m in outgoing]
    assert kinds == ["screenUpdate", "highlight"]
    highlight_ids = outgoing[1].payload["objectIds"]
    assert highlight_ids == ["dur_home_airport", "dur_home_work", "dur_work_gym"]

    session = gateway.sessions[sid]
    capture = {
        "messages": [
            m.to_json() | {"sessionId": "SID"}
            for m in outgoing
        ],
        "expectedHighlightIds": highlight_ids,
        "nextSeq": outgoing[0].seq,
    }
    _check_fixture(
        FIXTURES / "maps_demo_capture.json",
        json.dumps(capture, indent=1, sort_keys=True) + "\n",
    )
