"""Service boundary: session lifecycle, the wire protocol used by both the
CLI REPL and the browser UI, the scripted-transcript runner, and script
execution.

Every interaction is a JSON message with a per-session sequence number, so
a session driven from the UI and one driven by the transcript runner go
through identical code and leave identical message logs.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import demo, dialog, dsl, kb as kbmod, parser, screenworld
from .dialog import AgentMove, DemoDoneTurn, TeachingSession, TextTurn
from .dsl import ExecutionEnvironment, ExecutionTrace
from .screenworld import Action, World


# Baseline values for every fixture placeholder; callers override per run.
DEFAULT_ENV = {
    "weather.temperature": "90",
    "maps.commuteMinutes": "25",
    "hotel.price": "89",
    "budget.balance": "80",
    "oven.temperature": "350",
}


def bundled_fixture_dir() -> Path:
    return Path(__file__).parent / "fixtures"


def bundled_transcript(name: str) -> Path:
    return Path(__file__).parent / "transcripts" / f"{name}.transcript"


class BadFixture(ValueError):
    pass


class UnknownSession(KeyError):
    pass


class UnknownScript(KeyError):
    pass


@dataclass(frozen=True)
class SessionMessage:
    kind: str  # userText | agentText | screenUpdate | highlight | optionPrompt
    #           | demonstrationMode | confirmation | error | scriptResult
    session_id: str
    seq: int
    payload: dict

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "sessionId": self.session_id,
            "seq": self.seq,
            "payload": self.payload,
        }


_CONFIRMATION_TEMPLATES = {
    "confirm_learned_bool",
    "confirm_learned_value",
    "confirm_learned_procedure",
    "confirm_constant",
    "reuse_accepted",
    "rule_saved",
    "rule_discarded",
    "undone",
}


@dataclass
class Session:
    session_id: str
    teaching: TeachingSession
    world: World
    messages: list[SessionMessage] = field(default_factory=list)
    last_trace: ExecutionTrace | None = None
    _seq: int = 0

    def emit(self, kind: str, payload: dict) -> SessionMessage:
        self._seq += 1
        message = SessionMessage(kind, self.session_id, self._seq, payload)
        self.messages.append(message)
        return message

    def emit_move(self, m: AgentMove) -> SessionMessage:
        payload = {"templateId": m.template_id, "args": list(m.args), "text": m.text}
        if m.template_id == "error":
            return self.emit("error", payload)
        if m.options:
            payload["options"] = list(m.options)
            return self.emit("optionPrompt", payload)
        if m.template_id in _CONFIRMATION_TEMPLATES:
            return self.emit("confirmation", payload)
        return self.emit("agentText", payload)

    def emit_screen(self) -> SessionMessage:
        snapshot = self.world.snapshot()
        return self.emit(
            "screenUpdate",
            {
                "appName": snapshot.app_name,
                "screenId": snapshot.screen_id,
                "objects": [
                    {
                        "id": node.object_id,
                        "kind": node.kind,
                        "text": node.text,
                        "bounds": list(node.bounds),
                        "clickable": node.clickable,
                        "longClickable": node.long_clickable,
                        "visible": node.visible,
                    }
                    for node in snapshot.nodes
                ],
            },
        )

    def emit_highlights(self) -> SessionMessage | None:
        recorder = self.world.recorder
        if recorder is None or recorder.mode != "valueQuery":
            return None
        ids = demo.highlight_candidates(recorder, self.world.snapshot())
        return self.emit("highlight", {"objectIds": sorted(ids)})

    def render_message_log(self) -> str:
        lines = [json.dumps(m.to_json(), sort_keys=True) for m in self.messages]
        return "\n".join(lines) + ("\n" if lines else "")


class Gateway:
    """Owns sessions; all methods are keyed by session id."""

    def __init__(self) -> None:
        self.sessions: dict[str, Session] = {}

    def create_session(self, kb_path: str | Path | None, app_fixture_dir: str | Path,
                       env_vars: dict[str, str] | None = None) -> str:
        try:
            apps = screenworld.load_fixture_dir(app_fixture_dir)
        except screenworld.MalformedDefinition as exc:
            raise BadFixture(str(exc)) from exc
        if kb_path is not None and Path(kb_path).exists():
            knowledge = kbmod.load(kb_path)
        else:
            knowledge = kbmod.KnowledgeBase()
        world = World(apps, env_vars or {})
        teaching = TeachingSession(world, knowledge, parser.default_lexicon())
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id, teaching, world)
        self.sessions[session_id] = session
        session.emit_move(AgentMove("greeting"))
        session.emit_screen()
        return session_id

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def send_turn(self, session_id: str, message: dict) -> list[SessionMessage]:
        """One inbound wire message -> the ordered outbound messages."""
        session = self._session(session_id)
        start = len(session.messages)
        kind = message.get("kind")
        if kind == "userText":
            session.emit("userText", {"text": message.get("text", "")})
            self._run_dialog_turn(session, TextTurn(message.get("text", "")))
        elif kind == "demonstrationMode":
            payload = message.get("payload", {})
            if payload.get("done"):
                session.emit("userText", {"text": "<demonstration finished>"})
                self._run_dialog_turn(
                    session, DemoDoneTurn(payload.get("selectedObjectId"))
                )
            elif "action" in payload:
                self._perform_demo_action(session, payload["action"])
            else:
                session.emit("error", {"text": "demonstrationMode needs action or done"})
        else:
            session.emit("error", {"text": f"unknown message kind {kind!r}"})
        return session.messages[start:]

    def _run_dialog_turn(self, session: Session, turn) -> None:
        was_demo = session.teaching.state.phase == dialog.AWAITING_DEMONSTRATION
        moves = session.teaching.handle_turn(turn)
        for m in moves:
            session.emit_move(m)
        now_demo = session.teaching.state.phase == dialog.AWAITING_DEMONSTRATION
        if now_demo and not was_demo:
            recorder = session.world.recorder
            session.emit(
                "demonstrationMode",
                {"active": True, "mode": recorder.mode if recorder else "procedure"},
            )
            session.emit_screen()
            session.emit_highlights()
        if was_demo and not now_demo:
            session.emit("demonstrationMode", {"active": False})

    def _perform_demo_action(self, session: Session, raw: dict) -> None:
        action = Action(
            kind=raw.get("kind", ""),
            object_id=raw.get("objectId"),
            text=raw.get("text"),
            app_name=raw.get("appName"),
        )
        try:
            result = session.world.perform(action)
        except (screenworld.NoSuchObject, screenworld.NotClickable, ValueError) as exc:
            session.emit("error", {"text": str(exc)})
            return
        session.emit_screen()
        session.emit_highlights()
        if result.selected is not None:
            session.emit(
                "confirmation",
                {
                    "templateId": "selection",
                    "text": f"Selected {result.selected.text!r}.",
                    "args": [result.selected.object_id],
                },
            )

    def run_script(self, session_id: str, script_name: str,
                   env_vars: dict[str, str] | None = None) -> ExecutionTrace:
        session = self._session(session_id)
        rule = session.teaching.kb.rules.get(script_name)
        if rule is None:
            raise UnknownScript(script_name)
        for key, value in (env_vars or {}).items():
            session.world.set_env(key, value)
        session.world.reset_home()
        env = ExecutionEnvironment(session.world, session.teaching.kb, rule.context_label)
        trace = dsl.evaluate(rule.expression, env)
        session.last_trace = trace
        session.emit(
            "scriptResult",
            {
                "script": script_name,
                "branch": trace.branch,
                "events": [
                    {"kind": e.kind, "label": e.label, "detail": e.detail}
                    for e in trace.events
                ],
            },
        )
        return trace


# -- transcript files -------------------------------------------------------------


@dataclass
class TranscriptLineResult:
    lineno: int
    line: str
    ok: bool
    message: str = ""


@dataclass
class TranscriptReport:
    results: list[TranscriptLineResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def first_mismatch(self) -> TranscriptLineResult | None:
        for r in self.results:
            if not r.ok:
                return r
        return None

    def render(self) -> str:
        lines = [
            f"{'PASS' if r.ok else 'FAIL'} line {r.lineno}: {r.line}"
            + (f"  ({r.message})" if r.message else "")
            for r in self.results
        ]
        verdict = "TRANSCRIPT PASS" if self.passed else "TRANSCRIPT FAIL"
        return "\n".join(lines + [verdict]) + "\n"


class TranscriptMismatch(AssertionError):
    pass


def _parse_demo_actions(spec: str) -> tuple[list[Action], str | None]:
    actions: list[Action] = []
    selected: str | None = None
    for part in spec.split(";"):
        words = part.strip().split()
        if not words:
            continue
        op = words[0].lower()
        if op == "launch":
            actions.append(screenworld.launch_app(" ".join(words[1:])))
        elif op == "click":
            actions.append(screenworld.click(words[1]))
        elif op == "longclick":
            actions.append(screenworld.long_click_select(words[1]))
            selected = words[1]
        elif op == "settext":
            actions.append(screenworld.set_text(words[1], " ".join(words[2:])))
        elif op == "home":
            actions.append(screenworld.go_home())
        else:
            raise ValueError(f"unknown demo action {op!r}")
    return actions, selected


def _check_kb_assertion(knowledge: kbmod.KnowledgeBase, spec: str) -> str | None:
    words = spec.split()
    pred, args = words[0], words[1:]
    name = " ".join(args)  # has-* predicates take one possibly multi-word name
    if pred == "has-bool":
        return None if name in knowledge.bool_concepts else f"no Boolean concept {name!r}"
    if pred == "has-value":
        return None if name in knowledge.value_concepts else f"no value concept {name!r}"
    if pred == "has-proc":
        return None if name in knowledge.procedures else f"no procedure {name!r}"
    if pred == "has-rule":
        return None if name in knowledge.rules else f"no rule {name!r}"
    if pred == "bool-variants":
        name = " ".join(args[:-1])
        entry = knowledge.bool_concepts.get(name)
        count = len(entry.variants) if entry else 0
        return None if count == int(args[-1]) else f"{name!r} has {count} variants"
    if pred == "value-variants":
        name = " ".join(args[:-1])
        entry = knowledge.value_concepts.get(name)
        count = len(entry.variants) if entry else 0
        return None if count == int(args[-1]) else f"{name!r} has {count} variants"
    if pred == "bool-operator":
        name, expected_op = args[0], args[-1]
        context = " ".join(args[1:-1])
        entry = knowledge.bool_concepts.get(name)
        if entry is None:
            return f"no Boolean concept {name!r}"
        for variant in entry.variants:
            if variant.context_label == context:
                if isinstance(variant.expression, dsl.BoolComparison):
                    if variant.expression.op == expected_op:
                        return None
                    return f"operator is {variant.expression.op}"
                return "variant is not a comparison"
        return f"no variant for context {context!r}"
    return f"unknown predicate {pred!r}"


_VISIBLE_KINDS = ("agentText", "optionPrompt", "confirmation", "error")


def replay_transcript(gateway: Gateway, session_id: str, text: str) -> TranscriptReport:
    report = TranscriptReport()
    session = gateway._session(session_id)
    move_queue: list[SessionMessage] = []

    def visible(messages: list[SessionMessage]) -> list[SessionMessage]:
        return [m for m in messages if m.kind in _VISIBLE_KINDS]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        ok, message = True, ""
        try:
            if line.startswith("U:"):
                outgoing = gateway.send_turn(
                    session_id, {"kind": "userText", "text": line[2:].strip()}
                )
                move_queue.extend(visible(outgoing))
            elif line.startswith("A:"):
                expectation = line[2:].strip()
                if "|" in expectation:
                    template_id, substring = (s.strip() for s in expectation.split("|", 1))
                else:
                    template_id, substring = expectation, ""
                if not move_queue:
                    ok, message = False, f"no agent move queued for {template_id!r}"
                else:
                    got = move_queue.pop(0)
                    got_template = got.payload.get("templateId", got.kind)
                    if got_template != template_id:
                        ok = False
                        message = f"expected {template_id!r}, got {got_template!r}: {got.payload.get('text', '')!r}"
                    elif substring and substring not in got.payload.get("text", ""):
                        ok, message = False, f"text lacks {substring!r}"
            elif line.startswith("DEMO:"):
                actions, selected = _parse_demo_actions(line[5:])
                for action in actions:
                    for m in gateway.send_turn(
                        session_id,
                        {
                            "kind": "demonstrationMode",
                            "payload": {
                                "action": {
                                    "kind": action.kind,
                                    "objectId": action.object_id,
                                    "text": action.text,
                                    "appName": action.app_name,
                                }
                            },
                        },
                    ):
                        if m.kind == "error":
                            raise TranscriptMismatch(m.payload.get("text", "action failed"))
                outgoing = gateway.send_turn(
                    session_id,
                    {
                        "kind": "demonstrationMode",
                        "payload": {"done": True, "selectedObjectId": selected},
                    },
                )
                move_queue.extend(visible(outgoing))
            elif line.startswith("ASSERT-KB:"):
                failure = _check_kb_assertion(session.teaching.kb, line[10:].strip())
                if failure:
                    ok, message = False, failure
            elif line.startswith("ASSERT-BRANCH:"):
                words = line[14:].split()
                expected = words[0]
                env_vars = dict(w.split("=", 1) for w in words[1:])
                rule_name = session.teaching.last_rule_name
                if rule_name is None:
                    ok, message = False, "no rule has been saved"
                else:
                    trace = gateway.run_script(session_id, rule_name, env_vars)
                    branch = trace.branch or "none"
                    if branch != expected:
                        ok, message = False, f"took branch {branch!r}"
            elif line.startswith("ASSERT-ACTION:"):
                needle = line[14:].strip()
                trace = session.last_trace
                hit = trace is not None and any(
                    needle in e.label or needle in e.detail for e in trace.actions()
                )
                if not hit:
                    ok, message = False, f"no action mentions {needle!r}"
            else:
                ok, message = False, f"unknown transcript line kind"
        except (TranscriptMismatch, parser.NoParse, ValueError, KeyError) as exc:
            ok, message = False, str(exc)
        report.results.append(TranscriptLineResult(lineno, line, ok, message))
        if not ok:
            break
    return report


def replay_transcript_file(gateway: Gateway, session_id: str, path: str | Path
                           ) -> TranscriptReport:
    return replay_transcript(gateway, session_id, Path(path).read_text(encoding="utf-8"))
