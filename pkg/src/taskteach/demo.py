"""Demonstration recording and replaying.

A procedure demonstration becomes a reusable script: clicks whose target
text also appears in the goal utterance are lifted into parameters, with
the clicked object's siblings harvested as alternative values.  A value
demonstration becomes a navigation prefix plus a graph query that finds
the selected value again on the final screen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import screenworld
from .screenworld import (
    Action,
    GraphQuery,
    GuiObject,
    QueryFailed,
    UiSnapshotGraph,
    World,
)
from .values import TypedValue

_STOPWORDS = {"a", "an", "the", "of", "to", "for"}


class RecordingAlreadyActive(RuntimeError):
    pass


class EmptyRecording(ValueError):
    pass


class SelectorAmbiguous(ValueError):
    """Synthesized selector resolved to a different node (internal signal)."""


class UnknownBindingValue(ValueError):
    pass


class ReplayBroken(RuntimeError):
    pass


@dataclass(frozen=True)
class RecordedAction:
    action: Action
    app_name: str
    screen_id: str


@dataclass(frozen=True)
class Parameter:
    name: str
    recorded_value: str
    alternatives: tuple[str, ...]  # sorted sibling texts
    action_index: int


@dataclass(frozen=True)
class RecordedScript:
    name: str
    actions: tuple[RecordedAction, ...]
    parameters: tuple[Parameter, ...]
    trigger_utterances: tuple[str, ...]


@dataclass(frozen=True)
class ValueQuery:
    name: str
    navigation_actions: tuple[RecordedAction, ...]
    selector: GraphQuery
    expected_dimension: str | None


@dataclass
class RecordingSession:
    """Captures every world.perform while attached to the world."""

    mode: str  # "procedure" | "valueQuery"
    goal_utterance: str = ""
    concept_name: str = ""
    expected_dimension: str | None = None
    captured: list[RecordedAction] = field(default_factory=list)
    snapshots: list[UiSnapshotGraph] = field(default_factory=list)
    selected: GuiObject | None = None
    selected_snapshot: UiSnapshotGraph | None = None
    notes: list[str] = field(default_factory=list)

    def capture(self, world: World, action: Action) -> None:
        snapshot = world.snapshot()
        self.captured.append(RecordedAction(action, world.foreground_app, world.screen_id))
        self.snapshots.append(snapshot)
        if action.kind == "longClickSelect" and action.object_id is not None:
            self.selected = snapshot.node(action.object_id)
            self.selected_snapshot = snapshot

    def screen_labels(self) -> list[str]:
        labels: list[str] = []
        for snapshot in self.snapshots:
            for node in snapshot.nodes:
                if node.text and node.text not in labels:
                    labels.append(node.text)
        return labels


def start_recording(world: World, mode: str, goal_utterance: str = "",
                    concept_name: str = "", expected_dimension: str | None = None
                    ) -> RecordingSession:
    """Reset the phone to the home screen and start capturing actions."""
    if world.recorder is not None:
        raise RecordingAlreadyActive("a recording session is already active")
    session = RecordingSession(
        mode=mode,
        goal_utterance=goal_utterance,
        concept_name=concept_name,
        expected_dimension=expected_dimension,
    )
    world.reset_home()
    world.recorder = session
    return session


def cancel_recording(world: World) -> None:
    world.recorder = None
    world.reset_home()


def highlight_candidates(session: RecordingSession, snapshot: UiSnapshotGraph) -> set[str]:
    """Object ids the UI should overlay during a value demonstration.

    With a known target dimension, exactly the nodes displaying a value of
    that dimension; otherwise every entity-bearing node as an untyped
    fallback.
    """
    if session.mode != "valueQuery":
        return set()
    if session.expected_dimension is None:
        return {obj_id for obj_id, matches in snapshot.entities.items() if matches}
    return {
        obj_id
        for obj_id, matches in snapshot.entities.items()
        if any(m.value.dimension == session.expected_dimension for m in matches)
    }


def _tokens(text: str) -> list[str]:
    return [t.strip(",.!?;:'\"").lower() for t in text.split() if t.strip(",.!?;:'\"")]


def _is_token_subsequence(needle: list[str], haystack: list[str]) -> bool:
    it = iter(haystack)
    return all(token in it for token in needle)


def _occurrences(needle: list[str], haystack: list[str]) -> int:
    if not needle:
        return 0
    count = 0
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start : start + len(needle)] == needle:
            count += 1
    return count


_PARAM_NAME_BY_DIMENSION = {
    "temperature": "temperature",
    "duration": "duration",
    "money": "price",
    "time_of_day": "time",
}


def _parameter_name(node: GuiObject, snapshot: UiSnapshotGraph, taken: set[str]) -> str:
    matches = snapshot.entities_of(node.object_id)
    base = "item"
    if len(matches) == 1:
        base = _PARAM_NAME_BY_DIMENSION.get(matches[0].value.dimension, "item")
    name, counter = base, 2
    while name in taken:
        name = f"{base}{counter}"
        counter += 1
    return name


def _sibling_texts(node: GuiObject, snapshot: UiSnapshotGraph) -> tuple[str, ...]:
    siblings = [
        other.text
        for other in snapshot.nodes
        if other.parent == node.parent
        and other.object_id != node.object_id
        and other.text
    ]
    return tuple(sorted(set(siblings)))


def _script_name(goal_utterance: str, captured: list[RecordedAction]) -> str:
    verb = (_tokens(goal_utterance) or ["do"])[0]
    app = ""
    for recorded in reversed(captured):
        if recorded.app_name != screenworld.HOME_APP:
            app = recorded.app_name
            break
    suffix = "".join(part.capitalize() for part in app.split()) or "Phone"
    return f"{verb}_{suffix}"


def finish_procedure_recording(session: RecordingSession, world: World) -> RecordedScript:
    """Close a procedure recording and infer parameters from the goal."""
    world.recorder = None
    if not session.captured:
        raise EmptyRecording("no actions were demonstrated")
    goal_tokens = _tokens(session.goal_utterance)
    parameters: list[Parameter] = []
    taken: set[str] = set()
    parameterized_screens: set[tuple[str, str]] = set()
    for index, recorded in enumerate(session.captured):
        if recorded.action.kind != "click" or recorded.action.object_id is None:
            continue
        screen_key = (recorded.app_name, recorded.screen_id)
        if screen_key in parameterized_screens:
            continue  # one parameter per screen
        snapshot = session.snapshots[index]
        node = snapshot.node(recorded.action.object_id)
        if node.kind not in ("listItem", "button") or not node.text:
            continue
        node_tokens = _tokens(node.text)
        if not node_tokens or not _is_token_subsequence(node_tokens, goal_tokens):
            continue
        name = _parameter_name(node, snapshot, taken)
        taken.add(name)
        if _occurrences(node_tokens, goal_tokens) > 1:
            session.notes.append(
                f"{node.text!r} appears more than once in the goal; "
                "bound to its first occurrence"
            )
        parameters.append(
            Parameter(
                name=name,
                recorded_value=node.text,
                alternatives=_sibling_texts(node, snapshot),
                action_index=index,
            )
        )
        parameterized_screens.add(screen_key)
    return RecordedScript(
        name=_script_name(session.goal_utterance, session.captured),
        actions=tuple(session.captured),
        parameters=tuple(parameters),
        trigger_utterances=(" ".join(goal_tokens),),
    )


def _nearest_label(node: GuiObject, snapshot: UiSnapshotGraph) -> GuiObject | None:
    """Nearest textView by center distance within the nearLabel threshold;
    leftward/upward wins ties."""
    best: tuple[float, float, float] | None = None
    chosen: GuiObject | None = None
    nx, ny = node.center()
    for label in snapshot.near_labels(node.object_id):
        lx, ly = label.center()
        key = (math.dist((nx, ny), (lx, ly)), lx, ly)
        if best is None or key < best:
            best = key
            chosen = label
    return chosen


def finish_value_query_recording(session: RecordingSession, world: World,
                                 selected_object_id: str) -> ValueQuery:
    """Close a value recording and synthesize a selector for the selection."""
    world.recorder = None
    if session.selected is None or session.selected.object_id != selected_object_id:
        raise EmptyRecording(
            f"{selected_object_id!r} was not long-click-selected during the session"
        )
    snapshot = session.selected_snapshot
    assert snapshot is not None
    node = snapshot.node(selected_object_id)
    dimension = session.expected_dimension
    if dimension is None:
        matches = snapshot.entities_of(selected_object_id)
        dimension = matches[0].value.dimension if matches else None

    navigation = tuple(
        recorded for recorded in session.captured if recorded.action.kind != "longClickSelect"
    )

    predicates: list[tuple[str, str]] = []
    if dimension is not None:
        predicates.append(("hasEntityDimension", dimension))
    label = _nearest_label(node, snapshot)
    if label is not None:
        candidate = screenworld.query_of(*predicates, ("nearLabel", label.text))
        try:
            if screenworld.run_query(candidate, snapshot).object_id == selected_object_id:
                return ValueQuery(session.concept_name, navigation, candidate, dimension)
        except QueryFailed:
            pass
        session.notes.append("selector self-check failed; fell back to object id")
    fallback = screenworld.query_of(*predicates, ("objectIdIs", selected_object_id))
    resolved = screenworld.run_query(fallback, snapshot)
    if resolved.object_id != selected_object_id:
        raise SelectorAmbiguous(f"cannot re-resolve {selected_object_id!r}")
    return ValueQuery(session.concept_name, navigation, fallback, dimension)


def _replay_action(recorded: RecordedAction, world: World, trace) -> None:
    snapshot = world.snapshot()
    if recorded.action.object_id is not None and not snapshot.has_node(
        recorded.action.object_id
    ):
        raise ReplayBroken(
            f"expected {recorded.action.object_id!r} on "
            f"{world.foreground_app}/{world.screen_id}"
        )
    detail = ""
    if recorded.action.object_id is not None:
        detail = snapshot.node(recorded.action.object_id).text
    world.perform(recorded.action)
    if trace is not None:
        trace.record_action(recorded.action.describe(), detail)


def replay_procedure(script: RecordedScript, bindings: dict[str, str], world: World,
                     trace=None):
    """Replay a recorded script, retargeting parameterized clicks.

    Every parameter must be bound, and each binding must be the recorded
    value or one of the harvested alternatives.
    """
    by_index: dict[int, tuple[Parameter, str]] = {}
    for parameter in script.parameters:
        if parameter.name not in bindings:
            raise UnknownBindingValue(f"parameter {parameter.name!r} is not bound")
        value = bindings[parameter.name]
        legal = set(parameter.alternatives) | {parameter.recorded_value}
        if value not in legal:
            raise UnknownBindingValue(
                f"{value!r} is not an available value for {parameter.name!r}"
            )
        by_index[parameter.action_index] = (parameter, value)
    unknown = set(bindings) - {p.name for p in script.parameters}
    if unknown:
        raise UnknownBindingValue(f"no such parameters: {sorted(unknown)}")

    world.reset_home()
    for index, recorded in enumerate(script.actions):
        target = by_index.get(index)
        if target is not None and target[1] != target[0].recorded_value:
            parameter, value = target
            snapshot = world.snapshot()
            replacement = [n for n in snapshot.nodes if n.text == value]
            if not replacement:
                raise ReplayBroken(f"no object with text {value!r} on screen")
            retargeted = RecordedAction(
                screenworld.click(replacement[0].object_id),
                recorded.app_name,
                recorded.screen_id,
            )
            _replay_action(retargeted, world, trace)
        else:
            _replay_action(recorded, world, trace)
    return trace


def replay_value_query(query: ValueQuery, world: World, trace=None) -> TypedValue:
    """Navigate, run the selector, and return the first matching value."""
    world.reset_home()
    try:
        for recorded in query.navigation_actions:
            _replay_action(recorded, world, trace)
        snapshot = world.snapshot()
        node = screenworld.run_query(query.selector, snapshot)
        for match in snapshot.entities_of(node.object_id):
            if query.expected_dimension is None or (
                match.value.dimension == query.expected_dimension
            ):
                return match.value
        raise QueryFailed(
            f"{node.object_id!r} has no {query.expected_dimension} value"
        )
    finally:
        world.reset_home()
