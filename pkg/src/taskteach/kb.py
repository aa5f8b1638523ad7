"""Persistent store of learned procedures, Boolean concepts, and value
concepts, with per-context variants.

Lookup by context implements the three reuse levels: an exact context hit
is silent reuse; a miss with prior variants proposes the most recently
stored one and signals that the dialog should ask before adopting it.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import dsl
from .demo import Parameter, RecordedAction, RecordedScript, ValueQuery
from .screenworld import Action, GraphQuery
from .values import TypedValue, CANONICAL_UNITS, DIMENSION_OF_UNIT

FORMAT_VERSION = 1


class DimensionConflict(ValueError):
    pass


class UnknownName(KeyError):
    pass


class CorruptStore(ValueError):
    pass


@dataclass(frozen=True)
class ProcedureEntry:
    name: str
    trigger_utterances: tuple[str, ...]
    script: RecordedScript


@dataclass(frozen=True)
class BoolVariant:
    context_label: str
    expression: dsl.ScriptExpr  # Bool-typed, hole-free


@dataclass(frozen=True)
class BooleanConceptEntry:
    name: str
    trigger_utterances: tuple[str, ...]
    variants: tuple[BoolVariant, ...]  # in storage order; last = most recent


@dataclass(frozen=True)
class ValueVariant:
    context_label: str
    query: ValueQuery | None = None
    constant: TypedValue | None = None

    def dimension(self) -> str | None:
        if self.constant is not None:
            return self.constant.dimension
        return self.query.expected_dimension if self.query else None


@dataclass(frozen=True)
class ValueConceptEntry:
    name: str
    trigger_utterances: tuple[str, ...]
    variants: tuple[ValueVariant, ...]


@dataclass(frozen=True)
class RuleEntry:
    """A taught top-level script, runnable by name."""

    name: str
    utterance: str
    context_label: str
    expression: dsl.ScriptExpr


def _normalize_phrase(text: str) -> str:
    tokens = [t.strip(",.!?;:\"'") for t in text.lower().split()]
    return " ".join(t for t in tokens if t)


@dataclass
class KnowledgeBase:
    procedures: dict[str, ProcedureEntry] = field(default_factory=dict)
    bool_concepts: dict[str, BooleanConceptEntry] = field(default_factory=dict)
    value_concepts: dict[str, ValueConceptEntry] = field(default_factory=dict)
    rules: dict[str, RuleEntry] = field(default_factory=dict)

    def clone(self) -> "KnowledgeBase":
        return copy.deepcopy(self)

    # -- store ---------------------------------------------------------------

    def store_procedure(self, entry: ProcedureEntry) -> None:
        if not entry.trigger_utterances:
            raise ValueError("a procedure needs at least one trigger utterance")
        existing = self.procedures.get(entry.name)
        if existing is not None:
            triggers = existing.trigger_utterances + tuple(
                t for t in entry.trigger_utterances if t not in existing.trigger_utterances
            )
            entry = ProcedureEntry(entry.name, triggers, entry.script)
        self.procedures[entry.name] = entry

    def store_bool_concept(self, name: str, triggers: tuple[str, ...],
                           variant: BoolVariant) -> BooleanConceptEntry:
        report = dsl.typecheck(variant.expression)
        if not report.ok or dsl.list_holes(variant.expression):
            raise ValueError(f"variant expression for {name!r} is not a closed Bool")
        existing = self.bool_concepts.get(name)
        if existing is None:
            entry = BooleanConceptEntry(name, triggers, (variant,))
        else:
            kept = tuple(v for v in existing.variants if v.context_label != variant.context_label)
            merged = existing.trigger_utterances + tuple(
                t for t in triggers if t not in existing.trigger_utterances
            )
            entry = BooleanConceptEntry(name, merged, kept + (variant,))
        self.bool_concepts[name] = entry
        return entry

    def store_value_concept(self, name: str, triggers: tuple[str, ...],
                            variant: ValueVariant) -> ValueConceptEntry:
        existing = self.value_concepts.get(name)
        if existing is not None and existing.variants:
            have = existing.variants[0].dimension()
            new = variant.dimension()
            if have is not None and new is not None and have != new:
                raise DimensionConflict(
                    f"{name!r} holds {have} values, got a {new} variant"
                )
        if existing is None:
            entry = ValueConceptEntry(name, triggers, (variant,))
        else:
            kept = tuple(v for v in existing.variants if v.context_label != variant.context_label)
            merged = existing.trigger_utterances + tuple(
                t for t in triggers if t not in existing.trigger_utterances
            )
            entry = ValueConceptEntry(name, merged, kept + (variant,))
        self.value_concepts[name] = entry
        return entry

    def store_rule(self, entry: RuleEntry) -> None:
        report = dsl.typecheck(entry.expression)
        if not report.ok or dsl.list_holes(entry.expression):
            raise ValueError(f"rule {entry.name!r} is not a closed script")
        self.rules[entry.name] = entry

    # -- lookup ----------------------------------------------------------------

    def find_procedure(self, name: str) -> ProcedureEntry | None:
        return self.procedures.get(name)

    def lookup_by_utterance(self, phrase: str) -> list[object]:
        """Entries whose trigger matches the phrase, longest trigger first."""
        normalized = _normalize_phrase(phrase)
        scored: list[tuple[int, str, object]] = []
        entries = (
            list(self.bool_concepts.values())
            + list(self.value_concepts.values())
            + list(self.procedures.values())
        )
        for entry in entries:
            for trigger in entry.trigger_utterances:
                trig = _normalize_phrase(trigger)
                if trig and trig == normalized or (trig and trig in normalized):
                    scored.append((-len(trig), entry.name, entry))
                    break
        scored.sort(key=lambda item: (item[0], item[1]))
        return [entry for _, _, entry in scored]

    def resolve_bool_in_context(self, name: str, context_label: str
                                ) -> tuple[BoolVariant, bool]:
        entry = self.bool_concepts.get(name)
        if entry is None or not entry.variants:
            raise UnknownName(name)
        for variant in entry.variants:
            if variant.context_label == context_label:
                return variant, False
        return entry.variants[-1], True

    def resolve_value_in_context(self, name: str, context_label: str
                                 ) -> tuple[ValueVariant, bool]:
        entry = self.value_concepts.get(name)
        if entry is None or not entry.variants:
            raise UnknownName(name)
        for variant in entry.variants:
            if variant.context_label == context_label:
                return variant, False
        return entry.variants[-1], True

    # Runtime accessors used by dsl.evaluate: reuse questions are a teaching-
    # time affair, so execution silently takes the context-appropriate variant.
    def bool_variant(self, name: str, context_label: str) -> BoolVariant | None:
        try:
            variant, _ = self.resolve_bool_in_context(name, context_label)
        except UnknownName:
            return None
        return variant

    def value_variant(self, name: str, context_label: str) -> ValueVariant | None:
        try:
            variant, _ = self.resolve_value_in_context(name, context_label)
        except UnknownName:
            return None
        return variant


# -- persistence ----------------------------------------------------------------


def _action_to_json(recorded: RecordedAction) -> dict:
    action = recorded.action
    return {
        "kind": action.kind,
        "objectId": action.object_id,
        "text": action.text,
        "appName": action.app_name,
        "screenApp": recorded.app_name,
        "screenId": recorded.screen_id,
    }


_ACTION_KEYS = {"kind", "objectId", "text", "appName", "screenApp", "screenId"}


def _action_from_json(raw: dict, where: str) -> RecordedAction:
    _check_keys(raw, _ACTION_KEYS, where)
    return RecordedAction(
        Action(raw["kind"], raw.get("objectId"), raw.get("text"), raw.get("appName")),
        raw["screenApp"],
        raw["screenId"],
    )


def _script_to_json(script: RecordedScript) -> dict:
    return {
        "name": script.name,
        "actions": [_action_to_json(a) for a in script.actions],
        "parameters": [
            {
                "name": p.name,
                "recordedValue": p.recorded_value,
                "alternatives": sorted(p.alternatives),
                "actionIndex": p.action_index,
            }
            for p in script.parameters
        ],
        "triggerUtterances": list(script.trigger_utterances),
    }


def _script_from_json(raw: dict, where: str) -> RecordedScript:
    _check_keys(raw, {"name", "actions", "parameters", "triggerUtterances"}, where)
    return RecordedScript(
        name=raw["name"],
        actions=tuple(
            _action_from_json(a, f"{where}.actions[{i}]")
            for i, a in enumerate(raw["actions"])
        ),
        parameters=tuple(
            Parameter(
                p["name"], p["recordedValue"], tuple(p["alternatives"]), p["actionIndex"]
            )
            for p in raw["parameters"]
        ),
        trigger_utterances=tuple(raw["triggerUtterances"]),
    )


def _query_to_json(query: ValueQuery) -> dict:
    return {
        "name": query.name,
        "navigationActions": [_action_to_json(a) for a in query.navigation_actions],
        "selector": query.selector.to_json(),
        "expectedDimension": query.expected_dimension,
    }


def _query_from_json(raw: dict, where: str) -> ValueQuery:
    _check_keys(raw, {"name", "navigationActions", "selector", "expectedDimension"}, where)
    return ValueQuery(
        name=raw["name"],
        navigation_actions=tuple(
            _action_from_json(a, f"{where}.navigationActions[{i}]")
            for i, a in enumerate(raw["navigationActions"])
        ),
        selector=GraphQuery.from_json(raw["selector"]),
        expected_dimension=raw["expectedDimension"],
    )


def _check_keys(raw: dict, allowed: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise CorruptStore(f"{where}: unknown fields {sorted(unknown)}")


def kb_to_json(kb: KnowledgeBase) -> dict:
    return {
        "version": FORMAT_VERSION,
        "procedures": [
            {
                "name": entry.name,
                "triggerUtterances": list(entry.trigger_utterances),
                "script": _script_to_json(entry.script),
            }
            for _, entry in sorted(kb.procedures.items())
        ],
        "booleanConcepts": [
            {
                "name": entry.name,
                "triggerUtterances": list(entry.trigger_utterances),
                "variants": [
                    {"context": v.context_label, "expression": dsl.render(v.expression)}
                    for v in entry.variants
                ],
            }
            for _, entry in sorted(kb.bool_concepts.items())
        ],
        "valueConcepts": [
            {
                "name": entry.name,
                "triggerUtterances": list(entry.trigger_utterances),
                "variants": [
                    {
                        "context": v.context_label,
                        "query": _query_to_json(v.query) if v.query else None,
                        "constant": _constant_to_json(v.constant),
                    }
                    for v in entry.variants
                ],
            }
            for _, entry in sorted(kb.value_concepts.items())
        ],
        "rules": [
            {
                "name": entry.name,
                "utterance": entry.utterance,
                "context": entry.context_label,
                "expression": dsl.render(entry.expression),
            }
            for _, entry in sorted(kb.rules.items())
        ],
    }


def _constant_to_json(value: TypedValue | None) -> dict | None:
    if value is None:
        return None
    return {"magnitude": value.magnitude, "unit": value.unit}


def _constant_from_json(raw: dict | None, where: str) -> TypedValue | None:
    if raw is None:
        return None
    _check_keys(raw, {"magnitude", "unit"}, where)
    dimension = DIMENSION_OF_UNIT.get(raw["unit"])
    if dimension is None:
        raise CorruptStore(f"{where}: unknown unit {raw['unit']!r}")
    return TypedValue(raw["magnitude"], dimension, CANONICAL_UNITS[dimension])


def persist(kb: KnowledgeBase, path: str | Path) -> None:
    """Write the canonical byte form: entries sorted by name, keys sorted."""
    Path(path).write_text(render_store(kb), encoding="utf-8")


def render_store(kb: KnowledgeBase) -> str:
    return json.dumps(kb_to_json(kb), sort_keys=True, indent=1) + "\n"


def load(path: str | Path) -> KnowledgeBase:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptStore(f"{path}: {exc}") from exc
    return kb_from_json(raw)


def kb_from_json(raw: object) -> KnowledgeBase:
    if not isinstance(raw, dict):
        raise CorruptStore("top level: expected an object")
    if raw.get("version") != FORMAT_VERSION:
        raise CorruptStore(f"unsupported store version {raw.get('version')!r}")
    _check_keys(raw, {"version", "procedures", "booleanConcepts", "valueConcepts", "rules"},
                "top level")
    kb = KnowledgeBase()
    try:
        for index, entry in enumerate(raw["procedures"]):
            where = f"procedures[{index}]"
            _check_keys(entry, {"name", "triggerUtterances", "script"}, where)
            kb.procedures[entry["name"]] = ProcedureEntry(
                entry["name"],
                tuple(entry["triggerUtterances"]),
                _script_from_json(entry["script"], where),
            )
        for index, entry in enumerate(raw["booleanConcepts"]):
            where = f"booleanConcepts[{index}]"
            _check_keys(entry, {"name", "triggerUtterances", "variants"}, where)
            kb.bool_concepts[entry["name"]] = BooleanConceptEntry(
                entry["name"],
                tuple(entry["triggerUtterances"]),
                tuple(
                    BoolVariant(v["context"], dsl.parse_expr(v["expression"]))
                    for v in entry["variants"]
                ),
            )
        for index, entry in enumerate(raw["valueConcepts"]):
            where = f"valueConcepts[{index}]"
            _check_keys(entry, {"name", "triggerUtterances", "variants"}, where)
            kb.value_concepts[entry["name"]] = ValueConceptEntry(
                entry["name"],
                tuple(entry["triggerUtterances"]),
                tuple(
                    ValueVariant(
                        v["context"],
                        _query_from_json(v["query"], where) if v.get("query") else None,
                        _constant_from_json(v.get("constant"), where),
                    )
                    for v in entry["variants"]
                ),
            )
        for index, entry in enumerate(raw["rules"]):
            where = f"rules[{index}]"
            _check_keys(entry, {"name", "utterance", "context", "expression"}, where)
            kb.rules[entry["name"]] = RuleEntry(
                entry["name"],
                entry["utterance"],
                entry["context"],
                dsl.parse_expr(entry["expression"]),
            )
    except (KeyError, TypeError, dsl.ExprSyntaxError) as exc:
        raise CorruptStore(f"malformed record: {exc}") from exc
    return kb
