"""Grammar-based semantic parser with typed holes.

The parser maps an utterance to a ranked list of typed script candidates.
Anything it cannot ground in its lexicon becomes a typed hole carrying the
verbatim (normalized) span, so the dialog layer can resolve it later.

The grammar is deterministic and small; every rule below is part of the
parser's contract and is mirrored by the brute-force derivation oracle in
the test suite:

  command     := IF cond ACT [OTHERWISE act]      (split at commas if any,
                                                   else at every point)
               | act IF cond [OTHERWISE act]
               | act                               (only when no conditional
                                                   marker appears at all)
  cond        := concept-trigger match            -> BoolConceptRef
               | value CMP value                  -> BoolComparison
               | <any non-empty span>             -> ResolveBool
  value       := [leading articles stripped]
                 whole-span typed constant        -> ValueConstant
               | value-concept trigger            -> ValueConceptRef
               | <any non-empty span>             -> ResolveValue
  act         := procedure trigger template       -> ProcedureCall
               | <any non-empty span>             -> ResolveProcedure

Extra rules, all enumerated as alternative derivations and settled by the
ranking below:
  * an else tail is split off at the first else marker, provided a
    conditional marker precedes it; a trailing "when/if ..." clause inside
    the else tail may be dropped as a restatement of the negated condition;
  * a single linking verb directly before a comparison word is absorbed
    into the comparison frame, as is one "than" directly after it;
  * an explanation may start with a restatement prefix that ends at a
    conditional marker ("it is hot when ...");
  * a Boolean concept trigger also matches when its content tokens are a
    sub-bag of the span's content tokens with at most two extra content
    tokens (the condition's subject, e.g. "the oven is hot" against "hot").

Ranking: score = 2*(tokens matched) − (tokens inside holes) − 3*(holes),
where every token outside a hole span counts as matched; ties break by
fewer holes, then fewer hole tokens, then canonical text order.  Ambiguous
comparison words yield one candidate per operator and flag the node in
`ambiguous_nodes`; so do defaulted temperature units and procedure holes
whose tail matches a known argument or screen label.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import dsl, entities, values
from .dsl import ScriptExpr
from .kb import BooleanConceptEntry, ProcedureEntry, ValueConceptEntry

BOOL_CONCEPT = "BoolConcept"
VALUE_CONCEPT = "ValueConcept"
PROCEDURE = "Procedure"
PROCEDURE_ARG = "ProcedureArg"
COMPARISON_WORD = "ComparisonWord"
UNIT = "Unit"
NUMBER = "Number"
CONDITIONAL_MARKER = "ConditionalMarker"
ELSE_MARKER = "ElseMarker"
SCREEN_LABEL = "ScreenLabel"

CATEGORIES = (
    BOOL_CONCEPT, VALUE_CONCEPT, PROCEDURE, PROCEDURE_ARG, COMPARISON_WORD,
    UNIT, NUMBER, CONDITIONAL_MARKER, ELSE_MARKER, SCREEN_LABEL,
)

STOPWORDS = frozenset(
    {"the", "a", "an", "is", "are", "was", "were", "it", "its", "it's", "there", "this"}
)
ARTICLES = ("the", "a", "an")
LINK_VERBS = frozenset(
    {"is", "are", "was", "were", "takes", "take", "took", "costs", "cost", "lasts"}
)
TAIL_CONNECTORS = frozenset({"of", "for", "a", "an", "the"})

DEMONSTRATION_PHRASES = frozenset(
    {
        "let me demonstrate",
        "i can demonstrate",
        "i will demonstrate",
        "i'll demonstrate",
        "let me show you",
        "i can show you",
        "demonstrate",
    }
)
_DEMONSTRATION_TAILS = ("for you", "for me", "to you", "it")

_STRIP_CHARS = ",.!?;:\"'()"


class NoParse(ValueError):
    """The utterance fits no grammar frame at all."""


@dataclass(frozen=True)
class LexEntry:
    phrase: tuple[str, ...]
    category: str
    payload: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown lexicon category {self.category!r}")
        if not self.phrase:
            raise ValueError("empty lexicon phrase")
        if self.category == COMPARISON_WORD:
            ops = set(self.payload)
            if not ops or not ops <= set(dsl.OPERATORS):
                raise ValueError(f"bad comparison payload {self.payload!r}")


def _content_bag(tokens: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(t for t in tokens if t not in STOPWORDS))


@dataclass(frozen=True)
class Lexicon:
    """Immutable phrase table; growing it returns a new lexicon."""

    entries: frozenset[LexEntry]
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        by_category: dict[str, list[LexEntry]] = {c: [] for c in CATEGORIES}
        for entry in sorted(self.entries, key=lambda e: (e.category, e.phrase, e.payload)):
            by_category[entry.category].append(entry)
        bool_triggers: list[tuple[tuple[str, ...], str]] = []
        seen_bags = set()
        for entry in by_category[BOOL_CONCEPT]:
            bag = _content_bag(entry.phrase)
            if bag and (bag, entry.payload[0]) not in seen_bags:
                seen_bags.add((bag, entry.payload[0]))
                bool_triggers.append((bag, entry.payload[0]))
        value_triggers = {e.phrase: e.payload[0] for e in by_category[VALUE_CONCEPT]}
        proc_args: dict[tuple[str, str], dict[tuple[str, ...], str]] = {}
        for entry in by_category[PROCEDURE_ARG]:
            proc, param, original = entry.payload
            proc_args.setdefault((proc, param), {})[entry.phrase] = original
        arg_and_label_phrases = {e.phrase for e in by_category[PROCEDURE_ARG]}
        arg_and_label_phrases |= {e.phrase for e in by_category[SCREEN_LABEL]}
        comparison_len = max(
            (len(e.phrase) for e in by_category[COMPARISON_WORD]), default=0
        )
        self._index.update(
            by_category=by_category,
            bool_triggers=bool_triggers,
            value_triggers=value_triggers,
            proc_args=proc_args,
            arg_and_label_phrases=arg_and_label_phrases,
            comparison_len=comparison_len,
            markers={e.phrase[0] for e in by_category[CONDITIONAL_MARKER]},
            else_markers={e.phrase[0] for e in by_category[ELSE_MARKER]},
        )

    def __getitem__(self, key: str):
        return self._index[key]

    def with_entries(self, new_entries) -> "Lexicon":
        merged = self.entries | frozenset(new_entries)
        if merged == self.entries:
            return self
        return Lexicon(merged)


def empty_lexicon() -> Lexicon:
    return Lexicon(frozenset())


def load_lexicon_seed(path: str | Path) -> Lexicon:
    """Seed file: one `phrase<TAB>category<TAB>payload` entry per line."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        phrase, category, payload = parts
        entries.append(
            LexEntry(tuple(normalize_text(phrase).split()), category, tuple(payload.split("|")))
        )
    return Lexicon(frozenset(entries))


def default_lexicon() -> Lexicon:
    return load_lexicon_seed(Path(__file__).parent / "data" / "lexicon_seed.tsv")


# -- tokenization ---------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    norm: str
    comma_after: bool


def normalize_text(text: str) -> str:
    tokens = [t.strip(_STRIP_CHARS).lower() for t in text.split()]
    return " ".join(t for t in tokens if t)


def tokenize(utterance: str) -> list[Token]:
    tokens = []
    for raw in utterance.split():
        stripped = raw.strip(_STRIP_CHARS).lower()
        if stripped:
            tokens.append(Token(stripped, raw.rstrip(".!?\"')").endswith((",", ";"))))
    return tokens


def _span_text(tokens: list[Token]) -> str:
    return " ".join(t.norm for t in tokens)


# -- candidates -------------------------------------------------------------------


@dataclass(frozen=True)
class AmbiguousNode:
    path: dsl.Path
    kind: str  # operator | unit | hole-extent
    alternatives: tuple[ScriptExpr, ...]


@dataclass(frozen=True)
class ParseCandidate:
    expr: ScriptExpr
    score: int
    ambiguous_nodes: tuple[AmbiguousNode, ...] = ()

    @property
    def text(self) -> str:
        return dsl.render(self.expr)


class DemonstrationRequested:
    """Distinguished result: the user asked to demonstrate instead."""

    def __repr__(self) -> str:
        return "DemonstrationRequested()"

    def __eq__(self, other) -> bool:
        return isinstance(other, DemonstrationRequested)

    def __hash__(self) -> int:
        return hash("DemonstrationRequested")


@dataclass(frozen=True)
class _Deriv:
    expr: ScriptExpr
    hole_tokens: int
    holes: int
    flags: tuple[AmbiguousNode, ...] = ()

    def at(self, slot: str) -> "_Deriv":
        return _Deriv(
            self.expr,
            self.hole_tokens,
            self.holes,
            tuple(
                AmbiguousNode((slot,) + f.path, f.kind, f.alternatives) for f in self.flags
            ),
        )


def _rank(derivs: list[_Deriv], total_tokens: int) -> list[ParseCandidate]:
    seen: dict[str, ParseCandidate] = {}
    for deriv in derivs:
        text = dsl.render(deriv.expr)
        if text in seen:
            continue
        score = 2 * (total_tokens - deriv.hole_tokens) - deriv.hole_tokens - 3 * deriv.holes
        seen[text] = ParseCandidate(deriv.expr, score, deriv.flags)
    ranked = sorted(
        seen.values(),
        key=lambda c: (
            -c.score,
            sum(1 for _ in dsl.list_holes(c.expr)),
            sum(len(h.span.split()) for h in dsl.list_holes(c.expr)),
            c.text,
        ),
    )
    return ranked


def is_demonstration_offer(utterance: str) -> bool:
    norm = normalize_text(utterance)
    for tail in _DEMONSTRATION_TAILS:
        if norm.endswith(" " + tail):
            norm = norm[: -len(tail) - 1]
    return norm in DEMONSTRATION_PHRASES


# -- derivation rules ------------------------------------------------------------


def _marker_positions(tokens: list[Token], markers: set[str]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t.norm in markers]


def _strip_leading_articles(tokens: list[Token]) -> list[Token]:
    start = 0
    while start < len(tokens) and tokens[start].norm in ARTICLES:
        start += 1
    return tokens[start:]


def _value_derivs(tokens: list[Token], lexicon: Lexicon) -> list[_Deriv]:
    out: list[_Deriv] = []
    variants = [tokens]
    stripped = _strip_leading_articles(tokens)
    if len(stripped) != len(tokens):
        variants.append(stripped)
    for variant in variants:
        if not variant:
            continue
        text = _span_text(variant)
        matches = entities.extract_entities(text)
        if len(matches) == 1 and matches[0].char_span == (0, len(text)):
            constant = dsl.ValueConstant(matches[0].value)
            flags: tuple[AmbiguousNode, ...] = ()
            if _defaulted_temperature_unit(variant):
                celsius = dsl.ValueConstant(
                    values.temperature_c(_leading_number(text))
                )
                flags = (AmbiguousNode((), "unit", (constant, celsius)),)
            out.append(_Deriv(constant, 0, 0, flags))
        name = lexicon["value_triggers"].get(tuple(t.norm for t in variant))
        if name is not None:
            out.append(_Deriv(dsl.ValueConceptRef(name), 0, 0))
        out.append(_Deriv(dsl.ResolveValue(text), len(variant), 1))
    return out


def _defaulted_temperature_unit(tokens: list[Token]) -> bool:
    norms = [t.norm for t in tokens]
    has_degrees = any(n in ("degree", "degrees") for n in norms)
    explicit = any(n in ("fahrenheit", "celsius") or "°" in n for n in norms)
    return has_degrees and not explicit


def _leading_number(text: str) -> float:
    m = re.match(r"\d+(?:\.\d+)?", text)
    return float(m.group(0)) if m else 0.0


def _comparison_occurrences(tokens: list[Token], lexicon: Lexicon):
    """(start, end, operator set) for each comparison-word window; one
    directly-following "than" is absorbed into the window."""
    occurrences = []
    max_len = lexicon["comparison_len"]
    phrase_map = {
        e.phrase: e.payload for e in lexicon["by_category"][COMPARISON_WORD]
    }
    for start in range(len(tokens)):
        for length in range(1, max_len + 1):
            end = start + length
            if end > len(tokens):
                break
            window = tuple(t.norm for t in tokens[start:end])
            ops = phrase_map.get(window)
            if ops is None:
                continue
            if end < len(tokens) and tokens[end].norm == "than":
                occurrences.append((start, end + 1, ops))
            else:
                occurrences.append((start, end, ops))
    return occurrences


def _bool_derivs(tokens: list[Token], lexicon: Lexicon) -> list[_Deriv]:
    out: list[_Deriv] = []
    if not tokens:
        return out
    span_bag = Counter(t.norm for t in tokens if t.norm not in STOPWORDS)
    for trigger_bag, name in lexicon["bool_triggers"]:
        trigger = Counter(trigger_bag)
        if not trigger <= span_bag:
            continue
        leftover = sum((span_bag - trigger).values())
        if leftover <= 2:
            out.append(_Deriv(dsl.BoolConceptRef(name), 0, 0))

    for start, end, ops in _comparison_occurrences(tokens, lexicon):
        rhs_tokens = tokens[end:]
        if not rhs_tokens or start == 0:
            continue
        lhs_variants = [tokens[:start]]
        if tokens[start - 1].norm in LINK_VERBS and start > 1:
            lhs_variants.append(tokens[: start - 1])
        ordered_ops = [op for op in dsl.OPERATORS if op in ops]
        for lhs_tokens in lhs_variants:
            for lhs in _value_derivs(lhs_tokens, lexicon):
                for rhs in _value_derivs(rhs_tokens, lexicon):
                    op_exprs = {
                        op: dsl.BoolComparison(lhs.expr, op, rhs.expr)
                        for op in ordered_ops
                    }
                    flags: tuple[AmbiguousNode, ...] = ()
                    if len(ordered_ops) > 1:
                        flags = (
                            AmbiguousNode(
                                (), "operator", tuple(op_exprs[op] for op in ordered_ops)
                            ),
                        )
                    for op in ordered_ops:
                        out.append(
                            _Deriv(
                                op_exprs[op],
                                lhs.hole_tokens + rhs.hole_tokens,
                                lhs.holes + rhs.holes,
                                flags
                                + tuple(lhs.at("lhs").flags)
                                + tuple(rhs.at("rhs").flags),
                            )
                        )
    out.append(_Deriv(dsl.ResolveBool(_span_text(tokens)), len(tokens), 1))
    return out


def _proc_template_matches(tokens: list[Token], lexicon: Lexicon) -> list[_Deriv]:
    norms = tuple(t.norm for t in tokens)
    out = []
    for entry in lexicon["by_category"][PROCEDURE]:
        proc_name, param_name, slot_start, slot_end = entry.payload[:4]
        defaults = dict(zip(entry.payload[4::2], entry.payload[5::2]))
        phrase = entry.phrase
        if not param_name:
            if norms == phrase:
                out.append(_Deriv(dsl.proc_call(proc_name, **defaults), 0, 0))
            continue
        start, end = int(slot_start), int(slot_end)
        prefix, suffix = phrase[:start], phrase[end:]
        if len(norms) < len(prefix) + len(suffix) + 1:
            continue
        if norms[: len(prefix)] != prefix:
            continue
        if suffix and norms[len(norms) - len(suffix):] != suffix:
            continue
        middle = norms[len(prefix): len(norms) - len(suffix)]
        fillers = dict(lexicon["proc_args"].get((proc_name, param_name), {}))
        fillers.setdefault(phrase[start:end], " ".join(phrase[start:end]))
        original = fillers.get(middle)
        if original is None:
            continue
        bindings = dict(defaults)
        bindings[param_name] = original
        out.append(_Deriv(dsl.proc_call(proc_name, **bindings), 0, 0))
    return out


def _hole_extent_flag(tokens: list[Token], lexicon: Lexicon) -> tuple[AmbiguousNode, ...]:
    norms = tuple(t.norm for t in tokens)
    phrases = lexicon["arg_and_label_phrases"]
    for cut in range(1, len(norms)):  # longest known suffix wins
        if norms[cut:] in phrases:
            head = list(norms[:cut])
            while head and head[-1] in TAIL_CONNECTORS:
                head.pop()
            if head:
                full = dsl.ResolveProcedure(" ".join(norms))
                short = dsl.ResolveProcedure(" ".join(head))
                return (AmbiguousNode((), "hole-extent", (full, short)),)
    return ()


def _act_derivs(tokens: list[Token], lexicon: Lexicon, allow_cond_strip: bool) -> list[_Deriv]:
    spans = [tokens]
    if allow_cond_strip:
        marker_pos = _marker_positions(tokens, lexicon["markers"])
        if marker_pos and marker_pos[0] >= 1:
            spans.append(tokens[: marker_pos[0]])
    out: list[_Deriv] = []
    for span in spans:
        if not span:
            continue
        out.extend(_proc_template_matches(span, lexicon))
        out.append(
            _Deriv(
                dsl.ResolveProcedure(_span_text(span)),
                len(span),
                1,
                _hole_extent_flag(span, lexicon),
            )
        )
    return out


def _conditional_derivs(main: list[Token], else_derivs: list[_Deriv | None],
                        lexicon: Lexicon) -> list[_Deriv]:
    out: list[_Deriv] = []
    markers = lexicon["markers"]

    def combine(cond: _Deriv, act: _Deriv, tail: _Deriv | None) -> _Deriv:
        else_expr = tail.expr if tail is not None else None
        hole_tokens = cond.hole_tokens + act.hole_tokens
        holes = cond.holes + act.holes
        flags = tuple(cond.at("cond").flags) + tuple(act.at("then").flags)
        if tail is not None:
            hole_tokens += tail.hole_tokens
            holes += tail.holes
            flags += tuple(tail.at("else").flags)
        return _Deriv(
            dsl.Conditional(cond.expr, act.expr, else_expr), hole_tokens, holes, flags
        )

    if main and main[0].norm in markers and len(main) >= 3:
        comma_splits = [
            i for i in range(1, len(main) - 1) if main[i].comma_after
        ]
        splits = comma_splits or list(range(1, len(main) - 1))
        for split in splits:
            cond_tokens, act_tokens = main[1: split + 1], main[split + 1:]
            for cond in _bool_derivs(cond_tokens, lexicon):
                for act in _act_derivs(act_tokens, lexicon, allow_cond_strip=False):
                    for tail in else_derivs:
                        out.append(combine(cond, act, tail))
    for pos in _marker_positions(main, markers):
        if 1 <= pos <= len(main) - 2:
            act_tokens, cond_tokens = main[:pos], main[pos + 1:]
            for cond in _bool_derivs(cond_tokens, lexicon):
                for act in _act_derivs(act_tokens, lexicon, allow_cond_strip=False):
                    for tail in else_derivs:
                        out.append(combine(cond, act, tail))
    return out


# -- entry points ------------------------------------------------------------------


def parse_command(utterance: str, lexicon: Lexicon) -> list[ParseCandidate]:
    tokens = tokenize(utterance)
    if not tokens:
        raise NoParse("empty utterance")
    cond_positions = _marker_positions(tokens, lexicon["markers"])
    derivs: list[_Deriv] = []
    if not cond_positions:
        derivs.extend(_act_derivs(tokens, lexicon, allow_cond_strip=False))
    else:
        else_positions = [
            i
            for i in _marker_positions(tokens, lexicon["else_markers"])
            if 1 <= i <= len(tokens) - 2 and any(p < i for p in cond_positions)
        ]
        if else_positions:
            split = else_positions[0]
            main, else_part = tokens[:split], tokens[split + 1:]
            else_derivs: list[_Deriv | None] = list(
                _act_derivs(else_part, lexicon, allow_cond_strip=True)
            )
        else:
            main, else_derivs = tokens, [None]
        derivs.extend(_conditional_derivs(main, else_derivs, lexicon))
    if not derivs:
        raise NoParse(f"no grammar frame fits {utterance!r}")
    return _rank(derivs, len(tokens))


def parse_boolean_explanation(utterance: str, lexicon: Lexicon) -> list[ParseCandidate]:
    tokens = tokenize(utterance)
    if not tokens:
        raise NoParse("empty utterance")
    derivs = list(_bool_derivs(tokens, lexicon))
    for pos in _marker_positions(tokens, lexicon["markers"]):
        if 1 <= pos <= len(tokens) - 2:
            derivs.extend(_bool_derivs(tokens[pos + 1:], lexicon))
    return _rank(derivs, len(tokens))


def parse_value_explanation(utterance: str, lexicon: Lexicon
                            ) -> list[ParseCandidate] | DemonstrationRequested:
    if is_demonstration_offer(utterance):
        return DemonstrationRequested()
    tokens = tokenize(utterance)
    if not tokens:
        raise NoParse("empty utterance")
    derivs = list(_value_derivs(tokens, lexicon))
    for pos in _marker_positions(tokens, lexicon["markers"]):
        if 1 <= pos <= len(tokens) - 2:
            derivs.extend(_value_derivs(tokens[pos + 1:], lexicon))
    if not derivs:
        raise NoParse(f"no value reading of {utterance!r}")
    return _rank(derivs, len(tokens))


# -- lexicon growth ----------------------------------------------------------------


def _phrase(text: str) -> tuple[str, ...]:
    return tuple(normalize_text(text).split())


def grow_with_bool_concept(lexicon: Lexicon, entry: BooleanConceptEntry) -> Lexicon:
    new = [
        LexEntry(_phrase(trigger), BOOL_CONCEPT, (entry.name,))
        for trigger in entry.trigger_utterances
        if _phrase(trigger)
    ]
    return lexicon.with_entries(new)


def grow_with_value_concept(lexicon: Lexicon, entry: ValueConceptEntry) -> Lexicon:
    new = [
        LexEntry(_phrase(trigger), VALUE_CONCEPT, (entry.name,))
        for trigger in entry.trigger_utterances
        if _phrase(trigger)
    ]
    return lexicon.with_entries(new)


def _find_slot(trigger: tuple[str, ...], value: tuple[str, ...]) -> tuple[int, int] | None:
    if not value or len(value) > len(trigger):
        return None
    for start in range(len(trigger) - len(value) + 1):
        if trigger[start: start + len(value)] == value:
            return start, start + len(value)
    return None


def grow_with_procedure(lexicon: Lexicon, entry: ProcedureEntry) -> Lexicon:
    new: list[LexEntry] = []
    defaults: tuple[str, ...] = ()
    for parameter in entry.script.parameters:
        defaults += (parameter.name, parameter.recorded_value)
    for trigger in entry.trigger_utterances:
        phrase = _phrase(trigger)
        if not phrase:
            continue
        # the fillable slot: longest recorded-value occurrence wins, later
        # parameters break ties (the deepest selection is the task object)
        slot, slot_param = None, ""
        for parameter in entry.script.parameters:
            found = _find_slot(phrase, _phrase(parameter.recorded_value))
            if found is not None and (
                slot is None or found[1] - found[0] >= slot[1] - slot[0]
            ):
                slot, slot_param = found, parameter.name
        if slot is None:
            new.append(LexEntry(phrase, PROCEDURE, (entry.name, "", "", "") + defaults))
        else:
            new.append(
                LexEntry(
                    phrase,
                    PROCEDURE,
                    (entry.name, slot_param, str(slot[0]), str(slot[1])) + defaults,
                )
            )
    for parameter in entry.script.parameters:
        for value in (parameter.recorded_value,) + parameter.alternatives:
            phrase = _phrase(value)
            if phrase:
                new.append(
                    LexEntry(phrase, PROCEDURE_ARG, (entry.name, parameter.name, value))
                )
    return lexicon.with_entries(new)


def grow_with_screen_labels(lexicon: Lexicon, labels) -> Lexicon:
    new = [
        LexEntry(_phrase(label), SCREEN_LABEL, (label,))
        for label in labels
        if _phrase(label)
    ]
    return lexicon.with_entries(new)
