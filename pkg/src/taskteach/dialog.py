"""The teaching-session state machine.

Holes in the current rule are resolved depth-first: each one becomes a
resolution frame that asks the matching question, recurses into any new
concepts the answer introduces, and on completion stores the finished
definition in the knowledge base, replacing the hole with a reference to
it.  The machine also owns else-prompting, reuse confirmation across
contexts, comparison-operator disambiguation, and undo.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

from . import demo, dsl, kb as kbmod, parser
from .dsl import ScriptExpr
from .kb import BoolVariant, KnowledgeBase, ProcedureEntry, RuleEntry, ValueVariant
from .parser import Lexicon, ParseCandidate
from .screenworld import HOME_APP, World

AWAITING_COMMAND = "AwaitingCommand"
AWAITING_EXPLANATION = "AwaitingExplanation"
AWAITING_DEMONSTRATION = "AwaitingDemonstration"
AWAITING_ELSE = "AwaitingElse"
AWAITING_REUSE = "AwaitingReuseDecision"
AWAITING_DISAMBIGUATION = "AwaitingDisambiguation"
AWAITING_CONFIRMATION = "AwaitingConfirmation"
DONE = "Done"

DECLINE_WORDS = frozenset({"nothing", "no", "skip"})
YES_WORDS = frozenset({"yes", "yeah", "yep", "sure", "correct"})
NO_WORDS = frozenset({"no", "nope"})

_OP_WORDS = {"GT": "greater than", "LT": "less than", "EQ": "equal to"}
_OP_NEGATION = {"GT": "not above", "LT": "not below", "EQ": "not equal to"}
_COPULAS = frozenset({"is", "are", "was", "were"})

UNDO_DEPTH = 50


class IllegalInputForPhase(ValueError):
    pass


class NothingToUndo(ValueError):
    pass


# -- agent output ----------------------------------------------------------------

TEMPLATES = {
    "greeting": "Hi! Teach me a rule, for example: if it's hot, order a cup of iced cappuccino.",
    "ask_rephrase": "I didn't understand that. Could you rephrase?",
    "ask_bool_concept": "How do I know whether {0}?",
    "ask_value_concept": "How do I find out the value of {0}?",
    "ask_procedure": "How do I {0}?",
    "prompt_demonstration_value": "Please demonstrate how to find out the value of {0}. I'm watching from the home screen.",
    "prompt_demonstration_procedure": "Please demonstrate how to {0}. I'm watching from the home screen.",
    "ask_select_value": "Please long-press the value on the screen to select it.",
    "ask_else": "What should I do if {0}?",
    "ask_reuse_bool": "I already know how to tell whether it is {0} when determining whether to {1}. Is it the same here when determining whether to {2}?",
    "ask_reuse_value": "I already know how to find out the value for {0} using {1}. Should I use that for determining whether {2}?",
    "ask_disambiguation": "I understand you are trying to compare the value concept '{0}' and the value '{1}', should '{0}' be {2} '{1}'?",
    "ask_explain_in_words": "I can only learn a condition from words. How do I know whether {0}?",
    "ask_demo_or_known": "I don't know how to {0} yet. Say \"I can demonstrate\" to show me.",
    "demo_nothing_recorded": "I didn't see any actions yet. Please demonstrate, or say undo.",
    "confirm_learned_bool": "OK, I learned that {0} means: {1}.",
    "confirm_learned_value": "OK, I learned how to find out the value of {0} from {1}.",
    "confirm_learned_procedure": "OK, I learned how to {0}. I can replay it with different choices.",
    "confirm_constant": "OK, I'll use {0}.",
    "reuse_accepted": "OK, I'll use the same definition of {0} here.",
    "confirm_rule": "Here is the rule I learned: {0}. Should I save it?",
    "rule_saved": "Saved as {0}. You can run it or teach me another rule.",
    "rule_discarded": "Okay, I discarded that rule. What should we do instead?",
    "undone": "Okay, I took that back.",
    "nothing_to_undo": "There is nothing to undo yet.",
    "error": "Sorry, something went wrong: {0}",
}


@dataclass(frozen=True)
class AgentMove:
    template_id: str
    args: tuple[str, ...] = ()
    options: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return TEMPLATES[self.template_id].format(*self.args)


def move(template_id: str, *args: str, options: tuple[str, ...] = ()) -> AgentMove:
    return AgentMove(template_id, tuple(args), options)


# -- user input -------------------------------------------------------------------


@dataclass(frozen=True)
class TextTurn:
    text: str


@dataclass(frozen=True)
class OptionTurn:
    choice: str


@dataclass(frozen=True)
class DemoDoneTurn:
    selected_object_id: str | None = None


UserTurn = TextTurn | OptionTurn | DemoDoneTurn


# -- dialog state -----------------------------------------------------------------

HOLE_BOOL = "hole_bool"
HOLE_VALUE = "hole_value"
HOLE_PROC = "hole_proc"
REDEFINE_BOOL = "redefine_bool"
REDEFINE_VALUE = "redefine_value"


@dataclass
class ResolutionFrame:
    kind: str
    hole_path: dsl.Path
    concept_name: str
    span: str
    definition: ScriptExpr | None = None
    resolved_ref: str | None = None  # value frame answered with a known concept
    original_op: str | None = None  # preserved across redefinition
    expected_dimension: str | None = None

    @property
    def hole_type(self) -> str:
        if self.kind in (HOLE_BOOL, REDEFINE_BOOL):
            return dsl.BOOL
        if self.kind in (HOLE_VALUE, REDEFINE_VALUE):
            return dsl.VALUE
        return dsl.PROC


@dataclass
class PendingReuse:
    kind: str  # bool | value
    name: str
    path: dsl.Path | None  # location of the reference, None for a value frame


@dataclass
class PendingDisambiguation:
    origin: str  # command | explanation
    candidate: ParseCandidate
    flag: parser.AmbiguousNode
    utterance: str


@dataclass
class DialogState:
    phase: str = AWAITING_COMMAND
    frame_stack: list[ResolutionFrame] = field(default_factory=list)
    root_expr: ScriptExpr | None = None
    pending_question: AgentMove | None = None
    pending_options: tuple[str, ...] = ()
    command_utterance: str = ""
    context_label: str = ""
    else_state: str = "none"  # none | given | declined
    pending_reuse: PendingReuse | None = None
    pending_disambiguation: PendingDisambiguation | None = None


@dataclass
class TranscriptRecord:
    turn_index: int
    speaker: str  # user | agent
    text: str
    phase: str
    retracted: bool = False
    template_id: str = ""
    args: tuple[str, ...] = ()


@dataclass
class Snapshot:
    state: DialogState
    kb: KnowledgeBase
    lexicon: Lexicon
    transcript_length: int


def _content_name(span: str) -> str:
    tokens = [t for t in span.split() if t not in parser.STOPWORDS]
    return " ".join(tokens) if tokens else span


def negate_condition(cond: ScriptExpr, knowledge: KnowledgeBase) -> str:
    """Phrase the else question's condition: "it's hot" -> "it's not hot"."""
    if isinstance(cond, dsl.BoolConceptRef):
        entry = knowledge.bool_concepts.get(cond.name)
        phrase = entry.trigger_utterances[0] if entry else cond.name
        tokens = phrase.split()
        for index, token in enumerate(tokens):
            if token in _COPULAS or token.endswith("'s"):
                return " ".join(tokens[: index + 1] + ["not"] + tokens[index + 1:])
        return "not " + phrase
    if isinstance(cond, dsl.BoolComparison):
        lhs = _describe_value(cond.lhs)
        rhs = _describe_value(cond.rhs)
        return f"{lhs} is {_OP_NEGATION[cond.op]} {rhs}"
    return "the condition does not hold"


def _describe_value(expr: ScriptExpr) -> str:
    if isinstance(expr, dsl.ValueConceptRef):
        return expr.name
    if isinstance(expr, dsl.ValueConstant):
        return expr.value.render()
    if isinstance(expr, dsl.ResolveValue):
        return expr.span
    return dsl.render(expr)


def _top_comparison_op(expr: ScriptExpr) -> str | None:
    if isinstance(expr, dsl.BoolComparison):
        return expr.op
    return None


def _force_operator(expr: ScriptExpr, op: str | None) -> ScriptExpr:
    if op is None:
        return expr
    if isinstance(expr, dsl.BoolComparison) and expr.op != op:
        return dsl.BoolComparison(expr.lhs, op, expr.rhs)
    return expr


class TeachingSession:
    """One user's teaching conversation against one simulated phone."""

    def __init__(self, world: World, knowledge: KnowledgeBase, lexicon: Lexicon):
        self.world = world
        self.kb = knowledge
        self.lexicon = lexicon
        for entry in knowledge.bool_concepts.values():
            self.lexicon = parser.grow_with_bool_concept(self.lexicon, entry)
        for entry in knowledge.value_concepts.values():
            self.lexicon = parser.grow_with_value_concept(self.lexicon, entry)
        for entry in knowledge.procedures.values():
            self.lexicon = parser.grow_with_procedure(self.lexicon, entry)
        self.state = DialogState()
        self.undo_stack: list[Snapshot] = []
        self.transcript: list[TranscriptRecord] = []
        self.turn_index = 0
        self.last_rule_name: str | None = None
        self._log_agent([move("greeting")])

    # -- logging / undo ---------------------------------------------------------

    def _log_agent(self, moves: list[AgentMove]) -> None:
        for m in moves:
            self.transcript.append(
                TranscriptRecord(
                    self.turn_index, "agent", m.text, self.state.phase,
                    template_id=m.template_id, args=m.args,
                )
            )

    def _log_user(self, text: str) -> None:
        self.transcript.append(
            TranscriptRecord(self.turn_index, "user", text, self.state.phase)
        )

    def _push_snapshot(self) -> None:
        self.undo_stack.append(
            Snapshot(
                copy.deepcopy(self.state),
                self.kb.clone(),
                self.lexicon,
                len(self.transcript),
            )
        )
        if len(self.undo_stack) > UNDO_DEPTH:
            self.undo_stack.pop(0)

    def undo(self) -> list[AgentMove]:
        if not self.undo_stack:
            return [move("nothing_to_undo")]
        snapshot = self.undo_stack.pop()
        for record in self.transcript[snapshot.transcript_length:]:
            record.retracted = True
        self.state = snapshot.state
        self.kb = snapshot.kb
        self.lexicon = snapshot.lexicon
        demo.cancel_recording(self.world)
        moves = [move("undone")]
        if self.state.phase == AWAITING_DEMONSTRATION:
            self._restart_recording()
        if self.state.pending_question is not None:
            moves.append(self.state.pending_question)
        return moves

    def _restart_recording(self) -> None:
        frame = self.state.frame_stack[-1]
        if frame.hole_type == dsl.PROC:
            demo.start_recording(self.world, "procedure", goal_utterance=frame.span)
        else:
            demo.start_recording(
                self.world, "valueQuery",
                concept_name=frame.concept_name,
                expected_dimension=frame.expected_dimension,
            )

    # -- turn handling ------------------------------------------------------------

    def handle_turn(self, turn: UserTurn) -> list[AgentMove]:
        if isinstance(turn, TextTurn) and parser.normalize_text(turn.text) == "undo":
            self._log_user(turn.text)
            moves = self.undo()
            self._log_agent(moves)
            return moves
        self.turn_index += 1
        self._push_snapshot()
        if isinstance(turn, TextTurn):
            self._log_user(turn.text)
        elif isinstance(turn, OptionTurn):
            self._log_user(turn.choice)
        else:
            self._log_user(f"<demonstration finished: {turn.selected_object_id or 'no selection'}>")
        try:
            moves = self._dispatch(turn)
        except IllegalInputForPhase as exc:
            moves = [move("error", str(exc))]
        self._set_pending(moves)
        self._log_agent(moves)
        return moves

    def _set_pending(self, moves: list[AgentMove]) -> None:
        for m in reversed(moves):
            if m.template_id.startswith(("ask_", "prompt_", "confirm_rule")):
                self.state.pending_question = m
                self.state.pending_options = m.options
                return

    def _dispatch(self, turn: UserTurn) -> list[AgentMove]:
        phase = self.state.phase
        if phase in (AWAITING_COMMAND, DONE):
            return self._on_command(self._expect_text(turn))
        if phase == AWAITING_EXPLANATION:
            return self._on_explanation(self._expect_text(turn))
        if phase == AWAITING_DEMONSTRATION:
            if not isinstance(turn, DemoDoneTurn):
                raise IllegalInputForPhase("finish the demonstration first (or say undo)")
            return self._on_demo_done(turn)
        if phase == AWAITING_ELSE:
            return self._on_else(self._expect_text(turn))
        if phase == AWAITING_REUSE:
            return self._on_reuse(self._expect_choice(turn))
        if phase == AWAITING_DISAMBIGUATION:
            return self._on_disambiguation(self._expect_choice(turn))
        if phase == AWAITING_CONFIRMATION:
            return self._on_confirmation(self._expect_choice(turn))
        raise IllegalInputForPhase(f"unexpected phase {phase}")

    def _expect_text(self, turn: UserTurn) -> str:
        if isinstance(turn, TextTurn):
            return turn.text
        if isinstance(turn, OptionTurn):
            return turn.choice
        raise IllegalInputForPhase("expected a text answer")

    def _expect_choice(self, turn: UserTurn) -> str:
        if isinstance(turn, (TextTurn, OptionTurn)):
            raw = turn.text if isinstance(turn, TextTurn) else turn.choice
            return parser.normalize_text(raw)
        raise IllegalInputForPhase("expected one of the offered options")

    # -- phases ---------------------------------------------------------------------

    def _on_command(self, text: str) -> list[AgentMove]:
        normalized = parser.normalize_text(text)
        if not normalized or normalized in YES_WORDS | NO_WORDS | DECLINE_WORDS:
            return [move("ask_rephrase")]
        if self.state.phase == DONE:
            self.state = replace(
                DialogState(), phase=AWAITING_COMMAND
            )
        try:
            candidates = parser.parse_command(text, self.lexicon)
        except parser.NoParse:
            return [move("ask_rephrase")]
        top = candidates[0]
        operator_flag = self._operator_flag(top)
        if operator_flag is not None:
            self.state.pending_disambiguation = PendingDisambiguation(
                "command", top, operator_flag, text
            )
            self.state.phase = AWAITING_DISAMBIGUATION
            return [self._disambiguation_question(operator_flag)]
        return self._accept_command(top.expr, text)

    def _operator_flag(self, candidate: ParseCandidate) -> parser.AmbiguousNode | None:
        for flag in candidate.ambiguous_nodes:
            if flag.kind == "operator":
                return flag
        return None

    def _disambiguation_question(self, flag: parser.AmbiguousNode) -> AgentMove:
        comparison = flag.alternatives[0]
        assert isinstance(comparison, dsl.BoolComparison)
        lhs = _describe_value(comparison.lhs)
        rhs = _describe_value(comparison.rhs)
        ops = [comp.op for comp in flag.alternatives]  # already in GT, LT, EQ order
        options = tuple(_OP_WORDS[op] for op in ops)
        wording = ", or ".join(options)
        return move("ask_disambiguation", lhs, rhs, wording, options=options)

    def _accept_command(self, expr: ScriptExpr, utterance: str) -> list[AgentMove]:
        self.state.root_expr = expr
        self.state.command_utterance = utterance
        self.state.else_state = "none"
        self.state.context_label = self._derive_context(expr, utterance)
        self.state.phase = AWAITING_COMMAND  # advanced below
        return self._advance()

    def _derive_context(self, expr: ScriptExpr, utterance: str) -> str:
        if isinstance(expr, dsl.Conditional):
            return self._describe_action(expr.then_branch)
        return parser.normalize_text(utterance)

    def _describe_action(self, expr: ScriptExpr) -> str:
        if isinstance(expr, dsl.ResolveProcedure):
            return expr.span
        if isinstance(expr, dsl.ProcedureCall):
            entry = self.kb.find_procedure(expr.procedure_name)
            if entry is not None and entry.trigger_utterances:
                return self._instantiate_trigger(entry, expr.bindings())
        return dsl.render(expr)

    def _instantiate_trigger(self, entry: ProcedureEntry, bindings: dict[str, str]) -> str:
        phrase = list(parser.normalize_text(entry.trigger_utterances[0]).split())
        for parameter in entry.script.parameters:
            recorded = parser.normalize_text(parameter.recorded_value).split()
            slot = parser._find_slot(tuple(phrase), tuple(recorded))
            bound = bindings.get(parameter.name)
            if slot is not None and bound is not None:
                phrase[slot[0]: slot[1]] = parser.normalize_text(bound).split()
        return " ".join(phrase)

    # -- the resolution driver --------------------------------------------------------

    def _container(self) -> ScriptExpr | None:
        for frame in reversed(self.state.frame_stack):
            if frame.definition is not None:
                return frame.definition
        return self.state.root_expr

    def _substitute_in_container(self, path: dsl.Path, replacement: ScriptExpr) -> None:
        for frame in reversed(self.state.frame_stack):
            if frame.definition is not None:
                frame.definition = dsl.substitute(frame.definition, path, replacement)
                return
        assert self.state.root_expr is not None
        self.state.root_expr = dsl.substitute(self.state.root_expr, path, replacement)

    def _advance(self) -> list[AgentMove]:
        moves: list[AgentMove] = []
        while True:
            if self.state.frame_stack:
                frame = self.state.frame_stack[-1]
                if frame.resolved_ref is not None:
                    done = self._try_resolve_value_ref(frame, moves)
                    if done:
                        continue
                    return moves
                if frame.definition is None:
                    return moves  # waiting on the user
                pending = self._first_pending(frame.definition)
                if pending is None:
                    self._finalize_bool_frame(frame, moves)
                    continue
                if self._handle_pending(pending, moves):
                    continue
                return moves
            if self.state.root_expr is None:
                self.state.phase = AWAITING_COMMAND
                return moves
            pending = self._first_pending(self.state.root_expr)
            if pending is not None:
                if self._handle_pending(pending, moves):
                    continue
                return moves
            root = self.state.root_expr
            if (
                isinstance(root, dsl.Conditional)
                and root.else_branch is None
                and self.state.else_state == "none"
            ):
                self.state.phase = AWAITING_ELSE
                moves.append(move("ask_else", negate_condition(root.cond, self.kb)))
                return moves
            self.state.phase = AWAITING_CONFIRMATION
            moves.append(
                move("confirm_rule", self._summarize_rule(root), options=("yes", "no"))
            )
            return moves

    @dataclass
    class _Pending:
        hole: dsl.Hole | None = None
        reuse: PendingReuse | None = None

    def _first_pending(self, expr: ScriptExpr) -> "TeachingSession._Pending | None":
        context = self.state.context_label

        def walk(node: ScriptExpr, path: dsl.Path):
            if dsl.is_hole(node):
                holes = dsl.list_holes(node)
                return TeachingSession._Pending(
                    hole=dsl.Hole(path, holes[0].hole_type, holes[0].span)
                )
            if isinstance(node, dsl.BoolConceptRef):
                _, needed = self.kb.resolve_bool_in_context(node.name, context)
                if needed:
                    return TeachingSession._Pending(
                        reuse=PendingReuse("bool", node.name, path)
                    )
            if isinstance(node, dsl.ValueConceptRef):
                _, needed = self.kb.resolve_value_in_context(node.name, context)
                if needed:
                    return TeachingSession._Pending(
                        reuse=PendingReuse("value", node.name, path)
                    )
            for slot, child in dsl.children(node):
                found = walk(child, path + (slot,))
                if found is not None:
                    return found
            return None

        return walk(expr, ())

    def _handle_pending(self, pending: "TeachingSession._Pending",
                        moves: list[AgentMove]) -> bool:
        """Ask about the pending item; returns False (the loop must wait)."""
        if pending.hole is not None:
            self._push_frame_for_hole(pending.hole, moves)
            return False
        assert pending.reuse is not None
        self.state.pending_reuse = pending.reuse
        self.state.phase = AWAITING_REUSE
        moves.append(self._reuse_question(pending.reuse))
        return False

    def _push_frame_for_hole(self, hole: dsl.Hole, moves: list[AgentMove]) -> None:
        name = _content_name(hole.span)
        if hole.hole_type == dsl.BOOL:
            kind = HOLE_BOOL
        elif hole.hole_type == dsl.VALUE:
            kind = HOLE_VALUE
        else:
            kind = HOLE_PROC
        frame = ResolutionFrame(
            kind=kind,
            hole_path=hole.path,
            concept_name=name,
            span=hole.span,
            expected_dimension=self._infer_dimension(hole.path),
        )
        self.state.frame_stack.append(frame)
        self.state.phase = AWAITING_EXPLANATION
        if kind == HOLE_BOOL:
            moves.append(move("ask_bool_concept", hole.span))
        elif kind == HOLE_VALUE:
            moves.append(move("ask_value_concept", name))
        else:
            moves.append(move("ask_procedure", hole.span))

    def _infer_dimension(self, hole_path: dsl.Path) -> str | None:
        container = self._container()
        if container is None or not hole_path:
            return None
        try:
            parent = dsl.node_at(container, hole_path[:-1])
        except dsl.PathNotFound:
            return None
        if not isinstance(parent, dsl.BoolComparison):
            return None
        other = parent.rhs if hole_path[-1] == "lhs" else parent.lhs
        if isinstance(other, dsl.ValueConstant):
            return other.value.dimension
        if isinstance(other, dsl.ValueConceptRef):
            entry = self.kb.value_concepts.get(other.name)
            if entry is not None and entry.variants:
                return entry.variants[0].dimension()
        return None

    def _reuse_question(self, pending: PendingReuse) -> AgentMove:
        context = self.state.context_label
        if pending.kind == "bool":
            variant, _ = self.kb.resolve_bool_in_context(pending.name, context)
            return move(
                "ask_reuse_bool", pending.name, variant.context_label, context,
                options=("yes", "no"),
            )
        variant, _ = self.kb.resolve_value_in_context(pending.name, context)
        return move(
            "ask_reuse_value",
            pending.name,
            self._describe_value_source(variant),
            self._describe_reuse_target(),
            options=("yes", "no"),
        )

    def _describe_value_source(self, variant: ValueVariant) -> str:
        if variant.constant is not None:
            return f"the constant {variant.constant.render()}"
        for recorded in reversed(variant.query.navigation_actions):
            if recorded.action.kind == "launchApp":
                return f"the {recorded.action.app_name} app"
            icon = recorded.action.object_id or ""
            if recorded.app_name == HOME_APP and icon.startswith("icon_"):
                return f"the {icon[len('icon_'):]} app"
            if recorded.app_name != HOME_APP:
                return f"the {recorded.app_name} app"
        return "a demonstrated query"

    def _describe_reuse_target(self) -> str:
        for frame in reversed(self.state.frame_stack):
            if frame.hole_type == dsl.BOOL:
                return f"it is {frame.concept_name}"
        return f"to {self.state.context_label}"

    # -- explanations ----------------------------------------------------------------

    def _on_explanation(self, text: str) -> list[AgentMove]:
        frame = self.state.frame_stack[-1]
        if frame.hole_type == dsl.BOOL:
            return self._explain_bool(frame, text)
        if frame.hole_type == dsl.VALUE:
            return self._explain_value(frame, text)
        return self._explain_proc(frame, text)

    def _explain_bool(self, frame: ResolutionFrame, text: str) -> list[AgentMove]:
        if parser.is_demonstration_offer(text):
            return [move("ask_explain_in_words", frame.span)]
        try:
            candidates = parser.parse_boolean_explanation(text, self.lexicon)
        except parser.NoParse:
            return [move("ask_rephrase")]
        top = candidates[0]
        flag = self._operator_flag(top)
        if flag is not None:
            self.state.pending_disambiguation = PendingDisambiguation(
                "explanation", top, flag, text
            )
            self.state.phase = AWAITING_DISAMBIGUATION
            return [self._disambiguation_question(flag)]
        return self._apply_bool_explanation(frame, top.expr)

    def _apply_bool_explanation(self, frame: ResolutionFrame, expr: ScriptExpr
                                ) -> list[AgentMove]:
        if isinstance(expr, dsl.BoolConceptRef) and expr.name == frame.concept_name:
            return [move("ask_rephrase")]  # a concept cannot define itself
        frame.definition = _force_operator(expr, frame.original_op)
        self.state.phase = AWAITING_EXPLANATION
        return self._advance()

    def _explain_value(self, frame: ResolutionFrame, text: str) -> list[AgentMove]:
        result = parser.parse_value_explanation(text, self.lexicon)
        if isinstance(result, parser.DemonstrationRequested):
            demo.start_recording(
                self.world, "valueQuery",
                concept_name=frame.concept_name,
                expected_dimension=frame.expected_dimension,
            )
            self.state.phase = AWAITING_DEMONSTRATION
            return [move("prompt_demonstration_value", frame.concept_name)]
        top = result[0]
        if isinstance(top.expr, dsl.ValueConstant):
            moves = [move("confirm_constant", top.expr.value.render())]
            self._complete_value_frame(frame, top.expr)
            return moves + self._advance()
        if isinstance(top.expr, dsl.ValueConceptRef):
            frame.resolved_ref = top.expr.name
            return self._advance()
        if isinstance(top.expr, dsl.ResolveValue):
            # the explanation names another unknown value: chase it instead
            frame.span = top.expr.span
            frame.concept_name = _content_name(top.expr.span)
            return [move("ask_value_concept", frame.concept_name)]
        return [move("ask_rephrase")]

    def _try_resolve_value_ref(self, frame: ResolutionFrame, moves: list[AgentMove]) -> bool:
        """Returns True when the frame was resolved and popped."""
        name = frame.resolved_ref
        assert name is not None
        _, needed = self.kb.resolve_value_in_context(name, self.state.context_label)
        if needed:
            self.state.pending_reuse = PendingReuse("value", name, None)
            self.state.phase = AWAITING_REUSE
            moves.append(self._reuse_question(self.state.pending_reuse))
            return False
        self.state.frame_stack.pop()
        self._substitute_in_container(frame.hole_path, dsl.ValueConceptRef(name))
        return True

    def _explain_proc(self, frame: ResolutionFrame, text: str) -> list[AgentMove]:
        if parser.is_demonstration_offer(text):
            demo.start_recording(self.world, "procedure", goal_utterance=frame.span)
            self.state.phase = AWAITING_DEMONSTRATION
            return [move("prompt_demonstration_procedure", frame.span)]
        try:
            candidates = parser.parse_command(text, self.lexicon)
        except parser.NoParse:
            return [move("ask_demo_or_known", frame.span)]
        top = candidates[0]
        if isinstance(top.expr, dsl.ProcedureCall):
            self.state.frame_stack.pop()
            self._substitute_in_container(frame.hole_path, top.expr)
            return self._advance()
        return [move("ask_demo_or_known", frame.span)]

    # -- demonstrations -----------------------------------------------------------------

    def _on_demo_done(self, turn: DemoDoneTurn) -> list[AgentMove]:
        frame = self.state.frame_stack[-1]
        session = self.world.recorder
        if session is None:
            raise IllegalInputForPhase("no demonstration in progress")
        if frame.hole_type == dsl.PROC:
            try:
                script = demo.finish_procedure_recording(session, self.world)
            except demo.EmptyRecording:
                self._restart_recording()
                return [move("demo_nothing_recorded")]
            entry = ProcedureEntry(
                script.name, script.trigger_utterances, script
            )
            self.kb.store_procedure(entry)
            self.lexicon = parser.grow_with_procedure(self.lexicon, entry)
            self.lexicon = parser.grow_with_screen_labels(
                self.lexicon, session.screen_labels()
            )
            bindings = {p.name: p.recorded_value for p in script.parameters}
            call = dsl.ProcedureCall(script.name, tuple(sorted(bindings.items())))
            moves = [move("confirm_learned_procedure", frame.span)]
            self.state.frame_stack.pop()
            self._substitute_in_container(frame.hole_path, call)
            self.state.phase = AWAITING_EXPLANATION
            return moves + self._advance()
        # value query
        if turn.selected_object_id is None or session.selected is None:
            return [move("ask_select_value")]
        try:
            query = demo.finish_value_query_recording(
                session, self.world, turn.selected_object_id
            )
        except demo.EmptyRecording:
            self._restart_recording()
            return [move("ask_select_value")]
        variant = ValueVariant(self.state.context_label, query=query)
        entry = self.kb.store_value_concept(
            frame.concept_name, (frame.span, frame.concept_name), variant
        )
        self.lexicon = parser.grow_with_value_concept(self.lexicon, entry)
        self.lexicon = parser.grow_with_screen_labels(
            self.lexicon, session.screen_labels()
        )
        moves = [
            move(
                "confirm_learned_value",
                frame.concept_name,
                self._describe_value_source(variant),
            )
        ]
        self._complete_value_frame(frame, dsl.ValueConceptRef(frame.concept_name))
        return moves + self._advance()

    def _complete_value_frame(self, frame: ResolutionFrame, replacement: ScriptExpr) -> None:
        self.state.frame_stack.pop()
        if frame.kind != REDEFINE_VALUE:
            self._substitute_in_container(frame.hole_path, replacement)
        self.state.phase = AWAITING_EXPLANATION

    def _finalize_bool_frame(self, frame: ResolutionFrame, moves: list[AgentMove]) -> None:
        assert frame.definition is not None
        variant = BoolVariant(self.state.context_label, frame.definition)
        entry = self.kb.store_bool_concept(
            frame.concept_name, (frame.span, frame.concept_name), variant
        )
        self.lexicon = parser.grow_with_bool_concept(self.lexicon, entry)
        moves.append(
            move(
                "confirm_learned_bool", frame.concept_name, dsl.render(frame.definition)
            )
        )
        self.state.frame_stack.pop()
        if frame.kind != REDEFINE_BOOL:
            self._substitute_in_container(
                frame.hole_path, dsl.BoolConceptRef(frame.concept_name)
            )
        self.state.phase = AWAITING_EXPLANATION

    # -- else, reuse, disambiguation, confirmation ----------------------------------------

    def _on_else(self, text: str) -> list[AgentMove]:
        normalized = parser.normalize_text(text)
        if normalized in DECLINE_WORDS:
            self.state.else_state = "declined"
            return self._advance()
        try:
            candidates = parser.parse_command(text, self.lexicon)
        except parser.NoParse:
            return [move("ask_rephrase")]
        top = candidates[0].expr
        if isinstance(top, dsl.Conditional):
            top = top.then_branch  # "otherwise order X" style answers
        root = self.state.root_expr
        assert isinstance(root, dsl.Conditional)
        self.state.root_expr = dsl.Conditional(root.cond, root.then_branch, top)
        self.state.else_state = "given"
        return self._advance()

    def _on_reuse(self, choice: str) -> list[AgentMove]:
        pending = self.state.pending_reuse
        if pending is None:
            raise IllegalInputForPhase("no reuse question pending")
        if choice in YES_WORDS:
            self.state.pending_reuse = None
            context = self.state.context_label
            if pending.kind == "bool":
                variant, _ = self.kb.resolve_bool_in_context(pending.name, context)
                entry = self.kb.store_bool_concept(
                    pending.name, (), BoolVariant(context, variant.expression)
                )
            else:
                variant, _ = self.kb.resolve_value_in_context(pending.name, context)
                entry = self.kb.store_value_concept(
                    pending.name, (), ValueVariant(context, variant.query, variant.constant)
                )
            self.state.phase = AWAITING_EXPLANATION
            return [move("reuse_accepted", pending.name)] + self._advance()
        if choice in NO_WORDS:
            self.state.pending_reuse = None
            context = self.state.context_label
            if pending.kind == "bool":
                variant, _ = self.kb.resolve_bool_in_context(pending.name, context)
                frame = ResolutionFrame(
                    kind=REDEFINE_BOOL,
                    hole_path=pending.path or (),
                    concept_name=pending.name,
                    span=pending.name,
                    original_op=_top_comparison_op(variant.expression),
                )
                self.state.frame_stack.append(frame)
                self.state.phase = AWAITING_EXPLANATION
                return [move("ask_bool_concept", pending.name)]
            variant, _ = self.kb.resolve_value_in_context(pending.name, context)
            frame = ResolutionFrame(
                kind=REDEFINE_VALUE,
                hole_path=pending.path or (),
                concept_name=pending.name,
                span=pending.name,
                expected_dimension=variant.dimension(),
            )
            self.state.frame_stack.append(frame)
            self.state.phase = AWAITING_EXPLANATION
            return [move("ask_value_concept", pending.name)]
        raise IllegalInputForPhase("please answer yes or no")

    def _on_disambiguation(self, choice: str) -> list[AgentMove]:
        pending = self.state.pending_disambiguation
        if pending is None:
            raise IllegalInputForPhase("no clarification pending")
        by_word = {_OP_WORDS[c.op]: c for c in pending.flag.alternatives}
        chosen = by_word.get(choice)
        if chosen is None:
            raise IllegalInputForPhase("please pick one of the offered comparisons")
        self.state.pending_disambiguation = None
        resolved = dsl.substitute(pending.candidate.expr, pending.flag.path, chosen)
        if pending.origin == "command":
            return self._accept_command(resolved, pending.utterance)
        frame = self.state.frame_stack[-1]
        self.state.phase = AWAITING_EXPLANATION
        return self._apply_bool_explanation(frame, resolved)

    def _on_confirmation(self, choice: str) -> list[AgentMove]:
        if choice in YES_WORDS:
            assert self.state.root_expr is not None
            name = f"rule_{len(self.kb.rules) + 1}"
            self.kb.store_rule(
                RuleEntry(
                    name,
                    self.state.command_utterance,
                    self.state.context_label,
                    self.state.root_expr,
                )
            )
            self.last_rule_name = name
            self.state.phase = DONE
            return [move("rule_saved", name)]
        if choice in NO_WORDS:
            self.state = DialogState()
            return [move("rule_discarded")]
        raise IllegalInputForPhase("please answer yes or no")

    def _summarize_rule(self, expr: ScriptExpr) -> str:
        return dsl.render(expr)
