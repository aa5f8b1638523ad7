"""The typed functional script language.

A script is a tree of immutable nodes.  Unknown parts are explicit holes
(`ResolveBool`, `ResolveValue`, `ResolveProcedure`) carrying the utterance
span they stand for; a script is executable only once it is hole-free.
Every expression has a canonical parenthesized text rendering that is
stable across runs and round-trips through `parse_expr`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from . import values
from .values import TypedValue, DimensionMismatch

# Static node types.
BOOL = "Bool"
VALUE = "Value"
PROC = "Proc"
SCRIPT = "Script"

OPERATORS = ("GT", "LT", "EQ")
_OP_SYMBOL = {"GT": ">", "LT": "<", "EQ": "="}
_SYMBOL_OP = {sym: op for op, sym in _OP_SYMBOL.items()}

Path = tuple[str, ...]


@dataclass(frozen=True)
class Conditional:
    cond: "ScriptExpr"
    then_branch: "ScriptExpr"
    else_branch: "ScriptExpr | None" = None


@dataclass(frozen=True)
class BoolComparison:
    lhs: "ScriptExpr"
    op: str
    rhs: "ScriptExpr"


@dataclass(frozen=True)
class BoolConceptRef:
    name: str


@dataclass(frozen=True)
class ValueConstant:
    value: TypedValue


@dataclass(frozen=True)
class ValueConceptRef:
    name: str


@dataclass(frozen=True)
class ProcedureCall:
    procedure_name: str
    argument_bindings: tuple[tuple[str, str], ...] = ()

    def bindings(self) -> dict[str, str]:
        return dict(self.argument_bindings)


@dataclass(frozen=True)
class ResolveBool:
    span: str


@dataclass(frozen=True)
class ResolveValue:
    span: str


@dataclass(frozen=True)
class ResolveProcedure:
    span: str


ScriptExpr = Union[
    Conditional,
    BoolComparison,
    BoolConceptRef,
    ValueConstant,
    ValueConceptRef,
    ProcedureCall,
    ResolveBool,
    ResolveValue,
    ResolveProcedure,
]

_HOLE_TYPES = {ResolveBool: BOOL, ResolveValue: VALUE, ResolveProcedure: PROC}


def proc_call(name: str, **bindings: str) -> ProcedureCall:
    return ProcedureCall(name, tuple(sorted(bindings.items())))


def static_type(expr: ScriptExpr) -> str:
    if isinstance(expr, Conditional):
        return SCRIPT
    if isinstance(expr, (BoolComparison, BoolConceptRef, ResolveBool)):
        return BOOL
    if isinstance(expr, (ValueConstant, ValueConceptRef, ResolveValue)):
        return VALUE
    if isinstance(expr, (ProcedureCall, ResolveProcedure)):
        return PROC
    raise TypeError(f"not a script expression: {expr!r}")


def is_hole(expr: ScriptExpr) -> bool:
    return isinstance(expr, (ResolveBool, ResolveValue, ResolveProcedure))


def children(expr: ScriptExpr) -> list[tuple[str, ScriptExpr]]:
    """Child slots in depth-first, left-to-right order."""
    if isinstance(expr, Conditional):
        slots = [("cond", expr.cond), ("then", expr.then_branch)]
        if expr.else_branch is not None:
            slots.append(("else", expr.else_branch))
        return slots
    if isinstance(expr, BoolComparison):
        return [("lhs", expr.lhs), ("rhs", expr.rhs)]
    return []


# Expected static type for each child slot.
_SLOT_TYPES = {"cond": BOOL, "then": PROC, "else": PROC, "lhs": VALUE, "rhs": VALUE}


@dataclass(frozen=True)
class TypeError_:
    path: Path
    expected: str
    actual: str


@dataclass(frozen=True)
class TypeReport:
    errors: tuple[TypeError_, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def typecheck(expr: ScriptExpr) -> TypeReport:
    """Verify that every child occupies a slot of its own static type."""
    errors: list[TypeError_] = []

    def walk(node: ScriptExpr, path: Path) -> None:
        if isinstance(node, BoolComparison) and node.op not in OPERATORS:
            errors.append(TypeError_(path, "GT|LT|EQ", repr(node.op)))
        if is_hole(node) and not node.span:
            errors.append(TypeError_(path, "non-empty span", "empty span"))
        for slot, child in children(node):
            actual = static_type(child)
            expected = _SLOT_TYPES[slot]
            if actual != expected:
                errors.append(TypeError_(path + (slot,), expected, actual))
            walk(child, path + (slot,))

    walk(expr, ())
    return TypeReport(tuple(errors))


@dataclass(frozen=True)
class Hole:
    path: Path
    hole_type: str
    span: str


def list_holes(expr: ScriptExpr) -> list[Hole]:
    """Holes in depth-first, left-to-right order: the dialog resolution order."""
    found: list[Hole] = []

    def walk(node: ScriptExpr, path: Path) -> None:
        if is_hole(node):
            found.append(Hole(path, _HOLE_TYPES[type(node)], node.span))
        for slot, child in children(node):
            walk(child, path + (slot,))

    walk(expr, ())
    return found


def node_at(expr: ScriptExpr, path: Path) -> ScriptExpr:
    node = expr
    for slot in path:
        for name, child in children(node):
            if name == slot:
                node = child
                break
        else:
            raise PathNotFound(f"no slot {slot!r} at {path!r}")
    return node


class PathNotFound(KeyError):
    pass


class PathNotAHole(ValueError):
    pass


class TypeMismatch(TypeError):
    pass


def substitute(expr: ScriptExpr, path: Path, replacement: ScriptExpr) -> ScriptExpr:
    """Replace the node at `path`, rebuilding only the spine above it."""
    if not path:
        return replacement
    slot, rest = path[0], path[1:]
    if isinstance(expr, Conditional):
        if slot == "cond":
            return Conditional(
                substitute(expr.cond, rest, replacement),
                expr.then_branch,
                expr.else_branch,
            )
        if slot == "then":
            return Conditional(
                expr.cond,
                substitute(expr.then_branch, rest, replacement),
                expr.else_branch,
            )
        if slot == "else" and expr.else_branch is not None:
            return Conditional(
                expr.cond,
                expr.then_branch,
                substitute(expr.else_branch, rest, replacement),
            )
    if isinstance(expr, BoolComparison):
        if slot == "lhs":
            return BoolComparison(substitute(expr.lhs, rest, replacement), expr.op, expr.rhs)
        if slot == "rhs":
            return BoolComparison(expr.lhs, expr.op, substitute(expr.rhs, rest, replacement))
    raise PathNotFound(f"no slot {slot!r} under {type(expr).__name__}")


def substitute_hole(expr: ScriptExpr, path: Path, replacement: ScriptExpr) -> ScriptExpr:
    """Fill one hole; the replacement must have the hole's type."""
    target = node_at(expr, path)
    if not is_hole(target):
        raise PathNotAHole(f"node at {path!r} is {type(target).__name__}, not a hole")
    expected = _HOLE_TYPES[type(target)]
    actual = static_type(replacement)
    if actual != expected:
        raise TypeMismatch(f"hole at {path!r} expects {expected}, got {actual}")
    return substitute(expr, path, replacement)


def is_executable(expr: ScriptExpr) -> bool:
    return not list_holes(expr)


# -- canonical text rendering -------------------------------------------------


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(expr: ScriptExpr) -> str:
    """Canonical parenthesized rendering, e.g.
    (if (> (value "temperature") (const 85 F)) (proc "order_Starbucks" (item "Iced Cappuccino")))
    """
    if isinstance(expr, Conditional):
        parts = ["if", render(expr.cond), render(expr.then_branch)]
        if expr.else_branch is not None:
            parts.append(render(expr.else_branch))
        return "(" + " ".join(parts) + ")"
    if isinstance(expr, BoolComparison):
        return f"({_OP_SYMBOL[expr.op]} {render(expr.lhs)} {render(expr.rhs)})"
    if isinstance(expr, BoolConceptRef):
        return f"(concept {_quote(expr.name)})"
    if isinstance(expr, ValueConstant):
        mag = values.canonical_magnitude_text(expr.value.magnitude)
        return f"(const {mag} {expr.value.unit})"
    if isinstance(expr, ValueConceptRef):
        return f"(value {_quote(expr.name)})"
    if isinstance(expr, ProcedureCall):
        parts = ["proc", _quote(expr.procedure_name)]
        for name, value in sorted(expr.argument_bindings):
            parts.append(f"({name} {_quote(value)})")
        return "(" + " ".join(parts) + ")"
    if isinstance(expr, ResolveBool):
        return f"(resolve_bool {_quote(expr.span)})"
    if isinstance(expr, ResolveValue):
        return f"(resolve_value {_quote(expr.span)})"
    if isinstance(expr, ResolveProcedure):
        return f"(resolve_proc {_quote(expr.span)})"
    raise TypeError(f"not a script expression: {expr!r}")


class ExprSyntaxError(ValueError):
    pass


def _tokenize_sexpr(text: str) -> Iterator[str]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise ExprSyntaxError("unterminated string")
            yield '"' + "".join(out)
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j]
            i = j


def _read(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise ExprSyntaxError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise ExprSyntaxError("missing closing paren")
        return items, pos + 1
    if tok == ")":
        raise ExprSyntaxError("unexpected )")
    return tok, pos + 1


def _build(item) -> ScriptExpr:
    if not isinstance(item, list) or not item:
        raise ExprSyntaxError(f"expected a form, got {item!r}")
    head = item[0]
    if head == "if":
        if len(item) not in (3, 4):
            raise ExprSyntaxError("if takes 2 or 3 arguments")
        else_branch = _build(item[3]) if len(item) == 4 else None
        return Conditional(_build(item[1]), _build(item[2]), else_branch)
    if head in _SYMBOL_OP:
        if len(item) != 3:
            raise ExprSyntaxError(f"{head} takes 2 arguments")
        return BoolComparison(_build(item[1]), _SYMBOL_OP[head], _build(item[2]))
    if head == "concept":
        return BoolConceptRef(_string(item[1]))
    if head == "value":
        return ValueConceptRef(_string(item[1]))
    if head == "const":
        if len(item) != 3:
            raise ExprSyntaxError("const takes magnitude and unit")
        unit = item[2]
        dimension = values.DIMENSION_OF_UNIT.get(unit)
        if dimension is None:
            raise ExprSyntaxError(f"unknown unit tag {unit!r}")
        return ValueConstant(TypedValue(float(item[1]), dimension, unit))
    if head == "proc":
        bindings = []
        for arg in item[2:]:
            if not isinstance(arg, list) or len(arg) != 2:
                raise ExprSyntaxError(f"bad argument binding {arg!r}")
            bindings.append((arg[0], _string(arg[1])))
        return ProcedureCall(_string(item[1]), tuple(sorted(bindings)))
    if head == "resolve_bool":
        return ResolveBool(_string(item[1]))
    if head == "resolve_value":
        return ResolveValue(_string(item[1]))
    if head == "resolve_proc":
        return ResolveProcedure(_string(item[1]))
    raise ExprSyntaxError(f"unknown form {head!r}")


def _string(item) -> str:
    if not isinstance(item, str) or not item.startswith('"'):
        raise ExprSyntaxError(f"expected a string, got {item!r}")
    return item[1:]


def parse_expr(text: str) -> ScriptExpr:
    """Parse the canonical rendering back into an expression tree."""
    tokens = list(_tokenize_sexpr(text))
    item, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ExprSyntaxError("trailing input after expression")
    return _build(item)


# -- evaluation ---------------------------------------------------------------


class EvaluationError(RuntimeError):
    pass


class UnknownConcept(EvaluationError):
    pass


class UnknownProcedure(EvaluationError):
    pass


class NotExecutable(EvaluationError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # branch | value | action
    label: str
    detail: str = ""


@dataclass
class ExecutionTrace:
    """Ordered record of every branch decision, value read, and action."""

    events: list[TraceEvent] = field(default_factory=list)

    def record_branch(self, which: str) -> None:
        self.events.append(TraceEvent("branch", which))

    def record_value(self, label: str, value: TypedValue) -> None:
        self.events.append(TraceEvent("value", label, value.render()))

    def record_action(self, label: str, detail: str) -> None:
        self.events.append(TraceEvent("action", label, detail))

    @property
    def branch(self) -> str | None:
        for event in self.events:
            if event.kind == "branch":
                return event.label
        return None

    def actions(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == "action"]

    def render(self) -> str:
        lines = [f"{e.kind}\t{e.label}\t{e.detail}" for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class ExecutionEnvironment:
    """Execution context: the simulated phone, the knowledge base, and the
    task phrase used to select per-context concept variants."""

    world: object
    knowledge_base: object
    context_label: str


def evaluate(expr: ScriptExpr, env: ExecutionEnvironment) -> ExecutionTrace:
    """Run a hole-free script against the environment and trace everything."""
    if not is_executable(expr):
        raise NotExecutable(f"script still has holes: {list_holes(expr)}")
    if isinstance(expr, Conditional) and not env.context_label:
        raise EvaluationError("context label required to execute a conditional")
    trace = ExecutionTrace()
    _exec(expr, env, trace, resolving=())
    return trace


def _exec(expr: ScriptExpr, env: ExecutionEnvironment, trace: ExecutionTrace,
          resolving: tuple[str, ...]) -> None:
    if isinstance(expr, Conditional):
        if _eval_bool(expr.cond, env, trace, resolving):
            trace.record_branch("then")
            _exec(expr.then_branch, env, trace, resolving)
        elif expr.else_branch is not None:
            trace.record_branch("else")
            _exec(expr.else_branch, env, trace, resolving)
        else:
            trace.record_branch("none")
        return
    if isinstance(expr, ProcedureCall):
        from . import demo  # local import keeps the module graph acyclic

        entry = env.knowledge_base.find_procedure(expr.procedure_name)
        if entry is None:
            raise UnknownProcedure(expr.procedure_name)
        demo.replay_procedure(entry.script, expr.bindings(), env.world, trace)
        return
    raise NotExecutable(f"{type(expr).__name__} is not a runnable script")


def _eval_bool(expr: ScriptExpr, env: ExecutionEnvironment, trace: ExecutionTrace,
               resolving: tuple[str, ...]) -> bool:
    if isinstance(expr, BoolComparison):
        lhs = _eval_value(expr.lhs, env, trace, resolving)
        rhs = _eval_value(expr.rhs, env, trace, resolving)
        return values.compare(expr.op, lhs, rhs)
    if isinstance(expr, BoolConceptRef):
        key = "bool:" + expr.name
        if key in resolving:
            raise UnknownConcept(f"circular definition of {expr.name!r}")
        variant = env.knowledge_base.bool_variant(expr.name, env.context_label)
        if variant is None:
            raise UnknownConcept(expr.name)
        return _eval_bool(variant.expression, env, trace, resolving + (key,))
    raise NotExecutable(f"{type(expr).__name__} is not a Boolean expression")


def _eval_value(expr: ScriptExpr, env: ExecutionEnvironment, trace: ExecutionTrace,
                resolving: tuple[str, ...]) -> TypedValue:
    if isinstance(expr, ValueConstant):
        trace.record_value("const", expr.value)
        return expr.value
    if isinstance(expr, ValueConceptRef):
        from . import demo

        key = "value:" + expr.name
        if key in resolving:
            raise UnknownConcept(f"circular definition of {expr.name!r}")
        variant = env.knowledge_base.value_variant(expr.name, env.context_label)
        if variant is None:
            raise UnknownConcept(expr.name)
        if variant.constant is not None:
            trace.record_value(expr.name, variant.constant)
            return variant.constant
        value = demo.replay_value_query(variant.query, env.world, trace)
        trace.record_value(expr.name, value)
        return value
    raise NotExecutable(f"{type(expr).__name__} is not a value expression")
