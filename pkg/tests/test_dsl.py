import pytest

from taskteach import dsl, values
from taskteach.dsl import (
    BoolComparison,
    BoolConceptRef,
    Conditional,
    ExecutionEnvironment,
    ProcedureCall,
    ResolveBool,
    ResolveProcedure,
    ResolveValue,
    ValueConceptRef,
    ValueConstant,
)

from conftest import COFFEE_CONTEXT, build_coffee_kb, make_world

OPEN_COFFEE_RULE = Conditional(
    ResolveBool("it's hot"), ResolveProcedure("order a cup of iced cappuccino")
)


def test_typecheck_accepts_open_coffee_rule():
    assert dsl.typecheck(OPEN_COFFEE_RULE).ok


def test_typecheck_flags_value_in_cond_slot():
    bad = Conditional(
        ValueConstant(values.temperature_f(85)), ResolveProcedure("order")
    )
    report = dsl.typecheck(bad)
    assert not report.ok
    assert report.errors[0].path == ("cond",)
    assert report.errors[0].expected == dsl.BOOL
    assert report.errors[0].actual == dsl.VALUE


def test_typecheck_accepts_comparison():
    expr = BoolComparison(
        ValueConceptRef("temperature"), "GT", ValueConstant(values.temperature_f(85))
    )
    assert dsl.typecheck(expr).ok


def test_list_holes_depth_first_order():
    holes = dsl.list_holes(OPEN_COFFEE_RULE)
    assert [(h.path, h.hole_type, h.span) for h in holes] == [
        (("cond",), dsl.BOOL, "it's hot"),
        (("then",), dsl.PROC, "order a cup of iced cappuccino"),
    ]


def test_list_holes_empty_for_closed_script():
    closed = Conditional(
        BoolConceptRef("hot"), dsl.proc_call("order_Starbucks", item="Iced Cappuccino")
    )
    assert dsl.list_holes(closed) == []


def test_two_value_holes_left_first():
    expr = BoolComparison(
        ResolveValue("price of a uber"), "GT", ResolveValue("price of a lyft")
    )
    holes = dsl.list_holes(expr)
    assert [h.span for h in holes] == ["price of a uber", "price of a lyft"]


def test_substitute_hole_replaces_cond():
    result = dsl.substitute_hole(OPEN_COFFEE_RULE, ("cond",), BoolConceptRef("hot"))
    assert result.cond == BoolConceptRef("hot")
    assert result.then_branch == OPEN_COFFEE_RULE.then_branch


def test_substitution_is_local():
    result = dsl.substitute_hole(OPEN_COFFEE_RULE, ("cond",), BoolConceptRef("hot"))
    assert result.then_branch is OPEN_COFFEE_RULE.then_branch  # untouched branch shared


def test_substitute_wrong_type():
    with pytest.raises(dsl.TypeMismatch):
        dsl.substitute_hole(OPEN_COFFEE_RULE, ("cond",), ResolveProcedure("order"))


def test_substitute_not_a_hole():
    closed = Conditional(BoolConceptRef("hot"), ResolveProcedure("order"))
    with pytest.raises(dsl.PathNotAHole):
        dsl.substitute_hole(closed, ("cond",), BoolConceptRef("cold"))


def test_substituted_hole_gone_from_hole_list():
    expr = BoolComparison(
        ResolveValue("temperature"), "GT", ResolveValue("threshold")
    )
    result = dsl.substitute_hole(expr, ("lhs",), ValueConceptRef("temperature"))
    remaining = dsl.list_holes(result)
    assert [h.path for h in remaining] == [("rhs",)]


def test_render_matches_canonical_form():
    expr = Conditional(
        BoolComparison(
            ValueConceptRef("temperature"), "GT", ValueConstant(values.temperature_f(85))
        ),
        dsl.proc_call("order_Starbucks", item="Iced Cappuccino"),
        dsl.proc_call("order_Starbucks", item="Hot Latte"),
    )
    assert dsl.render(expr) == (
        '(if (> (value "temperature") (const 85 F))'
        ' (proc "order_Starbucks" (item "Iced Cappuccino"))'
        ' (proc "order_Starbucks" (item "Hot Latte")))'
    )


def test_render_parse_round_trip():
    exprs = [
        OPEN_COFFEE_RULE,
        ValueConstant(values.money_usd(89.99)),
        BoolConceptRef('a "quoted" concept'),
        dsl.proc_call("p", x="1", item="Iced Cappuccino"),
        Conditional(BoolConceptRef("hot"), ProcedureCall("p"), None),
    ]
    for expr in exprs:
        assert dsl.parse_expr(dsl.render(expr)) == expr


def test_parse_is_whitespace_insensitive():
    text = '(if   (concept "hot")\n  (proc "p"))'
    assert dsl.parse_expr(text) == Conditional(BoolConceptRef("hot"), ProcedureCall("p"))


def test_parse_rejects_garbage():
    for bad in ["", "(if)", '(const 5 lightyear)', '(proc "p" junk)', "(unknown)"]:
        with pytest.raises(dsl.ExprSyntaxError):
            dsl.parse_expr(bad)


# -- evaluation ----------------------------------------------------------------


def hot_coffee_rule():
    return Conditional(
        BoolConceptRef("hot"),
        dsl.proc_call("order_Starbucks", item="Iced Cappuccino"),
        dsl.proc_call("order_Starbucks", item="Hot Latte"),
    )


@pytest.fixture(scope="module")
def coffee_kb(apps):
    return build_coffee_kb(apps)


def run_rule(apps, coffee_kb, temperature, rule=None):
    world = make_world(apps, **{"weather.temperature": temperature})
    env = ExecutionEnvironment(world, coffee_kb, COFFEE_CONTEXT)
    return dsl.evaluate(rule or hot_coffee_rule(), env)


def test_evaluate_hot_takes_then_branch(apps, coffee_kb):
    trace = run_rule(apps, coffee_kb, 90)
    assert trace.branch == "then"
    assert any("Iced Cappuccino" in e.detail for e in trace.actions())
    assert not any("Hot Latte" in e.detail for e in trace.actions())


def test_evaluate_cool_takes_else_branch(apps, coffee_kb):
    trace = run_rule(apps, coffee_kb, 70)
    assert trace.branch == "else"
    assert any("Hot Latte" in e.detail for e in trace.actions())
    assert not any("Iced Cappuccino" in e.detail for e in trace.actions())


def test_missing_else_is_noop(apps, coffee_kb):
    rule = Conditional(
        BoolConceptRef("hot"), dsl.proc_call("order_Starbucks", item="Iced Cappuccino")
    )
    trace = run_rule(apps, coffee_kb, 70, rule)
    assert trace.branch == "none"
    # the condition's value query navigates, but no branch action runs
    after_branch = trace.events[trace.events.index(dsl.TraceEvent("branch", "none")) :]
    assert [e for e in after_branch if e.kind == "action"] == []


def test_branch_exclusivity(apps, coffee_kb):
    for temperature in (60, 84, 85, 86, 100):
        trace = run_rule(apps, coffee_kb, temperature)
        details = " ".join(e.detail for e in trace.actions())
        assert ("Iced Cappuccino" in details) != ("Hot Latte" in details)


def test_evaluate_is_deterministic(apps, coffee_kb):
    first = run_rule(apps, coffee_kb, 90).render()
    second = run_rule(apps, coffee_kb, 90).render()
    assert first == second


def test_dimension_mismatch_at_runtime(apps, coffee_kb):
    rule = Conditional(
        BoolComparison(
            ValueConstant(values.duration_minutes(30)),
            "GT",
            ValueConstant(values.money_usd(100)),
        ),
        ProcedureCall("order_Starbucks", (("item", "Iced Cappuccino"),)),
    )
    with pytest.raises(values.DimensionMismatch):
        run_rule(apps, coffee_kb, 90, rule)


def test_unknown_concept_and_procedure(apps, coffee_kb):
    with pytest.raises(dsl.UnknownConcept):
        run_rule(apps, coffee_kb, 90, Conditional(BoolConceptRef("nope"), ProcedureCall("p")))
    with pytest.raises(dsl.UnknownProcedure):
        run_rule(
            apps, coffee_kb, 90, Conditional(BoolConceptRef("hot"), ProcedureCall("nope"))
        )


def test_holes_are_not_executable(apps, coffee_kb):
    with pytest.raises(dsl.NotExecutable):
        run_rule(apps, coffee_kb, 90, OPEN_COFFEE_RULE)
