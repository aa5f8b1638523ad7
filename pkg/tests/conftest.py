from __future__ import annotations

import pytest

from taskteach import dialog, gateway, kb as kbmod, parser, screenworld


@pytest.fixture(scope="session")
def fixture_dir():
    return gateway.bundled_fixture_dir()


@pytest.fixture(scope="session")
def apps(fixture_dir):
    return screenworld.load_fixture_dir(fixture_dir)


def make_world(apps, **env_overrides):
    env = dict(gateway.DEFAULT_ENV)
    env.update({k: str(v) for k, v in env_overrides.items()})
    return screenworld.World(apps, env)


def make_session(apps, knowledge=None, **env_overrides):
    world = make_world(apps, **env_overrides)
    return dialog.TeachingSession(
        world, knowledge or kbmod.KnowledgeBase(), parser.default_lexicon()
    )


@pytest.fixture
def world(apps):
    return make_world(apps)


@pytest.fixture
def session(apps):
    return make_session(apps)


COFFEE_CONTEXT = "order a cup of iced cappuccino"


def record_temperature_query(world):
    from taskteach import demo

    recording = demo.start_recording(
        world, "valueQuery", concept_name="temperature",
        expected_dimension="temperature",
    )
    world.perform(screenworld.launch_app("Weather"))
    world.perform(screenworld.long_click_select("temp_value"))
    return demo.finish_value_query_recording(recording, world, "temp_value")


def record_starbucks_order(world, goal=COFFEE_CONTEXT):
    from taskteach import demo

    recording = demo.start_recording(world, "procedure", goal_utterance=goal)
    world.perform(screenworld.launch_app("Starbucks"))
    world.perform(screenworld.click("btn_menu"))
    world.perform(screenworld.click("item_iced_cappuccino"))
    world.perform(screenworld.click("btn_order"))
    return demo.finish_procedure_recording(recording, world)


def build_coffee_kb(apps):
    """A knowledge base as the iced-cappuccino teaching conversation leaves it."""
    from taskteach import dsl, values

    world = make_world(apps)
    query = record_temperature_query(world)
    script = record_starbucks_order(world)
    knowledge = kbmod.KnowledgeBase()
    knowledge.store_value_concept(
        "temperature", ("temperature",), kbmod.ValueVariant(COFFEE_CONTEXT, query=query)
    )
    knowledge.store_bool_concept(
        "hot",
        ("it's hot", "hot"),
        kbmod.BoolVariant(
            COFFEE_CONTEXT,
            dsl.BoolComparison(
                dsl.ValueConceptRef("temperature"),
                "GT",
                dsl.ValueConstant(values.temperature_f(85)),
            ),
        ),
    )
    knowledge.store_procedure(
        kbmod.ProcedureEntry(script.name, script.trigger_utterances, script)
    )
    return knowledge
