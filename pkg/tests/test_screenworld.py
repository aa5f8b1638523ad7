import json

import pytest

from taskteach import screenworld
from taskteach.screenworld import (
    MalformedDefinition,
    NoSuchObject,
    NotClickable,
    QueryFailed,
    World,
    app_from_dict,
    click,
    go_home,
    launch_app,
    long_click_select,
    query_of,
    run_query,
    set_text,
)

from conftest import make_world


MINIMAL = {
    "appName": "Mini",
    "initialScreen": "main",
    "screens": [
        {
            "id": "main",
            "objects": [
                {"id": "label", "kind": "textView", "text": "Value", "bounds": [0, 0, 200, 60]},
                {"id": "btn", "kind": "button", "text": "Go", "bounds": [0, 100, 200, 160], "clickable": True},
            ],
            "transitions": [{"object": "btn", "action": "click", "to": "next"}],
        },
        {"id": "next", "objects": [], "transitions": []},
    ],
}


def test_load_app_validates(tmp_path):
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(MINIMAL))
    app = screenworld.load_app(path)
    assert app.app_name == "Mini"
    assert app.initial_screen_id == "main"


def test_transition_to_missing_screen_rejected():
    bad = json.loads(json.dumps(MINIMAL))
    bad["screens"][0]["transitions"][0]["to"] = "nowhere"
    with pytest.raises(MalformedDefinition, match="nowhere"):
        app_from_dict(bad)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    with pytest.raises(MalformedDefinition):
        screenworld.load_app(path)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.pop("appName"), "appName"),
        (lambda d: d["screens"][0]["objects"].append(
            {"id": "label", "kind": "textView", "text": "x", "bounds": [0, 0, 1, 1]}
        ), "duplicate"),
        (lambda d: d["screens"][0]["objects"][0].update(bounds=[5, 5, 5, 9]), "degenerate"),
        (lambda d: d["screens"][0]["objects"][0].update(kind="widget"), "kind"),
        (lambda d: d.update(initialScreen="missing"), "missing"),
    ],
)
def test_malformed_definitions(mutate, fragment):
    raw = json.loads(json.dumps(MINIMAL))
    mutate(raw)
    with pytest.raises(MalformedDefinition, match=fragment):
        app_from_dict(raw)


def test_weather_placeholder_substitution(apps):
    world = make_world(apps, **{"weather.temperature": 90})
    world.perform(launch_app("Weather"))
    snapshot = world.snapshot()
    node = snapshot.node("temp_value")
    assert node.text == "90°F"
    matches = snapshot.entities_of("temp_value")
    assert matches and matches[0].value.dimension == "temperature"
    assert matches[0].value.magnitude == 90


def test_unbound_placeholder_raises(apps):
    world = World(apps, {})
    world.perform(launch_app("Weather"))
    with pytest.raises(MalformedDefinition, match="weather.temperature"):
        world.snapshot()


def test_snapshot_is_deterministic(world):
    world.perform(launch_app("Maps"))
    assert world.snapshot() == world.snapshot()


def test_contains_edges_form_rooted_forest(world):
    world.perform(launch_app("Starbucks"))
    world.perform(click("btn_menu"))
    snapshot = world.snapshot()
    parents = {}
    for edge in snapshot.edges:
        if edge.relation == "contains":
            assert edge.to_id not in parents, "one parent per node"
            parents[edge.to_id] = edge.from_id
    assert set(parents) == {n.object_id for n in snapshot.nodes}
    items = [n for n in snapshot.nodes if n.object_id.startswith("item_")]
    assert all(parents[n.object_id] == "list_drinks" for n in items)


def test_spatial_edges_consistent_with_bounds(world):
    world.perform(launch_app("Maps"))
    snapshot = world.snapshot()
    for edge in snapshot.edges:
        if edge.relation in ("rightOf", "below"):
            assert edge.from_id != edge.to_id
            a = snapshot.node(edge.from_id).bounds
            b = snapshot.node(edge.to_id).bounds
            if edge.relation == "rightOf":
                assert a[0] >= b[2]
            else:
                assert a[1] >= b[3]


def test_near_label_edges(world):
    world.perform(launch_app("Weather"))
    snapshot = world.snapshot()
    labels = [n.text for n in snapshot.near_labels("temp_value")]
    assert "Current" in labels
    assert "Humidity" not in labels  # beyond the 300 px threshold


def test_perform_click_transitions(world):
    world.perform(launch_app("Starbucks"))
    result = world.perform(click("btn_menu"))
    assert result.screen_changed and result.screen_id == "menu"


def test_click_without_transition_is_noop(world):
    world.perform(launch_app("Starbucks"))
    result = world.perform(click("btn_stores"))
    assert not result.screen_changed


def test_click_missing_object(world):
    world.perform(launch_app("Starbucks"))
    with pytest.raises(NoSuchObject):
        world.perform(click("no_such_button"))


def test_click_unclickable(world):
    world.perform(launch_app("Starbucks"))
    with pytest.raises(NotClickable):
        world.perform(click("title"))


def test_long_click_select_returns_node(world):
    world.perform(launch_app("Weather"))
    result = world.perform(long_click_select("temp_value"))
    assert result.selected is not None
    assert result.selected.text == "90°F"
    assert not result.screen_changed


def test_set_text_updates_input():
    app = app_from_dict(
        {
            "appName": "Form",
            "initialScreen": "main",
            "screens": [
                {
                    "id": "main",
                    "objects": [
                        {"id": "field", "kind": "input", "text": "", "bounds": [0, 0, 100, 40]}
                    ],
                    "transitions": [],
                }
            ],
        }
    )
    world = World({"Form": app})
    world.perform(launch_app("Form"))
    world.perform(set_text("field", "hello"))
    assert world.snapshot().node("field").text == "hello"


def test_invisible_objects_match_queries_but_refuse_clicks():
    app = app_from_dict(
        {
            "appName": "Ghost",
            "initialScreen": "main",
            "screens": [
                {
                    "id": "main",
                    "objects": [
                        {
                            "id": "hidden",
                            "kind": "button",
                            "text": "secret 42",
                            "bounds": [0, 0, 100, 40],
                            "clickable": True,
                            "visible": False,
                        }
                    ],
                    "transitions": [],
                }
            ],
        }
    )
    world = World({"Ghost": app})
    world.perform(launch_app("Ghost"))
    snapshot = world.snapshot()
    assert run_query(query_of(("textEquals", "secret 42")), snapshot).object_id == "hidden"
    with pytest.raises(NotClickable):
        world.perform(click("hidden"))


def test_home_screen_lists_apps(world):
    world.perform(go_home())
    snapshot = world.snapshot()
    texts = {n.text for n in snapshot.nodes}
    assert {"Weather", "Starbucks", "Maps", "Clock"} <= texts


def test_home_icon_click_launches(world):
    world.perform(go_home())
    world.perform(click("icon_Maps"))
    assert world.foreground_app == "Maps"


def test_run_query_examples(world):
    world.perform(launch_app("Weather"))
    snapshot = world.snapshot()
    node = run_query(
        query_of(("hasEntityDimension", "temperature"), ("nearLabel", "Current")), snapshot
    )
    assert node.object_id == "temp_value"

    world.perform(go_home())
    world.perform(launch_app("Maps"))
    snapshot = world.snapshot()
    node = run_query(
        query_of(("hasEntityDimension", "duration"), ("nearLabel", "Home to Work")),
        snapshot,
    )
    assert node.object_id == "dur_home_work"

    with pytest.raises(QueryFailed):
        run_query(query_of(("textEquals", "nonexistent")), snapshot)


def test_run_query_tie_breaks_topmost_leftmost(world):
    world.perform(launch_app("Maps"))
    snapshot = world.snapshot()
    node = run_query(query_of(("hasEntityDimension", "duration")), snapshot)
    assert node.object_id == "dur_home_work"  # highest duration row


def test_run_query_order_independent(world):
    world.perform(launch_app("Maps"))
    snapshot = world.snapshot()
    shuffled = screenworld.UiSnapshotGraph(
        snapshot.app_name,
        snapshot.screen_id,
        tuple(reversed(snapshot.nodes)),
        snapshot.edges,
        snapshot.entities,
    )
    query = query_of(("hasEntityDimension", "duration"))
    assert run_query(query, snapshot) == run_query(query, shuffled)


def test_world_evolution_is_deterministic(apps):
    def drive():
        world = make_world(apps)
        world.perform(launch_app("Starbucks"))
        world.perform(click("btn_menu"))
        world.perform(click("item_hot_latte"))
        return world.foreground_app, world.screen_id, world.snapshot()

    assert drive() == drive()
