"""Deterministic simulated phone: apps as screen graphs.

Apps are loaded from JSON definition files.  Screen text may embed
``{{var.name}}`` placeholders that are substituted from environment
variables at snapshot time, which is how tests control displayed values
like the current temperature or a room price.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

from . import entities
from .entities import EntityMatch

SCREEN_WIDTH = 1080
SCREEN_HEIGHT = 1920

HOME_APP = "home"
HOME_SCREEN = "launcher"

KINDS = ("textView", "button", "input", "image", "listItem")


@dataclass(frozen=True)
class GeometryConfig:
    """Spatial-relation thresholds, all in virtual-screen pixels."""

    near_label_max_distance: float = 300.0


GEOMETRY = GeometryConfig()


class MalformedDefinition(ValueError):
    """An app definition file that fails validation; message names the spot."""


class NoSuchObject(KeyError):
    pass


class NotClickable(ValueError):
    pass


@dataclass(frozen=True)
class GuiObject:
    object_id: str
    kind: str
    text: str
    bounds: tuple[int, int, int, int]  # left, top, right, bottom
    clickable: bool = False
    long_clickable: bool = False
    visible: bool = True
    parent: str | None = None  # object id of the contains-parent, None = screen root

    def center(self) -> tuple[float, float]:
        left, top, right, bottom = self.bounds
        return ((left + right) / 2, (top + bottom) / 2)


@dataclass(frozen=True)
class Action:
    kind: str  # click | longClickSelect | setText | launchApp | goHome
    object_id: str | None = None
    text: str | None = None
    app_name: str | None = None

    def describe(self) -> str:
        if self.kind == "launchApp":
            return f"launchApp {self.app_name}"
        if self.kind == "goHome":
            return "goHome"
        if self.kind == "setText":
            return f"setText {self.object_id} {self.text!r}"
        return f"{self.kind} {self.object_id}"


def click(object_id: str) -> Action:
    return Action("click", object_id=object_id)


def long_click_select(object_id: str) -> Action:
    return Action("longClickSelect", object_id=object_id)


def set_text(object_id: str, text: str) -> Action:
    return Action("setText", object_id=object_id, text=text)


def launch_app(app_name: str) -> Action:
    return Action("launchApp", app_name=app_name)


def go_home() -> Action:
    return Action("goHome")


@dataclass(frozen=True)
class ScreenTemplate:
    screen_id: str
    objects: tuple[GuiObject, ...]
    # (object id, action kind) -> next screen id
    transitions: dict[tuple[str, str], str] = field(default_factory=dict)


@dataclass(frozen=True)
class AppDefinition:
    app_name: str
    initial_screen_id: str
    screens: dict[str, ScreenTemplate]


def load_app(path: str | FsPath) -> AppDefinition:
    """Parse and validate one app definition file."""
    path = FsPath(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedDefinition(f"{path}: {exc}") from exc
    return app_from_dict(raw, source=str(path))


def app_from_dict(raw: object, source: str = "<dict>") -> AppDefinition:
    def fail(where: str, why: str) -> MalformedDefinition:
        return MalformedDefinition(f"{source}: {where}: {why}")

    if not isinstance(raw, dict):
        raise fail("top level", "expected an object")
    for key in ("appName", "initialScreen", "screens"):
        if key not in raw:
            raise fail("top level", f"missing field {key!r}")
    app_name = raw["appName"]
    screens: dict[str, ScreenTemplate] = {}
    if not isinstance(raw["screens"], list) or not raw["screens"]:
        raise fail("screens", "expected a non-empty list")
    for index, screen in enumerate(raw["screens"]):
        where = f"screens[{index}]"
        if "id" not in screen:
            raise fail(where, "missing field 'id'")
        screen_id = screen["id"]
        objects: list[GuiObject] = []
        seen_ids: set[str] = set()
        for oindex, obj in enumerate(screen.get("objects", [])):
            owhere = f"{where}.objects[{oindex}]"
            try:
                gui = GuiObject(
                    object_id=obj["id"],
                    kind=obj["kind"],
                    text=obj.get("text", ""),
                    bounds=tuple(obj["bounds"]),
                    clickable=obj.get("clickable", False),
                    long_clickable=obj.get("longClickable", False),
                    visible=obj.get("visible", True),
                    parent=obj.get("parent"),
                )
            except (KeyError, TypeError) as exc:
                raise fail(owhere, f"bad object: {exc}") from exc
            if gui.kind not in KINDS:
                raise fail(owhere, f"unknown kind {gui.kind!r}")
            if len(gui.bounds) != 4:
                raise fail(owhere, "bounds must be [left, top, right, bottom]")
            left, top, right, bottom = gui.bounds
            if right <= left or bottom <= top:
                raise fail(owhere, f"degenerate bounds {gui.bounds}")
            if gui.object_id in seen_ids:
                raise fail(owhere, f"duplicate object id {gui.object_id!r}")
            seen_ids.add(gui.object_id)
            objects.append(gui)
        for gui in objects:
            if gui.parent is not None and gui.parent not in seen_ids:
                raise fail(where, f"object {gui.object_id!r} has unknown parent {gui.parent!r}")
        transitions: dict[tuple[str, str], str] = {}
        for tindex, tr in enumerate(screen.get("transitions", [])):
            twhere = f"{where}.transitions[{tindex}]"
            try:
                key = (tr["object"], tr.get("action", "click"))
                transitions[key] = tr["to"]
            except KeyError as exc:
                raise fail(twhere, f"missing field {exc}") from exc
            if tr["object"] not in seen_ids:
                raise fail(twhere, f"unknown object {tr['object']!r}")
        screens[screen_id] = ScreenTemplate(screen_id, tuple(objects), transitions)
    for screen_id, screen in screens.items():
        for (obj, action), target in screen.transitions.items():
            if target not in screens:
                raise MalformedDefinition(
                    f"{source}: screen {screen_id!r}: transition on {obj!r} "
                    f"targets missing screen {target!r}"
                )
    if raw["initialScreen"] not in screens:
        raise fail("initialScreen", f"no screen named {raw['initialScreen']!r}")
    return AppDefinition(app_name, raw["initialScreen"], screens)


def load_fixture_dir(directory: str | FsPath) -> dict[str, AppDefinition]:
    directory = FsPath(directory)
    if not directory.is_dir():
        raise MalformedDefinition(f"{directory}: not a directory")
    apps = {}
    for path in sorted(directory.glob("*.json")):
        app = load_app(path)
        apps[app.app_name] = app
    if not apps:
        raise MalformedDefinition(f"{directory}: no app definition files")
    return apps


# -- snapshot graph -----------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    from_id: str
    relation: str  # contains | rightOf | below | nearLabel
    to_id: str


ROOT_ID = "__root__"


@dataclass(frozen=True)
class UiSnapshotGraph:
    app_name: str
    screen_id: str
    nodes: tuple[GuiObject, ...]
    edges: tuple[Edge, ...]
    entities: dict[str, tuple[EntityMatch, ...]]

    def node(self, object_id: str) -> GuiObject:
        for node in self.nodes:
            if node.object_id == object_id:
                return node
        raise NoSuchObject(object_id)

    def has_node(self, object_id: str) -> bool:
        return any(n.object_id == object_id for n in self.nodes)

    def entities_of(self, object_id: str) -> tuple[EntityMatch, ...]:
        return self.entities.get(object_id, ())

    def near_labels(self, object_id: str) -> list[GuiObject]:
        labels = [
            self.node(edge.to_id)
            for edge in self.edges
            if edge.relation == "nearLabel" and edge.from_id == object_id
        ]
        return labels


def _substitute_placeholders(text: str, env: dict[str, str]) -> str:
    out = text
    while "{{" in out:
        start = out.index("{{")
        end = out.index("}}", start)
        name = out[start + 2 : end].strip()
        if name not in env:
            raise MalformedDefinition(f"unbound environment variable {name!r}")
        out = out[:start] + str(env[name]) + out[end + 2 :]
    return out


def _spatial_edges(objects: list[GuiObject]) -> list[Edge]:
    edges: list[Edge] = []
    for a in objects:
        for b in objects:
            if a.object_id == b.object_id:
                continue
            al, at, ar, ab = a.bounds
            bl, bt, br, bb = b.bounds
            if bl >= ar and not (bb <= at or bt >= ab):
                edges.append(Edge(b.object_id, "rightOf", a.object_id))
            if bt >= ab and not (br <= al or bl >= ar):
                edges.append(Edge(b.object_id, "below", a.object_id))
    for a in objects:
        for b in objects:
            if a.object_id == b.object_id or b.kind != "textView":
                continue
            ax, ay = a.center()
            bx, by = b.center()
            if math.dist((ax, ay), (bx, by)) <= GEOMETRY.near_label_max_distance:
                edges.append(Edge(a.object_id, "nearLabel", b.object_id))
    return edges


def build_snapshot(app_name: str, screen: ScreenTemplate, env: dict[str, str],
                   text_overrides: dict[str, str]) -> UiSnapshotGraph:
    objects = []
    for obj in screen.objects:
        text = text_overrides.get(obj.object_id, obj.text)
        objects.append(replace(obj, text=_substitute_placeholders(text, env)))
    edges = [Edge(ROOT_ID, "contains", o.object_id) for o in objects if o.parent is None]
    edges += [Edge(o.parent, "contains", o.object_id) for o in objects if o.parent is not None]
    edges += _spatial_edges(objects)
    extracted = {
        o.object_id: tuple(entities.extract_entities(o.text))
        for o in objects
        if o.text
    }
    return UiSnapshotGraph(
        app_name=app_name,
        screen_id=screen.screen_id,
        nodes=tuple(objects),
        edges=tuple(edges),
        entities={k: v for k, v in extracted.items() if v},
    )


# -- snapshot graph queries ---------------------------------------------------


class QueryFailed(LookupError):
    pass


@dataclass(frozen=True)
class GraphQuery:
    """Conjunction of predicates over snapshot nodes."""

    predicates: tuple[tuple[str, str], ...]  # (predicate name, argument)

    def to_json(self) -> list[dict[str, str]]:
        return [{"pred": p, "arg": a} for p, a in self.predicates]

    @staticmethod
    def from_json(items: list[dict[str, str]]) -> "GraphQuery":
        return GraphQuery(tuple((item["pred"], item["arg"]) for item in items))

    def describe(self) -> str:
        return " and ".join(f"{p}({a})" for p, a in self.predicates)


def query_of(*predicates: tuple[str, str]) -> GraphQuery:
    return GraphQuery(tuple(sorted(predicates)))


def _matches(node: GuiObject, pred: str, arg: str, snapshot: UiSnapshotGraph) -> bool:
    if pred == "hasEntityDimension":
        return any(m.value.dimension == arg for m in snapshot.entities_of(node.object_id))
    if pred == "textEquals":
        return node.text == arg
    if pred == "nearLabel":
        return any(label.text == arg for label in snapshot.near_labels(node.object_id))
    if pred == "kindIs":
        return node.kind == arg
    if pred == "objectIdIs":
        return node.object_id == arg
    raise QueryFailed(f"unknown predicate {pred!r}")


def run_query(query: GraphQuery, snapshot: UiSnapshotGraph) -> GuiObject:
    """The unique matching node; ties go to the topmost-leftmost one."""
    matches = [
        node
        for node in snapshot.nodes
        if all(_matches(node, pred, arg, snapshot) for pred, arg in query.predicates)
    ]
    if not matches:
        raise QueryFailed(f"no node matches {query.describe()}")
    matches.sort(key=lambda node: (node.bounds[1], node.bounds[0]))
    return matches[0]


# -- the world ----------------------------------------------------------------


@dataclass(frozen=True)
class ActionResult:
    screen_changed: bool
    screen_id: str
    selected: GuiObject | None = None


class World:
    """One simulated phone: installed apps, a foreground screen, environment
    variables, and per-object text overrides from setText.  `perform` is the
    only mutator; snapshots are pure values."""

    def __init__(self, apps: dict[str, AppDefinition], env: dict[str, str] | None = None):
        self.apps = dict(apps)
        self.env: dict[str, str] = {k: str(v) for k, v in (env or {}).items()}
        self.foreground_app: str = HOME_APP
        self.screen_id: str = HOME_SCREEN
        self._text_overrides: dict[tuple[str, str, str], str] = {}
        self.recorder = None  # set by demo.start_recording

    def set_env(self, key: str, value: object) -> None:
        self.env[key] = str(value)

    def reset_home(self) -> None:
        self.foreground_app = HOME_APP
        self.screen_id = HOME_SCREEN

    def _home_screen(self) -> ScreenTemplate:
        objects = []
        y = 200
        for name in sorted(self.apps):
            objects.append(
                GuiObject(
                    object_id=f"icon_{name}",
                    kind="button",
                    text=self.apps[name].app_name,
                    bounds=(90, y, 990, y + 120),
                    clickable=True,
                )
            )
            y += 160
        return ScreenTemplate(HOME_SCREEN, tuple(objects), {})

    def _current_screen(self) -> ScreenTemplate:
        if self.foreground_app == HOME_APP:
            return self._home_screen()
        return self.apps[self.foreground_app].screens[self.screen_id]

    def snapshot(self) -> UiSnapshotGraph:
        screen = self._current_screen()
        overrides = {
            obj_id: text
            for (app, sid, obj_id), text in self._text_overrides.items()
            if app == self.foreground_app and sid == self.screen_id
        }
        return build_snapshot(self.foreground_app, screen, self.env, overrides)

    def perform(self, action: Action) -> ActionResult:
        if self.recorder is not None:
            self.recorder.capture(self, action)
        return self._apply(action)

    def _apply(self, action: Action) -> ActionResult:
        if action.kind == "goHome":
            self.reset_home()
            return ActionResult(True, self.screen_id)
        if action.kind == "launchApp":
            if action.app_name not in self.apps:
                raise NoSuchObject(f"no app named {action.app_name!r}")
            self.foreground_app = action.app_name
            self.screen_id = self.apps[action.app_name].initial_screen_id
            return ActionResult(True, self.screen_id)

        snapshot = self.snapshot()
        if action.object_id is None or not snapshot.has_node(action.object_id):
            raise NoSuchObject(f"{action.object_id!r} not on screen {self.screen_id!r}")
        node = snapshot.node(action.object_id)

        if action.kind == "click":
            if not node.clickable:
                raise NotClickable(f"{node.object_id} is not clickable")
            if not node.visible:
                raise NotClickable(f"{node.object_id} is not visible")
            if self.foreground_app == HOME_APP and node.object_id.startswith("icon_"):
                return self._apply(launch_app(node.object_id[len("icon_"):]))
            screen = self._current_screen()
            target = screen.transitions.get((action.object_id, "click"))
            if target is None:
                return ActionResult(False, self.screen_id)  # recorded no-op
            self.screen_id = target
            return ActionResult(True, self.screen_id)
        if action.kind == "longClickSelect":
            if not (node.long_clickable or node.kind == "textView"):
                raise NotClickable(f"{node.object_id} cannot be long-click selected")
            return ActionResult(False, self.screen_id, selected=node)
        if action.kind == "setText":
            if node.kind != "input":
                raise NotClickable(f"{node.object_id} is not an input")
            key = (self.foreground_app, self.screen_id, action.object_id)
            self._text_overrides[key] = action.text or ""
            return ActionResult(False, self.screen_id)
        raise ValueError(f"unknown action kind {action.kind!r}")
