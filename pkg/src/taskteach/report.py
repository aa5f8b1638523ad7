"""Report rendering: simulated screens as figures, traces as TSV.

The run/transcript CLI paths drop these files next to each other so a rule
execution can be inspected without replaying it: one delimited trace (or
transcript) plus a rendering of each screen it touched, with value-bearing
nodes highlighted the way the demonstration overlay shows them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib import patches

from . import screenworld
from .dsl import ExecutionTrace
from .screenworld import UiSnapshotGraph

_KIND_COLORS = {
    "textView": "#f2f2f2",
    "button": "#cfe3ff",
    "input": "#fff6cc",
    "image": "#e8d9ff",
    "listItem": "#e3f3e3",
}


def render_screen(snapshot: UiSnapshotGraph, path: str | Path,
                  highlight_ids: set[str] | None = None) -> Path:
    """Draw one screen to a PNG; highlighted objects get a red overlay."""
    highlight_ids = highlight_ids or set()
    fig, ax = plt.subplots(figsize=(4.5, 8))
    ax.set_xlim(0, screenworld.SCREEN_WIDTH)
    ax.set_ylim(screenworld.SCREEN_HEIGHT, 0)
    ax.set_aspect("equal")
    ax.set_title(f"{snapshot.app_name} / {snapshot.screen_id}")
    ax.set_xticks([])
    ax.set_yticks([])
    for node in snapshot.nodes:
        if not node.visible:
            continue
        left, top, right, bottom = node.bounds
        ax.add_patch(
            patches.Rectangle(
                (left, top), right - left, bottom - top,
                facecolor=_KIND_COLORS.get(node.kind, "#ffffff"),
                edgecolor="#666666", linewidth=0.8,
            )
        )
        if node.text:
            ax.text(
                (left + right) / 2, (top + bottom) / 2, node.text,
                ha="center", va="center", fontsize=7, wrap=True,
            )
        if node.object_id in highlight_ids:
            ax.add_patch(
                patches.Rectangle(
                    (left, top), right - left, bottom - top,
                    facecolor="red", alpha=0.25, edgecolor="red", linewidth=2.0,
                )
            )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def entity_highlights(snapshot: UiSnapshotGraph, dimension: str | None = None) -> set[str]:
    """Ids of nodes showing a typed value, optionally of one dimension."""
    out = set()
    for object_id, matches in snapshot.entities.items():
        if any(dimension is None or m.value.dimension == dimension for m in matches):
            out.add(object_id)
    return out


def write_trace_tsv(trace: ExecutionTrace, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["step\tkind\tlabel\tdetail"]
    for step, event in enumerate(trace.events, 1):
        lines.append(f"{step}\t{event.kind}\t{event.label}\t{event.detail}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_transcript_tsv(records, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["turn\tspeaker\tphase\tretracted\ttemplate\ttext"]
    for record in records:
        text = record.text.replace("\t", " ")
        lines.append(
            f"{record.turn_index}\t{record.speaker}\t{record.phase}"
            f"\t{int(record.retracted)}\t{record.template_id}\t{text}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
