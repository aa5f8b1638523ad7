"""Command-line entry point.

One invocation drives one session: replay a scripted transcript, run a
stored rule under chosen environment values, render screens, serve the
browser UI, or speak the newline-delimited JSON protocol on stdio.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gateway as gw
from . import kb as kbmod
from . import report


def _parse_env(pairs: list[str]) -> dict[str, str]:
    env = dict(gw.DEFAULT_ENV)
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"--env expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        env[key] = value
    return env


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="taskteach",
        description="Teach and run natural-language task automations on simulated apps.",
    )
    ap.add_argument("--kb", help="knowledge-base file (created on save)")
    ap.add_argument("--apps", help="app fixture directory (default: bundled fixtures)")
    ap.add_argument("--env", action="append", default=[], metavar="KEY=VALUE",
                    help="environment variable controlling displayed values")
    ap.add_argument("--transcript", help="scripted transcript file to replay")
    ap.add_argument("--run", metavar="SCRIPT", help="run a stored script by name")
    ap.add_argument("--render", metavar="APP", help="render an app's current screen to PNG")
    ap.add_argument("--report-dir", help="write trace TSV and screen figures here")
    ap.add_argument("--serve", action="store_true", help="serve the browser UI")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--frontend", help="directory with the built browser UI")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    apps_dir = args.apps or str(gw.bundled_fixture_dir())
    env = _parse_env(args.env)
    gateway = gw.Gateway()
    try:
        session_id = gateway.create_session(args.kb, apps_dir, env)
    except gw.BadFixture as exc:
        print(f"bad fixture: {exc}", file=sys.stderr)
        return 2
    session = gateway.sessions[session_id]
    report_dir = Path(args.report_dir) if args.report_dir else None
    exit_code = 0

    if args.serve:
        from .server import serve  # deferred: pulls in fastapi/uvicorn

        serve(gateway, session_id, port=args.port, frontend_dir=args.frontend)
        return 0

    if args.transcript:
        result = gw.replay_transcript_file(gateway, session_id, args.transcript)
        print(result.render(), end="")
        if report_dir is not None:
            report.write_transcript_tsv(
                session.teaching.transcript, report_dir / "transcript.tsv"
            )
        if not result.passed:
            exit_code = 1

    if args.run and exit_code == 0:
        try:
            trace = gateway.run_script(session_id, args.run, env)
        except gw.UnknownScript:
            known = ", ".join(sorted(session.teaching.kb.rules)) or "none"
            print(f"unknown script {args.run!r} (known: {known})", file=sys.stderr)
            return 2
        print(trace.render(), end="")
        if report_dir is not None:
            report.write_trace_tsv(trace, report_dir / "trace.tsv")
            snapshot = session.world.snapshot()
            report.render_screen(
                snapshot,
                report_dir / f"screen_{snapshot.app_name}_{snapshot.screen_id}.png",
                report.entity_highlights(snapshot),
            )

    if args.render:
        from . import screenworld

        session.world.perform(screenworld.launch_app(args.render))
        snapshot = session.world.snapshot()
        out_dir = report_dir or Path(".")
        path = report.render_screen(
            snapshot,
            out_dir / f"screen_{snapshot.app_name}_{snapshot.screen_id}.png",
            report.entity_highlights(snapshot),
        )
        print(path)

    if args.kb and (args.transcript or args.run) and exit_code == 0:
        kbmod.persist(session.teaching.kb, args.kb)

    if not (args.transcript or args.run or args.render or args.serve):
        return repl(gateway, session_id)
    return exit_code


def repl(gateway: gw.Gateway, session_id: str) -> int:
    """Newline-delimited JSON on stdio: one message in, its replies out."""
    session = gateway.sessions[session_id]
    for message in session.messages:
        print(json.dumps(message.to_json(), sort_keys=True), flush=True)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            incoming = json.loads(line)
        except json.JSONDecodeError as exc:
            print(json.dumps({"kind": "error", "payload": {"text": str(exc)}}), flush=True)
            continue
        if incoming.get("kind") == "quit":
            break
        for message in gateway.send_turn(session_id, incoming):
            print(json.dumps(message.to_json(), sort_keys=True), flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
