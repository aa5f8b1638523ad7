"""WebSocket bridge for the browser UI.

Serves the built frontend as static files and relays the session protocol
over a WebSocket: each text frame is one JSON message, exactly as on the
stdio transport.

No deferred annotations here: FastAPI resolves the WebSocket parameter
annotation at runtime, and the fastapi import is local to keep the
dependency optional.
"""

import json
from pathlib import Path


def build_app(gateway, session_id: str, frontend_dir: str | None = None):
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.responses import FileResponse
    from fastapi.staticfiles import StaticFiles

    app = FastAPI()

    @app.websocket("/ws")
    async def ws_session(socket: WebSocket):
        await socket.accept()
        session = gateway.sessions[session_id]
        for message in session.messages:
            await socket.send_text(json.dumps(message.to_json(), sort_keys=True))
        try:
            while True:
                incoming = json.loads(await socket.receive_text())
                for message in gateway.send_turn(session_id, incoming):
                    await socket.send_text(json.dumps(message.to_json(), sort_keys=True))
        except WebSocketDisconnect:
            pass

    if frontend_dir:
        static_dir = Path(frontend_dir)

        @app.get("/")
        async def index():
            return FileResponse(static_dir / "index.html")

        @app.get("/styles.css")
        async def styles():
            return FileResponse(static_dir / "styles.css")

        # scoped mount: a root mount would also swallow websocket upgrades
        app.mount("/dist", StaticFiles(directory=str(static_dir / "dist")), name="dist")
    return app


def serve(gateway, session_id: str, port: int = 8765, frontend_dir: str | None = None):
    import uvicorn

    app = build_app(gateway, session_id, frontend_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
