"""HTTP/WebSocket front of the play service.

One WebSocket per session: the client opens /play with the variant and seed as
query parameters, then streams {"type": "hand", t, y, z} and {"type":
"config", ...} text frames; the server answers with event objects.  A static
frontend directory is served at / when present.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .pipeline import VARIANTS
from .service import NoteMap, NoteMapError, SessionError, SessionManager


def create_app(settings_factory, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="handwave play service", version=__version__)
    manager = SessionManager(settings_factory)
    app.state.sessions = manager

    @app.get("/api/info")
    def info():
        return {"version": __version__, "variants": list(VARIANTS),
                "sessions": len(manager)}

    @app.websocket("/play")
    async def play(ws: WebSocket,
                   variant: str = Query("dpf"),
                   seed: int = Query(0),
                   noise_scale: float = Query(0.5),
                   lanes: int = Query(0)):
        await ws.accept()
        try:
            note_map = None
            if lanes > 0:
                grid = manager._factory(variant).grid
                note_map = NoteMap.equal_lanes(grid.z_min, grid.z_max, lanes)
            session = manager.create(variant, seed=seed, note_map=note_map,
                                     noise_scale=noise_scale)
        except (ValueError, SessionError, FileNotFoundError) as exc:
            await ws.send_text(json.dumps({"type": "error", "error": str(exc)}))
            await ws.close()
            return
        grid = session.settings.grid
        await ws.send_text(json.dumps({
            "type": "session", "id": session.id, "variant": session.variant,
            "roi": {"y_min": grid.y_min, "y_max": grid.y_max,
                    "z_min": grid.z_min, "z_max": grid.z_max},
            "note_map": session.note_map.to_dict(),
        }))
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(
                        {"type": "error", "error": "malformed JSON"}))
                    continue
                kind = msg.get("type")
                try:
                    if kind == "hand":
                        events = session.ingest(float(msg["t"]), float(msg["y"]),
                                                float(msg["z"]))
                        for event in events:
                            await ws.send_text(json.dumps(event.to_dict()))
                    elif kind == "config":
                        ack = session.configure_notes(NoteMap.from_dict(msg))
                        await ws.send_text(json.dumps(ack))
                    else:
                        await ws.send_text(json.dumps(
                            {"type": "error", "error": f"unknown type {kind!r}"}))
                except NoteMapError as exc:
                    await ws.send_text(json.dumps(
                        {"type": "error", "error": "invalid note map",
                         "problems": exc.problems}))
                except (SessionError, KeyError, TypeError, ValueError) as exc:
                    await ws.send_text(json.dumps(
                        {"type": "error", "error": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            if session.id in manager._sessions:
                manager.destroy(session.id)

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    else:
        @app.get("/")
        def index():
            return JSONResponse({"service": "handwave", "hint":
                                 "connect a WebSocket to /play; see /api/info"})

    return app
