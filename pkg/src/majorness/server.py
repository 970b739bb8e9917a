"""FastAPI wrapper around StudyService.

Routes (JSON bodies):
  GET  /api/task?rater=R&kind=pair|placement   -> TaskAssignment or {"exhausted": true}
  POST /api/annotation {task_id, choice|walk}  -> acknowledgement
  GET  /api/audio/{item_id}                    -> WAV stream, byte ranges honored
  GET  /api/study/status                       -> coverage counters

When a built frontend directory exists it is served at the root path.
"""
from __future__ import annotations

import re
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .errors import ParameterError, StateError, ValidationError
from .service import StudyService

_RANGE_RE = re.compile(r"bytes=(\d*)-(\d*)$")


def create_app(service: StudyService, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="majorness annotation service")
    app.state.service = service

    @app.get("/api/task")
    def get_task(rater: str, kind: str):
        try:
            task = service.next_task(rater, kind)
        except (ValidationError, StateError, ParameterError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if task is None:
            return {"exhausted": True}
        body = task.to_dict()
        if task.kind == "pair":
            body["audio"] = {
                side: f"/api/audio/{task.payload[side]}" for side in ("left", "right")
            }
        else:
            body["audio"] = {"item": f"/api/audio/{task.payload['item']}"}
        return body

    @app.post("/api/annotation")
    async def post_annotation(request: Request):
        body = await request.json()
        task_id = body.get("task_id")
        if not task_id:
            raise HTTPException(status_code=400, detail="task_id is required")
        try:
            ack = service.submit_annotation(task_id, body)
        except ValidationError as exc:
            status = 404 if "unknown or expired" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc))
        return ack

    @app.get("/api/audio/{item_id}")
    def get_audio(item_id: str, request: Request):
        path = service.audio_path(item_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"no audio for item {item_id}")
        data = path.read_bytes()
        headers = {"accept-ranges": "bytes"}
        range_header = request.headers.get("range")
        if range_header:
            m = _RANGE_RE.match(range_header.strip())
            if not m or (not m.group(1) and not m.group(2)):
                raise HTTPException(status_code=416, detail="malformed Range header")
            start = int(m.group(1)) if m.group(1) else None
            end = int(m.group(2)) if m.group(2) else None
            if start is None:  # suffix form: last N bytes
                start = max(0, len(data) - end)
                end = len(data) - 1
            elif end is None or end >= len(data):
                end = len(data) - 1
            if start >= len(data) or start > end:
                raise HTTPException(status_code=416, detail="range out of bounds")
            chunk = data[start : end + 1]
            headers["content-range"] = f"bytes {start}-{end}/{len(data)}"
            return Response(chunk, status_code=206, media_type="audio/wav", headers=headers)
        return Response(data, media_type="audio/wav", headers=headers)

    @app.get("/api/study/status")
    def get_status():
        return JSONResponse(service.status())

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="frontend")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<html><body><h1>majorness annotation service</h1>"
                "<p>No frontend build found. API is under /api/.</p></body></html>"
            )

    return app
