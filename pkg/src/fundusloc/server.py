"""HTTP review service for the annotation workflow.

Endpoints (all JSON unless noted):

    GET  /api/images                 ids, review status, dimensions
    GET  /api/images/{id}/file       raw image bytes, original format
    GET  /api/annotations/{id}       full annotation record
    PUT  /api/annotations/{id}       submit a review decision
    GET  /api/progress               per-status counts

Mutations are durably appended to the store log before the response is
sent. Concurrent edits of the same image are rejected with 409 unless
they are identical retries, which are no-ops.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import AnnotationStore
from .errors import InvalidBox, NotFound, VersionConflict
from .geometry import BoundingBox


class BoxModel(BaseModel):
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    w: int = Field(gt=0)
    h: int = Field(gt=0)


class DecisionModel(BaseModel):
    decision: str = Field(pattern="^(accept|reject|correct)$")
    box: BoxModel | None = None
    reviewer: str = Field(min_length=1)
    version: int = Field(ge=0)


def create_app(store: AnnotationStore, images_root: str | Path,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="fundusloc review service")
    root = Path(images_root)

    @app.get("/api/images")
    def list_images():
        out = []
        for entry in store.manifest.images:
            try:
                status = store.get(entry.image_id).status
            except NotFound:
                status = None
            out.append({"image_id": entry.image_id, "status": status,
                        "width": entry.width, "height": entry.height})
        return out

    @app.get("/api/images/{image_id}/file")
    def image_file(image_id: str):
        try:
            entry = store.manifest.get(image_id)
        except NotFound as exc:
            raise HTTPException(404, str(exc))
        path = root / entry.path
        if not path.exists():
            raise HTTPException(404, f"image file missing: {entry.path}")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.get("/api/annotations/{image_id}")
    def get_annotation(image_id: str):
        try:
            return store.get(image_id).to_dict()
        except NotFound as exc:
            raise HTTPException(404, str(exc))

    @app.put("/api/annotations/{image_id}")
    def put_annotation(image_id: str, body: DecisionModel):
        if body.decision == "correct" and body.box is None:
            raise HTTPException(422, "correct decision requires a box")
        if body.decision != "correct" and body.box is not None:
            raise HTTPException(422, f"{body.decision} decision does not take a box")
        box = None
        if body.box is not None:
            box = BoundingBox(body.box.x, body.box.y, body.box.w, body.box.h)
        try:
            record = store.apply_review(image_id, body.decision, body.reviewer,
                                        box=box, version=body.version)
        except NotFound as exc:
            raise HTTPException(404, str(exc))
        except VersionConflict as exc:
            raise HTTPException(409, detail={
                "message": str(exc), "current_version": exc.current_version,
            })
        except InvalidBox as exc:
            raise HTTPException(422, str(exc))
        return record.to_dict()

    @app.get("/api/progress")
    def progress():
        return store.progress()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(store: AnnotationStore, images_root: str | Path, host: str, port: int,
          ui_dir: str | Path | None = None) -> None:
    """Run the review service until interrupted."""
    import uvicorn

    app = create_app(store, images_root, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
