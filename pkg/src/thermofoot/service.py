"""Session-oriented HTTP API for the clinician UI.

Sessions persist as on-disk directories holding the same session document
the CLI consumes, which keeps CLI/service parity a file-level fact. State
machine per session:

    AwaitingFrames -> AwaitingSegmentation -> AwaitingLandmarks -> Analyzed

The segmentation step runs automatically when the plantar frame arrives;
scribbles re-run it. Scribble or landmark updates drop any existing
report. Out-of-order calls return 409, invalid payloads 422, unknown
sessions 404.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import uuid
from datetime import datetime
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel
from scipy import ndimage

from .analysis import Hotspot, Verdict, run_analysis
from .errors import ParseError, PipelineError, PreconditionError, ThermofootError
from .radiometry import (
    CalibrationCurve,
    FrameView,
    RawFrame,
    counts_to_temperature,
    load_calibration,
    load_raw_frame,
    save_calibration,
    save_raw_frame,
)
from .render import pseudocolor, render_overlay
from .segmentation import Rect, grabcut, normalize_for_segmentation, split_feet
from .session import SessionDocument, parse_scribbles

STATE_AWAITING_FRAMES = "AwaitingFrames"
STATE_AWAITING_SEGMENTATION = "AwaitingSegmentation"
STATE_AWAITING_LANDMARKS = "AwaitingLandmarks"
STATE_ANALYZED = "Analyzed"


class CreateSessionBody(BaseModel):
    calibration: dict | None = None
    config: dict = {}
    subject: dict = {}
    suspect_foot: str = "left"


class FrameBody(BaseModel):
    sidecar: dict
    counts_b64: str


class ScribblesBody(BaseModel):
    scribbles: list


class LandmarksBody(BaseModel):
    left: list
    right: list


class ReviewNoteBody(BaseModel):
    hotspot_index: int
    action: str  # "accept" | "dismiss"
    note: str = ""


class SessionStore:
    """Directory-backed session state with per-session locking."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def path(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, body: CreateSessionBody) -> dict:
        session_id = uuid.uuid4().hex[:12]
        session_dir = self.path(session_id)
        session_dir.mkdir(parents=True)
        (session_dir / "frames").mkdir()
        if body.calibration is not None:
            curve = CalibrationCurve.from_dict(body.calibration)
            save_calibration(curve, session_dir / "calibration.json")
        if body.suspect_foot not in ("left", "right"):
            raise PreconditionError("suspect_foot must be 'left' or 'right'")
        meta = {
            "id": session_id,
            "state": STATE_AWAITING_FRAMES,
            "suspect_foot": body.suspect_foot,
            "config": dict(body.config),
            "subject": dict(body.subject),
            "landmarks": None,
            "scribbles": [],
            "frames": {},
            "audit": [],
        }
        self.write_meta(session_id, meta)
        self.audit(meta, "create_session", {"subject": body.subject})
        self.write_meta(session_id, meta)
        return meta

    def read_meta(self, session_id: str) -> dict:
        meta_path = self.path(session_id) / "state.json"
        if not meta_path.exists():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return json.loads(meta_path.read_text())

    def write_meta(self, session_id: str, meta: dict) -> None:
        (self.path(session_id) / "state.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True)
        )

    @staticmethod
    def audit(meta: dict, action: str, detail: dict | None = None) -> None:
        meta["audit"].append(
            {"seq": len(meta["audit"]), "action": action, "detail": detail or {}}
        )


def _decode_frame_body(body: FrameBody) -> RawFrame:
    sidecar = body.sidecar
    try:
        view = FrameView(
            kind=sidecar["view"]["kind"], angle_deg=sidecar["view"].get("angle_deg")
        )
        width = int(sidecar["width"])
        height = int(sidecar["height"])
        captured_at = datetime.fromisoformat(sidecar["captured_at"])
        frame_id = str(sidecar["frame_id"])
        raw = base64.b64decode(body.counts_b64)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad frame payload: {exc}") from exc
    if len(raw) != width * height * 2:
        raise ParseError(
            f"counts payload is {len(raw)} bytes, expected {width * height * 2}"
        )
    counts = np.frombuffer(raw, dtype="<u2").reshape(height, width).copy()
    return RawFrame(counts=counts, view=view, captured_at=captured_at, frame_id=frame_id)


def _frame_slug(view: FrameView) -> str:
    return "plantar" if view.kind == "plantar" else f"periphery_{view.angle_deg}"


def create_app(data_dir: str | Path) -> FastAPI:
    store = SessionStore(Path(data_dir))
    app = FastAPI(title="thermofoot service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ThermofootError)
    async def domain_error_handler(request, exc: ThermofootError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    def session_document(meta: dict) -> SessionDocument:
        session_dir = store.path(meta["id"])
        if "plantar" not in meta["frames"]:
            raise HTTPException(status_code=409, detail="no plantar frame uploaded")
        if not (session_dir / "calibration.json").exists():
            raise HTTPException(status_code=409, detail="no calibration on this session")
        return SessionDocument(
            plantar_frame=meta["frames"]["plantar"],
            periphery_frames=[
                path for slug, path in sorted(meta["frames"].items()) if slug != "plantar"
            ],
            calibration="calibration.json",
            landmarks=meta["landmarks"],
            scribbles=[tuple(s) for s in meta["scribbles"]],
            suspect_foot=meta["suspect_foot"],
            config=meta["config"],
            subject=meta["subject"],
            base_dir=session_dir,
        )

    def try_segmentation(meta: dict) -> None:
        """Run (or re-run) segmentation; advance state on success."""
        session_dir = store.path(meta["id"])
        frame = load_raw_frame(session_dir / meta["frames"]["plantar"])
        curve = load_calibration(session_dir / "calibration.json")
        tmap = counts_to_temperature(frame, curve)
        norm = normalize_for_segmentation(tmap)
        h, w = tmap.shape
        scribbles = parse_scribbles(meta["scribbles"]) or None
        try:
            mask = grabcut(
                norm.intensities,
                Rect(2, 2, h - 2, w - 2),
                scribbles=scribbles,
                forced_background=norm.forced_background,
            )
            split_feet(mask)  # two feet must be separable to proceed
        except ThermofootError as exc:
            meta["state"] = STATE_AWAITING_SEGMENTATION
            store.audit(meta, "segmentation_failed", {"error": str(exc)})
            return
        np.save(session_dir / "mask.npy", mask.mask)
        meta["state"] = STATE_AWAITING_LANDMARKS
        store.audit(meta, "segmentation_ok", {"foreground_px": int(mask.area)})

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        meta = store.create(body)
        return {"id": meta["id"], "state": meta["state"]}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        meta = store.read_meta(session_id)
        return meta

    @app.post("/sessions/{session_id}/frames")
    def post_frame(session_id: str, body: FrameBody):
        with store.lock(session_id):
            meta = store.read_meta(session_id)
            frame = _decode_frame_body(body)
            slug = _frame_slug(frame.view)
            rel = f"frames/{slug}.raw"
            save_raw_frame(frame, store.path(session_id) / rel)
            meta["frames"][slug] = rel
            store.audit(meta, "frame_uploaded", {"view": slug, "frame_id": frame.frame_id})
            if slug == "plantar":
                try_segmentation(meta)
            store.write_meta(session_id, meta)
            return {"state": meta["state"], "view": slug}

    @app.post("/sessions/{session_id}/scribbles")
    def post_scribbles(session_id: str, body: ScribblesBody):
        with store.lock(session_id):
            meta = store.read_meta(session_id)
            if meta["state"] == STATE_AWAITING_FRAMES:
                raise HTTPException(status_code=409, detail="upload frames first")
            parse_scribbles(body.scribbles)  # 422 on malformed records
            meta["scribbles"].extend([list(s) for s in body.scribbles])
            store.audit(meta, "scribbles_added", {"count": len(body.scribbles)})
            (store.path(session_id) / "report.json").unlink(missing_ok=True)
            try_segmentation(meta)
            store.write_meta(session_id, meta)
            return {"state": meta["state"], "scribble_count": len(meta["scribbles"])}

    @app.post("/sessions/{session_id}/landmarks")
    def post_landmarks(session_id: str, body: LandmarksBody):
        with store.lock(session_id):
            meta = store.read_meta(session_id)
            if meta["state"] in (STATE_AWAITING_FRAMES, STATE_AWAITING_SEGMENTATION):
                raise HTTPException(
                    status_code=409, detail=f"cannot set landmarks in {meta['state']}"
                )
            from .registration import LandmarkSet

            for foot, pts in (("left", body.left), ("right", body.right)):
                LandmarkSet(points=np.asarray(pts, dtype=np.float64), foot=foot)
            meta["landmarks"] = {"left": body.left, "right": body.right}
            if meta["state"] == STATE_ANALYZED:
                meta["state"] = STATE_AWAITING_LANDMARKS
                (store.path(session_id) / "report.json").unlink(missing_ok=True)
            store.audit(meta, "landmarks_set", {})
            store.write_meta(session_id, meta)
            return {"state": meta["state"]}

    @app.post("/sessions/{session_id}/analyze")
    def post_analyze(session_id: str):
        with store.lock(session_id):
            meta = store.read_meta(session_id)
            if meta["state"] not in (STATE_AWAITING_LANDMARKS, STATE_ANALYZED):
                raise HTTPException(
                    status_code=409, detail=f"cannot analyze in {meta['state']}"
                )
            if not meta["landmarks"]:
                raise HTTPException(status_code=409, detail="landmarks not set")
            doc = session_document(meta)
            try:
                inputs = doc.to_pipeline_inputs()
                report, artifacts = run_analysis(inputs)
            except ThermofootError as exc:
                raise HTTPException(
                    status_code=422, detail={"error": type(exc).__name__, "message": str(exc)}
                ) from exc
            report.save(store.path(session_id) / "report.json")
            meta["state"] = STATE_ANALYZED
            store.audit(meta, "analyzed", {"hotspots": len(report.data["hotspots"])})
            store.write_meta(session_id, meta)
            return json.loads(report.to_json())

    @app.post("/sessions/{session_id}/notes")
    def post_review_note(session_id: str, body: ReviewNoteBody):
        with store.lock(session_id):
            meta = store.read_meta(session_id)
            if meta["state"] != STATE_ANALYZED:
                raise HTTPException(status_code=409, detail="session not analyzed yet")
            if body.action not in ("accept", "dismiss"):
                raise HTTPException(status_code=422, detail=f"unknown action {body.action!r}")
            report = json.loads((store.path(session_id) / "report.json").read_text())
            if not 0 <= body.hotspot_index < len(report["hotspots"]):
                raise HTTPException(status_code=422, detail="hotspot_index out of range")
            store.audit(
                meta,
                "hotspot_reviewed",
                {
                    "hotspot_index": body.hotspot_index,
                    "action": body.action,
                    "note": body.note,
                },
            )
            store.write_meta(session_id, meta)
            return {"state": meta["state"], "audit_entries": len(meta["audit"])}

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        meta = store.read_meta(session_id)
        if meta["state"] != STATE_ANALYZED:
            raise HTTPException(status_code=409, detail="session not analyzed yet")
        return json.loads((store.path(session_id) / "report.json").read_text())

    @app.get("/sessions/{session_id}/render/{view}")
    def get_render(
        session_id: str, view: str, overlay: str | None = Query(default=None)
    ):
        meta = store.read_meta(session_id)
        session_dir = store.path(session_id)
        rel = meta["frames"].get(view)
        if rel is None:
            raise HTTPException(status_code=404, detail=f"no {view} frame")
        if not (session_dir / "calibration.json").exists():
            raise HTTPException(status_code=409, detail="no calibration on this session")
        frame = load_raw_frame(session_dir / rel)
        curve = load_calibration(session_dir / "calibration.json")
        tmap = counts_to_temperature(frame, curve)
        if overlay is None:
            rgb = pseudocolor(tmap)
        elif overlay == "mask":
            mask_path = session_dir / "mask.npy"
            if not mask_path.exists():
                raise HTTPException(status_code=409, detail="no segmentation yet")
            mask = np.load(mask_path)
            rgb = pseudocolor(tmap)
            edge = mask & ~ndimage.binary_erosion(mask)
            rgb[edge] = (255, 255, 255)
        elif overlay == "hotspots":
            if meta["state"] != STATE_ANALYZED:
                raise HTTPException(status_code=409, detail="session not analyzed yet")
            report = json.loads((session_dir / "report.json").read_text())
            spots = [
                Hotspot(
                    pixel_coords=np.zeros((0, 2), dtype=np.int64),
                    shape=tmap.shape,
                    bbox=tuple(h["bbox"]),
                    area_px=h["area_px"],
                    area_cm2=h["area_cm2"],
                    mean_delta_c=h["mean_delta_c"],
                    peak_delta_c=h["peak_delta_c"],
                    verdict=Verdict(h["verdict"]) if h["verdict"] else None,
                )
                for h in report["hotspots"]
            ]
            rgb = render_overlay(tmap, spots)
        else:
            raise HTTPException(status_code=422, detail=f"unknown overlay {overlay!r}")
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    return app
