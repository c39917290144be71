"""FastAPI application for interactive annotation sessions.

Volumes come in either as a server-side path (JSON body) or a direct upload
(multipart form). Frames are served as 8-bit grayscale PNG; masks always as
run-length JSON -- overlay rendering is the client's job. Errors use the
{code, message, field?} shape throughout.
"""

import io
import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from ..errors import ContractError, MetricUndefinedError, VolumeFormatError
from ..metrics import Tolerance, dice, hd95, nsd
from ..nifti import load_volume, save_mask
from ..prompts import BACKGROUND, FOREGROUND, reference_2d_segmenter
from ..remote2d import Remote2DSegmenter
from ..rle import decode_mask, encode_mask
from ..volume import MaskVolume, WindowSpec, default_window, to_frames
from .schemas import (
    ClickRequest,
    CreateSessionRequest,
    ErrorBody,
    MaskPromptRequest,
    MaskResponse,
    MetricsResponse,
    PredictionResponse,
    ProgressResponse,
    PropagateRequest,
    SessionInfo,
    WindowModel,
)
from .sessions import IDLE, PROPAGATING, SessionStore, start_propagation


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        self.status = status
        self.body = ErrorBody(code=code, message=message, field=field)


def create_app(
    data_dir: str | Path | None = None,
    ttl_seconds: float = 7200.0,
    save_masks: bool = False,
    nsd_delta: float = 1.0,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="stackseg annotation service")
    # single-operator tool; the browser client may be served from another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    store = SessionStore(ttl_seconds=ttl_seconds)
    data_root = Path(data_dir) if data_dir else None
    app.state.store = store

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body.model_dump())

    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id}")
        return session

    def resolve_path(path_str: str) -> Path:
        path = Path(path_str)
        if not path.is_absolute() and data_root is not None:
            path = data_root / path
        if not path.exists():
            raise ApiError(404, "missing_file", f"no such file: {path}", field="path")
        return path

    def build_session(
        volume_path: Path,
        gt_path: Path | None,
        axis: int,
        window: WindowModel | None,
        modality_tag: str,
        segmenter_kind: str,
        segmenter_endpoint: str | None,
    ):
        try:
            volume = load_volume(volume_path, modality_tag=modality_tag)
        except (VolumeFormatError, ContractError, Exception) as exc:
            if isinstance(exc, (VolumeFormatError, ContractError)):
                raise ApiError(
                    422,
                    "bad_volume",
                    str(exc),
                    field=getattr(exc, "field", None) or "path",
                )
            raise
        gt = None
        if gt_path is not None:
            gt_vol = load_volume(gt_path)
            if gt_vol.dims != volume.dims:
                raise ApiError(
                    422,
                    "bad_volume",
                    f"ground truth dims {gt_vol.dims} do not match volume {volume.dims}",
                    field="gt_path",
                )
            gt = MaskVolume(dims=gt_vol.dims, labels=(gt_vol.data != 0).astype(np.uint8))
        if axis not in (0, 1, 2):
            raise ApiError(400, "bad_axis", f"axis must be 0, 1 or 2, got {axis}", field="axis")
        spec = (
            WindowSpec(mode=window.mode, lo=window.lo, hi=window.hi)
            if window
            else default_window(modality_tag)
        )
        frames = to_frames(volume, axis, spec)
        if segmenter_kind == "remote":
            if not segmenter_endpoint:
                raise ApiError(400, "bad_segmenter", "remote segmenter needs an endpoint")
            segmenter = Remote2DSegmenter(segmenter_endpoint)
        else:
            segmenter = reference_2d_segmenter()
        return store.create(volume, frames, axis, segmenter, gt)

    def session_info(session) -> SessionInfo:
        h, w = session.frames.frame_shape
        return SessionInfo(
            session_id=session.session_id,
            n_slices=len(session.frames),
            frame_height=h,
            frame_width=w,
            axis=session.axis,
            active_slice=session.active_slice,
            status=session.status,
            has_gt=session.gt is not None,
            prompt_count=len(session.events),
            degenerate_window=session.frames.degenerate_window,
        )

    @app.post("/sessions", status_code=201, response_model=SessionInfo)
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("file")
            if upload is None:
                raise ApiError(400, "missing_file", "multipart field 'file' required", field="file")
            tmp = Path(tempfile.mkdtemp(prefix="stackseg-upload-"))
            volume_path = tmp / (upload.filename or "volume.nii")
            volume_path.write_bytes(await upload.read())
            gt_path = None
            gt_upload = form.get("gt")
            if gt_upload is not None:
                gt_path = tmp / (gt_upload.filename or "gt.nii")
                gt_path.write_bytes(await gt_upload.read())
            window = None
            if form.get("window_lo") is not None and form.get("window_hi") is not None:
                window = WindowModel(
                    mode=form.get("window_mode", "percentile"),
                    lo=float(form["window_lo"]),
                    hi=float(form["window_hi"]),
                )
            session = build_session(
                volume_path,
                gt_path,
                int(form.get("axis", 2)),
                window,
                str(form.get("modality_tag", "")),
                str(form.get("segmenter", "reference")),
                form.get("segmenter_endpoint"),
            )
        else:
            try:
                body = CreateSessionRequest.model_validate(await request.json())
            except Exception as exc:
                raise ApiError(400, "bad_request", f"invalid create request: {exc}")
            session = build_session(
                resolve_path(body.path),
                resolve_path(body.gt_path) if body.gt_path else None,
                body.axis,
                body.window,
                body.modality_tag,
                body.segmenter,
                body.segmenter_endpoint,
            )
        return session_info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def get_info(session_id: str):
        return session_info(get_session(session_id))

    @app.post("/sessions/{session_id}/clicks", response_model=PredictionResponse)
    def add_click(session_id: str, body: ClickRequest):
        session = get_session(session_id)
        if body.label not in (FOREGROUND, BACKGROUND):
            raise ApiError(400, "bad_label", f"label must be foreground/background", field="label")
        with session.lock:
            if session.status != IDLE:
                raise ApiError(409, "busy", f"session is {session.status}")
            if not (0 <= body.slice < len(session.frames)):
                raise ApiError(400, "out_of_bounds", f"slice {body.slice} out of range", field="slice")
            try:
                session.add_click(body.slice, body.row, body.col, body.label)
            except ContractError as exc:
                raise ApiError(400, "out_of_bounds", str(exc), field="row")
            return PredictionResponse(
                slice=session.active_slice,
                round=session.click_rounds(session.active_slice),
                mask_rle=encode_mask(session.prediction),
                dice=session.gt_slice_dice(),
            )

    @app.post("/sessions/{session_id}/mask-prompt", response_model=PredictionResponse)
    def set_mask_prompt(session_id: str, body: MaskPromptRequest):
        session = get_session(session_id)
        with session.lock:
            if session.status != IDLE:
                raise ApiError(409, "busy", f"session is {session.status}")
            if not (0 <= body.slice < len(session.frames)):
                raise ApiError(400, "out_of_bounds", f"slice {body.slice} out of range", field="slice")
            h, w = session.frames.frame_shape
            try:
                mask = decode_mask(body.mask_rle, h, w)
            except ContractError as exc:
                raise ApiError(400, "bad_rle", str(exc), field="mask_rle")
            session.set_mask_prompt(body.slice, mask)
            return PredictionResponse(
                slice=session.active_slice,
                round=0,
                mask_rle=encode_mask(session.prediction),
                dice=session.gt_slice_dice(),
            )

    @app.post("/sessions/{session_id}/undo", response_model=PredictionResponse)
    def undo(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.status != IDLE:
                raise ApiError(409, "busy", f"session is {session.status}")
            try:
                session.undo()
            except ContractError as exc:
                raise ApiError(409, "empty_history", str(exc))
            mask = session.prediction
            h, w = session.frames.frame_shape
            return PredictionResponse(
                slice=session.active_slice,
                round=session.click_rounds(session.active_slice),
                mask_rle=encode_mask(mask if mask is not None else np.zeros((h, w), np.uint8)),
                dice=session.gt_slice_dice(),
            )

    @app.post("/sessions/{session_id}/propagate", status_code=202)
    def propagate_session(session_id: str, body: PropagateRequest):
        session = get_session(session_id)
        if body.backend not in ("reference", "remote"):
            raise ApiError(400, "bad_backend", f"unknown backend {body.backend!r}", field="backend")
        if body.backend == "remote" and not body.endpoint:
            raise ApiError(400, "bad_backend", "remote backend needs an endpoint", field="endpoint")
        with session.lock:
            if session.status != IDLE:
                raise ApiError(409, "busy", f"session is {session.status}")
            if session.prediction is None:
                raise ApiError(409, "no_prompt", "no prediction or mask prompt to propagate")

            def on_complete(s):
                if save_masks and data_root is not None and s.result is not None:
                    out = data_root / "masks"
                    out.mkdir(parents=True, exist_ok=True)
                    save_mask(s.result.mask, s.volume, out / f"{s.session_id}.nii.gz")

            start_propagation(session, body.backend, body.endpoint, on_complete=on_complete)
        return {"status": PROPAGATING, "total": len(session.frames)}

    @app.get("/sessions/{session_id}/progress", response_model=ProgressResponse)
    def progress(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.status == PROPAGATING:
                job = "running"
            elif session.propagation_error is not None:
                job = "error"
            elif session.result is not None:
                job = "done"
            else:
                job = "none"
            return ProgressResponse(
                status=session.status,
                job=job,
                done=session.progress_done,
                total=session.progress_total,
                provenance=list(session.result.provenance) if session.result else None,
                error=session.propagation_error,
            )

    @app.get("/sessions/{session_id}/frames/{k}.png")
    def get_frame(session_id: str, k: int):
        session = get_session(session_id)
        if not (0 <= k < len(session.frames)):
            raise ApiError(404, "out_of_bounds", f"slice {k} out of range", field="slice")
        image = Image.fromarray(session.frames.frames[k], mode="L")
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/sessions/{session_id}/masks/{k}", response_model=MaskResponse)
    def get_mask(session_id: str, k: int):
        session = get_session(session_id)
        if not (0 <= k < len(session.frames)):
            raise ApiError(404, "out_of_bounds", f"slice {k} out of range", field="slice")
        with session.lock:
            found = session.mask_for(k)
            if found is None:
                raise ApiError(404, "no_mask", f"no mask available for slice {k}")
            mask, provenance = found
            return MaskResponse(slice=k, mask_rle=encode_mask(mask), provenance=provenance)

    @app.get("/sessions/{session_id}/gt/{k}", response_model=MaskResponse)
    def get_gt_slice(session_id: str, k: int):
        session = get_session(session_id)
        if session.gt is None:
            raise ApiError(404, "no_ground_truth", "session has no ground truth attached")
        if not (0 <= k < len(session.frames)):
            raise ApiError(404, "out_of_bounds", f"slice {k} out of range", field="slice")
        from ..volume import slice_of as _slice_of

        gt_slice = _slice_of(session.gt, session.axis, k)
        return MaskResponse(slice=k, mask_rle=encode_mask(gt_slice), provenance="ground_truth")
    def metrics(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.gt is None:
                raise ApiError(409, "no_ground_truth", "session has no ground truth attached")
            if session.result is None:
                raise ApiError(409, "no_propagation", "propagation has not completed")
            pred = session.result.mask
            spacing = session.volume.spacing
            try:
                hd = hd95(pred, session.gt, spacing)
            except MetricUndefinedError:
                hd = None
            return MetricsResponse(
                dice=dice(pred, session.gt),
                nsd=nsd(pred, session.gt, spacing, Tolerance(nsd_delta)),
                hd95=hd,
                nsd_delta=nsd_delta,
            )

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        if not store.delete(session_id):
            raise ApiError(404, "unknown_session", f"no session {session_id}")
        return Response(status_code=204)

    return app
