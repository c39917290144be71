"""FastAPI server speaking the propagation wire protocol plus /v1/segment2d.

The model is stateful, so inference is serialized: one global lock guards
every backend call and concurrent streams queue FIFO on it. Streams are
evaluated lazily -- each GET .../next pulls one frame through the backend.
"""

import threading
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import VideoBackend, make_backend
from .config import BridgeConfig
from .wire import WireError, decode_frames, parse_stream_request, rle_decode, rle_encode


class _Stream:
    def __init__(self, indices, iterator):
        self.indices = indices
        self.iterator = iterator
        self.pos = 1
        self.failed: str | None = None


def create_app(config: BridgeConfig, backend: VideoBackend | None = None) -> FastAPI:
    backend = backend or make_backend(config)  # startup abort happens here
    app = FastAPI(title=f"segbridge ({backend.name})")
    streams: dict[str, _Stream] = {}
    registry_lock = threading.Lock()
    inference_lock = threading.Lock()  # one inference at a time, FIFO

    def error(status: int, code: str, message: str):
        return JSONResponse(status_code=status, content={"code": code, "message": message})

    @app.post("/v1/propagation")
    async def open_stream(request: Request):
        try:
            body = await request.json()
            indices, frames, prompt_mask, _direction = parse_stream_request(body)
        except WireError as exc:
            return error(400, "bad_request", str(exc))
        except Exception as exc:
            return error(400, "bad_request", f"unreadable body: {exc}")
        stream_id = uuid.uuid4().hex
        with inference_lock:
            iterator = backend.begin_stream(frames, prompt_mask)
        with registry_lock:
            streams[stream_id] = _Stream(indices, iterator)
        return {"stream_id": stream_id}

    @app.get("/v1/propagation/{stream_id}/next")
    def next_mask(stream_id: str):
        with registry_lock:
            stream = streams.get(stream_id)
        if stream is None:
            return error(404, "unknown_stream", stream_id)
        if stream.failed is not None:
            return error(500, "inference_error", stream.failed)
        if stream.pos >= len(stream.indices):
            return {"done": True}
        index = stream.indices[stream.pos]
        try:
            with inference_lock:
                mask = next(stream.iterator)
        except Exception as exc:  # per-stream error frame; stream stays poisoned
            stream.failed = f"frame {index}: {exc}"
            return error(500, "inference_error", stream.failed)
        stream.pos += 1
        return {"index": index, "mask_rle": rle_encode(np.asarray(mask))}

    @app.post("/v1/segment2d")
    async def segment2d(request: Request):
        try:
            body = await request.json()
            _, frames = decode_frames([body["frame"]])
        except (WireError, KeyError, TypeError) as exc:
            return error(400, "bad_request", f"bad frame: {exc}")
        frame = frames[0]
        mask = None
        if "mask_rle" in body:
            try:
                mask = rle_decode(list(body["mask_rle"]), frame.shape[0], frame.shape[1])
            except WireError as exc:
                return error(400, "bad_request", str(exc))
        clicks = body.get("clicks")
        box = body.get("box")
        if mask is None and box is None and not clicks:
            return error(400, "bad_request", "need clicks, box or mask_rle")
        try:
            with inference_lock:
                result = backend.segment_frame(frame, clicks, box, mask)
        except Exception as exc:
            return error(500, "inference_error", str(exc))
        return {"mask_rle": rle_encode(np.asarray(result))}

    @app.get("/healthz")
    def health():
        return {"backend": backend.name, "streams": len(streams)}

    return app
