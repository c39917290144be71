"""Wire-protocol message helpers and the backend conformance suite.

Any propagation backend (the bundled echo server, a model bridge, future
servers) must speak:

  POST /v1/propagation
      {"frames": [{"index", "width", "height", "pixels": <base64 raw 8-bit
       row-major>}], "prompt": {"index", "mask_rle"}, "direction":
       "forward"|"backward"}  ->  {"stream_id": str}
  GET  /v1/propagation/{stream_id}/next
      -> {"index": int, "mask_rle": [int, ...]}  or  {"done": true}

mask_rle is the shared row-major run-length encoding: alternating
background/foreground run lengths, first run background (possibly 0), runs
summing to width*height.

``run_protocol_conformance`` drives a live server through the fixture corpus
and checks structure only (count, order, shapes, RLE validity, determinism),
so it applies to any backend regardless of what the masks contain.
"""

import base64
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ProtocolError
from .propagation import remote_propagator
from .rle import decode_mask, encode_mask


def encode_frame(index: int, frame: np.ndarray) -> dict:
    frame = np.ascontiguousarray(frame, dtype=np.uint8)
    if frame.ndim != 2:
        raise ContractError(f"frames must be 2D, got shape {frame.shape}")
    return {
        "index": int(index),
        "width": int(frame.shape[1]),
        "height": int(frame.shape[0]),
        "pixels": base64.b64encode(frame.tobytes()).decode("ascii"),
    }


def decode_frame(payload: dict) -> tuple[int, np.ndarray]:
    try:
        index = int(payload["index"])
        width = int(payload["width"])
        height = int(payload["height"])
        raw = base64.b64decode(payload["pixels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed frame payload: {exc}") from exc
    if len(raw) != width * height:
        raise ProtocolError(
            f"frame {index}: {len(raw)} pixel bytes for {width}x{height}"
        )
    return index, np.frombuffer(raw, dtype=np.uint8).reshape(height, width)


def parse_propagation_request(body: dict) -> tuple[list[int], list[np.ndarray], int, np.ndarray, str]:
    """Validate and decode a stream-open request. Returns (indices, frames,
    prompt_index, prompt_mask, direction). Raises ProtocolError on any
    violation -- servers map this to a 400."""
    if not isinstance(body, dict):
        raise ProtocolError("request body must be an object")
    frames_field = body.get("frames")
    if not isinstance(frames_field, list) or not frames_field:
        raise ProtocolError("frames must be a non-empty list")
    indices, frames = [], []
    for item in frames_field:
        idx, frame = decode_frame(item)
        indices.append(idx)
        frames.append(frame)
    if len({f.shape for f in frames}) != 1:
        raise ProtocolError("frames have mixed shapes")
    direction = body.get("direction")
    if direction not in ("forward", "backward"):
        raise ProtocolError(f"direction must be forward/backward, got {direction!r}")
    prompt = body.get("prompt")
    if not isinstance(prompt, dict):
        raise ProtocolError("prompt must be an object")
    if prompt.get("index") != indices[0]:
        raise ProtocolError(
            f"prompt index {prompt.get('index')} is not the first frame {indices[0]}"
        )
    h, w = frames[0].shape
    try:
        mask = decode_mask(list(prompt["mask_rle"]), h, w)
    except (KeyError, TypeError, ContractError) as exc:
        raise ProtocolError(f"bad prompt mask_rle: {exc}") from exc
    return indices, frames, indices[0], mask, direction


def next_payload(index: int, mask: np.ndarray) -> dict:
    return {"index": int(index), "mask_rle": encode_mask(mask)}


DONE_PAYLOAD = {"done": True}


@dataclass(frozen=True)
class ConformanceCase:
    name: str
    frames: tuple
    indices: tuple
    prompt_mask: np.ndarray
    direction: str


def conformance_cases() -> list[ConformanceCase]:
    """Deterministic fixture corpus shared by every backend's conformance run."""
    rng = np.random.Generator(np.random.PCG64(7))
    cases = []

    frames = tuple(np.full((12, 10), 40 + 5 * i, dtype=np.uint8) for i in range(6))
    prompt = np.zeros((12, 10), dtype=np.uint8)
    prompt[3:8, 2:7] = 1
    cases.append(ConformanceCase("block_forward", frames, tuple(range(4, 10)), prompt, "forward"))
    cases.append(
        ConformanceCase("block_backward", frames, tuple(range(5, -1, -1)), prompt, "backward")
    )

    frames = tuple(rng.integers(0, 256, size=(9, 16), dtype=np.uint8) for _ in range(4))
    prompt = (rng.random((9, 16)) > 0.6).astype(np.uint8)
    cases.append(ConformanceCase("noise", frames, (2, 3, 4, 5), prompt, "forward"))

    frames = tuple(np.zeros((5, 5), dtype=np.uint8) for _ in range(3))
    cases.append(
        ConformanceCase("empty_prompt", frames, (0, 1, 2), np.zeros((5, 5), np.uint8), "forward")
    )

    frames = (np.full((6, 7), 100, dtype=np.uint8),)
    cases.append(
        ConformanceCase("single_frame", frames, (0,), np.ones((6, 7), np.uint8), "forward")
    )
    return cases


def run_protocol_conformance(endpoint: str, step_timeout: float = 10.0) -> dict:
    """Drive a live backend through the fixture corpus; raises on any protocol
    violation. Returns per-case masks (by name) for additional checks."""
    results: dict[str, list[np.ndarray]] = {}
    for case in conformance_cases():
        observed = []
        for attempt in range(2):  # determinism: identical inputs, identical masks
            prop = remote_propagator(endpoint, step_timeout=step_timeout)
            stream = prop.begin(
                list(case.frames),
                case.prompt_mask,
                direction=case.direction,
                indices=list(case.indices),
            )
            masks = [stream.step() for _ in range(len(case.frames) - 1)]
            for m in masks:
                if m.shape != case.frames[0].shape:
                    raise ProtocolError(
                        f"{case.name}: mask shape {m.shape} != frame {case.frames[0].shape}"
                    )
            observed.append(masks)
        if len(observed[0]) != len(case.frames) - 1:
            raise ProtocolError(f"{case.name}: wrong mask count")
        for a, b in zip(observed[0], observed[1]):
            if not np.array_equal(a, b):
                raise ProtocolError(f"{case.name}: backend is not deterministic")
        results[case.name] = observed[0]
    return results
