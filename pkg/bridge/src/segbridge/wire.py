"""Wire-protocol message handling, implemented independently of any client.

Run-length contract (shared, bit-exact): row-major scan, alternating
background/foreground run lengths, first run is background (possibly 0), runs
sum to width*height.
"""

import base64

import numpy as np


class WireError(ValueError):
    pass


def rle_encode(mask: np.ndarray) -> list[int]:
    flat = (np.asarray(mask).reshape(-1) != 0).astype(np.int8)
    runs: list[int] = []
    value = 0
    run = 0
    for pixel in flat:
        if pixel == value:
            run += 1
        else:
            runs.append(run)
            value = 1 - value
            run = 1
    runs.append(run)
    return [int(r) for r in runs]


def rle_decode(runs: list[int], height: int, width: int) -> np.ndarray:
    if any(not isinstance(r, int) or r < 0 for r in runs):
        raise WireError("run lengths must be non-negative integers")
    if sum(runs) != height * width:
        raise WireError(f"runs sum to {sum(runs)}, expected {height * width}")
    flat = np.zeros(height * width, dtype=np.uint8)
    pos, value = 0, 0
    for run in runs:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value = 1 - value
    return flat.reshape(height, width)


def decode_frames(payload: list) -> tuple[list[int], list[np.ndarray]]:
    if not isinstance(payload, list) or not payload:
        raise WireError("frames must be a non-empty list")
    indices, frames = [], []
    for item in payload:
        try:
            index = int(item["index"])
            width = int(item["width"])
            height = int(item["height"])
            raw = base64.b64decode(item["pixels"])
        except (KeyError, TypeError, ValueError) as exc:
            raise WireError(f"malformed frame: {exc}") from exc
        if len(raw) != width * height:
            raise WireError(f"frame {index}: {len(raw)} bytes for {width}x{height}")
        indices.append(index)
        frames.append(np.frombuffer(raw, dtype=np.uint8).reshape(height, width))
    if len({f.shape for f in frames}) != 1:
        raise WireError("frames have mixed shapes")
    return indices, frames


def parse_stream_request(body: dict) -> tuple[list[int], list[np.ndarray], np.ndarray, str]:
    indices, frames = decode_frames(body.get("frames"))
    direction = body.get("direction")
    if direction not in ("forward", "backward"):
        raise WireError(f"direction must be forward/backward, got {direction!r}")
    prompt = body.get("prompt")
    if not isinstance(prompt, dict):
        raise WireError("prompt must be an object")
    if prompt.get("index") != indices[0]:
        raise WireError("prompt index must be the first frame")
    h, w = frames[0].shape
    try:
        mask = rle_decode(list(prompt["mask_rle"]), h, w)
    except (KeyError, TypeError) as exc:
        raise WireError(f"bad prompt: {exc}") from exc
    return indices, frames, mask, direction
