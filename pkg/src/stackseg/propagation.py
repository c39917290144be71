"""Bidirectional mask propagation across a frame stack.

The prompted center slice is copied verbatim into the result; every other
slice is predicted by a Propagator walking outward, forward and backward, each
direction as an independent sequential stream. Directions share only immutable
inputs and may run concurrently.
"""

import base64
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests
from scipy import ndimage

from .errors import ContractError, ProtocolError, TransportError
from .rle import decode_mask, encode_mask
from .volume import FrameStack, MaskVolume, assemble_labels, set_slice

_CROSS = ndimage.generate_binary_structure(2, 1)
_BOX3 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PropagationPlan:
    """Visit orders for both directions; each starts at the prompted center."""

    center: int
    forward: tuple[int, ...]
    backward: tuple[int, ...]


def plan(n_slices: int, center: int) -> PropagationPlan:
    if not 0 <= center < n_slices:
        raise ContractError(f"center {center} out of range for {n_slices} slices")
    return PropagationPlan(
        center=center,
        forward=tuple(range(center, n_slices)),
        backward=tuple(range(center, -1, -1)),
    )


class PropagationStream(ABC):
    """One direction's sequential prediction stream."""

    @abstractmethod
    def step(self) -> np.ndarray:
        """Predict the next frame's mask. Called exactly len(frames)-1 times."""


class Propagator(ABC):
    """Factory for propagation streams. A Propagator instance is stateless
    configuration; every begin() opens an independent stream, so the two
    directions never share memory."""

    @abstractmethod
    def begin(
        self,
        frames: list[np.ndarray],
        prompt_mask: np.ndarray,
        direction: str = "forward",
        indices: list[int] | None = None,
    ) -> PropagationStream:
        """Open a stream over frames given in visit order; the prompt mask
        belongs to frames[0]. ``indices`` are the original slice indices."""


@dataclass(frozen=True)
class PropagationError:
    direction: str
    frame_index: int | None
    message: str


@dataclass(frozen=True)
class PropagationResult:
    mask: MaskVolume
    provenance: tuple  # per slice: "prompt" | "forward" | "backward" | None
    timings: tuple  # per slice: seconds | None
    errors: tuple = ()

    @property
    def complete(self) -> bool:
        return not self.errors and all(p is not None for p in self.provenance)


class _IdentityStream(PropagationStream):
    def __init__(self, prompt_mask: np.ndarray, remaining: int):
        self._mask = (np.asarray(prompt_mask) != 0).astype(np.uint8)
        self._remaining = remaining

    def step(self) -> np.ndarray:
        if self._remaining <= 0:
            raise ContractError("propagation stream exhausted")
        self._remaining -= 1
        return self._mask.copy()


class IdentityPropagator(Propagator):
    """Repeats the prompt mask for every frame. Useful as a trivial baseline
    and as the behavior contract for protocol echo servers."""

    def begin(self, frames, prompt_mask, direction="forward", indices=None):
        if len(frames) and np.asarray(prompt_mask).shape != np.asarray(frames[0]).shape:
            raise ContractError("prompt mask shape does not match frames")
        return _IdentityStream(prompt_mask, remaining=len(frames) - 1)


def _close3(mask: np.ndarray) -> np.ndarray:
    """3x3 morphological closing that stays extensive at the image border
    (dilation sees out-of-bounds as background, erosion as foreground)."""
    dilated = ndimage.binary_dilation(mask, structure=_BOX3, border_value=0)
    return ndimage.binary_erosion(dilated, structure=_BOX3, border_value=1)


class _ReferenceStream(PropagationStream):
    def __init__(self, frames, prompt_mask, band_k, min_overlap):
        self._frames = [np.asarray(f, dtype=np.float64) for f in frames]
        self._mask = np.asarray(prompt_mask) != 0
        self._pos = 0
        self._band_k = band_k
        self._min_overlap = min_overlap

    def step(self) -> np.ndarray:
        if self._pos + 1 >= len(self._frames):
            raise ContractError("propagation stream exhausted")
        prev_frame = self._frames[self._pos]
        self._pos += 1
        next_frame = self._frames[self._pos]
        if not self._mask.any():
            return np.zeros(next_frame.shape, dtype=np.uint8)
        values = prev_frame[self._mask]
        mu = float(values.mean())
        sigma = max(float(values.std()), 1.0)
        candidates = np.abs(next_frame - mu) <= self._band_k * sigma
        labeled, n = ndimage.label(candidates, structure=_CROSS)
        kept = np.zeros(next_frame.shape, dtype=bool)
        for lab in range(1, n + 1):
            comp = labeled == lab
            size = int(comp.sum())
            overlap = int(np.count_nonzero(comp & self._mask))
            if overlap >= self._min_overlap * size:
                kept |= comp
        self._mask = _close3(kept)
        return self._mask.astype(np.uint8)


class ReferencePropagator(Propagator):
    """Deterministic intensity-band tracker used as the offline stand-in for a
    video segmentation model.

    Per step: take the mean/std of the previous frame's intensities under the
    previous mask (std floored at 1), keep 4-connected components of the next
    frame's in-band pixels that overlap the previous mask by at least
    ``min_overlap`` of their area, then apply one pass of 3x3 closing. An
    empty mask propagates to empty from then on.
    """

    def __init__(self, band_k: float = 2.5, min_overlap: float = 0.3):
        if band_k <= 0:
            raise ContractError(f"band_k must be positive, got {band_k}")
        if not 0.0 <= min_overlap <= 1.0:
            raise ContractError(f"min_overlap must be in [0, 1], got {min_overlap}")
        self.band_k = float(band_k)
        self.min_overlap = float(min_overlap)

    def begin(self, frames, prompt_mask, direction="forward", indices=None):
        if len(frames) and np.asarray(prompt_mask).shape != np.asarray(frames[0]).shape:
            raise ContractError("prompt mask shape does not match frames")
        return _ReferenceStream(frames, prompt_mask, self.band_k, self.min_overlap)


def reference_propagator(band_k: float = 2.5, min_overlap: float = 0.3) -> Propagator:
    return ReferencePropagator(band_k=band_k, min_overlap=min_overlap)


class _RemoteStream(PropagationStream):
    def __init__(self, session, base_url, stream_id, expected_indices, shape, timeout):
        self._session = session
        self._url = f"{base_url}/v1/propagation/{stream_id}/next"
        self._expected = list(expected_indices)
        self._shape = shape
        self._timeout = timeout
        self._pos = 0

    def step(self) -> np.ndarray:
        if self._pos >= len(self._expected):
            raise ContractError("propagation stream exhausted")
        expected = self._expected[self._pos]
        try:
            resp = self._session.get(self._url, timeout=self._timeout)
        except requests.exceptions.Timeout as exc:
            raise TransportError(f"timed out waiting for frame {expected}", expected) from exc
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"transport failure at frame {expected}: {exc}", expected) from exc
        if resp.status_code != 200:
            raise ProtocolError(f"HTTP {resp.status_code} at frame {expected}", expected)
        body = resp.json()
        if body.get("done"):
            raise ProtocolError(f"stream ended early, frame {expected} missing", expected)
        if body.get("index") != expected:
            raise ProtocolError(
                f"out-of-order frame: got {body.get('index')}, expected {expected}", expected
            )
        try:
            mask = decode_mask(body["mask_rle"], self._shape[0], self._shape[1])
        except (KeyError, ContractError) as exc:
            raise ProtocolError(f"bad mask for frame {expected}: {exc}", expected) from exc
        self._pos += 1
        return mask


class RemotePropagator(Propagator):
    """Client for the propagation wire protocol (see docs: POST /v1/propagation
    then GET .../next per frame). Enforces a per-step timeout."""

    def __init__(self, endpoint: str, step_timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.step_timeout = float(step_timeout)
        self._session = requests.Session()

    def begin(self, frames, prompt_mask, direction="forward", indices=None):
        if direction not in ("forward", "backward"):
            raise ContractError(f"direction must be forward/backward, got {direction!r}")
        if indices is None:
            indices = list(range(len(frames)))
        frames = [np.ascontiguousarray(f, dtype=np.uint8) for f in frames]
        shape = frames[0].shape
        payload = {
            "frames": [
                {
                    "index": int(idx),
                    "width": int(f.shape[1]),
                    "height": int(f.shape[0]),
                    "pixels": base64.b64encode(f.tobytes()).decode("ascii"),
                }
                for idx, f in zip(indices, frames)
            ],
            "prompt": {"index": int(indices[0]), "mask_rle": encode_mask(prompt_mask)},
            "direction": direction,
        }
        try:
            resp = self._session.post(
                f"{self.endpoint}/v1/propagation", json=payload, timeout=self.step_timeout
            )
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"cannot reach propagation backend: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"HTTP {resp.status_code} opening stream")
        stream_id = resp.json().get("stream_id")
        if not stream_id:
            raise ProtocolError("response missing stream_id")
        return _RemoteStream(
            self._session, self.endpoint, stream_id, list(indices)[1:], shape, self.step_timeout
        )


def remote_propagator(endpoint: str, step_timeout: float = 30.0) -> Propagator:
    return RemotePropagator(endpoint, step_timeout=step_timeout)


def _run_direction(prop, stack, prompt_mask, direction, visit, on_slice=None):
    masks: dict[int, np.ndarray] = {}
    timings: dict[int, float] = {}
    error = None
    shape = stack.frame_shape
    try:
        frames = [stack.frames[i] for i in visit]
        stream = prop.begin(frames, prompt_mask, direction=direction, indices=list(visit))
        for pos in range(1, len(visit)):
            idx = visit[pos]
            t0 = time.perf_counter()
            mask = np.asarray(stream.step())
            if mask.shape != shape:
                raise ProtocolError(
                    f"mask shape {mask.shape} != frame shape {shape}", idx
                )
            masks[idx] = (mask != 0).astype(np.uint8)
            timings[idx] = time.perf_counter() - t0
            if on_slice is not None:
                on_slice(idx, direction)
    except Exception as exc:
        frame_index = getattr(exc, "frame_index", None)
        if frame_index is None and "idx" in locals():
            frame_index = idx
        error = PropagationError(direction, frame_index, str(exc))
    return masks, timings, error


def propagate(
    stack: FrameStack,
    center_mask: np.ndarray,
    center: int,
    prop: Propagator,
    concurrent_directions: bool = True,
    on_slice=None,
) -> PropagationResult:
    """Fill a whole mask volume from one prompted slice.

    The center slice of the result is always the prompt, voxel-exact. A
    mid-stream propagator failure leaves the remaining slices unfilled
    (provenance None) and is reported in ``errors``; the caller decides
    whether to retry. ``on_slice(index, direction)`` is invoked after each
    predicted slice, from the direction's worker thread.
    """
    center_mask = np.asarray(center_mask)
    if center_mask.shape != stack.frame_shape:
        raise ContractError(
            f"center mask shape {center_mask.shape} != frame shape {stack.frame_shape}"
        )
    p = plan(len(stack), center)
    jobs = [("forward", p.forward), ("backward", p.backward)]
    if concurrent_directions and len(stack) > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            outcomes = list(
                pool.map(
                    lambda j: _run_direction(prop, stack, center_mask, *j, on_slice=on_slice),
                    jobs,
                )
            )
    else:
        outcomes = [
            _run_direction(prop, stack, center_mask, *j, on_slice=on_slice) for j in jobs
        ]

    n = len(stack)
    labels = assemble_labels([None] * n, stack.axis, stack.source_dims)
    provenance: list = [None] * n
    timings: list = [None] * n
    errors: list[PropagationError] = []
    set_slice(labels, stack.axis, center, (center_mask != 0).astype(np.uint8))
    provenance[center] = "prompt"
    for (direction, _), (masks, times, error) in zip(jobs, outcomes):
        for idx, mask in masks.items():
            set_slice(labels, stack.axis, idx, mask)
            provenance[idx] = direction
        for idx, t in times.items():
            timings[idx] = t
        if error is not None:
            errors.append(error)
    return PropagationResult(
        mask=MaskVolume(dims=stack.source_dims, labels=labels),
        provenance=tuple(provenance),
        timings=tuple(timings),
        errors=tuple(errors),
    )
