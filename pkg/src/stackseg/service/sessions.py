"""In-memory annotation sessions: event-sourced prompt state plus background
propagation.

Replay semantics: the current 2D prediction is a pure function of the prompt
history. Only events on the active slice since the most recent mask prompt
participate -- a mask prompt pins the prediction to that mask, clicks after it
start a fresh click refinement. Undo pops the last event and recomputes by
replay, so incremental state can never drift from the log.
"""

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..prompts import Click, InteractiveSegmenter, Prompt, select_center_slice
from ..propagation import (
    PropagationResult,
    propagate,
    reference_propagator,
    remote_propagator,
)
from ..volume import FrameStack, MaskVolume, Volume, slice_of

IDLE = "idle"
PREDICTING = "predicting"
PROPAGATING = "propagating"
ERROR = "error"


@dataclass
class PromptEvent:
    kind: str  # "click" | "mask"
    slice_index: int
    click: Click | None = None
    mask: np.ndarray | None = None


@dataclass
class AnnotationSession:
    session_id: str
    volume: Volume
    frames: FrameStack
    axis: int
    segmenter: InteractiveSegmenter
    gt: MaskVolume | None = None
    active_slice: int = 0
    events: list[PromptEvent] = field(default_factory=list)
    prediction: np.ndarray | None = None
    status: str = IDLE
    progress_done: int = 0
    progress_total: int = 0
    propagation_error: str | None = None
    result: PropagationResult | None = None
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.RLock = field(default_factory=threading.RLock)

    # -- event replay ------------------------------------------------------

    def _replay_events(self) -> list[PromptEvent]:
        relevant = [e for e in self.events if e.slice_index == self.active_slice]
        for i in range(len(relevant) - 1, -1, -1):
            if relevant[i].kind == "mask":
                return relevant[i:]
        return relevant

    def recompute_prediction(self) -> None:
        if self.events:
            self.active_slice = self.events[-1].slice_index
        window = self._replay_events()
        if not window:
            self.prediction = None
            return
        if window[-1].kind == "mask" and len(window) == 1:
            self.prediction = window[-1].mask.copy()
            return
        clicks = tuple(e.click for e in window if e.kind == "click")
        frame = self.frames.frames[self.active_slice]
        prompt = Prompt(slice_index=self.active_slice, clicks=clicks)
        self.prediction = (np.asarray(self.segmenter.predict(frame, prompt)) != 0).astype(
            np.uint8
        )

    # -- prompt mutations (caller holds the lock) ---------------------------

    def add_click(self, slice_index: int, row: int, col: int, label: str) -> None:
        h, w = self.frames.frame_shape
        if not (0 <= row < h and 0 <= col < w):
            raise ContractError(f"click ({row}, {col}) outside frame {h}x{w}")
        rounds = self.click_rounds(slice_index) + 1
        self.events.append(
            PromptEvent(
                "click", slice_index, click=Click(row, col, label, round=rounds)
            )
        )
        self.recompute_prediction()

    def set_mask_prompt(self, slice_index: int, mask: np.ndarray) -> None:
        self.events = [PromptEvent("mask", slice_index, mask=mask.astype(np.uint8))]
        self.recompute_prediction()

    def undo(self) -> None:
        if not self.events:
            raise ContractError("prompt history is empty")
        self.events.pop()
        self.recompute_prediction()

    def click_rounds(self, slice_index: int) -> int:
        window = [
            e
            for e in self._replay_events()
            if e.kind == "click" and e.slice_index == slice_index
        ]
        return len(window)

    def gt_slice_dice(self) -> float | None:
        if self.gt is None or self.prediction is None:
            return None
        from ..metrics import dice

        return dice(self.prediction, slice_of(self.gt, self.axis, self.active_slice))

    def mask_for(self, slice_index: int) -> tuple[np.ndarray, str] | None:
        """The best-known mask for a slice: propagated if available, else the
        live prediction on the prompted slice."""
        if self.result is not None and self.result.provenance[slice_index] is not None:
            return (
                slice_of(self.result.mask, self.axis, slice_index),
                self.result.provenance[slice_index],
            )
        if self.prediction is not None and slice_index == self.active_slice:
            return self.prediction, "prompt"
        return None


class SessionStore:
    """Thread-safe registry with TTL eviction for idle sessions."""

    def __init__(self, ttl_seconds: float = 7200.0):
        self.ttl_seconds = float(ttl_seconds)
        self._sessions: dict[str, AnnotationSession] = {}
        self._lock = threading.Lock()

    def create(
        self,
        volume: Volume,
        frames: FrameStack,
        axis: int,
        segmenter: InteractiveSegmenter,
        gt: MaskVolume | None,
    ) -> AnnotationSession:
        self.sweep()
        if gt is not None and gt.foreground_count() > 0:
            active = select_center_slice(gt, axis)
        else:
            active = len(frames) // 2
        session = AnnotationSession(
            session_id=uuid.uuid4().hex,
            volume=volume,
            frames=frames,
            axis=axis,
            segmenter=segmenter,
            gt=gt,
            active_slice=active,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> AnnotationSession | None:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is not None:
            session.last_access = time.monotonic()
        return session

    def delete(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None

    def sweep(self) -> None:
        cutoff = time.monotonic() - self.ttl_seconds
        with self._lock:
            stale = [
                sid
                for sid, s in self._sessions.items()
                if s.last_access < cutoff and s.status != PROPAGATING
            ]
            for sid in stale:
                del self._sessions[sid]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def start_propagation(
    session: AnnotationSession,
    backend: str,
    endpoint: str | None,
    on_complete=None,
) -> None:
    """Kick off background propagation from the session's current prediction.
    The caller must hold the session lock and have verified idle status."""
    prompt_mask = session.prediction.copy()
    center = session.active_slice
    prop = (
        remote_propagator(endpoint)
        if backend == "remote"
        else reference_propagator()
    )
    session.status = PROPAGATING
    session.result = None
    session.progress_done = 0
    session.progress_total = len(session.frames) - 1
    session.propagation_error = None

    def progress(_idx, _direction):
        with session.lock:
            session.progress_done += 1

    def worker():
        # the job may fail, but the session always returns to idle so the
        # operator can retry or keep annotating
        try:
            result = propagate(
                session.frames, prompt_mask, center, prop, on_slice=progress
            )
            with session.lock:
                session.result = result
                if result.errors:
                    session.propagation_error = "; ".join(
                        f"{e.direction}@{e.frame_index}: {e.message}"
                        for e in result.errors
                    )
                session.status = IDLE
        except Exception as exc:
            with session.lock:
                session.propagation_error = f"{type(exc).__name__}: {exc}"
                session.status = IDLE
        if on_complete is not None:
            on_complete(session)

    threading.Thread(target=worker, daemon=True).start()
