"""Prompt types, the simulated-user click policy, and the interactive 2D loop.

The click policy is the standard deterministic robot user: place each click at
the deepest interior point (Euclidean distance transform argmax) of the
largest 4-connected error component. The distance transform treats
out-of-bounds as background, matching the surface convention used by the
metrics, and ties resolve to the smallest (row, col).

Human annotations bypass this policy entirely; they arrive as the same Prompt
type through the session service.
"""

from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import ContractError
from .metrics import dice
from .volume import MaskVolume, slice_of

FOREGROUND = "foreground"
BACKGROUND = "background"

_CROSS = ndimage.generate_binary_structure(2, 1)  # 4-connectivity


@dataclass(frozen=True)
class Click:
    row: int
    col: int
    label: str
    round: int = 0

    def __post_init__(self):
        if self.label not in (FOREGROUND, BACKGROUND):
            raise ContractError(f"click label must be foreground/background, got {self.label!r}")


@dataclass(frozen=True)
class Prompt:
    """One of: a cumulative click list, a box, or a full mask — on one slice."""

    slice_index: int
    clicks: tuple[Click, ...] | None = None
    box: tuple[int, int, int, int] | None = None  # (r0, c0, r1, c1) inclusive
    mask: np.ndarray | None = None

    def __post_init__(self):
        populated = sum(v is not None for v in (self.clicks, self.box, self.mask))
        if populated != 1:
            raise ContractError("exactly one of clicks/box/mask must be set")
        if self.clicks is not None:
            object.__setattr__(self, "clicks", tuple(self.clicks))
        if self.box is not None:
            r0, c0, r1, c1 = self.box
            if r0 > r1 or c0 > c1:
                raise ContractError(f"box corners must be ordered, got {self.box}")


class InteractiveSegmenter(ABC):
    """A promptable 2D segmenter. Implementations must be deterministic: the
    same frame and the same cumulative prompt yield the same mask."""

    @abstractmethod
    def predict(self, frame: np.ndarray, prompt: Prompt) -> np.ndarray:
        """Return a binary mask of the frame's shape for the given prompt."""

    def reset(self) -> None:
        """Drop any per-session state. Default: stateless, nothing to do."""


@dataclass(frozen=True)
class SessionRound:
    round: int
    click: Click
    dice_after: float


@dataclass(frozen=True)
class SliceSessionLog:
    rounds: tuple[SessionRound, ...]
    final_mask: np.ndarray
    error: str | None = None

    def __len__(self) -> int:
        return len(self.rounds)


def distance_to_background(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each foreground pixel to the nearest
    background pixel, with out-of-bounds counting as background."""
    padded = np.pad(np.asarray(mask, dtype=bool), 1)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def _deepest_pixel(mask: np.ndarray) -> tuple[int, int]:
    # np.argmax takes the first maximum in row-major order, i.e. the
    # lexicographically smallest (row, col) among ties
    dt = distance_to_background(mask)
    flat = int(np.argmax(dt))
    return np.unravel_index(flat, dt.shape)


def select_center_slice(gt: MaskVolume, axis: int) -> int:
    """Slice with the largest foreground cross-section (ties -> lower index)."""
    counts = [int(slice_of(gt, axis, i).sum()) for i in range(gt.dims[axis])]
    if sum(counts) == 0:
        raise ContractError("ground truth mask is empty")
    return int(np.argmax(counts))


def initial_click(gt_slice: np.ndarray) -> Click:
    """First click: deepest interior point of the ground-truth foreground."""
    gt_slice = np.asarray(gt_slice)
    if not gt_slice.any():
        raise ContractError("cannot place a click on an empty slice")
    row, col = _deepest_pixel(gt_slice != 0)
    return Click(int(row), int(col), FOREGROUND)


def _largest_component(error: np.ndarray) -> np.ndarray:
    labeled, n = ndimage.label(error, structure=_CROSS)
    if n == 1:
        return labeled == 1
    sizes = np.bincount(labeled.reshape(-1))[1:]
    best_size = sizes.max()
    tied = [lab for lab in range(1, n + 1) if sizes[lab - 1] == best_size]
    if len(tied) == 1:
        return labeled == tied[0]
    # tie: pick the component containing the lexicographically smallest pixel
    first_flat = {lab: int(np.argmax(labeled.reshape(-1) == lab)) for lab in tied}
    best = min(tied, key=lambda lab: first_flat[lab])
    return labeled == best


def next_click(pred: np.ndarray, gt: np.ndarray) -> Click | None:
    """Click at the center of the largest prediction error, labeled by the
    error type at that pixel. Returns None when the prediction is perfect."""
    pred = np.asarray(pred) != 0
    gt = np.asarray(gt) != 0
    if pred.shape != gt.shape:
        raise ContractError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    error = pred ^ gt
    if not error.any():
        return None
    component = _largest_component(error)
    row, col = _deepest_pixel(component)
    label = FOREGROUND if gt[row, col] else BACKGROUND
    return Click(int(row), int(col), label)


def run_click_session(
    frame: np.ndarray,
    gt_slice: np.ndarray,
    seg: InteractiveSegmenter,
    k_rounds: int,
) -> SliceSessionLog:
    """Iterate clicks against a segmenter for up to ``k_rounds`` rounds,
    stopping early on a perfect prediction. On segmenter failure the partial
    log is returned with the error cause attached."""
    if k_rounds < 1:
        raise ContractError(f"k_rounds must be >= 1, got {k_rounds}")
    gt_slice = np.asarray(gt_slice) != 0
    if not gt_slice.any():
        raise ContractError("ground-truth slice is empty")
    seg.reset()
    clicks: list[Click] = []
    pred = np.zeros_like(gt_slice, dtype=np.uint8)
    rounds: list[SessionRound] = []
    for r in range(1, k_rounds + 1):
        if r == 1:
            click = initial_click(gt_slice)
        else:
            click = next_click(pred, gt_slice)
            if click is None:
                break
        click = replace(click, round=r)
        clicks.append(click)
        try:
            pred = seg.predict(frame, Prompt(slice_index=0, clicks=tuple(clicks)))
        except Exception as exc:  # propagator/transport failures abort the session
            return SliceSessionLog(tuple(rounds), final_mask=pred, error=str(exc))
        pred = (np.asarray(pred) != 0).astype(np.uint8)
        rounds.append(SessionRound(round=r, click=click, dice_after=dice(pred, gt_slice)))
        if np.array_equal(pred != 0, gt_slice):
            break
    return SliceSessionLog(tuple(rounds), final_mask=pred)


_NEIGHBORS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


class RegionGrowSegmenter(InteractiveSegmenter):
    """Deterministic classical stand-in for a promptable model's image mode.

    Foreground clicks seed flood fills that accept 4-connected pixels within
    ``tolerance`` of the running mean intensity of the region grown so far.
    Background clicks permanently block their 8-neighborhood. A mask prompt is
    returned verbatim; a box prompt grows from the box center, confined to the
    box.
    """

    def __init__(self, tolerance: float = 25.0):
        if tolerance <= 0:
            raise ContractError(f"tolerance must be positive, got {tolerance}")
        self.tolerance = float(tolerance)

    def predict(self, frame: np.ndarray, prompt: Prompt) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        if prompt.mask is not None:
            mask = np.asarray(prompt.mask)
            if mask.shape != frame.shape:
                raise ContractError(f"mask shape {mask.shape} != frame shape {frame.shape}")
            return (mask != 0).astype(np.uint8)
        if prompt.box is not None:
            r0, c0, r1, c1 = prompt.box
            seed = ((r0 + r1) // 2, (c0 + c1) // 2)
            bounds = (max(r0, 0), max(c0, 0), min(r1, frame.shape[0] - 1), min(c1, frame.shape[1] - 1))
            return self._grow(frame, [seed], blocked=np.zeros(frame.shape, bool), bounds=bounds)
        return self._from_clicks(frame, prompt.clicks or ())

    def _from_clicks(self, frame: np.ndarray, clicks: tuple[Click, ...]) -> np.ndarray:
        blocked = np.zeros(frame.shape, dtype=bool)
        for c in clicks:
            if not (0 <= c.row < frame.shape[0] and 0 <= c.col < frame.shape[1]):
                raise ContractError(f"click ({c.row}, {c.col}) outside frame {frame.shape}")
            if c.label == BACKGROUND:
                r0, r1 = max(c.row - 1, 0), min(c.row + 2, frame.shape[0])
                c0, c1 = max(c.col - 1, 0), min(c.col + 2, frame.shape[1])
                blocked[r0:r1, c0:c1] = True
        seeds = [(c.row, c.col) for c in clicks if c.label == FOREGROUND]
        return self._grow(frame, seeds, blocked, bounds=None)

    def _grow(self, frame, seeds, blocked, bounds) -> np.ndarray:
        h, w = frame.shape
        if bounds is None:
            bounds = (0, 0, h - 1, w - 1)
        r0, c0, r1, c1 = bounds
        result = np.zeros((h, w), dtype=np.uint8)
        for seed in seeds:
            sr, sc = seed
            if blocked[sr, sc] or not (r0 <= sr <= r1 and c0 <= sc <= c1):
                continue
            accepted = np.zeros((h, w), dtype=bool)
            accepted[sr, sc] = True
            total = frame[sr, sc]
            count = 1
            queue = deque([(sr, sc)])
            while queue:
                pr, pc = queue.popleft()
                for dr, dc in _NEIGHBORS_4:
                    nr, nc = pr + dr, pc + dc
                    if not (r0 <= nr <= r1 and c0 <= nc <= c1):
                        continue
                    if accepted[nr, nc] or blocked[nr, nc]:
                        continue
                    if abs(frame[nr, nc] - total / count) <= self.tolerance:
                        accepted[nr, nc] = True
                        total += frame[nr, nc]
                        count += 1
                        queue.append((nr, nc))
            result |= accepted
        return result


def reference_2d_segmenter(tolerance: float = 25.0) -> InteractiveSegmenter:
    """The built-in offline interactive segmenter (region growing)."""
    return RegionGrowSegmenter(tolerance=tolerance)
