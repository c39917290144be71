"""Segmentation evaluation: overlap, surface agreement and distance metrics.

Conventions (documented because the literature varies):

* Dice of two empty masks is 1.0.
* Surfaces are foreground voxels with at least one 6-connected background
  neighbor, where out-of-bounds counts as background. Surface points are voxel
  indices scaled by spacing, i.e. millimeters.
* Surface dice counts, in the numerator, the surface points of EACH mask
  within tolerance of the other surface (sum of both counts), over the total
  number of surface points. Both surfaces empty -> 1.0, exactly one -> 0.0.
* Percentiles use the nearest-rank method.
* Nearest-neighbor distances are exact (KD-tree backed).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractError, MetricUndefinedError
from .volume import MaskVolume


def _labels(x) -> np.ndarray:
    if isinstance(x, MaskVolume):
        return x.labels
    return np.asarray(x)


@dataclass(frozen=True)
class Tolerance:
    """Surface-agreement distance threshold in millimeters."""

    delta: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.delta) or self.delta < 0:
            raise ContractError(f"tolerance must be finite and >= 0, got {self.delta}")


@dataclass(frozen=True)
class SurfacePointSet:
    """Boundary voxels of a mask in millimeter coordinates."""

    points: np.ndarray  # (n, ndim) float64
    source_dims: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CaseMetrics:
    case_id: str
    dice: float
    nsd: float
    hd95: float | None  # None when undefined (empty mask on either side)
    salient_dice: float | None = None
    salient_nsd: float | None = None
    salient_fallback: bool = False  # set when no salient slice existed

    def __post_init__(self):
        for name in ("dice", "nsd", "salient_dice", "salient_nsd"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ContractError(f"{name} = {v} outside [0, 1]")
        if self.hd95 is not None and self.hd95 < 0:
            raise ContractError(f"hd95 = {self.hd95} negative")


@dataclass(frozen=True)
class RoundEntry:
    points_added: int
    dice_after: float


@dataclass(frozen=True)
class RoundLog:
    """Per-round interaction record: how many points were given, dice after."""

    rounds: tuple[RoundEntry, ...]

    def __post_init__(self):
        entries = tuple(
            e if isinstance(e, RoundEntry) else RoundEntry(*e) for e in self.rounds
        )
        for e in entries:
            if e.points_added < 0:
                raise ContractError(f"points_added must be >= 0, got {e.points_added}")
        object.__setattr__(self, "rounds", entries)

    def __len__(self) -> int:
        return len(self.rounds)


def dice(x, y) -> float:
    """Overlap score 2|x n y| / (|x| + |y|); 1.0 when both masks are empty."""
    xa, ya = _labels(x), _labels(y)
    if xa.shape != ya.shape:
        raise ContractError(f"mask shapes differ: {xa.shape} vs {ya.shape}")
    xs = int(np.count_nonzero(xa))
    ys = int(np.count_nonzero(ya))
    if xs + ys == 0:
        return 1.0
    inter = int(np.count_nonzero(np.logical_and(xa, ya)))
    return 2.0 * inter / (xs + ys)


def extract_surface(m, spacing=(1.0, 1.0, 1.0)) -> SurfacePointSet:
    """Foreground voxels with a 6-connected background or out-of-bounds neighbor,
    scaled by spacing into millimeters."""
    arr = _labels(m).astype(bool)
    if arr.ndim != 3:
        raise ContractError(f"expected a 3D mask, got {arr.ndim}D")
    interior = np.ones_like(arr)
    for axis in range(3):
        fwd = np.roll(arr, 1, axis=axis)
        bwd = np.roll(arr, -1, axis=axis)
        # np.roll wraps; force the wrapped border to background
        sl = [slice(None)] * 3
        sl[axis] = 0
        fwd[tuple(sl)] = False
        sl[axis] = -1
        bwd[tuple(sl)] = False
        interior &= fwd & bwd
    surface = arr & ~interior
    idx = np.argwhere(surface).astype(np.float64)
    points = idx * np.asarray(spacing, dtype=np.float64)
    return SurfacePointSet(points=points, source_dims=arr.shape)


def _directed_distances(src: SurfacePointSet, dst: SurfacePointSet) -> np.ndarray:
    """Exact distance from every src point to its nearest dst point."""
    dists, _ = cKDTree(dst.points).query(src.points, k=1)
    return np.atleast_1d(dists)


def nsd(x, y, spacing=(1.0, 1.0, 1.0), tol: Tolerance | float = Tolerance()) -> float:
    """Surface agreement: fraction of each mask's surface points within
    ``tol`` millimeters of the other mask's surface."""
    delta = tol.delta if isinstance(tol, Tolerance) else Tolerance(float(tol)).delta
    xa, ya = _labels(x), _labels(y)
    if xa.shape != ya.shape:
        raise ContractError(f"mask shapes differ: {xa.shape} vs {ya.shape}")
    sx = extract_surface(xa, spacing)
    sy = extract_surface(ya, spacing)
    if len(sx) == 0 and len(sy) == 0:
        return 1.0
    if len(sx) == 0 or len(sy) == 0:
        return 0.0
    close_x = int(np.count_nonzero(_directed_distances(sx, sy) <= delta))
    close_y = int(np.count_nonzero(_directed_distances(sy, sx) <= delta))
    return (close_x + close_y) / (len(sx) + len(sy))


def hd95(x, y, spacing=(1.0, 1.0, 1.0)) -> float:
    """95th percentile (nearest-rank) of the pooled symmetric surface distances,
    in millimeters. Undefined when either mask is empty."""
    xa, ya = _labels(x), _labels(y)
    if xa.shape != ya.shape:
        raise ContractError(f"mask shapes differ: {xa.shape} vs {ya.shape}")
    sx = extract_surface(xa, spacing)
    sy = extract_surface(ya, spacing)
    if len(sx) == 0 or len(sy) == 0:
        raise MetricUndefinedError("hd95 is undefined for an empty mask")
    pooled = np.sort(
        np.concatenate([_directed_distances(sx, sy), _directed_distances(sy, sx)])
    )
    rank = int(np.ceil(0.95 * pooled.size))
    return float(pooled[max(rank, 1) - 1])


def salient_slices(gt, axis: int, threshold: int = 256) -> list[int]:
    """Indices of slices whose foreground count is strictly greater than
    ``threshold`` (the filtered evaluation subset), ascending."""
    if threshold < 0:
        raise ContractError(f"threshold must be >= 0, got {threshold}")
    arr = _labels(gt)
    other_axes = tuple(a for a in range(arr.ndim) if a != axis)
    counts = np.count_nonzero(arr, axis=other_axes)
    return [int(i) for i in np.flatnonzero(counts > threshold)]


def masked_metrics(
    pred,
    gt,
    axis: int,
    indices: list[int],
    spacing=(1.0, 1.0, 1.0),
    tol: Tolerance | float = Tolerance(),
) -> dict:
    """Dice/NSD on the sub-volume formed by stacking only the listed slices.

    Surfaces are re-extracted on the sub-volume, so slice boundaries created by
    the filter count as background there.
    """
    if len(indices) == 0:
        raise MetricUndefinedError("no slices selected for filtered metrics")
    pa, ga = _labels(pred), _labels(gt)
    if pa.shape != ga.shape:
        raise ContractError(f"mask shapes differ: {pa.shape} vs {ga.shape}")
    for i in indices:
        if not (0 <= i < pa.shape[axis]):
            raise ContractError(f"slice index {i} out of range on axis {axis}")
    psub = np.take(pa, indices, axis=axis)
    gsub = np.take(ga, indices, axis=axis)
    return {
        "dice": dice(psub, gsub),
        "nsd": nsd(psub, gsub, spacing, tol),
    }


def dice_growth_per_point(log: RoundLog, baseline_dice: float = 0.0) -> list[float]:
    """Per-round dice increase divided by the points added that round. The
    round before the first is anchored at ``baseline_dice``. Negative growth
    is reported as-is."""
    growth = []
    prev = baseline_dice
    for i, entry in enumerate(log.rounds):
        if entry.points_added <= 0:
            raise ContractError(f"round {i + 1} added no points")
        growth.append((entry.dice_after - prev) / entry.points_added)
        prev = entry.dice_after
    return growth


def aggregate(cases: list[CaseMetrics]) -> dict:
    """Mean / population std / count per metric. Cases with undefined hd95 are
    excluded from the hd95 aggregate and counted separately."""
    if not cases:
        raise ContractError("cannot aggregate an empty case list")
    summary: dict = {"n_cases": len(cases)}
    fields = ("dice", "nsd", "hd95", "salient_dice", "salient_nsd")
    for name in fields:
        values = [getattr(c, name) for c in cases if getattr(c, name) is not None]
        entry = {"count": len(values)}
        if values:
            arr = np.asarray(values, dtype=np.float64)
            entry["mean"] = float(arr.mean())
            entry["std"] = float(arr.std())
        if name == "hd95":
            entry["excluded"] = len(cases) - len(values)
        summary[name] = entry
    return summary
