"""Volumetric scan and mask containers plus slicing/windowing operations.

Conventions used throughout the package:

* Volume data is indexed ``data[x, y, z]`` with dims ``(nx, ny, nz)`` matching
  the on-disk voxel order of the supported file format.
* ``slice_of(v, axis, idx)`` returns the plane with ``row = (axis - 1) % 3``
  and ``col = (axis + 1) % 3``, both ascending. Restacking every slice along
  the same axis reproduces the array exactly (see ``assemble_labels``).
* All containers are immutable after construction; their numpy buffers are
  marked read-only so they can be shared across threads.
"""

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ContractError

VALID_AXES = (0, 1, 2)


def _freeze(arr: np.ndarray) -> np.ndarray:
    # copy so we never lock a caller-owned buffer
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Volume:
    """A 3D scalar scan: intensities, voxel spacing (mm) and world transform."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    data: np.ndarray
    modality_tag: str = ""
    affine: np.ndarray | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ContractError(f"dims must be three counts >= 1, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ContractError(f"spacing must be three positive values, got {self.spacing}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != dims:
            if data.size == int(np.prod(dims)):
                data = data.reshape(dims)
            else:
                raise ContractError(f"data size {data.size} does not match dims {dims}")
        affine = self.affine
        if affine is None:
            affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])
        affine = np.asarray(affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise ContractError(f"affine must be 4x4, got {affine.shape}")
        if abs(np.linalg.det(affine[:3, :3])) < 1e-12:
            raise ContractError("affine upper-left 3x3 block is singular")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "affine", _freeze(affine))


@dataclass(frozen=True)
class MaskVolume:
    """Binary labels aligned voxel-for-voxel with a Volume of the same dims."""

    dims: tuple[int, int, int]
    labels: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ContractError(f"dims must be three counts >= 1, got {self.dims}")
        labels = np.asarray(self.labels)
        if labels.shape != dims:
            if labels.size == int(np.prod(dims)):
                labels = labels.reshape(dims)
            else:
                raise ContractError(f"labels size {labels.size} does not match dims {dims}")
        if not np.isin(labels, (0, 1)).all():
            raise ContractError("mask labels must be 0 or 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", _freeze(labels.astype(np.uint8)))

    @classmethod
    def from_array(cls, labels: np.ndarray) -> "MaskVolume":
        labels = np.asarray(labels)
        return cls(dims=labels.shape, labels=labels)

    def foreground_count(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class WindowSpec:
    """Intensity window: percentile ranks, or a raw center/width pair.

    ``percentile`` mode: lo/hi are percentile ranks in [0, 100], lo < hi.
    ``hounsfield`` mode: lo is the window center, hi the window width (> 0);
    the window covers [center - width/2, center + width/2]. The lo < hi rule
    only applies to percentile mode since a center may legitimately exceed
    the width.
    """

    mode: str = "percentile"
    lo: float = 0.5
    hi: float = 99.5

    def __post_init__(self):
        if self.mode not in ("percentile", "hounsfield"):
            raise ContractError(f"unknown window mode {self.mode!r}")
        if self.mode == "percentile":
            if not (0.0 <= self.lo < self.hi <= 100.0):
                raise ContractError(
                    f"percentile ranks must satisfy 0 <= lo < hi <= 100, got ({self.lo}, {self.hi})"
                )
        else:
            if self.hi <= 0:
                raise ContractError(f"window width must be > 0, got {self.hi}")

    def bounds(self, data: np.ndarray) -> tuple[float, float]:
        """Resolve the window to raw intensity bounds for this data."""
        if self.mode == "hounsfield":
            half = self.hi / 2.0
            return self.lo - half, self.lo + half
        return (
            nearest_rank_percentile(data, self.lo),
            nearest_rank_percentile(data, self.hi),
        )


MR_DEFAULT_WINDOW = WindowSpec("percentile", 0.5, 99.5)
CT_DEFAULT_WINDOW = WindowSpec("hounsfield", 40.0, 400.0)  # abdominal soft tissue


def default_window(modality_tag: str) -> WindowSpec:
    """Conventional preset keyed off the modality tag (CT center/width, MR percentiles)."""
    if modality_tag.upper().startswith("CT"):
        return CT_DEFAULT_WINDOW
    return MR_DEFAULT_WINDOW


@dataclass(frozen=True)
class FrameStack:
    """Ordered 8-bit frames cut from a Volume along one axis, ready to treat as video."""

    axis: int
    frames: tuple
    source_dims: tuple[int, int, int]
    window: WindowSpec
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    degenerate_window: bool = False

    def __post_init__(self):
        if self.axis not in VALID_AXES:
            raise ContractError(f"axis must be one of {VALID_AXES}, got {self.axis}")
        frames = tuple(_freeze(np.asarray(f, dtype=np.uint8)) for f in self.frames)
        if len(frames) != self.source_dims[self.axis]:
            raise ContractError(
                f"{len(frames)} frames for axis extent {self.source_dims[self.axis]}"
            )
        shapes = {f.shape for f in frames}
        if len(shapes) > 1:
            raise ContractError(f"frames have mixed shapes: {sorted(shapes)}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def __len__(self) -> int:
        return len(self.frames)


def nearest_rank_percentile(data: np.ndarray, rank: float) -> float:
    """Nearest-rank percentile over all values: sorted[ceil(rank/100 * n)], 1-indexed."""
    flat = np.sort(np.asarray(data), axis=None)
    n = flat.size
    if n == 0:
        raise ContractError("percentile of empty data")
    k = int(np.ceil(rank / 100.0 * n))
    k = min(max(k, 1), n)
    return float(flat[k - 1])


def _plane_axes(axis: int) -> tuple[int, int]:
    # row = next-lower axis, col = next-higher axis, cyclically
    return (axis - 1) % 3, (axis + 1) % 3


def slice_of(x, axis: int, idx: int) -> np.ndarray:
    """Extract the 2D plane of a Volume or MaskVolume at ``idx`` along ``axis``.

    Orientation: rows run along axis ``(axis-1) % 3`` ascending, columns along
    ``(axis+1) % 3`` ascending.
    """
    arr = x.data if isinstance(x, Volume) else x.labels if isinstance(x, MaskVolume) else np.asarray(x)
    if axis not in VALID_AXES:
        raise ContractError(f"axis must be one of {VALID_AXES}, got {axis}")
    if not (0 <= idx < arr.shape[axis]):
        raise ContractError(f"slice {idx} out of range for axis {axis} of extent {arr.shape[axis]}")
    row_axis, col_axis = _plane_axes(axis)
    plane = np.moveaxis(arr, (row_axis, col_axis), (0, 1))[:, :, idx]
    return np.ascontiguousarray(plane)


def assemble_labels(slices: Iterable[np.ndarray], axis: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of slice_of for a full set of planes: rebuild the 3D label array."""
    row_axis, col_axis = _plane_axes(axis)
    out = np.zeros(dims, dtype=np.uint8)
    view = np.moveaxis(out, (row_axis, col_axis), (0, 1))
    for idx, plane in enumerate(slices):
        if plane is not None:
            view[:, :, idx] = plane
    return out


def set_slice(labels: np.ndarray, axis: int, idx: int, plane: np.ndarray) -> None:
    """Write one plane (slice_of orientation) into a writable 3D label array."""
    row_axis, col_axis = _plane_axes(axis)
    view = np.moveaxis(labels, (row_axis, col_axis), (0, 1))
    view[:, :, idx] = plane


def to_frames(vol: Volume, axis: int = 2, window: WindowSpec | None = None) -> FrameStack:
    """Window the whole volume to 8 bits and cut it into frames along ``axis``.

    The intensity map is linear from [lo, hi] (resolved per ``window``) to
    [0, 255] with round-half-up; values are clipped to the window first. A
    degenerate window (lo == hi, e.g. a constant volume) yields all-zero
    frames and sets ``degenerate_window`` instead of raising.
    """
    if axis not in VALID_AXES:
        raise ContractError(f"axis must be one of {VALID_AXES}, got {axis}")
    if window is None:
        window = default_window(vol.modality_tag)
    lo, hi = window.bounds(vol.data)
    degenerate = not (hi > lo)
    if degenerate:
        scaled = np.zeros(vol.dims, dtype=np.uint8)
    else:
        clipped = np.clip(vol.data, lo, hi)
        # multiply before dividing so exact midpoints stay exact (0.5 -> 128)
        scaled = np.floor((clipped - lo) * 255.0 / (hi - lo) + 0.5).astype(np.uint8)
    frames = [slice_of(scaled, axis, i) for i in range(vol.dims[axis])]
    return FrameStack(
        axis=axis,
        frames=tuple(frames),
        source_dims=vol.dims,
        window=window,
        spacing=vol.spacing,
        degenerate_window=degenerate,
    )
