"""Run-length codec for binary masks.

The encoding is shared verbatim by the propagation wire protocol, the session
service and the browser client, so it has to stay bit-exact: row-major scan,
alternating run lengths starting with background (first run may be 0 when the
mask begins with foreground), runs sum to width*height.
"""

import numpy as np

from .errors import ContractError


def encode_mask(mask: np.ndarray) -> list[int]:
    """Encode a 2D binary mask as alternating background/foreground run lengths."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ContractError(f"expected a 2D mask, got shape {mask.shape}")
    flat = (mask.reshape(-1) != 0).astype(np.int8)
    if flat.size == 0:
        return []
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def decode_mask(runs: list[int], height: int, width: int) -> np.ndarray:
    """Decode run lengths back to a (height, width) uint8 mask.

    Raises ContractError when the runs are negative or do not sum to the
    expected pixel count.
    """
    total = height * width
    if any((not isinstance(r, (int, np.integer))) or r < 0 for r in runs):
        raise ContractError("run lengths must be non-negative integers")
    if sum(runs) != total:
        raise ContractError(
            f"run lengths sum to {sum(runs)}, expected {total} ({height}x{width})"
        )
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value = 1 - value
    return flat.reshape(height, width)
