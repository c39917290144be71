"""Synthetic ellipsoid phantoms for offline testing.

Reproducibility: noise is drawn from numpy's PCG64 generator seeded with
``rng_seed``; normal samples use numpy's ziggurat implementation
(``Generator.normal``). Bitwise-identical output is guaranteed for one numpy
version; other implementations should match at the statistical level only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .volume import MaskVolume, Volume


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    fg_intensity: float = 120.0
    bg_intensity: float = 20.0
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ContractError(f"dims must be three counts >= 1, got {self.dims}")
        if any(a <= 0 for a in self.semi_axes):
            raise ContractError(f"semi-axes must be positive, got {self.semi_axes}")
        for c, a, d in zip(self.center, self.semi_axes, self.dims):
            if c - a < 0 or c + a > d - 1:
                raise ContractError(
                    f"ellipsoid (center {self.center}, semi-axes {self.semi_axes}) "
                    f"does not fit inside dims {self.dims}"
                )
        if self.fg_intensity == self.bg_intensity:
            raise ContractError("fg_intensity must differ from bg_intensity")
        if self.noise_sigma < 0:
            raise ContractError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def make_phantom(spec: PhantomSpec) -> tuple[Volume, MaskVolume]:
    """Build an ellipsoid phantom: the mask is the set of voxels whose
    center-normalized squared distance is <= 1; the volume is fg/bg intensity
    plus seeded Gaussian noise."""
    nx, ny, nz = spec.dims
    ix, iy, iz = np.ogrid[0:nx, 0:ny, 0:nz]
    cx, cy, cz = spec.center
    ax, ay, az = spec.semi_axes
    inside = (
        ((ix - cx) / ax) ** 2 + ((iy - cy) / ay) ** 2 + ((iz - cz) / az) ** 2
    ) <= 1.0
    labels = inside.astype(np.uint8)

    rng = np.random.Generator(np.random.PCG64(spec.rng_seed))
    data = np.where(inside, spec.fg_intensity, spec.bg_intensity).astype(np.float64)
    if spec.noise_sigma > 0:
        data = data + rng.normal(0.0, spec.noise_sigma, size=spec.dims)

    volume = Volume(dims=spec.dims, spacing=(1.0, 1.0, 1.0), data=data, modality_tag="PHANTOM")
    return volume, MaskVolume(dims=spec.dims, labels=labels)
