import numpy as np
import pytest

from stackseg.phantom import PhantomSpec, make_phantom

# the end-to-end regression phantom; thresholds in test_acceptance were locked
# against exactly this spec
E2E_PHANTOM = PhantomSpec(
    dims=(64, 64, 64),
    center=(32.0, 32.0, 32.0),
    semi_axes=(16.0, 12.0, 10.0),
    fg_intensity=120.0,
    bg_intensity=20.0,
    noise_sigma=6.0,
    rng_seed=42,
)


@pytest.fixture(scope="session")
def e2e_phantom():
    return make_phantom(E2E_PHANTOM)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def random_mask(rng, shape, density=None) -> np.ndarray:
    density = rng.uniform(0.05, 0.6) if density is None else density
    return (rng.random(shape) < density).astype(np.uint8)


def random_blob_mask(rng, shape) -> np.ndarray:
    """Connected-ish random mask: a few boxes/balls unioned. More surface-like
    than iid noise."""
    mask = np.zeros(shape, dtype=np.uint8)
    for _ in range(int(rng.integers(1, 4))):
        center = [rng.integers(0, s) for s in shape]
        radius = int(rng.integers(1, max(2, min(shape) // 2)))
        grids = np.ogrid[tuple(slice(0, s) for s in shape)]
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        mask[dist2 <= radius * radius] = 1
    return mask
