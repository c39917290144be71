import numpy as np
import pytest

from stackseg.errors import ContractError
from stackseg.phantom import PhantomSpec, make_phantom


def simple_spec(**overrides):
    params = dict(
        dims=(32, 32, 32),
        center=(16.0, 16.0, 16.0),
        semi_axes=(8.0, 8.0, 8.0),
        fg_intensity=120.0,
        bg_intensity=20.0,
        noise_sigma=0.0,
        rng_seed=0,
    )
    params.update(overrides)
    return PhantomSpec(**params)


def test_mask_count_matches_brute_force():
    _, mask = make_phantom(simple_spec())
    count = 0
    for i in range(32):
        for j in range(32):
            for k in range(32):
                if ((i - 16) ** 2 + (j - 16) ** 2 + (k - 16) ** 2) / 64.0 <= 1.0:
                    count += 1
    assert mask.foreground_count() == count == 2109


def test_noise_free_volume_two_valued():
    vol, mask = make_phantom(simple_spec())
    inside = vol.data[mask.labels == 1]
    outside = vol.data[mask.labels == 0]
    assert (inside == 120.0).all()
    assert (outside == 20.0).all()


def test_equal_intensities_rejected_but_mask_is_intensity_free():
    with pytest.raises(ContractError):
        simple_spec(fg_intensity=50.0, bg_intensity=50.0)
    # nearly-equal intensities: mask unchanged
    _, mask_a = make_phantom(simple_spec())
    _, mask_b = make_phantom(simple_spec(fg_intensity=50.0, bg_intensity=49.0))
    assert np.array_equal(mask_a.labels, mask_b.labels)


def test_same_seed_is_bitwise_identical():
    vol_a, _ = make_phantom(simple_spec(noise_sigma=5.0, rng_seed=77))
    vol_b, _ = make_phantom(simple_spec(noise_sigma=5.0, rng_seed=77))
    assert np.array_equal(vol_a.data, vol_b.data)


def test_different_seed_differs():
    vol_a, _ = make_phantom(simple_spec(noise_sigma=5.0, rng_seed=1))
    vol_b, _ = make_phantom(simple_spec(noise_sigma=5.0, rng_seed=2))
    assert not np.array_equal(vol_a.data, vol_b.data)


def test_mask_reflection_symmetry():
    _, mask = make_phantom(simple_spec(semi_axes=(8.0, 6.0, 5.0)))
    labels = mask.labels
    c = 16
    for d in range(1, 16):
        assert np.array_equal(labels[c - d, :, :], labels[c + d, :, :])
        assert np.array_equal(labels[:, c - d, :], labels[:, c + d, :])
        assert np.array_equal(labels[:, :, c - d], labels[:, :, c + d])


def test_ellipsoid_must_fit():
    with pytest.raises(ContractError):
        simple_spec(semi_axes=(20.0, 8.0, 8.0))
    with pytest.raises(ContractError):
        simple_spec(center=(2.0, 16.0, 16.0))
