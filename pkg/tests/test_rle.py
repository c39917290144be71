import numpy as np
import pytest

from stackseg.errors import ContractError
from stackseg.rle import decode_mask, encode_mask


def test_empty_mask_single_background_run():
    mask = np.zeros((4, 5), np.uint8)
    assert encode_mask(mask) == [20]


def test_full_mask_leads_with_zero_background_run():
    mask = np.ones((3, 3), np.uint8)
    assert encode_mask(mask) == [0, 9]


def test_known_pattern():
    mask = np.array([[0, 1, 1], [0, 0, 1]], np.uint8)
    assert encode_mask(mask) == [1, 2, 2, 1]


def test_round_trip_random(rng):
    for _ in range(50):
        h = int(rng.integers(1, 20))
        w = int(rng.integers(1, 20))
        mask = (rng.random((h, w)) < rng.uniform(0, 1)).astype(np.uint8)
        runs = encode_mask(mask)
        assert sum(runs) == h * w
        # runs alternate and only the leading background run may be zero
        assert all(r > 0 for r in runs[1:])
        assert np.array_equal(decode_mask(runs, h, w), mask)


def test_decode_rejects_wrong_sum():
    with pytest.raises(ContractError):
        decode_mask([3, 2], 2, 3)


def test_decode_rejects_negative_runs():
    with pytest.raises(ContractError):
        decode_mask([-1, 7], 2, 3)


def test_encode_rejects_3d():
    with pytest.raises(ContractError):
        encode_mask(np.zeros((2, 2, 2)))
