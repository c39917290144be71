import numpy as np
import pytest
from scipy import ndimage

from conftest import random_blob_mask, random_mask
from oracles import dice_oracle, hd95_oracle, nsd_oracle, surface_points_oracle
from stackseg.errors import ContractError, MetricUndefinedError
from stackseg.metrics import (
    CaseMetrics,
    RoundLog,
    Tolerance,
    aggregate,
    dice,
    dice_growth_per_point,
    extract_surface,
    hd95,
    masked_metrics,
    nsd,
    salient_slices,
)


class TestDice:
    def test_identity(self):
        m = np.zeros((5, 5, 5), np.uint8)
        m[1:4, 1:4, 1:4] = 1
        assert dice(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((5, 5, 5), np.uint8)
        b = np.zeros((5, 5, 5), np.uint8)
        a[0, 0, 0] = 1
        b[4, 4, 4] = 1
        assert dice(a, b) == 0.0

    def test_both_empty_is_one(self):
        z = np.zeros((3, 3, 3), np.uint8)
        assert dice(z, z) == 1.0

    def test_shifted_block(self):
        # 4x4 block vs same block shifted by 2 columns in a 16^2 grid
        a = np.zeros((16, 16), np.uint8)
        b = np.zeros((16, 16), np.uint8)
        a[6:10, 6:10] = 1
        b[6:10, 8:12] = 1
        overlap = int(np.logical_and(a, b).sum())  # brute-force overlap count
        assert overlap == 8
        assert dice(a, b) == 2 * 8 / (16 + 16) == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            dice(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_symmetric_random(self, rng):
        for _ in range(25):
            a = random_mask(rng, (16, 16, 16))
            b = random_mask(rng, (16, 16, 16))
            assert dice(a, b) == dice(b, a)
            assert 0.0 <= dice(a, b) <= 1.0


class TestSurface:
    def test_single_voxel(self):
        m = np.zeros((5, 5, 5), np.uint8)
        m[2, 2, 2] = 1
        s = extract_surface(m)
        assert len(s) == 1
        assert np.array_equal(s.points, [[2.0, 2.0, 2.0]])

    def test_solid_cube_has_hollow_interior(self):
        m = np.zeros((8, 8, 8), np.uint8)
        m[2:6, 2:6, 2:6] = 1
        assert len(extract_surface(m)) == 4**3 - 2**3 == 56

    def test_full_grid_surface_is_boundary(self):
        m = np.ones((4, 4, 4), np.uint8)
        s = extract_surface(m)
        assert len(s) == 4**3 - 2**3

    def test_spacing_scales_points(self):
        m = np.zeros((3, 3, 3), np.uint8)
        m[1, 1, 1] = 1
        s = extract_surface(m, (2.0, 3.0, 4.0))
        assert np.array_equal(s.points, [[2.0, 3.0, 4.0]])

    def test_matches_oracle(self, rng):
        for _ in range(10):
            m = random_blob_mask(rng, (10, 12, 9))
            ours = extract_surface(m, (1.0, 2.0, 0.5)).points
            ref = surface_points_oracle(m, (1.0, 2.0, 0.5))
            assert np.array_equal(
                sorted(map(tuple, ours)), sorted(map(tuple, ref))
            )


class TestNsd:
    def test_identity(self):
        m = np.zeros((6, 6, 6), np.uint8)
        m[1:5, 1:5, 1:5] = 1
        assert nsd(m, m, tol=Tolerance(0.0)) == 1.0
        assert nsd(m, m, tol=Tolerance(3.0)) == 1.0

    def test_two_voxels_apart(self):
        a = np.zeros((5, 5, 5), np.uint8)
        b = np.zeros((5, 5, 5), np.uint8)
        a[1, 2, 2] = 1
        b[3, 2, 2] = 1  # 2 mm apart at unit spacing
        assert nsd(a, b, tol=Tolerance(1.0)) == 0.0
        assert nsd(a, b, tol=Tolerance(2.0)) == 1.0

    def test_square_shift_constants(self):
        # frozen from the brute-force oracle (computed before wiring this test)
        a = np.zeros((16, 16, 1), np.uint8)
        a[4:12, 4:12, 0] = 1
        b1 = np.zeros((16, 16, 1), np.uint8)
        b1[4:12, 5:13, 0] = 1
        b2 = np.zeros((16, 16, 1), np.uint8)
        b2[4:12, 6:14, 0] = 1
        assert nsd(a, b1, tol=1.0) == pytest.approx(1.0, abs=1e-12)
        assert nsd(a, b2, tol=1.0) == pytest.approx(0.875, abs=1e-12)
        assert nsd(a, b2, tol=0.5) == pytest.approx(0.75, abs=1e-12)

    def test_empty_conventions(self):
        z = np.zeros((4, 4, 4), np.uint8)
        m = np.zeros((4, 4, 4), np.uint8)
        m[1, 1, 1] = 1
        assert nsd(z, z) == 1.0
        assert nsd(z, m) == 0.0
        assert nsd(m, z) == 0.0

    def test_monotone_in_delta(self, rng):
        a = random_blob_mask(rng, (12, 12, 12))
        b = random_blob_mask(rng, (12, 12, 12))
        if not (a.any() and b.any()):
            pytest.skip("degenerate draw")
        values = [nsd(a, b, tol=Tolerance(d)) for d in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(x <= y + 1e-12 for x, y in zip(values, values[1:]))


class TestHd95:
    def test_identity_zero(self):
        m = np.zeros((6, 6, 6), np.uint8)
        m[2:5, 2:5, 2:5] = 1
        assert hd95(m, m) == 0.0

    def test_single_voxels_three_apart(self):
        a = np.zeros((7, 7, 7), np.uint8)
        b = np.zeros((7, 7, 7), np.uint8)
        a[1, 3, 3] = 1
        b[4, 3, 3] = 1
        assert hd95(a, b) == 3.0

    def test_ellipsoid_vs_dilation_constant(self):
        # frozen from the brute-force oracle
        ii, jj, kk = np.ogrid[0:24, 0:24, 0:24]
        ell = (
            (((ii - 12) / 6.0) ** 2 + ((jj - 12) / 5.0) ** 2 + ((kk - 12) / 4.0) ** 2)
            <= 1
        ).astype(np.uint8)
        dil = ndimage.binary_dilation(
            ell, structure=ndimage.generate_binary_structure(3, 1)
        ).astype(np.uint8)
        assert hd95(ell, dil) == pytest.approx(1.0, abs=1e-12)
        shifted = np.roll(ell, 3, axis=0)
        assert hd95(ell, shifted) == pytest.approx(2.8284271247461903, abs=1e-12)

    def test_empty_undefined(self):
        z = np.zeros((4, 4, 4), np.uint8)
        m = np.zeros((4, 4, 4), np.uint8)
        m[1, 1, 1] = 1
        with pytest.raises(MetricUndefinedError):
            hd95(z, m)
        with pytest.raises(MetricUndefinedError):
            hd95(m, z)

    def test_spacing_scales_linearly(self, rng):
        a = random_blob_mask(rng, (10, 10, 10))
        b = random_blob_mask(rng, (10, 10, 10))
        if not (a.any() and b.any()):
            pytest.skip("degenerate draw")
        base = hd95(a, b, (1.0, 1.0, 1.0))
        assert hd95(a, b, (3.0, 3.0, 3.0)) == pytest.approx(3.0 * base, rel=1e-12)

    def test_anisotropic_constant(self):
        ii, jj, kk = np.ogrid[0:24, 0:24, 0:24]
        ell = (
            (((ii - 12) / 6.0) ** 2 + ((jj - 12) / 5.0) ** 2 + ((kk - 12) / 4.0) ** 2)
            <= 1
        ).astype(np.uint8)
        shifted = np.roll(ell, 3, axis=0)
        assert hd95(ell, shifted, (2.0, 1.0, 0.5)) == pytest.approx(
            4.153311931459037, abs=1e-12
        )


class TestOracleEquivalence:
    def test_random_pairs(self, rng):
        for trial in range(30):
            shape = tuple(int(rng.integers(4, 17)) for _ in range(3))
            a = random_blob_mask(rng, shape)
            b = random_blob_mask(rng, shape)
            assert dice(a, b) == dice_oracle(a, b)
            spacing = tuple(float(rng.uniform(0.5, 3.0)) for _ in range(3))
            delta = float(rng.uniform(0.0, 4.0))
            assert nsd(a, b, spacing, delta) == pytest.approx(
                nsd_oracle(a, b, spacing, delta), abs=1e-9
            )
            if a.any() and b.any():
                assert hd95(a, b, spacing) == pytest.approx(
                    hd95_oracle(a, b, spacing), abs=1e-9
                )


class TestSalientSlices:
    def test_boundary_at_threshold(self):
        gt = np.zeros((20, 20, 4), np.uint8)
        gt[:16, :16, 1] = 1  # exactly 256 on slice 1
        gt[:16, :16, 2] = 1
        gt[0, 16, 2] = 1  # 257 on slice 2
        assert salient_slices(gt, 2, 256) == [2]

    def test_empty_mask(self):
        assert salient_slices(np.zeros((8, 8, 8), np.uint8), 2, 256) == []

    def test_zero_threshold_selects_nonempty(self, rng):
        gt = random_mask(rng, (8, 8, 8), density=0.02)
        expected = [
            i for i in range(8) if np.count_nonzero(gt[:, :, i]) > 0
        ]
        assert salient_slices(gt, 2, 0) == expected

    def test_other_axes(self):
        gt = np.zeros((4, 6, 6), np.uint8)
        gt[1, :, :] = 1  # 36 foreground on axis-0 slice 1
        assert salient_slices(gt, 0, 35) == [1]
        assert salient_slices(gt, 0, 36) == []


class TestMaskedMetrics:
    def test_all_slices_equals_unfiltered(self, rng):
        pred = random_blob_mask(rng, (10, 10, 10))
        gt = random_blob_mask(rng, (10, 10, 10))
        out = masked_metrics(pred, gt, 2, list(range(10)))
        assert out["dice"] == dice(pred, gt)
        assert out["nsd"] == nsd(pred, gt)

    def test_perfect_on_selected_slices(self):
        gt = np.zeros((8, 8, 8), np.uint8)
        gt[2:6, 2:6, :] = 1
        pred = gt.copy()
        pred[:, :, 0] = 0  # wrong only on slice 0
        out = masked_metrics(pred, gt, 2, [1, 2, 3, 4, 5, 6, 7])
        assert out["dice"] == 1.0
        assert dice(pred, gt) < 1.0

    def test_matches_oracle_recomputation(self, rng):
        pred = random_blob_mask(rng, (9, 9, 9))
        gt = random_blob_mask(rng, (9, 9, 9))
        indices = [1, 3, 4, 7]
        out = masked_metrics(pred, gt, 2, indices, (1.0, 1.0, 1.0), 1.0)
        psub = np.stack([pred[:, :, i] for i in indices], axis=2)
        gsub = np.stack([gt[:, :, i] for i in indices], axis=2)
        assert out["dice"] == dice_oracle(psub, gsub)
        assert out["nsd"] == pytest.approx(nsd_oracle(psub, gsub, (1, 1, 1), 1.0), abs=1e-9)

    def test_empty_selection_undefined(self):
        with pytest.raises(MetricUndefinedError):
            masked_metrics(np.zeros((4, 4, 4)), np.zeros((4, 4, 4)), 2, [])


class TestGrowth:
    def test_published_protocol_arithmetic(self):
        log = RoundLog(((25, 0.60), (5, 0.70)))
        assert dice_growth_per_point(log) == pytest.approx([0.024, 0.02])

    def test_one_point_rounds(self):
        log = RoundLog(((1, 0.50), (1, 0.55)))
        assert dice_growth_per_point(log) == pytest.approx([0.50, 0.05])

    def test_negative_growth_allowed(self):
        log = RoundLog(((1, 0.70), (5, 0.65)))
        growth = dice_growth_per_point(log)
        assert growth[1] == pytest.approx(-0.01)

    def test_baseline_dice_anchor(self):
        log = RoundLog(((10, 0.40),))
        assert dice_growth_per_point(log, baseline_dice=0.2) == pytest.approx([0.02])

    def test_zero_points_rejected(self):
        log = RoundLog(((0, 0.30),))
        with pytest.raises(ContractError):
            dice_growth_per_point(log)


class TestAggregate:
    def test_single_case(self):
        c = CaseMetrics("a", dice=0.8, nsd=0.9, hd95=2.0)
        out = aggregate([c])
        assert out["dice"]["mean"] == 0.8
        assert out["dice"]["std"] == 0.0
        assert out["n_cases"] == 1

    def test_mean_of_two(self):
        cases = [
            CaseMetrics("a", dice=0.8, nsd=0.9, hd95=2.0),
            CaseMetrics("b", dice=1.0, nsd=0.7, hd95=4.0),
        ]
        out = aggregate(cases)
        assert out["dice"]["mean"] == pytest.approx(0.9)
        assert out["hd95"]["mean"] == pytest.approx(3.0)
        assert out["dice"]["std"] == pytest.approx(np.std([0.8, 1.0]))

    def test_undefined_hd95_excluded(self):
        cases = [
            CaseMetrics("a", dice=0.8, nsd=0.9, hd95=2.0),
            CaseMetrics("b", dice=0.9, nsd=0.8, hd95=None),
            CaseMetrics("c", dice=1.0, nsd=0.7, hd95=4.0),
        ]
        out = aggregate(cases)
        assert out["hd95"]["count"] == 2
        assert out["hd95"]["excluded"] == 1
        assert out["hd95"]["mean"] == pytest.approx(3.0)

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            aggregate([])


def test_case_metrics_range_validation():
    with pytest.raises(ContractError):
        CaseMetrics("x", dice=1.2, nsd=0.5, hd95=None)
    with pytest.raises(ContractError):
        CaseMetrics("x", dice=0.5, nsd=0.5, hd95=-1.0)
