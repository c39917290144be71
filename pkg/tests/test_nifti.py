import gzip

import numpy as np
import pytest

from oracles import write_reference_nifti
from stackseg.errors import ContractError, UnsupportedVolumeError, VolumeFormatError
from stackseg.nifti import load_volume, save_mask, save_volume
from stackseg.volume import MaskVolume, Volume


def make_volume(data, spacing=(1.0, 1.0, 1.0), affine=None):
    data = np.asarray(data, dtype=np.float64)
    return Volume(dims=data.shape, spacing=spacing, data=data, affine=affine)


class TestRoundTrips:
    def test_minimal_float32_round_trip(self, tmp_path, rng):
        data = rng.random((4, 4, 4)).astype(np.float32).astype(np.float64)
        vol = make_volume(data)
        save_volume(vol, tmp_path / "v.nii")
        back = load_volume(tmp_path / "v.nii")
        assert back.dims == (4, 4, 4)
        assert np.array_equal(back.data, data)

    def test_gzip_container_transparent(self, tmp_path, rng):
        data = rng.random((4, 4, 4)).astype(np.float32).astype(np.float64)
        vol = make_volume(data)
        save_volume(vol, tmp_path / "v.nii")
        raw = (tmp_path / "v.nii").read_bytes()
        (tmp_path / "v.nii.gz").write_bytes(gzip.compress(raw))
        a = load_volume(tmp_path / "v.nii")
        b = load_volume(tmp_path / "v.nii.gz")
        assert np.array_equal(a.data, b.data)
        assert a.spacing == b.spacing

    def test_zero_mask_round_trip(self, tmp_path):
        vol = make_volume(np.zeros((8, 8, 8)))
        mask = MaskVolume.from_array(np.zeros((8, 8, 8), np.uint8))
        save_mask(mask, vol, tmp_path / "m.nii")
        back = load_volume(tmp_path / "m.nii")
        assert (back.data == 0).all()

    def test_mask_round_trip_many_seeds(self, tmp_path):
        vol = make_volume(np.zeros((16, 16, 16)), spacing=(0.5, 2.0, 3.0))
        for seed in range(100):
            rng = np.random.Generator(np.random.PCG64(seed))
            labels = (rng.random((16, 16, 16)) < rng.uniform(0, 1)).astype(np.uint8)
            mask = MaskVolume.from_array(labels)
            path = tmp_path / f"m{seed}.nii.gz"
            save_mask(mask, vol, path)
            back = load_volume(path)
            assert np.array_equal(back.data.astype(np.uint8), labels)
            assert back.spacing == (0.5, 2.0, 3.0)
            assert np.abs(np.asarray(back.affine) - np.asarray(vol.affine)).max() < 1e-6

    def test_mask_dim_mismatch_rejected(self, tmp_path):
        vol = make_volume(np.zeros((16, 16, 16)))
        mask = MaskVolume.from_array(np.zeros((8, 8, 8), np.uint8))
        with pytest.raises(ContractError):
            save_mask(mask, vol, tmp_path / "m.nii")

    def test_unwritable_path(self, tmp_path):
        vol = make_volume(np.zeros((4, 4, 4)))
        mask = MaskVolume.from_array(np.zeros((4, 4, 4), np.uint8))
        with pytest.raises(OSError):
            save_mask(mask, vol, tmp_path / "no" / "such" / "dir" / "m.nii")


class TestReferenceWriterCompat:
    """Files produced by an independent struct-level writer."""

    def test_pixdim_becomes_spacing(self, tmp_path, rng):
        data = rng.random((3, 4, 5)).astype(np.float32)
        write_reference_nifti(tmp_path / "r.nii", data, pixdim=(0.5, 2.0, 3.0))
        vol = load_volume(tmp_path / "r.nii")
        assert vol.spacing == (0.5, 2.0, 3.0)
        assert vol.dims == (3, 4, 5)
        assert np.allclose(vol.data, data.astype(np.float64))

    def test_big_endian_read(self, tmp_path, rng):
        data = (rng.random((4, 4, 4)) * 100).astype(np.int16)
        write_reference_nifti(
            tmp_path / "be.nii", data, datatype_code=4, byte_order=">"
        )
        vol = load_volume(tmp_path / "be.nii")
        assert np.array_equal(vol.data, data.astype(np.float64))

    def test_sform_affine_preferred(self, tmp_path, rng):
        data = rng.random((4, 4, 4)).astype(np.float32)
        srow = [(2.0, 0.0, 0.0, -10.0), (0.0, 2.0, 0.0, 5.0), (0.0, 0.0, 2.0, 0.0)]
        write_reference_nifti(tmp_path / "s.nii", data, pixdim=(2.0, 2.0, 2.0), srow=srow)
        vol = load_volume(tmp_path / "s.nii")
        expected = np.array(srow + [(0.0, 0.0, 0.0, 1.0)])
        assert np.allclose(np.asarray(vol.affine), expected)

    def test_diagonal_affine_fallback(self, tmp_path, rng):
        data = rng.random((4, 4, 4)).astype(np.float32)
        write_reference_nifti(tmp_path / "d.nii", data, pixdim=(1.5, 2.5, 3.5))
        vol = load_volume(tmp_path / "d.nii")
        assert np.allclose(np.asarray(vol.affine), np.diag([1.5, 2.5, 3.5, 1.0]))

    @pytest.mark.parametrize("code,np_dtype", [(2, np.uint8), (4, np.int16), (8, np.int32), (64, np.float64)])
    def test_all_supported_dtypes(self, tmp_path, rng, code, np_dtype):
        data = (rng.random((3, 3, 3)) * 50).astype(np_dtype)
        write_reference_nifti(tmp_path / f"t{code}.nii", data, datatype_code=code)
        vol = load_volume(tmp_path / f"t{code}.nii")
        assert np.array_equal(vol.data, data.astype(np.float64))


class TestMalformedFiles:
    def _reference_bytes(self, tmp_path, rng, **kwargs):
        data = rng.random((3, 3, 3)).astype(np.float32)
        path = tmp_path / "base.nii"
        write_reference_nifti(path, data, **kwargs)
        return bytearray(path.read_bytes())

    def test_truncated_file(self, tmp_path):
        (tmp_path / "short.nii").write_bytes(b"\x00" * 100)
        with pytest.raises(VolumeFormatError) as err:
            load_volume(tmp_path / "short.nii")
        assert err.value.field == "sizeof_hdr"

    def test_bad_magic(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        raw[344:348] = b"XXX\x00"
        (tmp_path / "bad.nii").write_bytes(bytes(raw))
        with pytest.raises(VolumeFormatError) as err:
            load_volume(tmp_path / "bad.nii")
        assert err.value.field == "magic"

    def test_pair_layout_unsupported(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        raw[344:348] = b"ni1\x00"
        (tmp_path / "pair.nii").write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVolumeError):
            load_volume(tmp_path / "pair.nii")

    def test_unsupported_datatype(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        raw[70:72] = (128).to_bytes(2, "little")  # RGB code
        (tmp_path / "dt.nii").write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVolumeError):
            load_volume(tmp_path / "dt.nii")

    def test_multi_timepoint_unsupported(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        import struct

        struct.pack_into("<8h", raw, 40, 4, 3, 3, 3, 5, 1, 1, 1)
        (tmp_path / "t4.nii").write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVolumeError):
            load_volume(tmp_path / "t4.nii")

    def test_trailing_unit_dims_tolerated(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        import struct

        struct.pack_into("<8h", raw, 40, 4, 3, 3, 3, 1, 1, 1, 1)
        (tmp_path / "t1.nii").write_bytes(bytes(raw))
        assert load_volume(tmp_path / "t1.nii").dims == (3, 3, 3)

    def test_zero_pixdim_rejected(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        import struct

        struct.pack_into("<f", raw, 80, 0.0)  # pixdim[1]
        (tmp_path / "p.nii").write_bytes(bytes(raw))
        with pytest.raises(VolumeFormatError) as err:
            load_volume(tmp_path / "p.nii")
        assert err.value.field == "pixdim"

    def test_truncated_voxel_data(self, tmp_path, rng):
        raw = self._reference_bytes(tmp_path, rng)
        (tmp_path / "trunc.nii").write_bytes(bytes(raw[:-10]))
        with pytest.raises(VolumeFormatError) as err:
            load_volume(tmp_path / "trunc.nii")
        assert err.value.field == "data"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_volume(tmp_path / "nope.nii")
