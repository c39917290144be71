"""Single-file NIfTI-1 reader and writer.

Supported subset: 348-byte header + voxel data in one file (magic ``n+1``),
optionally gzip-compressed, scalar datatypes uint8/int16/int32/float32/float64,
three spatial dims (trailing dims of extent 1 are tolerated). Both byte orders
are read; files are always written little-endian. ``.hdr``/``.img`` pairs and
NIfTI-2 are out of scope.
"""

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError, UnsupportedVolumeError, VolumeFormatError
from .volume import MaskVolume, Volume

HEADER_SIZE = 348
DATA_OFFSET = 352  # header + 4-byte extension flag

# struct layout of the fields we use, by (name, offset, format)
_FIELDS = (
    ("sizeof_hdr", 0, "i"),
    ("dim", 40, "8h"),
    ("datatype", 70, "h"),
    ("bitpix", 72, "h"),
    ("pixdim", 76, "8f"),
    ("vox_offset", 108, "f"),
    ("scl_slope", 112, "f"),
    ("scl_inter", 116, "f"),
    ("qform_code", 252, "h"),
    ("sform_code", 254, "h"),
    ("quatern", 256, "3f"),
    ("qoffset", 268, "3f"),
    ("srow_x", 280, "4f"),
    ("srow_y", 296, "4f"),
    ("srow_z", 312, "4f"),
    ("magic", 344, "4s"),
)

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_header(raw: bytes) -> dict:
    if len(raw) < HEADER_SIZE:
        raise VolumeFormatError(
            f"file too short for a header: {len(raw)} bytes", field="sizeof_hdr"
        )
    for order in ("<", ">"):
        if struct.unpack_from(order + "i", raw, 0)[0] == HEADER_SIZE:
            break
    else:
        raise VolumeFormatError(
            "sizeof_hdr is not 348 in either byte order", field="sizeof_hdr"
        )
    hdr = {"byte_order": order}
    for name, offset, fmt in _FIELDS:
        value = struct.unpack_from(order + fmt, raw, offset)
        hdr[name] = value[0] if len(value) == 1 else value
    return hdr


def _quaternion_affine(hdr: dict) -> np.ndarray:
    b, c, d = hdr["quatern"]
    a = float(np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d))))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    qfac = -1.0 if hdr["pixdim"][0] < 0 else 1.0
    spacing = np.array([hdr["pixdim"][1], hdr["pixdim"][2], hdr["pixdim"][3] * qfac])
    affine = np.eye(4)
    affine[:3, :3] = rot * spacing
    affine[:3, 3] = hdr["qoffset"]
    return affine


def _affine_from(hdr: dict, spacing: tuple[float, float, float]) -> np.ndarray:
    if hdr["sform_code"] > 0:
        affine = np.eye(4)
        affine[0, :] = hdr["srow_x"]
        affine[1, :] = hdr["srow_y"]
        affine[2, :] = hdr["srow_z"]
        return affine
    if hdr["qform_code"] > 0:
        return _quaternion_affine(hdr)
    return np.diag([spacing[0], spacing[1], spacing[2], 1.0])


def load_volume(path: str | Path, modality_tag: str = "") -> Volume:
    """Load a single-file NIfTI-1 volume into float intensities.

    Spacing comes from pixdim, the affine from the sform (falling back to the
    qform, then to a diagonal spacing matrix). scl_slope/scl_inter are applied
    when the slope is finite and nonzero.
    """
    path = Path(path)
    raw = _read_bytes(path)
    hdr = _parse_header(raw)

    magic = hdr["magic"]
    if magic == b"ni1\x00":
        raise UnsupportedVolumeError("two-file (.hdr/.img) layout is not supported")
    if magic != b"n+1\x00":
        raise VolumeFormatError(f"bad magic {magic!r}", field="magic")

    dim = hdr["dim"]
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise VolumeFormatError(f"dim[0] = {ndim} outside 1..7", field="dim")
    if ndim < 3:
        raise UnsupportedVolumeError(f"expected 3 spatial dims, file has {ndim}")
    if any(dim[k] > 1 for k in range(4, ndim + 1)):
        raise UnsupportedVolumeError(
            f"multi-timepoint file (dim[4..{ndim}] = {tuple(dim[4 : ndim + 1])})"
        )
    dims = tuple(int(dim[k]) for k in (1, 2, 3))
    if any(d < 1 for d in dims):
        raise VolumeFormatError(f"spatial dims must be >= 1, got {dims}", field="dim")

    if hdr["datatype"] not in _DTYPES:
        raise UnsupportedVolumeError(f"datatype code {hdr['datatype']} not supported")
    dtype = np.dtype(_DTYPES[hdr["datatype"]]).newbyteorder(hdr["byte_order"])
    if hdr["bitpix"] != dtype.itemsize * 8:
        raise VolumeFormatError(
            f"bitpix {hdr['bitpix']} inconsistent with datatype", field="bitpix"
        )

    pixdim = hdr["pixdim"]
    spacing = tuple(float(pixdim[k]) for k in (1, 2, 3))
    if any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise VolumeFormatError(f"non-positive pixdim {spacing}", field="pixdim")

    offset = int(hdr["vox_offset"])
    if offset < HEADER_SIZE:
        raise VolumeFormatError(f"vox_offset {offset} overlaps header", field="vox_offset")
    nbytes = int(np.prod(dims)) * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise VolumeFormatError(
            f"data truncated: need {offset + nbytes} bytes, have {len(raw)}", field="data"
        )
    voxels = np.frombuffer(raw, dtype=dtype, count=int(np.prod(dims)), offset=offset)
    data = voxels.reshape(dims, order="F").astype(np.float64)

    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if np.isfinite(slope) and slope != 0.0 and (slope, inter) != (1.0, 0.0):
        data = data * slope + inter

    return Volume(
        dims=dims,
        spacing=spacing,
        data=data,
        modality_tag=modality_tag,
        affine=_affine_from(hdr, spacing),
    )


def _build_header(dims, spacing, affine, datatype: int, bitpix: int) -> bytes:
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, dims[0], dims[1], dims[2], 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, spacing[0], spacing[1], spacing[2], 0, 0, 0, 0)
    struct.pack_into("<f", hdr, 108, float(DATA_OFFSET))
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)  # scl_inter
    struct.pack_into("<80s", hdr, 148, b"stackseg")
    struct.pack_into("<h", hdr, 252, 0)  # qform_code
    struct.pack_into("<h", hdr, 254, 1)  # sform_code
    struct.pack_into("<4f", hdr, 280, *affine[0, :])
    struct.pack_into("<4f", hdr, 296, *affine[1, :])
    struct.pack_into("<4f", hdr, 312, *affine[2, :])
    struct.pack_into("<4s", hdr, 344, b"n+1\x00")
    return bytes(hdr)


def _write_nifti(path: Path, header: bytes, body: bytes) -> None:
    blob = header + b"\x00\x00\x00\x00" + body
    if path.suffix == ".gz":
        # mtime pinned so identical masks produce identical files
        blob = gzip.compress(blob, mtime=0)
    path.write_bytes(blob)


def save_mask(mask: MaskVolume, reference: Volume, path: str | Path) -> None:
    """Write a binary mask as uint8 NIfTI-1 with the reference's spacing/affine."""
    if mask.dims != reference.dims:
        raise ContractError(
            f"mask dims {mask.dims} do not match reference dims {reference.dims}"
        )
    path = Path(path)
    header = _build_header(mask.dims, reference.spacing, reference.affine, datatype=2, bitpix=8)
    _write_nifti(path, header, mask.labels.astype(np.uint8).tobytes(order="F"))


def save_volume(vol: Volume, path: str | Path) -> None:
    """Write a volume as float32 NIfTI-1 (used by the phantom generator)."""
    path = Path(path)
    header = _build_header(vol.dims, vol.spacing, vol.affine, datatype=16, bitpix=32)
    _write_nifti(path, header, vol.data.astype(np.float32).tobytes(order="F"))
