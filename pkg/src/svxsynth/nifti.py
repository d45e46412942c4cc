"""Minimal single-file NIfTI-1 reader.

Only the fields this pipeline needs are honored: dim, datatype, bitpix,
vox_offset, scl_slope and scl_inter. Orientation (qform/sform) is
deliberately ignored; voxels are returned in raw grid order, x fastest.
Gzip compression is detected from the file extension. Writing NIfTI and
the two-file ".hdr/.img" variant are out of scope.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .volume import LabelVolume, MultiModalVolume, VolumeMeta

HEADER_SIZE = 348

# NIfTI datatype code -> numpy dtype
_DATATYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}


def load_nifti(path, kind: str = "image") -> MultiModalVolume | LabelVolume:
    """Read a .nii / .nii.gz volume.

    kind="image" converts voxels to f32 and returns a MultiModalVolume;
    kind="labels" converts to u32 and returns a LabelVolume. Scaling
    (scl_slope/scl_inter) is applied whenever scl_slope != 0.
    """
    if kind not in ("image", "labels"):
        raise ValueError(f"kind must be 'image' or 'labels', got {kind!r}")
    p = Path(path)
    if not p.exists():
        raise FormatError(f"missing file: {p}")
    opener = gzip.open if p.name.endswith(".gz") else open
    with opener(p, "rb") as fh:
        hdr = fh.read(HEADER_SIZE)
        if len(hdr) < HEADER_SIZE:
            raise FormatError(f"truncated NIfTI header in {p}")
        magic = hdr[344:348]
        if magic == b"ni1\x00":
            raise FormatError(f"unsupported NIfTI variant (two-file ni1) in {p}")
        if magic != b"n+1\x00":
            raise FormatError(f"bad magic {magic!r} in {p}")
        # byte order is whatever makes sizeof_hdr read as 348
        order = "<"
        if struct.unpack_from("<i", hdr, 0)[0] != HEADER_SIZE:
            if struct.unpack_from(">i", hdr, 0)[0] != HEADER_SIZE:
                raise FormatError(f"bad sizeof_hdr in {p}")
            order = ">"
        dim = struct.unpack_from(order + "8h", hdr, 40)
        datatype, bitpix = struct.unpack_from(order + "2h", hdr, 70)
        pixdim = struct.unpack_from(order + "8f", hdr, 76)
        vox_offset, scl_slope, scl_inter = struct.unpack_from(order + "3f", hdr, 108)

        ndim = dim[0]
        if ndim not in (3, 4):
            raise FormatError(f"unsupported dim[0]={ndim} in {p} (want 3 or 4)")
        nx, ny, nz = dim[1], dim[2], dim[3]
        nt = dim[4] if ndim == 4 else 1
        if min(nx, ny, nz, nt) <= 0:
            raise FormatError(f"non-positive dimension in {p}: dim={dim[:5]}")
        if datatype not in _DATATYPES:
            raise FormatError(f"unsupported NIfTI datatype {datatype} in {p}")
        np_dtype = np.dtype(_DATATYPES[datatype]).newbyteorder(order)
        if bitpix != np_dtype.itemsize * 8:
            raise FormatError(f"bitpix {bitpix} inconsistent with datatype {datatype}")

        skip = int(vox_offset) - HEADER_SIZE
        if skip < 0:
            raise FormatError(f"vox_offset {vox_offset} below header size in {p}")
        if skip:
            fh.read(skip)
        count = nx * ny * nz * nt
        raw = fh.read(count * np_dtype.itemsize)
        if len(raw) != count * np_dtype.itemsize:
            raise FormatError(
                f"truncated payload in {p}: expected {count * np_dtype.itemsize} bytes, "
                f"got {len(raw)}"
            )

    values = np.frombuffer(raw, dtype=np_dtype).reshape((nt, nz, ny, nx))
    scaled = values.astype(np.float64)
    if scl_slope != 0.0:
        scaled = scaled * scl_slope + scl_inter
    spacing = (float(pixdim[1]) or 1.0, float(pixdim[2]) or 1.0, float(pixdim[3]) or 1.0)

    if kind == "image":
        meta = VolumeMeta((nx, ny, nz), nt, "f32", spacing)
        return MultiModalVolume(meta, scaled.astype(np.float32))

    if nt != 1:
        raise FormatError(f"label volume must be single-channel, got {nt} in {p}")
    rounded = np.rint(scaled)
    if (rounded < 0).any():
        raise FormatError(f"negative label values in {p}")
    meta = VolumeMeta((nx, ny, nz), 1, "u32", spacing)
    return LabelVolume(meta, rounded[0].astype(np.uint32))
