"""Core volumetric data types and elementwise operations.

Arrays are stored C-order with shape (C, Z, Y, X) for multi-channel
intensity volumes and (Z, Y, X) for single-channel label/mask volumes,
so that the flattened buffer index is ((c*Z + z)*Y + y)*X + x. Volume
dimensions in metadata are spatial order (X, Y, Z); note the reversal
against numpy shape.

All types are treated as immutable after construction and every
operation returns a fresh volume, so values can be shared freely across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, FormatError

DTYPES = {
    "f32": np.float32,
    "u32": np.uint32,
    "u8": np.uint8,
}

_MAX_AXIS = 2**31 - 1


@dataclass(frozen=True)
class VolumeMeta:
    """Geometry and storage descriptor shared by all volume types."""

    dims: tuple[int, int, int]  # (X, Y, Z)
    channels: int = 1
    dtype: str = "f32"
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        x, y, z = self.dims
        if min(x, y, z) <= 0:
            raise FormatError(f"non-positive dimension in dims {self.dims}")
        if max(x, y, z) > _MAX_AXIS:
            raise FormatError(f"dimension exceeds 32-bit addressing: {self.dims}")
        if self.channels < 1:
            raise FormatError(f"channels must be >= 1, got {self.channels}")
        if self.dtype not in DTYPES:
            raise FormatError(f"unknown dtype '{self.dtype}'")

    @property
    def voxels(self) -> int:
        x, y, z = self.dims
        return x * y * z

    @property
    def shape_zyx(self) -> tuple[int, int, int]:
        x, y, z = self.dims
        return (z, y, x)


@dataclass
class MultiModalVolume:
    """C-channel 3D scalar field, float32, shape (C, Z, Y, X)."""

    meta: VolumeMeta
    data: np.ndarray

    def __post_init__(self):
        expected = (self.meta.channels,) + self.meta.shape_zyx
        if self.meta.dtype != "f32":
            raise FormatError("MultiModalVolume requires dtype f32")
        if self.data.shape != expected:
            raise FormatError(
                f"data shape {self.data.shape} does not match meta {expected}"
            )
        if self.data.dtype != np.float32:
            raise FormatError(f"expected float32 payload, got {self.data.dtype}")
        if not np.isfinite(self.data).all():
            raise FormatError("non-finite f32 payload")


@dataclass
class LabelVolume:
    """Integer segmentation map, single channel, 0 = background."""

    meta: VolumeMeta
    data: np.ndarray

    def __post_init__(self):
        if self.meta.channels != 1:
            raise FormatError("LabelVolume must be single-channel")
        if self.meta.dtype not in ("u32", "u8"):
            raise FormatError("LabelVolume requires dtype u32 or u8")
        if self.data.shape != self.meta.shape_zyx:
            raise FormatError(
                f"data shape {self.data.shape} does not match meta {self.meta.shape_zyx}"
            )
        if self.data.dtype != DTYPES[self.meta.dtype]:
            raise FormatError(f"payload dtype {self.data.dtype} does not match header")


@dataclass
class MaskVolume:
    """Per-voxel binary field, u8, values in {0, 1}.

    Used both for inpainting masks (0 inside the suppressed region,
    1 everywhere else) and for binary segmentation foregrounds
    (1 = foreground). Which convention applies is up to the producer.
    """

    meta: VolumeMeta
    data: np.ndarray

    def __post_init__(self):
        if self.meta.channels != 1 or self.meta.dtype != "u8":
            raise FormatError("MaskVolume must be single-channel u8")
        if self.data.shape != self.meta.shape_zyx:
            raise FormatError(
                f"data shape {self.data.shape} does not match meta {self.meta.shape_zyx}"
            )
        if self.data.dtype != np.uint8:
            raise FormatError(f"expected uint8 payload, got {self.data.dtype}")
        bad = (self.data > 1)
        if bad.any():
            raise FormatError("mask values outside {0, 1}")


def make_meta(dims, channels=1, dtype="f32", spacing=(1.0, 1.0, 1.0)) -> VolumeMeta:
    return VolumeMeta(tuple(int(d) for d in dims), int(channels), dtype,
                      tuple(float(s) for s in spacing))


def as_mask(vol: LabelVolume) -> MaskVolume:
    """Reinterpret a {0,1}-valued label volume as a MaskVolume."""
    if not np.isin(vol.data, (0, 1)).all():
        raise FormatError("label volume is not binary, cannot view as mask")
    meta = VolumeMeta(vol.meta.dims, 1, "u8", vol.meta.spacing)
    return MaskVolume(meta, vol.data.astype(np.uint8))


def normalize_intensities(vol: MultiModalVolume) -> MultiModalVolume:
    """Linearly rescale each channel to [0, 1].

    A constant channel has no range to stretch and maps to all zeros.
    Idempotent on non-constant channels.
    """
    out = np.empty_like(vol.data)
    for c in range(vol.meta.channels):
        ch = vol.data[c]
        lo = float(ch.min())
        hi = float(ch.max())
        if hi > lo:
            out[c] = (ch - lo) / np.float32(hi - lo)
        else:
            out[c] = 0.0
    return MultiModalVolume(vol.meta, out)


def apply_mask(vol: MultiModalVolume, mask: MaskVolume) -> MultiModalVolume:
    """Elementwise multiply by a binary mask, broadcast over channels.

    Output equals the input wherever mask == 1 and is exactly 0.0
    wherever mask == 0.
    """
    if mask.meta.dims != vol.meta.dims:
        raise ConstraintError(
            f"mask dims {mask.meta.dims} do not match volume dims {vol.meta.dims}"
        )
    out = vol.data * mask.data[np.newaxis, ...].astype(np.float32)
    return MultiModalVolume(vol.meta, out)


def invert_mask(mask: MaskVolume) -> MaskVolume:
    return MaskVolume(mask.meta, (1 - mask.data).astype(np.uint8))


def center_crop(vol, dims: tuple[int, int, int]):
    """Crop a volume to `dims`, centered on the voxel grid.

    Works on any of the three volume types; the crop offset per axis is
    (size - target) // 2.
    """
    x, y, z = vol.meta.dims
    tx, ty, tz = (int(d) for d in dims)
    if tx > x or ty > y or tz > z:
        raise ConstraintError(f"crop dims {dims} exceed volume dims {vol.meta.dims}")
    if min(tx, ty, tz) <= 0:
        raise ConstraintError(f"non-positive crop dimension in {dims}")
    ox, oy, oz = (x - tx) // 2, (y - ty) // 2, (z - tz) // 2
    sl = (slice(oz, oz + tz), slice(oy, oy + ty), slice(ox, ox + tx))
    meta = VolumeMeta((tx, ty, tz), vol.meta.channels, vol.meta.dtype, vol.meta.spacing)
    if isinstance(vol, MultiModalVolume):
        return MultiModalVolume(meta, np.ascontiguousarray(vol.data[(slice(None),) + sl]))
    cls = type(vol)
    return cls(meta, np.ascontiguousarray(vol.data[sl]))
