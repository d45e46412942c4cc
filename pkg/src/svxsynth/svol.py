"""SVOL on-disk format: a JSON header next to a raw little-endian body.

`<name>.json` holds {"dims": [X, Y, Z], "channels": C,
"dtype": "f32"|"u32"|"u8", "spacing": [sx, sy, sz]} plus any extra
producer keys (e.g. "supervoxel_count"). `<name>.bin` is the raw
buffer, index ((c*Z + z)*Y + y)*X + x, little-endian. Round-tripping
through save_svol/load_svol is the identity on bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .volume import (DTYPES, LabelVolume, MaskVolume, MultiModalVolume,
                     VolumeMeta)


def _stem(path) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        return p.with_suffix("")
    return p


def _part(stem: Path, suffix: str) -> Path:
    # stems may contain dots ("p000.image"), so never use with_suffix here
    return stem.parent / (stem.name + suffix)


def save_svol(volume, path, extra: dict | None = None) -> None:
    """Write a volume as a <stem>.json / <stem>.bin pair.

    `extra` entries are merged into the JSON header.
    """
    stem = _stem(path)
    header = {
        "dims": list(volume.meta.dims),
        "channels": volume.meta.channels,
        "dtype": volume.meta.dtype,
        "spacing": list(volume.meta.spacing),
    }
    if extra:
        header.update(extra)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(volume.data, dtype=DTYPES[volume.meta.dtype])
    if data.dtype.byteorder == ">":  # pragma: no cover - big-endian hosts only
        data = data.byteswap()
    _part(stem, ".bin").write_bytes(data.tobytes())
    _part(stem, ".json").write_text(json.dumps(header, sort_keys=True) + "\n")


def read_header(path) -> dict:
    stem = _stem(path)
    header_path = _part(stem, ".json")
    if not header_path.exists():
        raise FormatError(f"missing file: {header_path}")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid SVOL header {header_path}: {exc}") from exc
    if not isinstance(header, dict) or "dims" not in header or "dtype" not in header:
        raise FormatError(f"invalid SVOL header {header_path}: missing keys")
    return header


def load_svol(path) -> MultiModalVolume | LabelVolume:
    """Load an SVOL pair; f32 payloads come back as MultiModalVolume,
    u32/u8 payloads as LabelVolume."""
    stem = _stem(path)
    header = read_header(stem)
    dims = header["dims"]
    if len(dims) != 3:
        raise FormatError(f"dims must have 3 entries, got {dims}")
    channels = int(header.get("channels", 1))
    dtype = header["dtype"]
    if dtype not in DTYPES:
        raise FormatError(f"unknown dtype '{dtype}' in {stem}.json")
    spacing = tuple(header.get("spacing", (1.0, 1.0, 1.0)))
    meta = VolumeMeta((int(dims[0]), int(dims[1]), int(dims[2])), channels, dtype, spacing)

    body_path = _part(stem, ".bin")
    if not body_path.exists():
        raise FormatError(f"missing file: {body_path}")
    raw = body_path.read_bytes()
    np_dtype = np.dtype(DTYPES[dtype]).newbyteorder("<")
    expected = meta.voxels * channels * np_dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch in {body_path}: expected {expected} bytes, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=np_dtype).astype(DTYPES[dtype], copy=True)
    if dtype == "f32":
        data = data.reshape((channels,) + meta.shape_zyx)
        return MultiModalVolume(meta, data)
    if channels != 1:
        raise FormatError(f"integer SVOL must be single-channel, got {channels}")
    return LabelVolume(meta, data.reshape(meta.shape_zyx))


def load_mask(path) -> MaskVolume:
    """Load a u8 SVOL pair and validate it as a binary mask."""
    vol = load_svol(path)
    if not isinstance(vol, LabelVolume) or vol.meta.dtype != "u8":
        raise FormatError(f"{_stem(path)} is not a u8 mask volume")
    if (vol.data > 1).any():
        raise FormatError(f"mask values outside {{0, 1}} in {_stem(path)}")
    meta = VolumeMeta(vol.meta.dims, 1, "u8", vol.meta.spacing)
    return MaskVolume(meta, vol.data)
