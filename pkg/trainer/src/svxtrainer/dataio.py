"""Readers for the svxsynth on-disk interfaces.

The trainer talks to the synthesis engine only through files: SVOL
volume pairs (<stem>.json header + <stem>.bin little-endian raw,
index ((c*Z + z)*Y + y)*X + x), the training-set listing, and the
"svx-manifest/1" synthesis manifest. The readers here are implemented
from those format contracts; nothing imports the engine.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

_DTYPES = {"f32": np.float32, "u32": np.uint32, "u8": np.uint8}

MANIFEST_SCHEMA = "svx-manifest/1"


def load_svol(path) -> np.ndarray:
    """Load an SVOL pair as (C, Z, Y, X) for f32, (Z, Y, X) otherwise."""
    stem = Path(path)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    header = json.loads((stem.parent / (stem.name + ".json")).read_text())
    x, y, z = header["dims"]
    channels = int(header.get("channels", 1))
    dtype = np.dtype(_DTYPES[header["dtype"]]).newbyteorder("<")
    raw = (stem.parent / (stem.name + ".bin")).read_bytes()
    data = np.frombuffer(raw, dtype=dtype)
    if header["dtype"] == "f32":
        return data.reshape((channels, z, y, x)).astype(np.float32)
    return data.reshape((z, y, x)).astype(_DTYPES[header["dtype"]])


def normalize(volume: np.ndarray) -> np.ndarray:
    """Per-channel min-max to [0, 1]; constant channels go to zero."""
    out = np.empty_like(volume, dtype=np.float32)
    for c in range(volume.shape[0]):
        lo, hi = float(volume[c].min()), float(volume[c].max())
        out[c] = (volume[c] - lo) / (hi - lo) if hi > lo else 0.0
    return out


def load_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {doc.get('schema')!r}")
    return doc


def load_inpainting_records(manifest_path) -> list[dict]:
    """All (masked, target, mask) triples of a manifest as torch tensors.

    Tensors are (C, Z, Y, X) float32 for images and (1, Z, Y, X) for the
    mask (1 outside the suppressed region, 0 inside).
    """
    manifest_path = Path(manifest_path)
    doc = load_manifest(manifest_path)
    if not doc["records"]:
        raise ValueError(f"manifest {manifest_path} contains no records")
    base = manifest_path.parent
    records = []
    for rec in doc["records"]:
        masked = torch.from_numpy(load_svol(base / rec["masked_path"]))
        target = torch.from_numpy(load_svol(base / rec["target_path"]))
        mask = torch.from_numpy(
            load_svol(base / rec["mask_path"]).astype(np.float32)).unsqueeze(0)
        records.append({"masked": masked, "target": target, "mask": mask,
                        "source_id": rec["source_id"]})
    return records


def load_segmentation_pairs(listing_path) -> list[dict]:
    """(image, label) pairs from a training-set listing.

    Images are min-max normalized per channel; labels are binarized to
    a single foreground channel.
    """
    listing_path = Path(listing_path)
    doc = json.loads(listing_path.read_text())
    base = listing_path.parent
    pairs = []
    for entry in doc["entries"]:
        image = normalize(load_svol(base / entry["image"]))
        labels = load_svol(base / entry["labels"])
        fg = (labels != 0).astype(np.float32)[np.newaxis]
        pairs.append({"image": torch.from_numpy(image),
                      "label": torch.from_numpy(fg),
                      "id": entry["id"]})
    if not pairs:
        raise ValueError(f"listing {listing_path} contains no entries")
    return pairs
