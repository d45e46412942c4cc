"""Procedural labeled phantoms for end-to-end testing.

Volumes are a smooth low-frequency background plus Gaussian noise,
with a handful of ellipsoidal "lesions" of per-channel additive
contrast. Nothing here tries to be anatomically plausible; the point
is a deterministic, labeled, multi-channel input with enough intensity
structure for the clustering to follow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConstraintError, FormatError
from .rng import child_rng, child_seed
from .svol import save_svol
from .synth import TrainEntry, TrainingSet, save_training_set
from .volume import LabelVolume, MultiModalVolume, VolumeMeta

_BACKGROUND_LEVEL = 0.35
_RADIUS_JITTER = 0.05  # per-axis semi-axis scale, keeps volume within +-20%
_SURFACE_JITTER = 0.02
_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (96, 96, 32)
    channels: int = 2
    lesion_count: tuple[int, int] = (1, 3)
    lesion_radius: tuple[float, float] = (8.0, 14.0)
    lesion_contrast: tuple[float, ...] = (0.45, 0.35)
    noise_sigma: float = 0.03
    bias_strength: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if len(self.lesion_contrast) != self.channels:
            raise ConstraintError(
                f"lesion_contrast has {len(self.lesion_contrast)} entries "
                f"for {self.channels} channels"
            )
        if not all(math.isfinite(c) for c in self.lesion_contrast):
            raise ConstraintError("lesion_contrast values must be finite")
        r_hi = self.lesion_radius[1]
        if 2 * math.ceil(r_hi * (1 + _RADIUS_JITTER)) + 1 > min(self.dims):
            raise ConstraintError(
                f"lesion radius up to {r_hi} does not fit inside dims {self.dims}"
            )
        if self.lesion_count[0] < 0 or self.lesion_count[0] > self.lesion_count[1]:
            raise ConstraintError(f"bad lesion_count range {self.lesion_count}")


PRESETS = {
    "brats-like": PhantomSpec(lesion_count=(1, 3), lesion_radius=(8.0, 14.0)),
    "wmh-like": PhantomSpec(lesion_count=(8, 20), lesion_radius=(2.0, 4.0),
                            lesion_contrast=(0.5, 0.4)),
}


def spec_from_json(path) -> PhantomSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read phantom spec {path}: {exc}") from exc
    base = PRESETS.get(raw.pop("preset", ""), PhantomSpec())
    fields = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    try:
        return replace(base, **fields)
    except TypeError as exc:
        raise FormatError(f"unknown phantom spec field: {exc}") from exc


def _smooth_field(rng, shape):
    coarse = rng.uniform(-1.0, 1.0, size=(4, 4, 4))
    factors = tuple(s / 4 for s in shape)
    return ndimage.zoom(coarse, factors, order=1, mode="nearest", grid_mode=True)


def generate_phantom(spec: PhantomSpec) -> tuple[MultiModalVolume, LabelVolume]:
    """One labeled phantom; a pure function of the spec (incl. its seed)."""
    X, Y, Z = spec.dims
    rng = child_rng(spec.seed, "phantom")
    shape = (Z, Y, X)

    channels = np.empty((spec.channels,) + shape, dtype=np.float64)
    for c in range(spec.channels):
        bias = _smooth_field(rng, shape) * spec.bias_strength
        noise = rng.normal(0.0, spec.noise_sigma, size=shape)
        channels[c] = np.clip(_BACKGROUND_LEVEL + bias + noise, 0.0, 1.0)

    labels = np.zeros(shape, dtype=np.uint8)
    count = int(rng.integers(spec.lesion_count[0], spec.lesion_count[1] + 1))
    zz, yy, xx = np.meshgrid(np.arange(Z), np.arange(Y), np.arange(X), indexing="ij")
    for _ in range(count):
        for attempt in range(_PLACEMENT_ATTEMPTS):
            r = rng.uniform(spec.lesion_radius[0], spec.lesion_radius[1])
            semi = r * rng.uniform(1 - _RADIUS_JITTER, 1 + _RADIUS_JITTER, size=3)
            margins = [math.ceil(s) for s in semi]  # (x, y, z) order
            if (2 * margins[0] + 1 > X or 2 * margins[1] + 1 > Y
                    or 2 * margins[2] + 1 > Z):
                continue
            cx = int(rng.integers(margins[0], X - margins[0]))
            cy = int(rng.integers(margins[1], Y - margins[1]))
            cz = int(rng.integers(margins[2], Z - margins[2]))
            rho2 = ((xx - cx) / semi[0]) ** 2 + ((yy - cy) / semi[1]) ** 2 \
                + ((zz - cz) / semi[2]) ** 2
            jitter = rng.uniform(-_SURFACE_JITTER, _SURFACE_JITTER, size=shape)
            inside = rho2 <= 1.0 + jitter
            labels[inside] = 1
            for c in range(spec.channels):
                channels[c][inside] += spec.lesion_contrast[c]
            break
        else:
            raise ConstraintError(
                f"could not place a lesion of radius ~{spec.lesion_radius} inside "
                f"dims {spec.dims} after {_PLACEMENT_ATTEMPTS} attempts"
            )

    channels = np.clip(channels, 0.0, 1.0)
    vol_meta = VolumeMeta(spec.dims, spec.channels, "f32")
    lab_meta = VolumeMeta(spec.dims, 1, "u8")
    return (MultiModalVolume(vol_meta, channels.astype(np.float32)),
            LabelVolume(lab_meta, labels))


def generate_corpus(n: int, spec: PhantomSpec, out_dir, seed: int) -> TrainingSet:
    """Write n phantom image/label SVOL pairs plus a training-set listing.

    Phantom i draws from a child stream of (seed, i); the listing file
    lands at <out_dir>/train.json and is also returned.
    """
    if n < 1:
        raise ConstraintError("corpus size must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        pid = f"p{i:03d}"
        pspec = replace(spec, seed=child_seed(seed, i))
        vol, labels = generate_phantom(pspec)
        save_svol(vol, out / f"{pid}.image")
        save_svol(labels, out / f"{pid}.labels")
        entries.append(TrainEntry(image_path=f"{pid}.image.json",
                                  label_path=f"{pid}.labels.json", id=pid))
    train = TrainingSet(entries, base_dir=out)
    save_training_set(train, out / "train.json")
    return train
