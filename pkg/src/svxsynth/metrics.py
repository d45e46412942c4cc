"""Evaluation primitives and descriptive manifest statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError
from .volume import MaskVolume, MultiModalVolume


@dataclass
class DiceReport:
    values: list[float]
    cases: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else 0.0

    @property
    def std(self) -> float:
        return float(np.std(self.values)) if self.values else 0.0

    def table_line(self) -> str:
        """Mean with the std in brackets, e.g. '0.814 (.030)'."""
        std = f"{self.std:.3f}"
        return f"{self.mean:.3f} ({std.lstrip('0')})"

    def to_json(self) -> dict:
        return {"cases": self.cases, "values": self.values,
                "mean": self.mean, "std": self.std}


def dice(pred: MaskVolume, truth: MaskVolume) -> float:
    """Dice overlap 2|A^B| / (|A| + |B|); two empty masks count as 1.0."""
    if pred.meta.dims != truth.meta.dims:
        raise ConstraintError(
            f"dims mismatch: {pred.meta.dims} vs {truth.meta.dims}"
        )
    a = pred.data.astype(bool)
    b = truth.data.astype(bool)
    sa = int(a.sum())
    sb = int(b.sum())
    if sa == 0 and sb == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return 2.0 * inter / (sa + sb)


def mse(a: MultiModalVolume, b: MultiModalVolume,
        mask: MaskVolume | None = None) -> float:
    """Mean squared difference over all scalars, or over the masked
    region (mask == 0 voxels, all channels) when a mask is given."""
    if a.meta.dims != b.meta.dims or a.meta.channels != b.meta.channels:
        raise ConstraintError("volume shapes do not match")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    if mask is None:
        return float(np.mean(diff * diff))
    if mask.meta.dims != a.meta.dims:
        raise ConstraintError("mask dims do not match volumes")
    sel = mask.data == 0
    if not sel.any():
        raise ConstraintError("mask selects no voxels (no zeros)")
    region = diff[:, sel]
    return float(np.mean(region * region))


@dataclass
class MaskStats:
    n_records: int
    n_sources: int
    strategy_counts: dict
    roi_hit_rate: float | None
    relaxed_rate: float | None
    volume_min: int | None
    volume_mean: float | None
    volume_max: int | None
    histogram: dict
    warnings: int

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def to_text(self) -> str:
        lines = [
            f"{'records':<18}{self.n_records}",
            f"{'sources':<18}{self.n_sources}",
            f"{'warnings':<18}{self.warnings}",
        ]
        for strategy, count in sorted(self.strategy_counts.items()):
            lines.append(f"{'  ' + strategy:<18}{count}")
        if self.roi_hit_rate is not None:
            lines.append(f"{'roi-hit rate':<18}{self.roi_hit_rate:.3f}")
            lines.append(f"{'relaxed rate':<18}{self.relaxed_rate:.3f}")
            lines.append(f"{'volume min':<18}{self.volume_min}")
            lines.append(f"{'volume mean':<18}{self.volume_mean:.1f}")
            lines.append(f"{'volume max':<18}{self.volume_max}")
            edges = self.histogram["edges"]
            for i, count in enumerate(self.histogram["counts"]):
                span = f"[{edges[i]:.0f}, {edges[i + 1]:.0f})"
                lines.append(f"{'  vol ' + span:<18}{count}")
        return "\n".join(lines)


def mask_statistics(manifest) -> MaskStats:
    """Descriptive statistics over a synthesis manifest: counts,
    region-volume histogram, ROI-hit rate, relaxed-fallback rate."""
    records = manifest.records
    n = len(records)
    strategy_counts: dict[str, int] = {}
    for r in records:
        strategy_counts[r.strategy] = strategy_counts.get(r.strategy, 0) + 1
    if n == 0:
        return MaskStats(0, 0, strategy_counts, None, None, None, None, None,
                         {"edges": [], "counts": []}, len(manifest.warnings))
    volumes = np.array([r.region["volume"] for r in records])
    hits = sum(1 for r in records if r.region["roi_overlap"] >= 1)
    relaxed = sum(1 for r in records if r.relaxed)
    lo, hi = int(volumes.min()), int(volumes.max())
    if lo == hi:
        edges = [float(lo), float(hi + 1)]
        counts = [n]
    else:
        hist, bin_edges = np.histogram(volumes, bins=10, range=(lo, hi))
        edges = [float(e) for e in bin_edges]
        counts = [int(c) for c in hist]
    return MaskStats(
        n_records=n,
        n_sources=len({r.source_id for r in records}),
        strategy_counts=strategy_counts,
        roi_hit_rate=hits / n,
        relaxed_rate=relaxed / n,
        volume_min=lo,
        volume_mean=float(volumes.mean()),
        volume_max=hi,
        histogram={"edges": edges, "counts": counts},
        warnings=len(manifest.warnings),
    )
