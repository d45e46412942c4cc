"""ROI binarization and candidate mask-region selection.

A candidate region is either a whole supervoxel or a random cuboid.
The four strategies differ in whether candidates must overlap the
segmentation foreground (roi-*) and in the region shape (*-supervoxel
vs *-grid). Supervoxel candidates are filtered by a volume floor;
cuboids enforce a minimum edge length instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, NoCandidatesError
from .slic import SupervoxelMap
from .volume import LabelVolume, MaskVolume, VolumeMeta

STRATEGIES = ("roi-supervoxel", "noroi-supervoxel", "roi-grid", "noroi-grid")

DEFAULT_MIN_VOLUME = 1500
DEFAULT_MIN_EDGE = 12
DEFAULT_MAX_EDGE = 24


@dataclass
class Region:
    """One candidate mask region.

    Supervoxel regions carry their voxel set as linear indices into the
    (Z, Y, X) grid; cuboid regions are fully described by their extent
    (x0, y0, z0, dx, dy, dz).
    """

    kind: str  # "supervoxel" | "cuboid"
    id: int | None = None
    extent: tuple[int, int, int, int, int, int] | None = None
    volume: int = 0
    roi_overlap: int = 0
    voxels: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "supervoxel":
            if self.id is None:
                raise ConstraintError("supervoxel region needs a label id")
        elif self.kind == "cuboid":
            if self.extent is None or len(self.extent) != 6:
                raise ConstraintError("cuboid region needs a 6-tuple extent")
        else:
            raise ConstraintError(f"unknown region kind '{self.kind}'")
        if self.volume < 1:
            raise ConstraintError("region volume must be >= 1")
        if self.roi_overlap > self.volume:
            raise ConstraintError("roi_overlap cannot exceed region volume")

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "volume": int(self.volume),
             "roi_overlap": int(self.roi_overlap)}
        if self.kind == "supervoxel":
            d["id"] = int(self.id)
        else:
            d["extent"] = [int(v) for v in self.extent]
        return d


@dataclass
class RegionSet:
    source_id: str
    strategy: str
    regions: list[Region]
    relaxed: bool = False
    empty_reason: str | None = None

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "strategy": self.strategy,
            "relaxed": self.relaxed,
            "empty_reason": self.empty_reason,
            "regions": [r.descriptor() for r in self.regions],
        }


def binarize_segmentation(labels: LabelVolume) -> MaskVolume:
    """Collapse a multi-class segmentation to the binary foreground:
    1 wherever the label is nonzero."""
    meta = VolumeMeta(labels.meta.dims, 1, "u8", labels.meta.spacing)
    return MaskVolume(meta, (labels.data != 0).astype(np.uint8))


def _supervoxel_regions(svx: SupervoxelMap, roi: MaskVolume | None):
    """All supervoxels as Regions, voxel sets attached, overlap counted."""
    k = svx.supervoxel_count
    flat = svx.data.ravel()
    sizes = np.bincount(flat, minlength=k + 1)
    if roi is not None:
        overlap = np.bincount(flat[roi.data.ravel() == 1], minlength=k + 1)
    else:
        overlap = np.zeros(k + 1, dtype=np.int64)
    order = np.argsort(flat, kind="stable")
    bounds = np.cumsum(sizes)
    regions = []
    for label in range(1, k + 1):
        vox = order[bounds[label - 1]:bounds[label]]
        regions.append(Region(
            kind="supervoxel",
            id=label,
            volume=int(sizes[label]),
            roi_overlap=int(overlap[label]),
            voxels=vox,
        ))
    return regions


def roi_guided_supervoxels(svx: SupervoxelMap, roi: MaskVolume,
                           source_id: str = "", min_overlap: int = 1) -> RegionSet:
    """Supervoxels intersecting the ROI by at least `min_overlap` voxels.

    Each returned Region is the whole supervoxel, not just the part
    inside the ROI.
    """
    if roi.meta.dims != svx.meta.dims:
        raise ConstraintError(
            f"roi dims {roi.meta.dims} do not match supervoxel dims {svx.meta.dims}"
        )
    regions = [r for r in _supervoxel_regions(svx, roi) if r.roi_overlap >= min_overlap]
    empty_reason = None
    if not regions:
        empty_reason = "roi-empty" if int(roi.data.sum()) == 0 else \
            f"no supervoxel overlaps the ROI by >= {min_overlap} voxels"
    return RegionSet(source_id, "roi-supervoxel", regions, empty_reason=empty_reason)


def sample_cuboid(meta: VolumeMeta, rng: np.random.Generator,
                  min_edge: int = DEFAULT_MIN_EDGE, max_edge: int = DEFAULT_MAX_EDGE,
                  roi_center: MaskVolume | None = None) -> Region:
    """Draw one random cuboid region.

    Edge lengths are independent uniform integers in [min_edge,
    max_edge]; the center is uniform over the volume, or over ROI
    voxels when `roi_center` is given. Cuboids crossing the border are
    shifted inward, preserving their edge lengths (and, by
    construction, still containing the drawn center).
    """
    X, Y, Z = meta.dims
    if not (1 <= min_edge <= max_edge):
        raise ConstraintError(f"need 1 <= min_edge <= max_edge, got {min_edge}, {max_edge}")
    if max_edge > min(X, Y, Z):
        raise ConstraintError(
            f"max_edge {max_edge} exceeds smallest volume dimension {min(X, Y, Z)}"
        )
    dx, dy, dz = (int(v) for v in rng.integers(min_edge, max_edge + 1, size=3))
    if roi_center is not None:
        roi_idx = np.flatnonzero(roi_center.data.ravel())
        if roi_idx.size == 0:
            raise NoCandidatesError("roi-empty")
        lin = int(roi_idx[int(rng.integers(0, roi_idx.size))])
        cz, rem = divmod(lin, Y * X)
        cy, cx = divmod(rem, X)
    else:
        cx = int(rng.integers(0, X))
        cy = int(rng.integers(0, Y))
        cz = int(rng.integers(0, Z))
    x0 = min(max(cx - dx // 2, 0), X - dx)
    y0 = min(max(cy - dy // 2, 0), Y - dy)
    z0 = min(max(cz - dz // 2, 0), Z - dz)
    return Region(kind="cuboid", extent=(x0, y0, z0, dx, dy, dz),
                  volume=dx * dy * dz)


def _cuboid_overlap(region: Region, roi: MaskVolume) -> int:
    x0, y0, z0, dx, dy, dz = region.extent
    return int(roi.data[z0:z0 + dz, y0:y0 + dy, x0:x0 + dx].sum())


def candidate_regions(svx: SupervoxelMap | None, roi: MaskVolume | None,
                      strategy: str, min_volume: int = DEFAULT_MIN_VOLUME,
                      rng: np.random.Generator | None = None, count: int = 10,
                      min_overlap: int = 1, min_edge: int = DEFAULT_MIN_EDGE,
                      max_edge: int = DEFAULT_MAX_EDGE, relaxed: bool = False,
                      source_id: str = "") -> RegionSet:
    """Candidate mask regions for one image under one strategy.

    Supervoxel strategies return the full filtered candidate set for
    downstream sampling; grid strategies draw up to `count` cuboids.
    An empty outcome always carries its reason; in relaxed mode an
    undersized roi-supervoxel pool falls back to the `count` largest
    ROI-overlapping supervoxels and flags the set as relaxed.
    """
    if strategy not in STRATEGIES:
        raise ConstraintError(
            f"unknown strategy '{strategy}', expected one of {', '.join(STRATEGIES)}"
        )
    if min_volume < 1:
        raise ConstraintError("min_volume must be >= 1")

    if strategy.endswith("supervoxel"):
        if svx is None:
            raise ConstraintError(f"strategy {strategy} requires a supervoxel map")
        if strategy == "roi-supervoxel":
            if roi is None:
                raise ConstraintError("roi-supervoxel requires an ROI mask")
            pool = roi_guided_supervoxels(svx, roi, source_id, min_overlap)
            if pool.empty_reason == "roi-empty":
                return RegionSet(source_id, strategy, [], empty_reason="roi-empty")
            kept = [r for r in pool.regions if r.volume >= min_volume]
            if kept:
                return RegionSet(source_id, strategy, kept)
            if relaxed and pool.regions:
                fallback = sorted(pool.regions, key=lambda r: (-r.volume, r.id))[:count]
                return RegionSet(source_id, strategy, fallback, relaxed=True)
            reason = pool.empty_reason or (
                f"all {len(pool.regions)} ROI-overlapping supervoxels below "
                f"min volume {min_volume}"
            )
            return RegionSet(source_id, strategy, [], empty_reason=reason)
        regions = [r for r in _supervoxel_regions(svx, roi) if r.volume >= min_volume]
        if not regions:
            return RegionSet(source_id, strategy, [],
                             empty_reason=f"all supervoxels below min volume {min_volume}")
        return RegionSet(source_id, strategy, regions)

    # grid strategies
    if rng is None:
        raise ConstraintError(f"strategy {strategy} requires an rng")
    meta = roi.meta if roi is not None else (svx.meta if svx else None)
    if meta is None:
        raise ConstraintError("grid strategies need an ROI or supervoxel map for geometry")
    roi_for_center = None
    if strategy == "roi-grid":
        if roi is None:
            raise ConstraintError("roi-grid requires an ROI mask")
        if int(roi.data.sum()) == 0:
            return RegionSet(source_id, strategy, [], empty_reason="roi-empty")
        roi_for_center = roi
    regions: list[Region] = []
    seen = set()
    for _ in range(count):
        region = sample_cuboid(meta, rng, min_edge, max_edge, roi_for_center)
        attempts = 0
        while region.extent in seen and attempts < 100:
            region = sample_cuboid(meta, rng, min_edge, max_edge, roi_for_center)
            attempts += 1
        if region.extent in seen:
            continue  # volume too small to hold `count` distinct cuboids
        seen.add(region.extent)
        if roi is not None:
            region.roi_overlap = _cuboid_overlap(region, roi)
        regions.append(region)
    if not regions:
        return RegionSet(source_id, strategy, [],
                         empty_reason="could not place any distinct cuboid")
    return RegionSet(source_id, strategy, regions)


def region_mask(region: Region, meta: VolumeMeta) -> MaskVolume:
    """Inverted region mask: 0 inside the region, 1 everywhere else."""
    X, Y, Z = meta.dims
    data = np.ones((Z, Y, X), dtype=np.uint8)
    if region.kind == "cuboid":
        x0, y0, z0, dx, dy, dz = region.extent
        if x0 < 0 or y0 < 0 or z0 < 0 or x0 + dx > X or y0 + dy > Y or z0 + dz > Z:
            raise ConstraintError(f"cuboid extent {region.extent} out of bounds {meta.dims}")
        data[z0:z0 + dz, y0:y0 + dy, x0:x0 + dx] = 0
    elif region.kind == "supervoxel":
        if region.voxels is None:
            raise ConstraintError("supervoxel region carries no voxel set")
        flat = data.ravel()
        flat[region.voxels] = 0
    else:
        raise ConstraintError(f"unknown region kind '{region.kind}'")
    zeros = int(data.size - data.sum())
    if zeros != region.volume:
        raise ConstraintError(
            f"region mask produced {zeros} zeros, expected volume {region.volume}"
        )
    mask_meta = VolumeMeta(meta.dims, 1, "u8", meta.spacing)
    return MaskVolume(mask_meta, data)
