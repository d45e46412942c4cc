"""Synthesis of inpainting training pairs and their manifest.

For every training image the pipeline normalizes intensities, builds
candidate regions under the chosen strategy, samples up to `cap` of
them without replacement, and writes (masked, target, mask) SVOL
triples plus a JSON manifest (schema "svx-manifest/1"). Each image
draws from its own child stream keyed by (seed, image id) and records
are sorted by (source id, draw index), so the artifact is identical no
matter how many worker threads ran.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConstraintError, FormatError
from .masking import (DEFAULT_MAX_EDGE, DEFAULT_MIN_EDGE, DEFAULT_MIN_VOLUME,
                      STRATEGIES, Region, binarize_segmentation,
                      candidate_regions, region_mask)
from .rng import child_rng
from .slic import SlicParams, run_slic
from .svol import load_svol, save_svol
from .volume import (LabelVolume, MaskVolume, MultiModalVolume, apply_mask,
                     normalize_intensities)

MANIFEST_SCHEMA = "svx-manifest/1"
DEFAULT_CAP = 10


@dataclass(frozen=True)
class TrainEntry:
    image_path: str
    label_path: str
    id: str


@dataclass
class TrainingSet:
    entries: list[TrainEntry]
    base_dir: Path = field(default_factory=Path, compare=False)

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ConstraintError("training set must contain at least one entry")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ConstraintError("training set ids are not unique")

    @property
    def n(self) -> int:
        return len(self.entries)

    def resolve(self, entry: TrainEntry) -> tuple[Path, Path]:
        return (self.base_dir / entry.image_path, self.base_dir / entry.label_path)


def save_training_set(train: TrainingSet, path) -> None:
    doc = {"entries": [{"id": e.id, "image": e.image_path, "labels": e.label_path}
                       for e in train.entries]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_training_set(path) -> TrainingSet:
    p = Path(path)
    if not p.exists():
        raise FormatError(f"missing file: {p}")
    try:
        doc = json.loads(p.read_text())
        entries = [TrainEntry(image_path=e["image"], label_path=e["labels"], id=e["id"])
                   for e in doc["entries"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid training set listing {p}: {exc}") from exc
    return TrainingSet(entries, base_dir=p.parent)


@dataclass
class SynthRecord:
    source_id: str
    draw_index: int
    strategy: str
    masked_path: str
    target_path: str
    mask_path: str
    region: dict
    relaxed: bool
    seed_path: list

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SynthManifest:
    records: list[SynthRecord]
    params: dict
    warnings: list[dict] = field(default_factory=list)
    tool_version: str = __version__
    schema: str = MANIFEST_SCHEMA
    base_dir: Path = field(default_factory=Path, compare=False)

    def __post_init__(self):
        per_source: dict[str, int] = {}
        for r in self.records:
            per_source[r.source_id] = per_source.get(r.source_id, 0) + 1
        cap = int(self.params.get("cap", DEFAULT_CAP))
        for sid, n in per_source.items():
            if n > cap:
                raise FormatError(f"source {sid} has {n} records, cap is {cap}")

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "tool_version": self.tool_version,
            "params": self.params,
            "warnings": self.warnings,
            "records": [r.to_json() for r in self.records],
        }


def synthesize_pair(vol: MultiModalVolume, region: Region) \
        -> tuple[MultiModalVolume, MultiModalVolume, MaskVolume]:
    """(masked, target, mask) for one region: the target is the input
    itself and the masked image is the target zeroed inside the region."""
    mask = region_mask(region, vol.meta)
    masked = apply_mask(vol, mask)
    return masked, vol, mask


def write_manifest(manifest: SynthManifest, path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")


def read_manifest(path, validate_files: bool = False) -> SynthManifest:
    p = Path(path)
    if not p.exists():
        raise FormatError(f"missing file: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid manifest {p}: {exc}") from exc
    schema = doc.get("schema")
    if schema != MANIFEST_SCHEMA:
        raise FormatError(f"unknown schema version '{schema}', expected {MANIFEST_SCHEMA}")
    try:
        records = [SynthRecord(**r) for r in doc["records"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"invalid manifest record in {p}: {exc}") from exc
    manifest = SynthManifest(records, doc.get("params", {}), doc.get("warnings", []),
                             doc.get("tool_version", "unknown"), schema, base_dir=p.parent)
    if validate_files:
        for r in records:
            for rel in (r.masked_path, r.target_path, r.mask_path):
                stem = (p.parent / rel).with_suffix("")
                for suffix in (".json", ".bin"):
                    f = stem.parent / (stem.name + suffix)
                    if not f.exists():
                        raise FormatError(f"manifest references missing file: {f}")
    return manifest


def _load_pair(train: TrainingSet, entry: TrainEntry):
    image_path, label_path = train.resolve(entry)
    vol = load_svol(image_path)
    if not isinstance(vol, MultiModalVolume):
        raise FormatError(f"{image_path} is not an f32 intensity volume")
    labels = load_svol(label_path)
    if not isinstance(labels, LabelVolume):
        raise FormatError(f"{label_path} is not an integer label volume")
    if labels.meta.dims != vol.meta.dims:
        raise FormatError(
            f"dims mismatch for {entry.id}: image {vol.meta.dims} vs labels {labels.meta.dims}"
        )
    return vol, labels


def _synthesize_one(train, entry, strategy, slic_params, cap, seed, out_dir,
                    min_volume, min_overlap, min_edge, max_edge, relaxed):
    vol, labels = _load_pair(train, entry)
    vol = normalize_intensities(vol)
    roi = binarize_segmentation(labels)

    if strategy.endswith("supervoxel"):
        svx = run_slic(vol, slic_params)
        cands = candidate_regions(svx, roi, strategy, min_volume=min_volume,
                                  min_overlap=min_overlap, relaxed=relaxed,
                                  source_id=entry.id)
        if not cands.regions:
            return [], {"source_id": entry.id, "reason": cands.empty_reason}
        rng = child_rng(seed, entry.id)
        order = rng.permutation(len(cands.regions))[:min(cap, len(cands.regions))]
        chosen = [(int(j), cands.regions[idx]) for j, idx in enumerate(order)]
        is_relaxed = cands.relaxed
    else:
        rng = child_rng(seed, entry.id)
        cands = candidate_regions(None, roi, strategy, min_volume=min_volume,
                                  rng=rng, count=cap, min_edge=min_edge,
                                  max_edge=max_edge, source_id=entry.id)
        if not cands.regions:
            return [], {"source_id": entry.id, "reason": cands.empty_reason}
        chosen = list(enumerate(cands.regions))
        is_relaxed = False

    records = []
    src_dir = Path(out_dir) / entry.id
    for draw, region in chosen:
        masked, target, mask = synthesize_pair(vol, region)
        names = {}
        for part, volume in (("masked", masked), ("target", target), ("mask", mask)):
            stem = src_dir / f"{draw}.{part}"
            save_svol(volume, stem)
            names[part] = f"{entry.id}/{draw}.{part}.json"
        records.append(SynthRecord(
            source_id=entry.id,
            draw_index=draw,
            strategy=strategy,
            masked_path=names["masked"],
            target_path=names["target"],
            mask_path=names["mask"],
            region=region.descriptor(),
            relaxed=is_relaxed,
            seed_path=[seed, entry.id, draw],
        ))
    return records, None


def synthesize_dataset(train: TrainingSet, strategy: str, slic_params: SlicParams,
                       *, cap: int = DEFAULT_CAP, seed: int = 17, out_dir,
                       min_volume: int = DEFAULT_MIN_VOLUME, min_overlap: int = 1,
                       min_edge: int = DEFAULT_MIN_EDGE, max_edge: int = DEFAULT_MAX_EDGE,
                       relaxed: bool = False, threads: int = 1,
                       stream=None) -> SynthManifest:
    """Materialize the synthetic inpainting dataset for a training set.

    Returns the manifest, already written to <out_dir>/manifest.json.
    Images whose candidate set is empty are skipped with a manifest
    warning; everything else is an error and aborts. When `stream` is
    a writable file object, each record is emitted to it as a JSON
    line as soon as its files land; streaming forces sequential
    processing so the line order stays deterministic.
    """
    if strategy not in STRATEGIES:
        raise ConstraintError(
            f"unknown strategy '{strategy}', expected one of {', '.join(STRATEGIES)}"
        )
    if cap < 1:
        raise ConstraintError("cap must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(entry):
        return _synthesize_one(train, entry, strategy, slic_params, cap, seed, out,
                               min_volume, min_overlap, min_edge, max_edge, relaxed)

    if threads > 1 and stream is None:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, train.entries))
    else:
        results = []
        for entry in train.entries:
            result = work(entry)
            if stream is not None:
                for record in result[0]:
                    stream.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
                stream.flush()
            results.append(result)

    records: list[SynthRecord] = []
    warnings: list[dict] = []
    for recs, warning in results:
        records.extend(recs)
        if warning is not None:
            warnings.append(warning)
    records.sort(key=lambda r: (r.source_id, r.draw_index))

    params = {
        "strategy": strategy,
        "cap": cap,
        "seed": seed,
        "min_volume": min_volume,
        "min_overlap": min_overlap,
        "min_edge": min_edge,
        "max_edge": max_edge,
        "relaxed": relaxed,
        "slic": {
            "max_supervoxels": slic_params.max_supervoxels,
            "compactness": slic_params.compactness,
            "iterations": slic_params.iterations,
            "connectivity": slic_params.connectivity,
            "min_fragment_factor": slic_params.min_fragment_factor,
        },
    }
    manifest = SynthManifest(records, params, warnings)
    write_manifest(manifest, out / "manifest.json")
    return manifest
