"""Command-line pipeline driver.

Subcommands mirror the pipeline stages; each consumes the previous
stage's on-disk artifact. Exit codes are a stable contract: 0 success,
2 usage, 3 input format error, 4 constraint violation or empty result.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConstraintError, FormatError
from .masking import (DEFAULT_MAX_EDGE, DEFAULT_MIN_EDGE, DEFAULT_MIN_VOLUME,
                      STRATEGIES)
from .metrics import DiceReport, dice, mask_statistics
from .nifti import load_nifti
from .phantom import PRESETS, generate_corpus, spec_from_json
from .slic import SlicParams, run_slic, save_supervoxels
from .svol import load_svol, save_svol
from .synth import load_training_set, read_manifest, synthesize_dataset
from .volume import (LabelVolume, MaskVolume, MultiModalVolume, VolumeMeta,
                     center_crop, normalize_intensities)

log = logging.getLogger("svxsynth")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_CONSTRAINT = 4


def _load_input(path, kind="image"):
    """Dispatch on extension: .nii/.nii.gz go through the NIfTI reader,
    everything else is treated as an SVOL stem."""
    name = str(path)
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return load_nifti(path, kind=kind)
    return load_svol(path)


def _slic_params(args) -> SlicParams:
    return SlicParams(
        max_supervoxels=args.max_supervoxels,
        compactness=args.compactness,
        iterations=args.iterations,
        connectivity=args.connectivity,
        min_fragment_factor=args.min_fragment_factor,
        seed=args.seed,
    )


def _add_slic_flags(parser):
    parser.add_argument("--max-supervoxels", type=int, default=400)
    parser.add_argument("--compactness", type=float, default=0.15)
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--connectivity", type=int, choices=(6, 26), default=6)
    parser.add_argument("--min-fragment-factor", type=float, default=0.25)


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def cmd_phantom(args) -> int:
    if args.config:
        spec = spec_from_json(args.config)
    else:
        spec = PRESETS[args.preset]
    if args.dims:
        spec = replace(spec, dims=tuple(args.dims))
    train = generate_corpus(args.count, spec, args.out, seed=args.seed)
    _emit(args, {"pairs": train.n, "out": str(args.out),
                 "listing": str(Path(args.out) / "train.json")},
          f"wrote {train.n} phantom pairs to {args.out}")
    return EXIT_OK


def cmd_supervoxelize(args) -> int:
    vol = _load_input(args.input)
    if not isinstance(vol, MultiModalVolume):
        raise FormatError(f"{args.input} is not an f32 intensity volume")
    vol = normalize_intensities(vol)
    svx = run_slic(vol, _slic_params(args))
    out = args.output or str(Path(args.input).with_suffix("")) + ".svx"
    save_supervoxels(svx, out)
    _emit(args, {"supervoxels": svx.supervoxel_count, "out": str(out)},
          f"supervoxels={svx.supervoxel_count}")
    return EXIT_OK


def cmd_synth(args) -> int:
    train = load_training_set(args.train)
    manifest = synthesize_dataset(
        train, args.strategy, _slic_params(args),
        cap=args.cap, seed=args.seed, out_dir=args.out,
        min_volume=args.min_volume, min_overlap=args.min_overlap,
        min_edge=args.min_edge, max_edge=args.max_edge,
        relaxed=args.relaxed, threads=args.threads,
        stream=sys.stdout if args.stream else None,
    )
    skipped = len(manifest.warnings)
    if not args.stream:
        _emit(args, {"records": len(manifest.records), "skipped": skipped,
                     "manifest": str(Path(args.out) / "manifest.json")},
              f"records={len(manifest.records)} skipped={skipped}")
    if not manifest.records:
        for w in manifest.warnings:
            log.warning("skipped %s: %s", w["source_id"], w["reason"])
        raise ConstraintError("every image was skipped; no records produced")
    return EXIT_OK


def cmd_stats(args) -> int:
    manifest = read_manifest(args.manifest, validate_files=args.validate)
    stats = mask_statistics(manifest)
    if args.report_dir:
        from .report import save_stats_report

        files = save_stats_report(stats, manifest, args.report_dir)
        log.info("report files: %s", ", ".join(files))
    _emit(args, stats.to_json(), stats.to_text())
    return EXIT_OK


def _as_binary_mask(vol) -> MaskVolume:
    if isinstance(vol, MaskVolume):
        return vol
    if isinstance(vol, LabelVolume):
        meta = VolumeMeta(vol.meta.dims, 1, "u8", vol.meta.spacing)
        return MaskVolume(meta, (vol.data != 0).astype(np.uint8))
    raise FormatError("prediction/truth volumes must hold integer labels")


def cmd_eval(args) -> int:
    pred_dir, truth_dir = Path(args.pred), Path(args.truth)
    cases = sorted(p.name for p in pred_dir.glob("*.json"))
    if not cases:
        raise ConstraintError(f"no .json volumes found under {pred_dir}")
    values = []
    names = []
    for name in cases:
        truth_path = truth_dir / name
        if not truth_path.exists():
            raise FormatError(f"no matching truth volume for {name}")
        pred = _as_binary_mask(load_svol(pred_dir / name))
        truth = _as_binary_mask(load_svol(truth_path))
        values.append(dice(pred, truth))
        names.append(name.removesuffix(".json"))
    report = DiceReport(values, names)
    if args.report_dir:
        from .report import save_eval_report

        save_eval_report(report, args.report_dir)
    _emit(args, report.to_json(), report.table_line())
    return EXIT_OK


def cmd_crop(args) -> int:
    vol = _load_input(args.input, kind=args.kind)
    cropped = center_crop(vol, tuple(args.dims))
    save_svol(cropped, args.output)
    _emit(args, {"dims": list(cropped.meta.dims), "out": str(args.output)},
          f"cropped to {cropped.meta.dims[0]}x{cropped.meta.dims[1]}x{cropped.meta.dims[2]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svxsynth",
        description="ROI-guided supervoxel masking and inpainting dataset synthesis",
    )
    parser.add_argument("--version", action="version", version=f"svxsynth {__version__}")
    parser.add_argument("--seed", type=int, default=17, help="global RNG seed")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (outputs do not depend on this)")
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser.add_argument("--json", action="store_true",
                        help="structured output on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a labeled phantom corpus")
    p.add_argument("--preset", choices=sorted(PRESETS), default="brats-like")
    p.add_argument("--config", help="phantom spec JSON (overrides --preset)")
    p.add_argument("--dims", type=int, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("-n", "--count", type=int, required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("supervoxelize", help="SLIC supervoxelization of one volume")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    _add_slic_flags(p)
    p.set_defaults(func=cmd_supervoxelize)

    p = sub.add_parser("synth", help="materialize the inpainting dataset")
    p.add_argument("--train", required=True, help="training-set listing JSON")
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=10,
                   help="max synthetic images per input image")
    p.add_argument("--min-volume", type=int, default=DEFAULT_MIN_VOLUME)
    p.add_argument("--min-overlap", type=int, default=1)
    p.add_argument("--min-edge", type=int, default=DEFAULT_MIN_EDGE)
    p.add_argument("--max-edge", type=int, default=DEFAULT_MAX_EDGE)
    p.add_argument("--relaxed", action="store_true",
                   help="fall back to the largest ROI supervoxels when the "
                        "volume floor filters everything out")
    p.add_argument("--stream", action="store_true",
                   help="emit each record as a JSON line on stdout as it is "
                        "produced (forces sequential processing)")
    _add_slic_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="manifest statistics")
    p.add_argument("manifest")
    p.add_argument("--validate", action="store_true",
                   help="check that referenced files exist")
    p.add_argument("--report-dir", help="write figures and CSV here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="Dice over matching volumes in two directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crop", help="center-crop a volume")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dims", type=int, nargs=3, metavar=("X", "Y", "Z"), required=True)
    p.add_argument("--kind", choices=("image", "labels"), default="image",
                   help="value conversion when reading NIfTI input")
    p.set_defaults(func=cmd_crop)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ConstraintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
