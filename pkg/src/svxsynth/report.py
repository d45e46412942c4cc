"""Report rendering: figures plus delimited files for stats and eval.

Everything lands in a caller-chosen directory; figures are PNG via the
Agg backend so no display is needed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_stats_report(stats, manifest, out_dir) -> list[str]:
    """Write records.csv, summary.csv and the region-volume histogram
    figure; returns the file names written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    with open(out / "records.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "draw_index", "strategy", "kind",
                         "volume", "roi_overlap", "relaxed"])
        for r in manifest.records:
            writer.writerow([r.source_id, r.draw_index, r.strategy,
                             r.region["kind"], r.region["volume"],
                             r.region["roi_overlap"], int(r.relaxed)])
    written.append("records.csv")

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in stats.to_json().items():
            if key == "histogram":
                continue
            if isinstance(value, dict):
                for k, v in sorted(value.items()):
                    writer.writerow([f"{key}.{k}", v])
            else:
                writer.writerow([key, value])
    written.append("summary.csv")

    volumes = [r.region["volume"] for r in manifest.records]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    if volumes:
        axes[0].hist(volumes, bins=min(20, max(1, len(set(volumes)))),
                     color="steelblue", edgecolor="black")
    axes[0].set_xlabel("region volume (voxels)")
    axes[0].set_ylabel("regions")
    axes[0].set_title("mask region volumes")
    per_source: dict[str, int] = {}
    for r in manifest.records:
        per_source[r.source_id] = per_source.get(r.source_id, 0) + 1
    if per_source:
        names = sorted(per_source)
        axes[1].bar(range(len(names)), [per_source[n] for n in names],
                    color="darkseagreen", edgecolor="black")
        axes[1].set_xticks(range(len(names)))
        axes[1].set_xticklabels(names, rotation=90, fontsize=7)
    axes[1].set_ylabel("records")
    axes[1].set_title("records per source")
    fig.tight_layout()
    fig.savefig(out / "volumes.png", dpi=120)
    plt.close(fig)
    written.append("volumes.png")
    return written


def save_eval_report(report, out_dir) -> list[str]:
    """Write per_case.csv and a per-case Dice bar figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    with open(out / "per_case.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "dice"])
        cases = report.cases or [str(i) for i in range(len(report.values))]
        for case, value in zip(cases, report.values):
            writer.writerow([case, f"{value:.6f}"])
        writer.writerow(["mean", f"{report.mean:.6f}"])
        writer.writerow(["std", f"{report.std:.6f}"])
    written.append("per_case.csv")

    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(report.values)), 4))
    ax.bar(range(len(report.values)), report.values, color="steelblue",
           edgecolor="black")
    ax.axhline(report.mean, color="firebrick", linestyle="--",
               label=f"mean {report.mean:.3f}")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("case")
    ax.set_ylabel("Dice")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "dice.png", dpi=120)
    plt.close(fig)
    written.append("dice.png")
    return written
