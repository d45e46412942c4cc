import subprocess
import sys

import pytest

SYNTH = [sys.executable, "-m", "svxsynth.cli"]


def run_synth(*argv):
    """Drive the synthesis engine through its CLI, the only interface
    the trainer is allowed to touch."""
    proc = subprocess.run(SYNTH + [str(a) for a in argv],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def toy_assets(tmp_path_factory):
    """Toy-geometry corpora and manifests shared by the training tests:
    10 pretraining phantoms with a roi-supervoxel manifest and a
    separate 8-phantom fine-tuning corpus, all 32x48x32."""
    root = tmp_path_factory.mktemp("toy")
    pre = root / "pretrain_corpus"
    run_synth("--seed", 29, "phantom", "--preset", "brats-like",
              "--dims", 32, 48, 32, "-n", 10, "-o", pre)
    synth = root / "synth_roi_supervoxel"
    run_synth("--seed", 29, "synth", "--train", pre / "train.json",
              "--strategy", "roi-supervoxel", "--min-volume", 200,
              "--cap", 4, "--max-supervoxels", 60, "--out", synth)
    tune = root / "finetune_corpus"
    run_synth("--seed", 31, "phantom", "--preset", "brats-like",
              "--dims", 32, 48, 32, "-n", 8, "-o", tune)
    return {
        "manifest": synth / "manifest.json",
        "pretrain_listing": pre / "train.json",
        "finetune_listing": tune / "train.json",
    }


@pytest.fixture(scope="session")
def micro_assets(tmp_path_factory):
    """Tiny 16^3 corpora for fast wiring tests, with a manifest per
    masking strategy plus a held-out test corpus."""
    root = tmp_path_factory.mktemp("micro")
    train = root / "train_corpus"
    run_synth("--seed", 51, "phantom", "--preset", "wmh-like",
              "--dims", 16, 16, 16, "-n", 3, "-o", train)
    test = root / "test_corpus"
    run_synth("--seed", 52, "phantom", "--preset", "wmh-like",
              "--dims", 16, 16, 16, "-n", 2, "-o", test)
    manifests = {}
    for strategy in ("roi-supervoxel", "noroi-supervoxel", "roi-grid", "noroi-grid"):
        out = root / f"synth_{strategy}"
        run_synth("--seed", 53, "synth", "--train", train / "train.json",
                  "--strategy", strategy, "--min-volume", 10, "--cap", 2,
                  "--max-supervoxels", 8, "--min-edge", 4, "--max-edge", 6,
                  "--out", out)
        manifests[strategy] = out / "manifest.json"
    return {
        "train_listing": train / "train.json",
        "test_listing": test / "train.json",
        "manifests": manifests,
    }
