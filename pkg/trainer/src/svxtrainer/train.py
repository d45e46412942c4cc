"""Pretrain / fine-tune / evaluate loops and the baseline matrix.

Runs are reproducible: model init is seeded, epoch sample order is a
pure function of (seed, epoch), and all data sits in memory so there
is no loader nondeterminism. Checkpoints are plain dicts holding the
best-validation state plus the full metric history.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
import torch

from .dataio import load_inpainting_records, load_segmentation_pairs
from .losses import masked_region_mse, mse, soft_dice_loss
from .unet import UNetConfig, build_unet, transfer_body

METHODS = ("vanilla-unet", "restart-unet", "noroi-grid", "roi-grid",
           "noroi-supervoxel", "roi-supervoxel")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 2
    pretrain_epochs: int = 5
    finetune_epochs: int = 20
    dice_eps: float = 1e-5
    val_fraction: float = 0.2
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr and batch_size must be positive")
        if self.pretrain_epochs < 1 or self.finetune_epochs < 1:
            raise ValueError("epoch counts must be positive")


def _split(n, val_fraction, seed):
    order = np.random.default_rng([seed, 0, 0]).permutation(n)
    n_val = int(round(n * val_fraction)) if n >= 2 else 0
    n_val = min(max(n_val, 1 if n >= 2 else 0), n - 1)
    return list(order[n_val:]), list(order[:n_val])


def _epoch_order(indices, seed, epoch):
    order = list(indices)
    np.random.default_rng([seed, 1, epoch]).shuffle(order)
    return order


def _batches(items, order, batch_size, keys):
    for i in range(0, len(order), batch_size):
        chunk = [items[j] for j in order[i:i + batch_size]]
        yield tuple(torch.stack([c[k] for c in chunk]) for k in keys)


def dice_binary(pred: np.ndarray, truth: np.ndarray) -> float:
    """2|A^B| / (|A| + |B|), both-empty counts as 1.0."""
    sa = int(pred.sum())
    sb = int(truth.sum())
    if sa == 0 and sb == 0:
        return 1.0
    inter = int(np.logical_and(pred, truth).sum())
    return 2.0 * inter / (sa + sb)


def pretrain_inpainting(model, manifest_path, cfg: TrainConfig) -> dict:
    """Fit the inpainter on (masked -> target) pairs with whole-image
    MSE; logs whole and masked-region MSE per epoch (epoch 0 is the
    untrained model) and returns the best-validation checkpoint."""
    records = load_inpainting_records(manifest_path)
    train_idx, val_idx = _split(len(records), cfg.val_fraction, cfg.seed)
    eval_idx = val_idx if val_idx else train_idx
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    def evaluate_split(idx):
        model.eval()
        whole, hole = [], []
        with torch.no_grad():
            for j in idx:
                rec = records[j]
                out = model(rec["masked"].unsqueeze(0))[0]
                whole.append(float(mse(out, rec["target"])))
                hole.append(float(masked_region_mse(out, rec["target"], rec["mask"])))
        return float(np.mean(whole)), float(np.mean(hole))

    history = []
    val_mse, val_masked = evaluate_split(eval_idx)
    history.append({"epoch": 0, "train_mse": None,
                    "val_mse": val_mse, "val_masked_mse": val_masked})
    best = {"epoch": 0, "val_mse": val_mse,
            "state": {k: v.clone() for k, v in model.state_dict().items()}}

    for epoch in range(1, cfg.pretrain_epochs + 1):
        model.train()
        order = _epoch_order(train_idx, cfg.seed, epoch)
        losses = []
        for masked, target in _batches(records, order, cfg.batch_size,
                                       ("masked", "target")):
            optimizer.zero_grad()
            loss = mse(model(masked), target)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        val_mse, val_masked = evaluate_split(eval_idx)
        history.append({"epoch": epoch, "train_mse": float(np.mean(losses)),
                        "val_mse": val_mse, "val_masked_mse": val_masked})
        if val_mse < best["val_mse"]:
            best = {"epoch": epoch, "val_mse": val_mse,
                    "state": {k: v.clone() for k, v in model.state_dict().items()}}

    return {"kind": "inpaint", "model_state": best["state"],
            "unet": asdict(model.config), "best_epoch": best["epoch"],
            "history": history, "train_config": asdict(cfg)}


def finetune_segmentation(checkpoint, listing_path, cfg: TrainConfig) -> dict:
    """Train the single-channel segmentation head with soft-Dice loss.

    With a checkpoint, every weight except the final convolution is
    loaded from it; without one this is the from-scratch baseline.
    Model selection takes the best validation loss per epoch.
    """
    pairs = load_segmentation_pairs(listing_path)
    in_channels = pairs[0]["image"].shape[0]
    torch.manual_seed(cfg.seed)
    model = build_unet(UNetConfig(in_channels=in_channels, out_channels=1,
                                  final_activation="sigmoid"))
    if checkpoint is not None:
        if checkpoint["unet"]["in_channels"] != in_channels:
            raise ValueError(
                f"checkpoint expects {checkpoint['unet']['in_channels']} input "
                f"channels, data has {in_channels}"
            )
        transfer_body(model, checkpoint["model_state"])
    train_idx, val_idx = _split(len(pairs), cfg.val_fraction, cfg.seed)
    eval_idx = val_idx if val_idx else train_idx
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    def split_metrics(idx):
        model.eval()
        losses, dices = [], []
        with torch.no_grad():
            for j in idx:
                pair = pairs[j]
                out = model(pair["image"].unsqueeze(0))
                losses.append(float(soft_dice_loss(out, pair["label"].unsqueeze(0),
                                                   cfg.dice_eps)))
                hard = (out[0, 0].numpy() >= cfg.threshold)
                dices.append(dice_binary(hard, pair["label"][0].numpy() > 0))
        return float(np.mean(losses)), float(np.mean(dices))

    history = []
    best = None
    for epoch in range(1, cfg.finetune_epochs + 1):
        model.train()
        order = _epoch_order(train_idx, cfg.seed, epoch)
        losses = []
        for image, label in _batches(pairs, order, cfg.batch_size,
                                     ("image", "label")):
            optimizer.zero_grad()
            loss = soft_dice_loss(model(image), label, cfg.dice_eps)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        val_loss, val_dice = split_metrics(eval_idx)
        train_loss, train_dice = split_metrics(train_idx)
        history.append({"epoch": epoch, "batch_loss": float(np.mean(losses)),
                        "train_loss": train_loss, "train_dice": train_dice,
                        "val_loss": val_loss, "val_dice": val_dice})
        if best is None or val_loss < best["val_loss"]:
            best = {"epoch": epoch, "val_loss": val_loss,
                    "state": {k: v.clone() for k, v in model.state_dict().items()}}

    return {"kind": "segment", "model_state": best["state"],
            "unet": asdict(model.config), "best_epoch": best["epoch"],
            "history": history, "train_config": asdict(cfg)}


def evaluate(checkpoint, listing_path, threshold: float = 0.5) -> dict:
    """Per-case Dice of a segmentation checkpoint over a listing."""
    if checkpoint["kind"] != "segment":
        raise ValueError("evaluate needs a segmentation checkpoint")
    pairs = load_segmentation_pairs(listing_path)
    model = build_unet(UNetConfig(**checkpoint["unet"]))
    model.load_state_dict(checkpoint["model_state"])
    model.eval()
    cases, values = [], []
    with torch.no_grad():
        for pair in pairs:
            out = model(pair["image"].unsqueeze(0))
            hard = out[0, 0].numpy() >= threshold
            values.append(dice_binary(hard, pair["label"][0].numpy() > 0))
            cases.append(pair["id"])
    return {"cases": cases, "values": values,
            "mean": float(np.mean(values)), "std": float(np.std(values))}


def format_table(rows) -> str:
    width = max(len(r["method"]) for r in rows) + 2
    lines = []
    for r in rows:
        std = f"{r['std']:.3f}".lstrip("0")
        lines.append(f"{r['method']:<{width}}{r['mean']:.3f} ({std})")
    return "\n".join(lines)


def run_baseline_matrix(train_listing, test_listing, manifests: dict,
                        cfg: TrainConfig, seeds) -> dict:
    """Test Dice for the six training recipes, mean (std) over seeds.

    `manifests` maps each masking strategy name to its synthesis
    manifest. vanilla-unet trains from scratch; restart-unet reloads
    the vanilla body and fine-tunes again; the remaining four pretrain
    on their strategy's manifest first.
    """
    strategies = [m for m in METHODS if m not in ("vanilla-unet", "restart-unet")]
    missing = [s for s in strategies if s not in manifests]
    if missing:
        raise ValueError(f"missing manifests for strategies: {missing}")

    scores = {m: [] for m in METHODS}
    for seed in seeds:
        cfg_s = replace(cfg, seed=seed)
        vanilla = finetune_segmentation(None, train_listing, cfg_s)
        scores["vanilla-unet"].append(evaluate(vanilla, test_listing,
                                               cfg.threshold)["mean"])
        restart = finetune_segmentation(vanilla, train_listing, cfg_s)
        scores["restart-unet"].append(evaluate(restart, test_listing,
                                               cfg.threshold)["mean"])
        for strategy in strategies:
            records_channels = load_segmentation_pairs(train_listing)[0]["image"].shape[0]
            torch.manual_seed(seed)
            inpainter = build_unet(UNetConfig(in_channels=records_channels,
                                              out_channels=records_channels,
                                              final_activation="linear"))
            pre = pretrain_inpainting(inpainter, manifests[strategy], cfg_s)
            tuned = finetune_segmentation(pre, train_listing, cfg_s)
            scores[strategy].append(evaluate(tuned, test_listing,
                                             cfg.threshold)["mean"])

    rows = [{"method": m, "mean": float(np.mean(scores[m])),
             "std": float(np.std(scores[m])), "per_seed": scores[m]}
            for m in METHODS]
    return {"rows": rows, "seeds": list(seeds), "table": format_table(rows)}
