"""Training objectives and masked diagnostics."""

from __future__ import annotations

import torch

DICE_EPS = 1e-5


def soft_dice_loss(pred: torch.Tensor, target: torch.Tensor,
                   eps: float = DICE_EPS) -> torch.Tensor:
    """1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps), averaged over
    the batch. Stays in [0, 1] for pred, target in [0, 1]."""
    dims = tuple(range(1, pred.dim()))
    inter = (pred * target).sum(dim=dims)
    denom = pred.sum(dim=dims) + target.sum(dim=dims)
    return (1.0 - (2.0 * inter + eps) / (denom + eps)).mean()


def mse(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return ((pred - target) ** 2).mean()


def masked_region_mse(pred: torch.Tensor, target: torch.Tensor,
                      mask: torch.Tensor) -> torch.Tensor:
    """MSE restricted to the suppressed region (mask == 0), broadcast
    over channels."""
    hole = (mask == 0).expand_as(pred)
    if not bool(hole.any()):
        raise ValueError("mask selects no voxels")
    diff = pred[hole] - target[hole]
    return (diff * diff).mean()
