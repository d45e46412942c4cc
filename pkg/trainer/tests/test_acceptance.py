"""Trainer acceptance suite: network contract, toy pretraining gain,
and toy fine-tuning quality. Prints one PASS/FAIL line per criterion
(visible with `pytest -s`)."""

import time
from contextlib import contextmanager

import numpy as np
import torch

from svxtrainer.dataio import load_inpainting_records
from svxtrainer.losses import soft_dice_loss
from svxtrainer.train import (TrainConfig, finetune_segmentation,
                              pretrain_inpainting)
from svxtrainer.unet import UNetConfig, build_unet, transfer_body

TOY = TrainConfig(pretrain_epochs=5, finetune_epochs=20, lr=1e-3,
                  batch_size=2, seed=0)


@contextmanager
def criterion(name):
    t0 = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS ({time.monotonic() - t0:.1f}s)")


def test_unet_shape_and_gradient_suite():
    with criterion("unet-shape-gradient"):
        torch.manual_seed(0)
        rng = np.random.default_rng(1)
        seg = build_unet(UNetConfig(in_channels=2, out_channels=1,
                                    final_activation="sigmoid"))
        seg.eval()
        with torch.no_grad():
            for _ in range(5):
                dims = tuple(int(rng.integers(2, 13)) * 4 for _ in range(3))
                y = seg(torch.randn(1, 2, *dims))
                assert y.shape == (1, 1, *dims)
                assert 0.0 < float(y.min()) and float(y.max()) < 1.0

        # soft-Dice gradient vs central differences on a random 4^3 tensor
        pred = torch.rand(1, 1, 4, 4, 4, dtype=torch.float64, requires_grad=True)
        target = (torch.rand(1, 1, 4, 4, 4, dtype=torch.float64) > 0.5).double()
        soft_dice_loss(pred, target).backward()
        analytic = pred.grad.detach().flatten()
        h = 1e-6
        flat = pred.detach().flatten()
        numeric = torch.zeros_like(flat)
        for i in range(flat.numel()):
            hi = flat.clone()
            lo = flat.clone()
            hi[i] += h
            lo[i] -= h
            numeric[i] = (float(soft_dice_loss(hi.reshape(pred.shape), target)) -
                          float(soft_dice_loss(lo.reshape(pred.shape), target))) / (2 * h)
        rel = float(torch.linalg.norm(analytic - numeric) /
                    torch.linalg.norm(analytic))
        assert rel <= 1e-4, f"gradient relative error {rel}"

        # weight transfer: body identical, head re-initialized
        torch.manual_seed(2)
        inpainter = build_unet(UNetConfig(in_channels=2, out_channels=2))
        torch.manual_seed(3)
        probe = build_unet(UNetConfig(in_channels=2, out_channels=1,
                                      final_activation="sigmoid"))
        transfer_body(probe, inpainter.state_dict())
        for name, value in probe.state_dict().items():
            if name.startswith("head."):
                assert value.shape[0] == 1
            else:
                assert torch.equal(value, inpainter.state_dict()[name])


def test_toy_pretraining_halves_masked_mse(toy_assets):
    with criterion("toy-pretraining-mse"):
        torch.manual_seed(TOY.seed)
        model = build_unet(UNetConfig(in_channels=2, out_channels=2))
        checkpoint = pretrain_inpainting(model, toy_assets["manifest"], TOY)
        history = checkpoint["history"]
        initial = history[0]["val_masked_mse"]
        final = history[-1]["val_masked_mse"]
        assert final <= 0.5 * initial, \
            f"masked MSE {final:.5f} vs epoch-0 {initial:.5f}"

        # the network fills the hole rather than passing zeros through
        model.load_state_dict(checkpoint["model_state"])
        model.eval()
        record = load_inpainting_records(toy_assets["manifest"])[0]
        with torch.no_grad():
            out = model(record["masked"].unsqueeze(0))[0]
        hole = (record["mask"] == 0).expand_as(out)
        assert float(out[hole].abs().mean()) > 0.01


def test_toy_finetune_reaches_train_dice(toy_assets):
    with criterion("toy-finetune-dice"):
        tuned = finetune_segmentation(None, toy_assets["finetune_listing"], TOY)
        best = max(e["train_dice"] for e in tuned["history"])
        assert best >= 0.6, f"train Dice peaked at {best:.3f} within 20 epochs"
