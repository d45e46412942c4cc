"""Shallow 3-level 3D U-net.

Each level is two zero-padded 3x3x3 convolutions, each followed by
batch normalization and ReLU; downsampling is 2x max pooling and the
decoder upsamples with stride-2 transposed convolutions, concatenating
the matching encoder features. The final 1x1x1 convolution (`head`)
maps to the task's output channels and is the only layer swapped when
transferring an inpainting checkpoint to segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 2
    out_channels: int = 2
    features: tuple[int, int, int] = (16, 32, 64)
    final_activation: str = "linear"  # "linear" (inpainting) or "sigmoid" (segmentation)

    def __post_init__(self):
        if len(self.features) != 3:
            raise ValueError("expected 3 resolution levels of features")
        if self.final_activation not in ("linear", "sigmoid"):
            raise ValueError(f"unknown final activation {self.final_activation!r}")


def _level(in_ch, out_ch):
    return nn.Sequential(
        nn.Conv3d(in_ch, out_ch, 3, padding=1),
        nn.BatchNorm3d(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv3d(out_ch, out_ch, 3, padding=1),
        nn.BatchNorm3d(out_ch),
        nn.ReLU(inplace=True),
    )


class UNet3D(nn.Module):
    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        f1, f2, f3 = config.features
        self.enc1 = _level(config.in_channels, f1)
        self.enc2 = _level(f1, f2)
        self.bottom = _level(f2, f3)
        self.pool = nn.MaxPool3d(2)
        self.up2 = nn.ConvTranspose3d(f3, f2, kernel_size=2, stride=2)
        self.dec2 = _level(f2 * 2, f2)
        self.up1 = nn.ConvTranspose3d(f2, f1, kernel_size=2, stride=2)
        self.dec1 = _level(f1 * 2, f1)
        self.head = nn.Conv3d(f1, config.out_channels, kernel_size=1)

    def forward(self, x):
        spatial = x.shape[2:]
        if any(s % 4 for s in spatial):
            raise ValueError(
                f"spatial dims {tuple(spatial)} must be divisible by 4 "
                f"(2 pooling levels)"
            )
        s1 = self.enc1(x)
        s2 = self.enc2(self.pool(s1))
        b = self.bottom(self.pool(s2))
        y = self.dec2(torch.cat([self.up2(b), s2], dim=1))
        y = self.dec1(torch.cat([self.up1(y), s1], dim=1))
        y = self.head(y)
        if self.config.final_activation == "sigmoid":
            y = torch.sigmoid(y)
        return y


def build_unet(config: UNetConfig) -> UNet3D:
    return UNet3D(config)


def transfer_body(target: UNet3D, source_state: dict) -> None:
    """Copy every weight except the final convolution from a checkpoint
    state dict into `target` (which may have a different head width)."""
    body = {k: v for k, v in source_state.items() if not k.startswith("head.")}
    missing = [k for k in target.state_dict() if not k.startswith("head.")
               and k not in body]
    if missing:
        raise ValueError(f"checkpoint is missing body weights: {missing[:3]}")
    target.load_state_dict(body, strict=False)
