"""Strided convolutional frame encoder for the hybrid variant.

Maps an (3, H, W) frame to a compact (d, H/prod(s), W/prod(s)) embedding. The
stride schedule is the decoder's stride list applied in reverse; each stage is
one strided convolution followed by a ConvNeXt-style block (depthwise 7x7,
pointwise 4x expansion, GELU, pointwise projection, residual). Encoder
parameters stay on the encode side and are never part of a transmitted
bitstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class EncoderConfig:
    strides: tuple[int, ...] = (5, 3, 2, 2, 2)  # decoder order; applied reversed
    embed_dim: int = 16
    width: int = 64

    @property
    def downscale(self) -> int:
        out = 1
        for s in self.strides:
            out *= s
        return out


def check_resolution(height: int, width: int, cfg: EncoderConfig):
    """Each stage must divide the running resolution; names the offending stride."""
    h, w = height, width
    for s in reversed(cfg.strides):
        if h % s or w % s:
            raise ValueError(
                f"resolution {height}x{width} not divisible by stride schedule "
                f"{tuple(reversed(cfg.strides))}: stride {s} does not divide {h}x{w}"
            )
        h //= s
        w //= s


class _ConvNeXtBlock(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.dw = nn.Conv2d(width, width, 7, padding=3, groups=width)
        self.pw1 = nn.Conv2d(width, 4 * width, 1)
        self.pw2 = nn.Conv2d(4 * width, width, 1)

    def forward(self, x):
        h = self.dw(x)
        h = self.pw2(torch.nn.functional.gelu(self.pw1(h)))
        return x + h


class FrameEncoder(nn.Module):
    """Per-stage downsampling tower ending in a 1x1 projection to embed_dim."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        stages = []
        c_in = 3
        for i, s in enumerate(reversed(cfg.strides)):
            k = s if i == 0 else 3
            pad = 0 if i == 0 else 1
            stages.append(nn.Conv2d(c_in, cfg.width, k, stride=s, padding=pad))
            stages.append(_ConvNeXtBlock(cfg.width))
            c_in = cfg.width
        self.tower = nn.Sequential(*stages)
        self.proj = nn.Conv2d(cfg.width, cfg.embed_dim, 1)

    def forward(self, frame: torch.Tensor) -> torch.Tensor:
        """(N, 3, H, W) or (3, H, W) -> (N, d, h, w) embedding."""
        x = frame.unsqueeze(0) if frame.dim() == 3 else frame
        check_resolution(x.shape[-2], x.shape[-1], self.cfg)
        return self.proj(self.tower(x))


def encode_frame(frame: torch.Tensor, encoder: FrameEncoder) -> torch.Tensor:
    """Single-frame convenience wrapper returning (d, h, w)."""
    return encoder(frame)[0]
