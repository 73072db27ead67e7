"""Conditional decoder building blocks.

TAT layers modulate features channel-wise (gamma * f + beta) from the
32-channel temporal embedding, without any normalization. SNeRV blocks
upsample with conv -> pixel-shuffle -> sine. Channel widths follow
C_next = max(floor(C / r), c_min) with reductions kept as exact fractions so
e.g. 24 / 1.2 floors to 20, not 19.
"""

from __future__ import annotations

from fractions import Fraction

import torch
import torch.nn.functional as F
from torch import nn

from .temporal import Sine, Z_CHANNELS

C_MIN_DEFAULT = 12


def as_fraction(r) -> Fraction:
    if isinstance(r, Fraction):
        return r
    if isinstance(r, int):
        return Fraction(r)
    return Fraction(str(r))


def reduced_width(c_in: int, r, c_min: int = C_MIN_DEFAULT) -> int:
    """max(floor(c_in / r), c_min); rejects reductions that wipe the width out."""
    frac = as_fraction(r)
    if frac <= 0:
        raise ValueError(f"reduction must be positive, got {r}")
    raw = int(Fraction(c_in) / frac)  # floor for positive values
    if raw < 1:
        raise ValueError(f"reduction {r} collapses width {c_in} below 1")
    return max(raw, c_min)


def pixel_shuffle(f: torch.Tensor, s: int) -> torch.Tensor:
    """(..., C*s^2, h, w) -> (..., C, h*s, w*s); a pure permutation of elements."""
    if s == 1:
        return f
    if f.shape[-3] % (s * s) != 0:
        raise ValueError(f"channel count {f.shape[-3]} not divisible by s^2={s * s}")
    return F.pixel_shuffle(f, s)


def tat_affine(f: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
    """Channel-wise gamma * f + beta broadcast over space. No normalization."""
    c = f.shape[-3]
    if gamma.shape[-3] != c or beta.shape[-3] != c:
        raise ValueError(
            f"affine channel mismatch: features {c}, gamma {gamma.shape[-3]}, beta {beta.shape[-3]}"
        )
    return gamma * f + beta


def _zero_init(conv: nn.Conv2d) -> nn.Conv2d:
    nn.init.zeros_(conv.weight)
    nn.init.zeros_(conv.bias)
    return conv


def _head(c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(Z_CHANNELS, Z_CHANNELS, 1),
        nn.ReLU(inplace=True),
        _zero_init(nn.Conv2d(Z_CHANNELS, c_out, 1)),
    )


class TATLayer(nn.Module):
    """Produces (gamma, beta) from z_t via two independent 1x1-conv heads.

    Both heads are zero-initialized and the gamma head is offset by +1, so a
    fresh layer is an exact identity modulation.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.gamma_head = _head(channels)
        self.beta_head = _head(channels)

    def forward(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if z.shape[-3] != Z_CHANNELS:
            raise ValueError(f"z must have {Z_CHANNELS} channels, got {z.shape[-3]}")
        return self.gamma_head(z) + 1.0, self.beta_head(z)

    def modulate(self, f: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        gamma, beta = self(z)
        return tat_affine(f, gamma, beta)


class AdaINLayer(nn.Module):
    """Normalization-coupled modulation (ablation baseline for the TAT layer)."""

    EPS = 1e-5

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.mu_head = _head(channels)
        self.sigma_head = _head(channels)

    def forward(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.mu_head(z), self.sigma_head(z) + 1.0

    def modulate(self, f: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        mu_t, sigma_t = self(z)
        return adain_modulate(f, mu_t, sigma_t)


def adain_modulate(f: torch.Tensor, mu_t: torch.Tensor, sigma_t: torch.Tensor) -> torch.Tensor:
    """sigma_t * (f - mu(f)) / sigma(f) + mu_t with spatial statistics per channel."""
    c = f.shape[-3]
    if mu_t.shape[-3] != c or sigma_t.shape[-3] != c:
        raise ValueError("AdaIN channel mismatch")
    mu_f = f.mean(dim=(-2, -1), keepdim=True)
    sigma_f = f.var(dim=(-2, -1), keepdim=True, correction=0).sqrt().clamp(min=AdaINLayer.EPS)
    return sigma_t * (f - mu_f) / sigma_f + mu_t


class TATResBlock(nn.Module):
    """TAT -> Conv3x3 -> GELU -> TAT -> Conv3x3 with a skip connection.

    The second convolution is zero-initialized, so the block starts as an
    identity and the decoder output is initially independent of z_t.
    """

    def __init__(self, channels: int, modulation: str = "tat"):
        super().__init__()
        layer = {"tat": TATLayer, "adain": AdaINLayer}[modulation]
        self.mod1 = layer(channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.mod2 = layer(channels)
        self.conv2 = _zero_init(nn.Conv2d(channels, channels, 3, padding=1))

    def forward(self, f: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        h = self.conv1(self.mod1.modulate(f, z))
        h = F.gelu(h)
        h = self.conv2(self.mod2.modulate(h, z))
        return f + h


def _activation(name: str) -> nn.Module:
    if name == "sine":
        return Sine()
    if name == "gelu":
        return nn.GELU()
    raise ValueError(f"unknown activation {name!r}")


class SNeRVBlock(nn.Module):
    """Conv(c_in, c_out*s^2, k) -> PixelShuffle(s) -> activation (sine by default)."""

    def __init__(self, c_in: int, c_out: int, k: int, s: int, activation: str = "sine"):
        super().__init__()
        if k % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {k}")
        self.c_in, self.c_out, self.s = c_in, c_out, s
        self.conv = nn.Conv2d(c_in, c_out * s * s, k, padding=k // 2)
        self.shuffle = nn.PixelShuffle(s) if s > 1 else nn.Identity()
        self.act = _activation(activation)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        if f.shape[-3] != self.c_in:
            raise ValueError(f"expected {self.c_in} channels, got {f.shape[-3]}")
        return self.act(self.shuffle(self.conv(f)))


class SinusoidalENeRVBlock(nn.Module):
    """Conv(c, mid*s^2, k) -> PixelShuffle(s) -> Conv(mid, c_out, 3) -> activation.

    ``mid`` is the block's floor(c_in/4) bottleneck.
    """

    def __init__(self, c_in: int, c_out: int, k: int, s: int, activation: str = "sine"):
        super().__init__()
        self.c_in, self.c_out, self.s = c_in, c_out, s
        mid = max(c_in // 4, 1)
        self.conv1 = nn.Conv2d(c_in, mid * s * s, k, padding=k // 2)
        self.shuffle = nn.PixelShuffle(s) if s > 1 else nn.Identity()
        self.conv2 = nn.Conv2d(mid, c_out, 3, padding=1)
        self.act = _activation(activation)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        if f.shape[-3] != self.c_in:
            raise ValueError(f"expected {self.c_in} channels, got {f.shape[-3]}")
        return self.act(self.conv2(self.shuffle(self.conv1(f))))
