"""Temporal conditioning: frequency positional encoding and the z_t generator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

Z_CHANNELS = 32
Z_HIDDEN = 64


@dataclass(frozen=True)
class PEConfig:
    """Frequency positional encoding with base ``b`` and ``l`` bands (output length 2l)."""

    b: float = 1.25
    l: int = 80

    def __post_init__(self):
        if not self.b > 1.0:
            raise ValueError(f"frequency base must be > 1, got {self.b}")
        if self.l < 1:
            raise ValueError(f"band count must be >= 1, got {self.l}")

    @property
    def dim(self) -> int:
        return 2 * self.l


@dataclass
class TemporalEmbedding:
    """32-channel conditioning vector for one normalized frame index."""

    z: torch.Tensor  # (Z_CHANNELS, 1, 1)
    t_norm: float


def positional_encode(t_norm: float, cfg: PEConfig) -> np.ndarray:
    """Encode a normalized frame index as (sin(b^0*pi*t), cos(b^0*pi*t), ..., sin(b^(l-1)*pi*t), cos(b^(l-1)*pi*t)).

    ``t_norm`` must lie in (0, 1]; anything else indicates a broken index
    normalization upstream and is rejected.
    """
    if not 0.0 < t_norm <= 1.0:
        raise ValueError(f"t_norm must be in (0, 1], got {t_norm}")
    out = np.empty(2 * cfg.l, dtype=np.float64)
    for j in range(cfg.l):
        phase = (cfg.b ** j) * math.pi * t_norm
        out[2 * j] = math.sin(phase)
        out[2 * j + 1] = math.cos(phase)
    return out


class Sine(nn.Module):
    """sin(w * x). The default keeps unit frequency; w is exposed for experiments."""

    def __init__(self, w: float = 1.0):
        super().__init__()
        self.w = w

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.w == 1.0:
            return torch.sin(x)
        return torch.sin(self.w * x)

    def extra_repr(self) -> str:
        return f"w={self.w}"


class TemporalEmbedNet(nn.Module):
    """Maps PE(t) to the 32-channel temporal embedding z_t.

    Two 1x1 convolutions on a (2l, 1, 1) tensor with sine activations,
    widths 2l -> 64 -> 32.
    """

    def __init__(self, pe_dim: int):
        super().__init__()
        self.pe_dim = pe_dim
        self.net = nn.Sequential(
            nn.Conv2d(pe_dim, Z_HIDDEN, 1),
            Sine(),
            nn.Conv2d(Z_HIDDEN, Z_CHANNELS, 1),
            Sine(),
        )

    def forward(self, pe: torch.Tensor) -> torch.Tensor:
        """pe: (N, 2l, 1, 1) -> z: (N, 32, 1, 1)."""
        if pe.shape[1] != self.pe_dim:
            raise ValueError(f"PE width {pe.shape[1]} does not match network input {self.pe_dim}")
        return self.net(pe)


def pe_to_tensor(pe_vec: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(2l,) numpy vector -> (1, 2l, 1, 1) network input."""
    return torch.from_numpy(np.ascontiguousarray(pe_vec)).to(dtype).reshape(1, -1, 1, 1)


def temporal_embed(pe_vec: np.ndarray, net: TemporalEmbedNet, t_norm: float = 1.0) -> TemporalEmbedding:
    """Run the z_t generator on one encoded index."""
    dtype = next(net.parameters()).dtype
    z = net(pe_to_tensor(pe_vec, dtype))[0]
    return TemporalEmbedding(z=z, t_norm=t_norm)
