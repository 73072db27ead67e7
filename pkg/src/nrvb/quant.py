"""Learned quantizers, the network-free Gaussian entropy model, and the
rate-regularized objective.

Weights use symmetric quantization (offset fixed at zero); embeddings use the
asymmetric scheme with a learned offset. Each transmitted tensor carries one
(scale, offset) pair and one (mu_s, sigma_s) pair in the symbol domain, so the
decoder can rebuild the exact coding distribution from four scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

SCALE_MIN = 1e-9
SIGMA_MIN = 1e-6
P_MIN = 1e-9
LOG2_E = math.log2(math.e)
_SQRT2 = math.sqrt(2.0)


@dataclass
class QuantParams:
    """Scalar quantizer: symbols = round((x - offset) / scale), half-to-even."""

    scale: float
    offset: float = 0.0
    mode: str = "symmetric"

    def __post_init__(self):
        if self.mode not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown quantizer mode {self.mode!r}")
        if self.mode == "symmetric" and self.offset != 0.0:
            raise ValueError("symmetric mode requires offset == 0")
        if not self.scale > SCALE_MIN:
            raise ValueError(f"scale must exceed {SCALE_MIN}, got {self.scale}")


@dataclass
class EntropyModelParams:
    """Symbol-domain Gaussian: exactly two scalars per transmitted tensor."""

    mu_s: float
    sigma_s: float

    def __post_init__(self):
        if not self.sigma_s >= SIGMA_MIN:
            raise ValueError(f"sigma_s must be >= {SIGMA_MIN}, got {self.sigma_s}")


@dataclass
class RateBudget:
    """Estimated rate, its target, and the penalty configuration."""

    b_avg: float
    kappa: float
    rate_bpp: float
    target_bpp: float

    def __post_init__(self):
        if self.rate_bpp < 0 or self.target_bpp < 0:
            raise ValueError("rates must be non-negative")


def quantize(x: np.ndarray, q: QuantParams) -> np.ndarray:
    """Tensor -> integer symbols (int32), rounding half-to-even."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    return np.rint((arr - q.offset) / q.scale).astype(np.int32)


def dequantize(symbols: np.ndarray, q: QuantParams) -> np.ndarray:
    """Integer symbols -> reconstruction symbols*scale + offset (f64).

    The bitstream path reconstructs in f32 with the wire scalars instead; see
    QuantizedTensorRecord.dequantized.
    """
    return np.asarray(symbols, dtype=np.float64) * q.scale + q.offset


def _clamped(scale, like: torch.Tensor) -> torch.Tensor:
    if not isinstance(scale, torch.Tensor):
        scale = torch.tensor(float(scale), dtype=like.dtype, device=like.device)
    return scale.clamp(min=SCALE_MIN)


def ste_quantize(x: torch.Tensor, scale, offset=0.0) -> torch.Tensor:
    """Dequantized rounded value with a straight-through gradient through round."""
    sc = _clamped(scale, x)
    sym = (x - offset) / sc
    rounded = sym + (torch.round(sym) - sym).detach()
    return rounded * sc + offset


def mixed_quantize(
    x: torch.Tensor,
    scale: torch.Tensor,
    offset: torch.Tensor | float = 0.0,
    noise: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Training-time views of a quantized tensor.

    Returns ``(noisy, ste)`` where ``noisy`` is the symbol-domain value with
    additive U(-1/2, 1/2) noise (feeds the rate term) and ``ste`` is the
    dequantized rounded value with a straight-through gradient (feeds the
    distortion term). Pass ``noise`` to fix the realization.
    """
    sc = _clamped(scale, x)
    sym = (x - offset) / sc
    if noise is None:
        noise = torch.rand_like(x) - 0.5
    noisy = sym + noise
    return noisy, ste_quantize(x, scale, offset)


def fit_entropy_model_t(
    x: torch.Tensor, scale: torch.Tensor, offset: torch.Tensor | float = 0.0
) -> tuple[torch.Tensor, torch.Tensor]:
    """Symbol-domain mean/std of a tensor, gradients attached.

    Population statistics: a balanced +-1 tensor with unit scale has
    (mu_s, sigma_s) = (0, 1) exactly.
    """
    sc = _clamped(scale, x)
    mu = (x.mean() - offset) / sc
    sigma = (x.std(correction=0) / sc).clamp(min=SIGMA_MIN)
    return mu, sigma


def fit_entropy_model(x: np.ndarray, q: QuantParams) -> EntropyModelParams:
    """Codec-side entropy model fit from the continuous tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot fit an entropy model on an empty tensor")
    mu = (float(arr.mean()) - q.offset) / q.scale
    sigma = max(float(arr.std()) / q.scale, SIGMA_MIN)
    return EntropyModelParams(mu_s=mu, sigma_s=sigma)


def normal_cdf(z: float) -> float:
    """Standard normal CDF in f64."""
    return 0.5 * math.erfc(-z / _SQRT2)


def symbol_likelihood(v: float, m: EntropyModelParams) -> float:
    """P(symbol = v) under the Gaussian convolved with U(-1/2, 1/2), floored at P_MIN."""
    hi = normal_cdf((v + 0.5 - m.mu_s) / m.sigma_s)
    lo = normal_cdf((v - 0.5 - m.mu_s) / m.sigma_s)
    return max(hi - lo, P_MIN)


def estimate_rate_bits_exact(symbols, m: EntropyModelParams) -> float:
    """Sum of -log2 p(v) over integer symbols, per-element in f64.

    Sequential scalar accumulation; this is the normative value that coder
    payload sizes are checked against.
    """
    total = 0.0
    for v in np.asarray(symbols).ravel().tolist():
        total += -math.log2(symbol_likelihood(v, m))
    return total


def estimate_rate_bits(view: torch.Tensor, mu_s: torch.Tensor, sigma_s: torch.Tensor) -> torch.Tensor:
    """Differentiable rate in bits for a (possibly noisy) symbol-domain view."""
    sigma = sigma_s.clamp(min=SIGMA_MIN)
    hi = torch.special.ndtr((view + 0.5 - mu_s) / sigma)
    lo = torch.special.ndtr((view - 0.5 - mu_s) / sigma)
    p = (hi - lo).clamp(min=P_MIN)
    return -torch.log(p).sum() * LOG2_E


def init_quant_params(x: np.ndarray, mode: str, b_avg: float) -> tuple[float, float]:
    """Initial (scale, offset) placing a 2^b_avg-level lattice across the tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if mode == "asymmetric":
        offset = (float(arr.min()) + float(arr.max())) / 2.0
    else:
        offset = 0.0
    spread = float(np.abs(arr - offset).max())
    levels = 2.0 ** b_avg - 1.0
    scale = 2.0 * spread / levels
    return max(scale, 1e-8), offset


def compute_target_bpp(total_numel: int, b_avg: float, t: int, height: int, width: int) -> float:
    """R_target = B_avg * Numel(transmitted) / (T*H*W)."""
    return b_avg * total_numel / (t * height * width)


def make_rate_budget(
    total_numel: int, b_avg: float, kappa: float, rate_bits: float, t: int, height: int, width: int
) -> RateBudget:
    pixels = t * height * width
    return RateBudget(
        b_avg=b_avg,
        kappa=kappa,
        rate_bpp=rate_bits / pixels,
        target_bpp=compute_target_bpp(total_numel, b_avg, t, height, width),
    )


def cem_loss(distortion: torch.Tensor, rate_bpp: torch.Tensor, budget: RateBudget) -> torch.Tensor:
    """L = L_d + kappa * ReLU(R - R_target); the rate term vanishes below target."""
    gap = rate_bpp - budget.target_bpp
    if isinstance(gap, torch.Tensor):
        return distortion + budget.kappa * torch.relu(gap)
    return distortion + budget.kappa * max(gap, 0.0)


class TensorQuantizer(nn.Module):
    """Per-tensor learnable quantizer with its symbol-domain entropy model.

    The scale lives in log-domain internally: once the rate drops below its
    target, the ReLU gate removes all upward pressure and the distortion
    gradient keeps shrinking the scale, so a directly-learned scale can cross
    zero. Entropy model statistics are refit from the continuous tensor at
    every call so the rate term can shrink the tensor's spread.
    """

    def __init__(self, init_scale: float, init_offset: float = 0.0, mode: str = "symmetric"):
        super().__init__()
        if mode not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown quantizer mode {mode!r}")
        self.mode = mode
        self.log_scale = nn.Parameter(torch.tensor(math.log(max(float(init_scale), SCALE_MIN))))
        if mode == "asymmetric":
            self.offset = nn.Parameter(torch.tensor(float(init_offset)))
        else:
            self.register_buffer("offset", torch.tensor(0.0))

    @property
    def scale(self) -> torch.Tensor:
        return torch.exp(self.log_scale)

    def ste(self, x: torch.Tensor) -> torch.Tensor:
        return ste_quantize(x, self.scale, self.offset)

    def rate_bits(self, x: torch.Tensor, noise: torch.Tensor | None = None) -> torch.Tensor:
        noisy, _ = mixed_quantize(x, self.scale, self.offset, noise=noise)
        mu, sigma = fit_entropy_model_t(x, self.scale, self.offset)
        return estimate_rate_bits(noisy, mu, sigma)

    def quant_params(self) -> QuantParams:
        """Freeze to f32 codec-side parameters.

        The wire floor 2^-23 is exactly representable in f32; it only binds
        for degenerate (all-zero) tensors where the scale is immaterial.
        """
        sc = float(np.float32(max(float(self.scale.detach()), 2.0 ** -23)))
        off = float(np.float32(float(self.offset.detach()))) if self.mode == "asymmetric" else 0.0
        return QuantParams(scale=sc, offset=off, mode=self.mode)
