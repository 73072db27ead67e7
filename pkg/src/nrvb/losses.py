"""Reconstruction losses and quality metrics.

The training objective combines a frequency-domain L1 term with weighted
spatial L1 and MS-SSIM terms:

    L_d = mean|FFT2(x) - FFT2(x_hat)| + lambda * alpha * L1 + lambda * (1 - alpha) * (1 - MS-SSIM)

All losses are means over elements so the default weights stay meaningful
across resolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

# Standard 5-level MS-SSIM configuration.
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MSSSIM_WINDOW = 11
MSSSIM_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03


@dataclass(frozen=True)
class LossWeights:
    """Distortion-mix weight and the L1-vs-MS-SSIM split."""

    lam: float = 60.0
    alpha: float = 0.7

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


def _as_nchw(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 3:
        return x.unsqueeze(0)
    if x.dim() == 4:
        return x
    raise ValueError(f"expected (C,H,W) or (N,C,H,W) tensor, got shape {tuple(x.shape)}")


def _check_same_shape(x: torch.Tensor, y: torch.Tensor):
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")


def frequency_l1(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Mean complex-difference modulus between the 2-D spectra of x and x_hat.

    Uses the unnormalized per-channel FFT; a spatially constant offset c then
    costs exactly |c|. The complex difference keeps phase information, which a
    magnitude-only loss would discard.
    """
    _check_same_shape(x, x_hat)
    fx = torch.fft.fft2(_as_nchw(x))
    fy = torch.fft.fft2(_as_nchw(x_hat))
    return (fx - fy).abs().mean()


def _gaussian_window(device, dtype) -> torch.Tensor:
    half = (MSSSIM_WINDOW - 1) / 2
    coords = torch.arange(MSSSIM_WINDOW, device=device, dtype=dtype) - half
    g = torch.exp(-(coords ** 2) / (2 * MSSSIM_SIGMA ** 2))
    g = g / g.sum()
    return g.outer(g)


def _ssim_maps(x: torch.Tensor, y: torch.Tensor, window: torch.Tensor):
    c = x.shape[1]
    w = window.expand(c, 1, -1, -1)
    mu_x = F.conv2d(x, w, groups=c)
    mu_y = F.conv2d(y, w, groups=c)
    sigma_x = F.conv2d(x * x, w, groups=c) - mu_x * mu_x
    sigma_y = F.conv2d(y * y, w, groups=c) - mu_y * mu_y
    sigma_xy = F.conv2d(x * y, w, groups=c) - mu_x * mu_y
    c1, c2 = _K1 ** 2, _K2 ** 2
    lum = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2 * sigma_xy + c2) / (sigma_x + sigma_y + c2)
    return lum, cs


def msssim_levels_for(height: int, width: int, levels: int = 5) -> int:
    """Largest level count (capped at ``levels``) the resolution supports."""
    cap = levels
    while cap > 1 and min(height, width) < MSSSIM_WINDOW * (2 ** (cap - 1)):
        cap -= 1
    return cap


def ms_ssim(x: torch.Tensor, x_hat: torch.Tensor, levels: int = 5) -> torch.Tensor:
    """Multi-scale SSIM with the standard 5-level weights.

    Levels are reduced (with weight renormalization) when the resolution
    cannot hold an 11x11 window after repeated 2x downsampling.
    """
    _check_same_shape(x, x_hat)
    a, b = _as_nchw(x), _as_nchw(x_hat)
    h, w = a.shape[-2:]
    if min(h, w) < MSSSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than one {MSSSIM_WINDOW}px window")
    n_levels = msssim_levels_for(h, w, levels)
    weights = torch.tensor(MSSSIM_WEIGHTS[:n_levels], device=a.device, dtype=a.dtype)
    weights = weights / weights.sum()
    window = _gaussian_window(a.device, a.dtype)

    terms = []
    for lvl in range(n_levels):
        lum, cs = _ssim_maps(a, b, window)
        if lvl < n_levels - 1:
            terms.append(torch.relu(cs.mean()))
            a = F.avg_pool2d(a, 2)
            b = F.avg_pool2d(b, 2)
        else:
            terms.append(torch.relu((lum * cs).mean()))
    out = terms[0] ** weights[0]
    for t, wgt in zip(terms[1:], weights[1:]):
        out = out * t ** wgt
    return out


def distortion_loss(x: torch.Tensor, x_hat: torch.Tensor, w: LossWeights = LossWeights()) -> torch.Tensor:
    """Frequency L1 + lambda*alpha*L1 + lambda*(1-alpha)*(1 - MS-SSIM)."""
    _check_same_shape(x, x_hat)
    freq = frequency_l1(x, x_hat)
    l1 = (x - x_hat).abs().mean()
    loss = freq + w.lam * w.alpha * l1
    if w.alpha < 1.0:
        loss = loss + w.lam * (1.0 - w.alpha) * (1.0 - ms_ssim(x, x_hat))
    return loss


def masked_distortion_loss(
    x: torch.Tensor, x_hat: torch.Tensor, mask: torch.Tensor, w: LossWeights = LossWeights()
) -> torch.Tensor:
    """Distortion loss restricted to visible pixels (mask == 1).

    Hidden pixels of ``x_hat`` are replaced by the reference values with the
    gradient stopped, so the gradient w.r.t. ``x_hat`` is exactly zero there.
    """
    a, b = _as_nchw(x), _as_nchw(x_hat)
    if mask.shape != a.shape[-2:]:
        raise ValueError(f"mask shape {tuple(mask.shape)} does not match image {a.shape[-2:]}")
    m = mask.to(dtype=a.dtype, device=a.device)
    composited = b * m + (a * (1.0 - m)).detach()
    if not bool(m.any()):
        return composited.sum() * 0.0
    return distortion_loss(a, composited, w)


def psnr(x: torch.Tensor, x_hat: torch.Tensor) -> float:
    """10*log10(1/MSE) for [0,1]-valued images; +inf when identical."""
    _check_same_shape(x, x_hat)
    mse = float(((x.double() - x_hat.double()) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def mse_to_psnr(mse: float) -> float:
    return math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)


def bpp(total_bits: float, t: int, height: int, width: int) -> float:
    """Bits per pixel over the whole clip."""
    return total_bits / (t * height * width)
