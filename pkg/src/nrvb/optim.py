"""Adan optimizer (adaptive Nesterov momentum), published defaults.

State per parameter: first moment m, gradient-difference moment v, second
moment n of (g + beta2 * (g - g_prev)), plus the previous gradient. Weight
decay is decoupled (proximal form) and defaults to zero.
"""

from __future__ import annotations

import math

import torch
from torch.optim import Optimizer


class Adan(Optimizer):
    def __init__(self, params, lr=1e-3, betas=(0.98, 0.92, 0.99), eps=1e-8, weight_decay=0.0):
        if not 0.0 <= lr:
            raise ValueError(f"invalid learning rate {lr}")
        if len(betas) != 3 or not all(0.0 <= b < 1.0 for b in betas):
            raise ValueError(f"invalid betas {betas}")
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            beta1, beta2, beta3 = group["betas"]
            lr = group["lr"]
            eps = group["eps"]
            wd = group["weight_decay"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                grad = p.grad
                state = self.state[p]
                if not state:
                    state["step"] = 0
                    state["m"] = torch.zeros_like(p)
                    state["v"] = torch.zeros_like(p)
                    state["n"] = torch.zeros_like(p)
                    state["prev_grad"] = grad.clone()
                state["step"] += 1
                step = state["step"]
                bc1 = 1.0 - beta1 ** step
                bc2 = 1.0 - beta2 ** step
                bc3 = 1.0 - beta3 ** step

                diff = grad - state["prev_grad"]
                state["m"].mul_(beta1).add_(grad, alpha=1.0 - beta1)
                state["v"].mul_(beta2).add_(diff, alpha=1.0 - beta2)
                update = grad + beta2 * diff
                state["n"].mul_(beta3).addcmul_(update, update, value=1.0 - beta3)
                state["prev_grad"].copy_(grad)

                denom = (state["n"] / bc3).sqrt_().add_(eps)
                step_dir = (state["m"] / bc1 + beta2 * state["v"] / bc2) / denom
                p.add_(step_dir, alpha=-lr)
                if wd != 0.0:
                    p.div_(1.0 + lr * wd)
        return loss


def lr_at_epoch(lr_max: float, epochs: int, warmup_frac: float, epoch: int) -> float:
    """Linear warm-up over the first warmup_frac of epochs, then cosine decay to 0.

    Warm-up epochs W = round(warmup_frac * epochs); epoch W-1 runs at lr_max
    and the cosine leg spans epochs [W, epochs).
    """
    if not 0 <= epoch < epochs:
        raise ValueError(f"epoch {epoch} outside [0, {epochs})")
    warm = int(round(warmup_frac * epochs))
    if warm > 0 and epoch < warm:
        return lr_max * (epoch + 1) / warm
    span = max(epochs - warm, 1)
    return lr_max * 0.5 * (1.0 + math.cos(math.pi * (epoch - warm) / span))
