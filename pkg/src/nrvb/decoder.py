"""Conditional decoder assembly for the three boosted INR variants.

Stage layouts (hybrid variant shown; index-based variants swap the embedding
for a positional-encoding stem):

    hnerv_boost: 1x1 channel expansion, then one upsampling SNeRV block per
        stride with reduction 1.2; the last three stride stages add a stride-1
        refinement SNeRV block. A TAT residual block follows every SNeRV
        block. Header is a 1x1 conv to RGB.
    nerv_boost / enerv_boost: fully-connected stem from PE(t) to a coarse
        grid, upsampling reductions (1, 2, 2, ...), refinements as above.
        enerv_boost's first stage is the sinusoidal E-NeRV block with a 1/3
        reduction (3x channel expansion).

Width chain: C_{i+1} = max(floor(C_i / r), c_min). Model size is targeted by
searching the base width C1; parameter counts are exact closed forms checked
against instantiated modules in the tests.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn

from .blocks import (
    C_MIN_DEFAULT,
    SNeRVBlock,
    SinusoidalENeRVBlock,
    TATResBlock,
    as_fraction,
    reduced_width,
)
from .temporal import TemporalEmbedNet, Z_CHANNELS, Z_HIDDEN

VARIANTS = ("nerv_boost", "enerv_boost", "hnerv_boost")
STEM_HIDDEN = 256
BUDGET_TOLERANCE = 0.03


@dataclass(frozen=True)
class DecoderConfig:
    variant: str = "hnerv_boost"
    strides: tuple[int, ...] = (5, 3, 2, 2, 2)
    c1: int = 64
    c_min: int = C_MIN_DEFAULT
    embed_dim: int = 16          # hybrid content embedding channels
    pe_dim: int = 160            # 2l; stem and z-generator input width
    grid_h: int = 9              # stem output grid (index-based variants)
    grid_w: int = 16
    activation: str = "sine"
    use_tat: bool = True
    modulation: str = "tat"
    widths: tuple[int, ...] | None = None  # realized stage widths; natural chain when None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.strides or any(s < 1 for s in self.strides):
            raise ValueError(f"invalid stride list {self.strides}")
        if self.widths is not None:
            if len(self.widths) != len(self.strides) + 1:
                raise ValueError(
                    f"widths must cover the base plus one per stride, got {self.widths}"
                )
            if self.widths[0] != self.c1:
                raise ValueError("widths[0] must equal the base width c1")

    @property
    def upscale(self) -> int:
        out = 1
        for s in self.strides:
            out *= s
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "strides": ",".join(str(s) for s in self.strides),
            "c1": self.c1,
            "c_min": self.c_min,
            "embed_dim": self.embed_dim,
            "pe_dim": self.pe_dim,
            "grid_h": self.grid_h,
            "grid_w": self.grid_w,
            "activation": self.activation,
            "use_tat": int(self.use_tat),
            "modulation": self.modulation,
            "widths": ",".join(str(w) for w in self.widths) if self.widths else "",
        }

    @staticmethod
    def from_dict(d: dict) -> "DecoderConfig":
        widths_text = str(d.get("widths", "")).strip()
        return DecoderConfig(
            variant=str(d["variant"]),
            strides=tuple(int(s) for s in str(d["strides"]).split(",")),
            c1=int(d["c1"]),
            c_min=int(d["c_min"]),
            embed_dim=int(d["embed_dim"]),
            pe_dim=int(d["pe_dim"]),
            grid_h=int(d["grid_h"]),
            grid_w=int(d["grid_w"]),
            activation=str(d["activation"]),
            use_tat=bool(int(d["use_tat"])),
            modulation=str(d["modulation"]),
            widths=tuple(int(w) for w in widths_text.split(",")) if widths_text else None,
        )


# ---------------------------------------------------------------------------
# Layout: an explicit block list per stage, shared by the parameter-count
# formulas and the module factory so the two cannot drift apart.
# ---------------------------------------------------------------------------

def variant_reductions(cfg: DecoderConfig) -> list:
    """Per-stride-stage channel reductions from the architecture tables."""
    n = len(cfg.strides)
    if cfg.variant == "hnerv_boost":
        return [as_fraction("1.2")] * n
    reductions = [as_fraction(1)] + [as_fraction(2)] * (n - 1)
    if cfg.variant == "enerv_boost":
        reductions[0] = as_fraction("1/3")
    return reductions


def natural_widths(cfg: DecoderConfig) -> tuple[int, ...]:
    """Width chain C_{i+1} = max(floor(C_i / r_i), c_min) from the base width."""
    widths = [cfg.c1]
    for r in variant_reductions(cfg):
        widths.append(reduced_width(widths[-1], r, cfg.c_min))
    return tuple(widths)


def resolved_widths(cfg: DecoderConfig) -> tuple[int, ...]:
    return cfg.widths if cfg.widths is not None else natural_widths(cfg)


def _stage_layout(cfg: DecoderConfig) -> list[list[tuple]]:
    """Per-stage block descriptors: ("snerv"|"senerv", c_in, c_out, k, s) or ("tatres", c)."""
    n = len(cfg.strides)
    refine_from = max(n - 3, 0)
    widths = resolved_widths(cfg)
    stages: list[list[tuple]] = []

    def tat(c: int) -> list[tuple]:
        return [("tatres", c)] if cfg.use_tat else []

    if cfg.variant == "hnerv_boost":
        stages.append([("snerv", cfg.embed_dim, widths[0], 1, 1)] + tat(widths[0]))
    for i, s in enumerate(cfg.strides):
        kind = "senerv" if (cfg.variant == "enerv_boost" and i == 0) else "snerv"
        blocks = [(kind, widths[i], widths[i + 1], 3, s)] + tat(widths[i + 1])
        if i >= refine_from:
            blocks += [("snerv", widths[i + 1], widths[i + 1], 3, 1)] + tat(widths[i + 1])
        stages.append(blocks)
    return stages


def _out_channels(stages: list[list[tuple]]) -> int:
    last = stages[-1][-1]
    return last[1] if last[0] == "tatres" else last[2]


def _conv_params(c_in: int, c_out: int, k: int) -> int:
    return k * k * c_in * c_out + c_out


def _block_params(desc: tuple) -> int:
    kind = desc[0]
    if kind == "snerv":
        _, c_in, c_out, k, s = desc
        return _conv_params(c_in, c_out * s * s, k)
    if kind == "senerv":
        _, c_in, c_out, k, s = desc
        mid = max(c_in // 4, 1)
        return _conv_params(c_in, mid * s * s, k) + _conv_params(mid, c_out, 3)
    if kind == "tatres":
        c = desc[1]
        per_layer = 2 * (_conv_params(Z_CHANNELS, Z_CHANNELS, 1) + _conv_params(Z_CHANNELS, c, 1))
        return 2 * per_layer + 2 * _conv_params(c, c, 3)
    raise ValueError(f"unknown block {kind!r}")


def _stem_params(cfg: DecoderConfig) -> int:
    if cfg.variant == "hnerv_boost":
        return 0
    grid = resolved_widths(cfg)[0] * cfg.grid_h * cfg.grid_w
    return (cfg.pe_dim * STEM_HIDDEN + STEM_HIDDEN) + (STEM_HIDDEN * grid + grid)


def _znet_params(cfg: DecoderConfig) -> int:
    if not cfg.use_tat:
        return 0
    return _conv_params(cfg.pe_dim, Z_HIDDEN, 1) + _conv_params(Z_HIDDEN, Z_CHANNELS, 1)


def predicted_params(cfg: DecoderConfig) -> int:
    """Exact learnable parameter count of (decoder, z-generator) for this config."""
    stages = _stage_layout(cfg)
    total = _stem_params(cfg) + _znet_params(cfg)
    for stage in stages:
        for desc in stage:
            total += _block_params(desc)
    total += _conv_params(_out_channels(stages), 3, 1)
    return total


MAX_WIDTH_SLACK = 3


def _slacked_width_vectors(cfg: DecoderConfig, c1: int, slack: int) -> list[tuple[int, ...]]:
    """Width chains with up to ``slack`` extra channels removed per stride stage.

    The effective reduction never falls below the variant default (widths stay
    at or under the natural chain) and never clamps below c_min. The expansion
    stage of enerv_boost keeps its tabled 1/3 reduction untouched.
    """
    reductions = variant_reductions(replace(cfg, c1=c1))
    slackable = [not (cfg.variant == "enerv_boost" and i == 0) for i in range(len(reductions))]

    vectors: list[tuple[int, ...]] = []

    def extend(prefix: list[int], i: int):
        if i == len(reductions):
            vectors.append(tuple(prefix))
            return
        natural = reduced_width(prefix[-1], reductions[i], cfg.c_min)
        deltas = range(slack + 1) if slackable[i] else (0,)
        for d in deltas:
            w = max(natural - d, cfg.c_min)
            extend(prefix + [w], i + 1)
            if w == cfg.c_min:
                break  # further deltas repeat the same clamped width

    extend([c1], 0)
    return vectors


def solve_architecture(
    cfg: DecoderConfig, target_params: int, tolerance: float = BUDGET_TOLERANCE
) -> DecoderConfig:
    """Pick c1 (and, when needed, slightly tightened stage widths) for the size target.

    The natural width chain is preferred; tightened chains only bridge the
    integer-c1 granularity at small targets.
    """
    natural_best = None  # (err, c1)
    first_ge = None
    c1 = cfg.c_min
    while c1 <= 8192:
        p = predicted_params(replace(cfg, c1=c1, widths=None))
        err = abs(p - target_params) / target_params
        if natural_best is None or err < natural_best[0]:
            natural_best = (err, c1)
        if p >= target_params:
            first_ge = c1
            break
        c1 += 1
    if natural_best is None:
        raise ValueError("no feasible base width")
    if natural_best[0] <= tolerance:
        return replace(cfg, c1=natural_best[1], widths=None)

    best = None  # (err, total_slack, c1, widths)
    for cand in ({first_ge, first_ge + 1} if first_ge is not None else set()):
        for widths in _slacked_width_vectors(cfg, cand, MAX_WIDTH_SLACK):
            p = predicted_params(replace(cfg, c1=cand, widths=widths))
            err = abs(p - target_params) / target_params
            total_slack = sum(a - b for a, b in zip(natural_widths(replace(cfg, c1=cand)), widths))
            key = (err, total_slack, cand, widths)
            if best is None or key < best:
                best = key
    if best is None or best[0] > tolerance:
        detail = f"{best[0]:.2%}" if best else f"{natural_best[0]:.2%} (natural chain)"
        raise ValueError(
            f"no architecture reaches {target_params} params within {tolerance:.0%}; best error {detail}"
        )
    return replace(cfg, c1=best[2], widths=best[3])


class DecoderModel(nn.Module):
    """Frame reconstruction network F(y_t, z_t) plus the z_t generator.

    ``forward(content, z)`` takes the content path input (embedding for
    hnerv_boost, PE vector for the index-based variants) and a precomputed
    temporal embedding. ``embed_index`` produces z from a PE vector.
    """

    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.znet = TemporalEmbedNet(cfg.pe_dim) if cfg.use_tat else None
        if cfg.variant == "hnerv_boost":
            self.stem = None
        else:
            grid = resolved_widths(cfg)[0] * cfg.grid_h * cfg.grid_w
            self.stem = nn.Sequential(
                nn.Linear(cfg.pe_dim, STEM_HIDDEN), nn.GELU(), nn.Linear(STEM_HIDDEN, grid)
            )
        self._stage_defs = _stage_layout(cfg)
        self.stages = nn.ModuleList()
        for stage in self._stage_defs:
            mods = nn.ModuleList()
            for desc in stage:
                if desc[0] == "snerv":
                    _, c_in, c_out, k, s = desc
                    mods.append(SNeRVBlock(c_in, c_out, k, s, cfg.activation))
                elif desc[0] == "senerv":
                    _, c_in, c_out, k, s = desc
                    mods.append(SinusoidalENeRVBlock(c_in, c_out, k, s, cfg.activation))
                else:
                    mods.append(TATResBlock(desc[1], cfg.modulation))
            self.stages.append(mods)
        self.head = nn.Conv2d(_out_channels(self._stage_defs), 3, 1)

    def embed_index(self, pe: torch.Tensor) -> torch.Tensor:
        if self.znet is None:
            raise RuntimeError("this model was built without temporal modulation")
        return self.znet(pe)

    def forward(self, content: torch.Tensor, z: torch.Tensor | None) -> torch.Tensor:
        if self.cfg.variant == "hnerv_boost":
            f = content
            if f.dim() == 3:
                f = f.unsqueeze(0)
        else:
            vec = content
            if vec.dim() == 4:  # accept (N, 2l, 1, 1) z-generator layout
                vec = vec.flatten(1)
            if vec.dim() == 1:
                vec = vec.unsqueeze(0)
            f = self.stem(vec).view(-1, self.cfg.c1, self.cfg.grid_h, self.cfg.grid_w)
        for stage, defs in zip(self.stages, self._stage_defs):
            for mod, desc in zip(stage, defs):
                f = mod(f, z) if desc[0] == "tatres" else mod(f)
        return self.head(f)

    def stage_parameter_counts(self) -> list[int]:
        counts = []
        for stage in self.stages:
            counts.append(sum(p.numel() for p in stage.parameters()))
        return counts


def build_decoder(
    cfg: DecoderConfig,
    target_params: int | None = None,
    tolerance: float = BUDGET_TOLERANCE,
    seed: int | None = None,
) -> DecoderModel:
    """Instantiate a decoder, solving the width schedule when a size target is given."""
    if target_params is not None:
        cfg = solve_architecture(cfg, target_params, tolerance)
    if seed is not None:
        torch.manual_seed(seed)
    return DecoderModel(cfg)


def decode_frame(
    content: torch.Tensor, z: torch.Tensor | None, model: DecoderModel, clamp: bool = True
) -> torch.Tensor:
    """Reconstruct one frame; evaluation output is clamped to [0, 1]."""
    with torch.no_grad():
        out = model(content, z)[0]
    return out.clamp(0.0, 1.0) if clamp else out


@dataclass
class BalanceReport:
    groups: dict[str, int]            # every parameter group, sums to total
    stage_counts: list[int]           # decoder stages only
    total: int
    std: float
    cv: float


def parameter_balance_report(model: DecoderModel) -> BalanceReport:
    """Per-stage parameter distribution; std/cv measure how balanced it is."""
    groups: dict[str, int] = {}
    if model.znet is not None:
        groups["znet"] = sum(p.numel() for p in model.znet.parameters())
    if model.stem is not None:
        groups["stem"] = sum(p.numel() for p in model.stem.parameters())
    stage_counts = model.stage_parameter_counts()
    for i, c in enumerate(stage_counts):
        groups[f"stage{i}"] = c
    groups["head"] = sum(p.numel() for p in model.head.parameters())
    total = sum(groups.values())
    arr = np.asarray(stage_counts, dtype=np.float64)
    std = float(arr.std()) if arr.size else 0.0
    cv = float(std / arr.mean()) if arr.size and arr.mean() > 0 else 0.0
    return BalanceReport(groups=groups, stage_counts=stage_counts, total=total, std=std, cv=cv)


# ---------------------------------------------------------------------------
# Checkpoint container: config as structured text + shape-prefixed f32 tensors.
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"NRVC"
CKPT_VERSION = 1


def save_tensors(path, config_text: str, named: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        cfg_bytes = config_text.encode("utf-8")
        fh.write(struct.pack("<HI", CKPT_VERSION, len(cfg_bytes)))
        fh.write(cfg_bytes)
        fh.write(struct.pack("<I", len(named)))
        for name, arr in named.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_tensors(path) -> tuple[str, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(4) != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, cfg_len = struct.unpack("<HI", buf.read(6))
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    config_text = buf.read(cfg_len).decode("utf-8")
    (count,) = struct.unpack("<I", buf.read(4))
    named = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", buf.read(2))
        name = buf.read(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", buf.read(1))
        shape = struct.unpack(f"<{rank}I", buf.read(4 * rank)) if rank else ()
        numel = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(buf.read(4 * numel), dtype="<f4").reshape(shape)
        named[name] = data.copy()
    return config_text, named
