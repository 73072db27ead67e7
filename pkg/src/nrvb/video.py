"""Clip I/O, synthetic clip generation, and inpainting masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class VideoClip:
    """Frames as (T, H, W, 3) float32 in [0, 1] with 1-based timestamps.

    ``t_total`` is the normalization denominator for t_norm = t / t_total; it
    stays at the full clip length when a subset of frames is selected (e.g.
    the odd-frame training split for interpolation).
    """

    frames: np.ndarray
    timestamps: list[int] = field(default_factory=list)
    t_total: int = 0

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError(f"frames must be (T, H, W, 3), got {self.frames.shape}")
        if not self.timestamps:
            self.timestamps = list(range(1, len(self.frames) + 1))
        if len(self.timestamps) != len(self.frames):
            raise ValueError("one timestamp per frame required")
        if self.t_total == 0:
            self.t_total = max(self.timestamps)

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def t_norm(self, i: int) -> float:
        return self.timestamps[i] / self.t_total

    def subset(self, indices: list[int]) -> "VideoClip":
        return VideoClip(
            frames=self.frames[indices].copy(),
            timestamps=[self.timestamps[i] for i in indices],
            t_total=self.t_total,
        )


def load_video(path) -> VideoClip:
    """Read a directory of numbered PNG frames."""
    directory = Path(path)
    files = sorted(directory.glob("*.png"), key=lambda p: p.name)
    if not files:
        raise FileNotFoundError(f"no PNG frames found in {directory}")
    frames = []
    shape = None
    for f in files:
        img = np.asarray(Image.open(f).convert("RGB"), dtype=np.float32) / 255.0
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"{f.name}: resolution {img.shape[:2]} differs from {shape[:2]}")
        frames.append(img)
    return VideoClip(frames=np.stack(frames))


def save_video(clip: VideoClip, directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        arr = np.clip(frame * 255.0 + 0.5, 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(out / f"{i:05d}.png")


@dataclass(frozen=True)
class SynthSpec:
    t: int = 8
    height: int = 120
    width: int = 240
    sprites: int = 3
    seed: int = 0


def _grating(size: int, freq: float, angle: float, phase: float) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    u = np.cos(angle) * xx + np.sin(angle) * yy
    return 0.5 + 0.5 * np.sin(2 * np.pi * freq * u / size + phase)


def synth_video(spec: SynthSpec, seed: int | None = None) -> VideoClip:
    """Deterministic moving-pattern clip.

    Structured (compressible) content whose difficulty is temporal: a drifting
    sinusoidal plaid background, grating-textured sprites translating with
    wraparound, and a per-frame channel-wise illumination wobble.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    t_n, h, w = spec.t, spec.height, spec.width
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")

    sprite_size = max(min(h, w) // 4, 8)
    sprites = []
    for _ in range(spec.sprites):
        tex = np.stack(
            [
                _grating(
                    sprite_size,
                    freq=float(rng.uniform(2.0, 7.0)),
                    angle=float(rng.uniform(0, np.pi)),
                    phase=float(rng.uniform(0, 2 * np.pi)),
                )
                for _ in range(3)
            ],
            axis=-1,
        ).astype(np.float32)
        pos = rng.integers(0, (max(h - sprite_size, 1), max(w - sprite_size, 1)))
        vel = rng.integers(-5, 6, size=2)
        sprites.append((tex, pos, vel))

    plaid_phases = rng.uniform(0, 2 * np.pi, size=3)
    gain_phases = rng.uniform(0, 2 * np.pi, size=3)
    frames = np.empty((t_n, h, w, 3), dtype=np.float32)
    for t in range(t_n):
        drift = 2 * np.pi * t / max(t_n, 1)
        base = np.empty((h, w, 3), dtype=np.float32)
        base[..., 0] = 0.5 + 0.25 * (
            np.sin(2 * np.pi * 3 * xx / w + drift + plaid_phases[0])
            + np.sin(2 * np.pi * 2 * yy / h - drift)
        )
        base[..., 1] = 0.5 + 0.25 * (
            np.sin(2 * np.pi * 4 * (xx + yy) / (w + h) + 2 * drift + plaid_phases[1])
            + np.sin(2 * np.pi * yy / h + drift)
        )
        base[..., 2] = 0.5 + 0.5 * np.sin(2 * np.pi * (xx - yy) / (w + h) + drift + plaid_phases[2])
        for tex, pos, vel in sprites:
            r = int(pos[0] + vel[0] * t) % max(h - sprite_size, 1)
            c = int(pos[1] + vel[1] * t) % max(w - sprite_size, 1)
            base[r : r + sprite_size, c : c + sprite_size] = tex
        gains = 1.0 + 0.2 * np.sin(2 * np.pi * t / max(t_n, 1) + gain_phases)
        frames[t] = base * gains.astype(np.float32)
    return VideoClip(frames=np.clip(frames, 0.0, 1.0))


@dataclass(frozen=True)
class MaskSpec:
    """Inpainting mask protocols: five 50px squares, or one centered H/4 x W/4 box."""

    kind: str = "disperse"
    square: int = 50
    count: int = 5

    def __post_init__(self):
        if self.kind not in ("disperse", "central"):
            raise ValueError(f"unknown mask kind {self.kind!r}")


def build_mask(spec: MaskSpec, height: int, width: int, seed: int = 0) -> np.ndarray:
    """(H, W) uint8 mask, 1 = visible, 0 = hidden. Deterministic given the seed."""
    mask = np.ones((height, width), dtype=np.uint8)
    if spec.kind == "central":
        bh, bw = height // 4, width // 4
        r0 = (height - bh) // 2
        c0 = (width - bw) // 2
        mask[r0 : r0 + bh, c0 : c0 + bw] = 0
        return mask
    side = spec.square
    if side > height or side > width:
        raise ValueError(f"{side}px square does not fit in {height}x{width}")
    rng = np.random.default_rng(seed)
    for _ in range(spec.count):
        r = int(rng.integers(0, height - side + 1))
        c = int(rng.integers(0, width - side + 1))
        mask[r : r + side, c : c + side] = 0
    return mask
