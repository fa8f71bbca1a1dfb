"""Procedural 8x8 glyph dataset: ten digit-like classes rendered with
per-sample jitter, stroke-intensity variation, blur, and pixel noise.

Two rendering styles are bundled. "desk" is the nominal source; "shifted"
draws the same glyph classes through a different rendering process (dimmer
strokes, brighter background, heavier blur and noise), which gives a second
data source whose images remain classifiable by a net trained on the first.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from mbfdetect._rng import spawn_rng

__all__ = ["SourceStyle", "DESK_STYLE", "SHIFTED_STYLE", "make_glyph_dataset"]

_GLYPHS = [
    # 0
    "..####.."
    ".#....#."
    ".#....#."
    ".#....#."
    ".#....#."
    ".#....#."
    "..####.."
    "........",
    # 1
    "...##..."
    "..###..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    "..####.."
    "........",
    # 2
    "..####.."
    ".#....#."
    "......#."
    ".....#.."
    "....#..."
    "..##...."
    ".######."
    "........",
    # 3
    "..####.."
    ".#....#."
    "......#."
    "...###.."
    "......#."
    ".#....#."
    "..####.."
    "........",
    # 4
    "....##.."
    "...#.#.."
    "..#..#.."
    ".#...#.."
    ".######."
    ".....#.."
    ".....#.."
    "........",
    # 5
    ".######."
    ".#......"
    ".#####.."
    "......#."
    "......#."
    ".#....#."
    "..####.."
    "........",
    # 6
    "..####.."
    ".#......"
    ".#......"
    ".#####.."
    ".#....#."
    ".#....#."
    "..####.."
    "........",
    # 7
    ".######."
    "......#."
    ".....#.."
    "....#..."
    "...#...."
    "...#...."
    "...#...."
    "........",
    # 8
    "..####.."
    ".#....#."
    ".#....#."
    "..####.."
    ".#....#."
    ".#....#."
    "..####.."
    "........",
    # 9
    "..####.."
    ".#....#."
    ".#....#."
    "..#####."
    "......#."
    "......#."
    "..####.."
    "........",
]

_TEMPLATES = np.array(
    [[1.0 if ch == "#" else 0.0 for ch in glyph] for glyph in _GLYPHS]
).reshape(10, 8, 8)


@dataclass(frozen=True)
class SourceStyle:
    """Rendering process parameters for one image source."""

    name: str
    foreground_lo: float = 0.75
    foreground_hi: float = 1.0
    background: float = 0.0
    noise: float = 0.05
    blur: float = 0.15
    max_shift: int = 1


DESK_STYLE = SourceStyle(name="desk")
SHIFTED_STYLE = SourceStyle(name="shifted", foreground_lo=0.65, foreground_hi=0.95,
                            background=0.06, noise=0.06, blur=0.28, max_shift=1)


def _shift(img: np.ndarray, dy: int, dx: int, fill: float) -> np.ndarray:
    out = np.full_like(img, fill)
    src_y = slice(max(-dy, 0), 8 - max(dy, 0))
    dst_y = slice(max(dy, 0), 8 - max(-dy, 0))
    src_x = slice(max(-dx, 0), 8 - max(dx, 0))
    dst_x = slice(max(dx, 0), 8 - max(-dx, 0))
    out[dst_y, dst_x] = img[src_y, src_x]
    return out


def _box_blur(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    acc = np.zeros_like(img)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            acc += padded[dy:dy + 8, dx:dx + 8]
    return acc / 9.0


def make_glyph_dataset(count: int, seed: int, style: SourceStyle = DESK_STYLE):
    """Render `count` images, classes drawn round-robin.

    Returns (images, labels) with images of shape (count, 1, 8, 8) in [0, 1].
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    # process-independent style tag (str hash is salted per interpreter)
    style_tag = zlib.crc32(style.name.encode("utf-8"))
    rng = spawn_rng(seed, style_tag)
    images = np.empty((count, 1, 8, 8))
    labels = np.empty(count, dtype=int)
    for i in range(count):
        cls = i % 10
        intensity = rng.uniform(style.foreground_lo, style.foreground_hi)
        img = style.background + intensity * _TEMPLATES[cls]
        if style.max_shift > 0:
            dy, dx = rng.integers(-style.max_shift, style.max_shift + 1, size=2)
            img = _shift(img, int(dy), int(dx), style.background)
        if style.blur > 0:
            img = (1.0 - style.blur) * img + style.blur * _box_blur(img)
        img = img + rng.normal(0.0, style.noise, (8, 8))
        images[i, 0] = np.clip(img, 0.0, 1.0)
        labels[i] = cls
    return images, labels
