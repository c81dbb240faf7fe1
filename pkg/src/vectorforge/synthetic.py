"""Procedural flat-color test images: disks, overlapping polygons, simple cartoons.

Drawn at 4x and box-downsampled, so edges carry a little anti-aliasing.
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

from .raster import RasterImage

_SS = 4


def _canvas(size, bg):
    im = Image.new("RGB", (size * _SS, size * _SS), bg)
    return im, ImageDraw.Draw(im)


def _finish(im, size) -> RasterImage:
    return RasterImage(np.asarray(im.resize((size, size), Image.BOX), dtype=np.float64) / 255.0)


def _disk(draw, size, cx, cy, r, fill):
    s = size * _SS
    draw.ellipse([(cx - r) * s, (cy - r) * s, (cx + r) * s, (cy + r) * s], fill=fill)


def _poly(draw, size, pts, fill):
    s = size * _SS
    draw.polygon([(x * s, y * s) for x, y in pts], fill=fill)


def _regular(cx, cy, r, n, phase=0.0, inner=None):
    pts = []
    for k in range(n * (2 if inner else 1)):
        rad = inner if inner and k % 2 else r
        a = phase + math.pi * k / (n if inner else n / 2)
        pts.append((cx + rad * math.cos(a), cy + rad * math.sin(a)))
    return pts


def disk(size=64):
    im, d = _canvas(size, (255, 255, 255))
    _disk(d, size, 0.5, 0.5, 0.3, (220, 40, 40))
    return _finish(im, size)


def three_disks(size=64):
    im, d = _canvas(size, (250, 250, 240))
    _disk(d, size, 0.28, 0.3, 0.17, (30, 90, 200))
    _disk(d, size, 0.7, 0.35, 0.15, (240, 170, 20))
    _disk(d, size, 0.45, 0.72, 0.19, (40, 160, 80))
    return _finish(im, size)


def overlapping_disks(size=64):
    im, d = _canvas(size, (255, 255, 255))
    _disk(d, size, 0.4, 0.45, 0.25, (200, 30, 120))
    _disk(d, size, 0.62, 0.58, 0.22, (20, 120, 200))
    return _finish(im, size)


def triangle_square(size=64):
    im, d = _canvas(size, (245, 245, 245))
    _poly(d, size, [(0.15, 0.2), (0.6, 0.2), (0.6, 0.65), (0.15, 0.65)], (60, 60, 160))
    _poly(d, size, [(0.35, 0.85), (0.9, 0.85), (0.62, 0.3)], (230, 120, 30))
    return _finish(im, size)


def star(size=64):
    im, d = _canvas(size, (20, 30, 60))
    _poly(d, size, _regular(0.5, 0.52, 0.4, 5, -math.pi / 2, inner=0.17), (250, 220, 60))
    return _finish(im, size)


def rings(size=64):
    im, d = _canvas(size, (255, 255, 255))
    for r, c in ((0.42, (200, 20, 20)), (0.3, (255, 255, 255)), (0.18, (200, 20, 20))):
        _disk(d, size, 0.5, 0.5, r, c)
    return _finish(im, size)


def smiley(size=64):
    im, d = _canvas(size, (255, 255, 255))
    _disk(d, size, 0.5, 0.5, 0.42, (250, 205, 50))
    _disk(d, size, 0.35, 0.38, 0.07, (60, 40, 20))
    _disk(d, size, 0.65, 0.38, 0.07, (60, 40, 20))
    _poly(d, size, [(0.3, 0.62), (0.7, 0.62), (0.6, 0.75), (0.4, 0.75)], (170, 40, 40))
    return _finish(im, size)


def house(size=64):
    im, d = _canvas(size, (160, 210, 250))
    _poly(d, size, [(0.0, 0.82), (1.0, 0.82), (1.0, 1.0), (0.0, 1.0)], (70, 160, 60))
    _poly(d, size, [(0.25, 0.45), (0.75, 0.45), (0.75, 0.85), (0.25, 0.85)], (230, 220, 200))
    _poly(d, size, [(0.18, 0.47), (0.82, 0.47), (0.5, 0.18)], (170, 50, 40))
    _poly(d, size, [(0.44, 0.62), (0.56, 0.62), (0.56, 0.85), (0.44, 0.85)], (100, 60, 30))
    return _finish(im, size)


def stripes(size=64):
    im, d = _canvas(size, (255, 255, 255))
    _poly(d, size, [(0, 0), (1, 0), (1, 0.33), (0, 0.33)], (0, 85, 164))
    _poly(d, size, [(0, 0.67), (1, 0.67), (1, 1), (0, 1)], (239, 65, 53))
    _disk(d, size, 0.5, 0.5, 0.12, (255, 200, 0))
    return _finish(im, size)


def sun(size=64):
    im, d = _canvas(size, (255, 250, 235))
    _poly(d, size, _regular(0.5, 0.5, 0.45, 8, 0.0, inner=0.25), (250, 150, 20))
    _disk(d, size, 0.5, 0.5, 0.22, (250, 210, 40))
    return _finish(im, size)


SUITE = (disk, three_disks, overlapping_disks, triangle_square, star, rings, smiley, house, stripes, sun)


def suite(size: int = 64) -> list[tuple[str, RasterImage]]:
    return [(fn.__name__, fn(size)) for fn in SUITE]


def color_blocks(colors, size: int = 100) -> RasterImage:
    """Vertical bands, one per color (0-255 RGB triples)."""
    px = np.zeros((size, size, 3))
    bounds = np.linspace(0, size, len(colors) + 1).round().astype(int)
    for c, (lo, hi) in zip(colors, zip(bounds, bounds[1:])):
        px[:, lo:hi] = np.asarray(c) / 255.0
    return RasterImage(px)
