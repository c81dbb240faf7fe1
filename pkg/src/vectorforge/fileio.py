"""Raster loading, PNG writing, and the restricted SVG subset we read and write.

Written SVGs contain one ``<path>`` per shape, bottom first.  Each path is
``M`` followed by one absolute ``C`` per segment and ``Z``; fill is hex RGB
with ``fill-opacity`` and ``fill-rule="nonzero"``.  Hex colors are 8-bit, so
the exact channel values ride along in ``data-fill-rgb`` (and the canvas
color in ``data-background``); :func:`read_svg` prefers them when present.
"""

from __future__ import annotations

import os
import re
import tempfile
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .geometry import Scene, Shape
from .raster import RasterImage

SVG_NS = "http://www.w3.org/2000/svg"
_ALLOWED_FORMATS = ("PNG", "JPEG")
_TOKEN = re.compile(r"[A-Za-z]|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class SVGFeatureError(ValueError):
    """The SVG uses something outside the subset produced by :func:`write_svg`."""


def atomic_write(path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_raster(path, size: tuple[int, int] | None = (240, 240)) -> RasterImage:
    """Decode PNG/JPEG, flatten alpha over white, bilinear-resize to ``size`` (w, h)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in _ALLOWED_FORMATS:
                raise OSError(f"{path}: unsupported image format {im.format}")
            rgba = im.convert("RGBA")
    except FileNotFoundError:
        raise FileNotFoundError(f"{path}: no such file") from None
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise OSError(f"{path}: cannot decode image ({exc})") from exc
    white = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
    rgb = Image.alpha_composite(white, rgba).convert("RGB")
    if size is not None and rgb.size != tuple(size):
        rgb = rgb.resize(tuple(size), Image.BILINEAR)
    return RasterImage(np.asarray(rgb, dtype=np.float64) / 255.0)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(pixels: np.ndarray, path) -> None:
    from io import BytesIO

    buf = BytesIO()
    Image.fromarray(to_uint8(pixels)).save(buf, format="PNG")
    atomic_write(path, buf.getvalue())


def _num(v: float) -> str:
    return format(float(v), ".10g")


def _hex(rgb) -> str:
    return "#" + "".join(f"{int(round(c * 255)):02x}" for c in np.clip(rgb, 0.0, 1.0))


def path_data(shape: Shape) -> str:
    pts = shape.points
    n = shape.n_segments
    parts = [f"M {_num(pts[0, 0])} {_num(pts[0, 1])}"]
    for k in range(n):
        b, c, d = pts[3 * k + 1], pts[3 * k + 2], pts[(3 * k + 3) % (3 * n)]
        parts.append("C " + " ".join(_num(v) for v in (*b, *c, *d)))
    parts.append("Z")
    return " ".join(parts)


def svg_string(scene: Scene) -> str:
    w, h = scene.width, scene.height
    bg = " ".join(_num(c) for c in scene.background)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
        f'style="background-color:{_hex(scene.background)}" data-background="{bg}">',
    ]
    for shape in scene.shapes:
        rgb = " ".join(_num(c) for c in shape.color[:3])
        lines.append(
            f'  <path d="{path_data(shape)}" fill="{_hex(shape.color[:3])}" '
            f'fill-opacity="{_num(shape.color[3])}" fill-rule="nonzero" data-fill-rgb="{rgb}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(scene: Scene, path) -> None:
    atomic_write(path, svg_string(scene))


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_hex(value: str, what: str) -> np.ndarray:
    value = value.strip()
    if value.startswith("url("):
        raise SVGFeatureError(f"unsupported {what}: gradient/pattern reference {value}")
    m = re.fullmatch(r"#([0-9a-fA-F]{6})", value)
    if not m:
        raise SVGFeatureError(f"unsupported {what} value {value!r}; expected #rrggbb")
    return np.array([int(m.group(1)[i:i + 2], 16) / 255.0 for i in (0, 2, 4)])


def _parse_floats(value: str, n: int, what: str) -> np.ndarray:
    nums = np.array([float(v) for v in value.split()])
    if len(nums) != n:
        raise SVGFeatureError(f"malformed {what}: {value!r}")
    return nums


def parse_path_data(d: str) -> np.ndarray:
    """Control points of ``M x y (C x1 y1 x2 y2 x y)+ Z`` as a ``(3n, 2)`` array."""
    tokens = _TOKEN.findall(d)
    if not tokens or tokens[0] != "M":
        raise SVGFeatureError("path data must start with an absolute 'M'")
    pos = 1

    def take(k):
        nonlocal pos
        vals = tokens[pos:pos + k]
        if len(vals) < k or any(v.isalpha() for v in vals):
            raise SVGFeatureError(f"malformed path data near token {pos}")
        pos += k
        return [float(v) for v in vals]

    start = take(2)
    pts = [start]
    closed = False
    while pos < len(tokens):
        cmd = tokens[pos]
        pos += 1
        if cmd == "C":
            x1, y1, x2, y2, x, y = take(6)
            pts += [[x1, y1], [x2, y2], [x, y]]
        elif cmd == "Z":
            closed = True
            if pos != len(tokens):
                raise SVGFeatureError("only one closed subpath per path is supported")
        else:
            raise SVGFeatureError(f"unsupported path command {cmd!r}")
    if not closed:
        raise SVGFeatureError("path is not closed with 'Z'")
    pts = np.array(pts)
    if len(pts) < 7 or not np.allclose(pts[-1], pts[0], atol=1e-6):
        raise SVGFeatureError("path must be at least two cubic segments ending at its start point")
    return pts[:-1]


_PATH_ATTRS = {"d", "fill", "fill-opacity", "fill-rule", "data-fill-rgb"}


def parse_svg(text: str) -> Scene:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SVGFeatureError(f"not well-formed XML: {exc}") from exc
    if _local(root.tag) != "svg":
        raise SVGFeatureError(f"root element must be <svg>, got <{_local(root.tag)}>")
    try:
        width, height = int(float(root.get("width"))), int(float(root.get("height")))
    except (TypeError, ValueError):
        raise SVGFeatureError("svg width/height must be numeric") from None
    if root.get("data-background"):
        background = _parse_floats(root.get("data-background"), 3, "data-background")
    else:
        m = re.search(r"background-color:\s*(#[0-9a-fA-F]{6})", root.get("style", ""))
        background = _parse_hex(m.group(1), "background") if m else np.ones(3)

    shapes = []
    for el in root:
        tag = _local(el.tag)
        if tag != "path":
            raise SVGFeatureError(f"unsupported SVG element <{tag}>")
        extra = set(el.attrib) - _PATH_ATTRS
        if extra:
            raise SVGFeatureError(f"unsupported path attribute(s): {', '.join(sorted(extra))}")
        if len(el):
            raise SVGFeatureError("path elements must not have children")
        fill = el.get("fill", "#000000")
        rgb = _parse_hex(fill, "fill")
        if el.get("data-fill-rgb"):
            rgb = _parse_floats(el.get("data-fill-rgb"), 3, "data-fill-rgb")
        if el.get("fill-rule", "nonzero") != "nonzero":
            raise SVGFeatureError(f"unsupported fill-rule {el.get('fill-rule')!r}")
        alpha = float(el.get("fill-opacity", "1"))
        shapes.append(Shape(parse_path_data(el.get("d", "")), (*rgb, alpha)))
    return Scene(shapes, width, height, background)


def read_svg(path) -> Scene:
    return parse_svg(Path(path).read_text())
