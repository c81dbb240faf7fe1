"""Differentiable rasterizer: smooth coverage, over-compositing and its adjoint."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import FLATTEN_SUBDIVISIONS, Scene, flatten_matrix

SIGMA = 0.5

_MATRICES: dict[int, np.ndarray] = {}


def _flatten_matrix(n_segments: int) -> np.ndarray:
    if n_segments not in _MATRICES:
        _MATRICES[n_segments] = flatten_matrix(n_segments, FLATTEN_SUBDIVISIONS)
    return _MATRICES[n_segments]


def thread_count() -> int:
    env = os.environ.get("VECTORFORGE_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def _parallel_map(fn, items):
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class RasterImage:
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected H x W x 3 pixels, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("empty canvas")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def filled(cls, width: int, height: int, rgb=(1.0, 1.0, 1.0)) -> "RasterImage":
        return cls(np.broadcast_to(np.asarray(rgb, dtype=np.float64), (height, width, 3)).copy())


@dataclass
class ShapeGrad:
    points: np.ndarray
    color: np.ndarray


class GradientSet(list):
    """One :class:`ShapeGrad` per shape, in scene order."""

    @classmethod
    def zeros_like(cls, scene: Scene) -> "GradientSet":
        return cls(ShapeGrad(np.zeros_like(s.points), np.zeros(4)) for s in scene.shapes)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g.points)) and np.all(np.isfinite(g.color)) for g in self)


@dataclass
class _Layer:
    """Coverage of one shape on its clipped bounding box."""

    x0: int
    y0: int
    cov: np.ndarray
    dcov: np.ndarray
    edge: np.ndarray
    tpar: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    n_verts: int

    @property
    def window(self):
        h, w = self.cov.shape
        return slice(self.y0, self.y0 + h), slice(self.x0, self.x0 + w)


def _layer(shape, width: int, height: int, sigma: float) -> _Layer:
    verts = _flatten_matrix(shape.n_segments) @ shape.points
    pad = _kernels.TAPER * sigma
    lo = np.floor(verts.min(axis=0) - pad).astype(int)
    hi = np.ceil(verts.max(axis=0) + pad).astype(int)
    x0, y0 = max(lo[0], 0), max(lo[1], 0)
    x1, y1 = min(hi[0], width), min(hi[1], height)
    w, h = max(x1 - x0, 0), max(y1 - y0, 0)
    cov, dcov, edge, tpar, ux, uy = _kernels.coverage(verts, x0, y0, w, h, sigma)
    return _Layer(x0, y0, cov, dcov, edge, tpar, ux, uy, len(verts))


def coverage_layers(scene: Scene, sigma: float = SIGMA) -> list[_Layer]:
    return _parallel_map(lambda s: _layer(s, scene.width, scene.height, sigma), scene.shapes)


def _composite(scene: Scene, layers, skip: int | None = None, keep_below: bool = False):
    out = np.empty((scene.height, scene.width, 3))
    out[:] = scene.background
    below = []
    for k, (shape, layer) in enumerate(zip(scene.shapes, layers)):
        if k == skip:
            continue
        win = layer.window
        a = (layer.cov * shape.color[3])[..., None]
        if keep_below:
            below.append(out[win].copy())
        out[win] = a * shape.color[:3] + (1.0 - a) * out[win]
    return out, below


def render(scene: Scene, sigma: float = SIGMA) -> RasterImage:
    return RasterImage(_composite(scene, coverage_layers(scene, sigma))[0])


def render_without(scene: Scene, index: int, sigma: float = SIGMA) -> RasterImage:
    if not 0 <= index < len(scene.shapes):
        raise IndexError(f"shape index {index} out of range for {len(scene.shapes)} shapes")
    return RasterImage(_composite(scene, coverage_layers(scene, sigma), skip=index)[0])


def renders_without_each(scene: Scene, sigma: float = SIGMA):
    """Yield ``(i, image without shape i)`` for every shape, reusing coverage.

    Only the window of the removed shape can change, so each image is the
    full render with that window recomposited from the background up.
    """
    layers = coverage_layers(scene, sigma)
    full, _ = _composite(scene, layers)
    for i, removed in enumerate(layers):
        ys, xs = removed.window
        img = full.copy()
        patch = img[ys, xs]
        patch[:] = scene.background
        for k, (shape, layer) in enumerate(zip(scene.shapes, layers)):
            if k == i:
                continue
            # overlap of layer k with the removed window, in both frames
            oy0, oy1 = max(ys.start, layer.y0), min(ys.stop, layer.y0 + layer.cov.shape[0])
            ox0, ox1 = max(xs.start, layer.x0), min(xs.stop, layer.x0 + layer.cov.shape[1])
            if oy0 >= oy1 or ox0 >= ox1:
                continue
            cov = layer.cov[oy0 - layer.y0:oy1 - layer.y0, ox0 - layer.x0:ox1 - layer.x0]
            a = (cov * shape.color[3])[..., None]
            dst = patch[oy0 - ys.start:oy1 - ys.start, ox0 - xs.start:ox1 - xs.start]
            dst[:] = a * shape.color[:3] + (1.0 - a) * dst
        yield i, RasterImage(img)


def render_and_backward(scene: Scene, loss_grad_fn, sigma: float = SIGMA):
    """Render, ask ``loss_grad_fn(image)`` for ``(loss, dL/dimage)``, return the adjoint.

    Returns ``(image, loss, GradientSet)``; a single coverage pass serves both
    directions.
    """
    layers = coverage_layers(scene, sigma)
    out, below = _composite(scene, layers, keep_below=True)
    image = RasterImage(out)
    loss, dimg = loss_grad_fn(image)
    return image, loss, _backward(scene, layers, below, dimg)


def render_with_gradients(scene: Scene, loss_grad_image, sigma: float = SIGMA) -> GradientSet:
    dimg = np.asarray(loss_grad_image, dtype=np.float64)
    if dimg.shape != (scene.height, scene.width, 3):
        raise ValueError(
            f"loss gradient image is {dimg.shape}, canvas is {(scene.height, scene.width, 3)}"
        )
    layers = coverage_layers(scene, sigma)
    _, below = _composite(scene, layers, keep_below=True)
    return _backward(scene, layers, below, dimg)


def _backward(scene: Scene, layers, below, dimg) -> GradientSet:
    grad = np.array(dimg, dtype=np.float64, copy=True)
    dcovs = [None] * len(layers)
    grads = GradientSet.zeros_like(scene)
    for k in range(len(layers) - 1, -1, -1):
        shape, layer = scene.shapes[k], layers[k]
        win = layer.window
        g = grad[win]
        cov = layer.cov
        alpha = shape.color[3]
        a = cov * alpha
        rgb = shape.color[:3]
        grads[k].color[:3] = np.einsum("hwc,hw->c", g, a)
        dl_da = np.einsum("hwc,hwc->hw", g, rgb - below[k])
        grads[k].color[3] = np.sum(dl_da * cov)
        dcovs[k] = dl_da * alpha
        grad[win] = g * (1.0 - a)[..., None]

    def pull(k):
        layer = layers[k]
        dverts = _kernels.coverage_backward(
            dcovs[k], layer.dcov, layer.edge, layer.tpar, layer.ux, layer.uy, layer.n_verts
        )
        return _flatten_matrix(scene.shapes[k].n_segments).T @ dverts

    for k, dpts in enumerate(_parallel_map(pull, list(range(len(layers))))):
        grads[k].points[:] = dpts
    return grads
