"""Initial scene from color clusters and their connected components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.cluster import DBSCAN

from .geometry import Point, Scene, circle_shape
from .raster import RasterImage

DBSCAN_EPS = 5.0
DBSCAN_MIN_POINTS = 20
GRID = 100
RADIUS_SCALE = 0.5
JITTER = 2.0

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass
class ColorCluster:
    members: np.ndarray  # (k, 2) rows of (row, col) on the downsampled grid
    mean_rgb: np.ndarray


@dataclass
class Component:
    pixels: np.ndarray  # (k, 2) rows of (row, col) at full resolution
    area: int
    centroid: Point
    mean_rgb: np.ndarray
    label: int


def downsample(img: RasterImage, size: int = GRID) -> RasterImage:
    """Nearest-neighbour sample at cell centres.

    Interpolating filters mix colors along edges, and on flat-color art each
    mixed shade repeats along the whole edge, dense enough to form a cluster
    of its own.
    """
    rows = np.minimum(((np.arange(size) + 0.5) * img.height / size).astype(int), img.height - 1)
    cols = np.minimum(((np.arange(size) + 0.5) * img.width / size).astype(int), img.width - 1)
    return RasterImage(img.pixels[rows[:, None], cols[None, :]])


def dbscan_labels(img: RasterImage, eps: float = DBSCAN_EPS, min_points: int = DBSCAN_MIN_POINTS) -> np.ndarray:
    """Cluster label per pixel; noise is reassigned to the nearest cluster mean.

    DBSCAN runs on the distinct colors weighted by their pixel counts, which
    is equivalent to clustering every pixel but avoids quadratic
    neighbourhoods on flat-color images.
    """
    if eps <= 0 or min_points < 1:
        raise ValueError("eps must be > 0 and min_points >= 1")
    colors = (img.pixels * 255.0).reshape(-1, 3)
    uniq, inverse, counts = np.unique(colors, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    db = DBSCAN(eps=eps, min_samples=min_points).fit(uniq, sample_weight=counts)
    labels = db.labels_[inverse]
    found = np.unique(labels[labels >= 0])
    if len(found) == 0:
        return np.zeros((img.height, img.width), dtype=np.int64)
    remap = np.full(labels.max() + 1, -1)
    remap[found] = np.arange(len(found))
    labels = np.where(labels >= 0, remap[np.maximum(labels, 0)], -1)
    noise = labels < 0
    if noise.any():
        means = np.stack([colors[labels == k].mean(axis=0) for k in range(len(found))])
        d = np.linalg.norm(colors[noise][:, None, :] - means[None], axis=-1)
        labels[noise] = np.argmin(d, axis=1)
    return labels.reshape(img.height, img.width)


def dbscan_colors(img: RasterImage, eps: float = DBSCAN_EPS, min_points: int = DBSCAN_MIN_POINTS) -> list[ColorCluster]:
    labels = dbscan_labels(img, eps, min_points)
    clusters = []
    for k in range(labels.max() + 1):
        members = np.argwhere(labels == k)
        clusters.append(ColorCluster(members, img.pixels[labels == k].mean(axis=0)))
    return clusters


def project_labels(labels: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbour upscaling of a label grid to ``height x width``."""
    rows = np.minimum((np.arange(height) + 0.5) * labels.shape[0] / height, labels.shape[0] - 1).astype(int)
    cols = np.minimum((np.arange(width) + 0.5) * labels.shape[1] / width, labels.shape[1] - 1).astype(int)
    return labels[rows[:, None], cols[None, :]]


def connected_components(labels: np.ndarray, img: RasterImage) -> list[Component]:
    comps = []
    for label in np.unique(labels):
        regions, n = ndimage.label(labels == label, structure=_FOUR_CONNECTED)
        for r in range(1, n + 1):
            pix = np.argwhere(regions == r)
            # pixel centres
            cy, cx = pix.mean(axis=0) + 0.5
            comps.append(Component(pix, len(pix), Point(float(cx), float(cy)),
                                   img.pixels[pix[:, 0], pix[:, 1]].mean(axis=0), int(label)))
    return comps


def min_component_area(width: int, grid: int = GRID, min_points: int = DBSCAN_MIN_POINTS) -> float:
    """Smallest component worth seeding: ``min_points`` scaled linearly by the projection."""
    return min_points * width / grid


def init_scene(img: RasterImage, n_shapes: int, segments_per_shape: int = 4, *,
               eps: float = DBSCAN_EPS, min_points: int = DBSCAN_MIN_POINTS,
               radius_scale: float = RADIUS_SCALE, seed: int = 0,
               background=(1.0, 1.0, 1.0)) -> Scene:
    if n_shapes < 1:
        raise ValueError("n_shapes must be >= 1")
    labels = project_labels(dbscan_labels(downsample(img), eps, min_points), img.width, img.height)
    comps = connected_components(labels, img)
    comps.sort(key=lambda c: (-c.area, c.centroid.y, c.centroid.x))
    big = [c for c in comps if c.area >= min_component_area(img.width, min_points=min_points)]
    comps = big or comps[:1]

    rng = np.random.default_rng(seed)
    shapes = []
    for i in range(n_shapes):
        comp = comps[i % len(comps)]
        center = np.array(comp.centroid)
        if i >= len(comps):
            center = center + rng.uniform(-JITTER, JITTER, 2)
        center = np.clip(center, 0.0, [img.width, img.height])
        radius = radius_scale * np.sqrt(comp.area / np.pi)
        shapes.append(circle_shape(center, radius, segments_per_shape, (*comp.mean_rgb, 1.0)))
    return Scene(shapes, img.width, img.height, background)
