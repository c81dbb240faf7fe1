"""Cubic Bezier shapes, flattening, and the soft self-intersection penalty.

A closed shape with ``n`` cubic segments is stored as a ``(3n, 2)`` array of
control points.  Segment ``k`` uses rows ``3k, 3k+1, 3k+2`` and the first row
of the next segment (wrapping), so shared endpoints exist once.

Orientation follows the convention of image space, where ``y`` grows
downward: ``orientation`` returns values near 1 for one turning direction and
near 0 for the other, with no normalisation of the cross product.  Shapes a
few pixels wide already saturate the sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

FLATTEN_SUBDIVISIONS = 16
_NORM_EPS = 1e-8


class Point(NamedTuple):
    x: float
    y: float


class CubicSegment(NamedTuple):
    a: Point
    b: Point
    c: Point
    d: Point


@dataclass
class Shape:
    points: np.ndarray
    color: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.points = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        self.color = np.clip(np.array(self.color, dtype=np.float64).reshape(4), 0.0, 1.0)
        if len(self.points) % 3 or len(self.points) < 6:
            raise ValueError("a closed shape needs 3*n control points with n >= 2 segments")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("control points must be finite")

    @property
    def n_segments(self) -> int:
        return len(self.points) // 3

    @property
    def segments(self) -> list[CubicSegment]:
        a, b, c, d = segment_arrays(self.points)
        return [
            CubicSegment(*(Point(float(p[0]), float(p[1])) for p in quad))
            for quad in zip(a, b, c, d)
        ]

    @classmethod
    def from_segments(cls, segments: Sequence[Sequence], color=(0.0, 0.0, 0.0, 1.0)) -> "Shape":
        """Build a shape from chained ``(a, b, c, d)`` segments; ``d`` must equal the next ``a``."""
        rows = []
        for k, seg in enumerate(segments):
            nxt = segments[(k + 1) % len(segments)]
            if not np.allclose(seg[3], nxt[0]):
                raise ValueError(f"segment {k} does not close onto segment {(k + 1) % len(segments)}")
            rows.extend(seg[:3])
        return cls(np.array(rows, dtype=np.float64), color)

    def copy(self) -> "Shape":
        return Shape(self.points.copy(), self.color.copy())


@dataclass
class Scene:
    shapes: list[Shape]
    width: int
    height: int
    background: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.background = np.clip(np.array(self.background, dtype=np.float64).reshape(3), 0.0, 1.0)
        if self.width < 1 or self.height < 1:
            raise ValueError("empty canvas")

    def __len__(self) -> int:
        return len(self.shapes)

    def copy(self) -> "Scene":
        return Scene([s.copy() for s in self.shapes], self.width, self.height, self.background.copy())

    def without(self, index: int) -> "Scene":
        shapes = [s for i, s in enumerate(self.shapes) if i != index]
        return Scene(shapes, self.width, self.height, self.background)


def segment_arrays(points: np.ndarray):
    """Split a closed control polygon into the four ``(n, 2)`` arrays A, B, C, D."""
    pts = np.asarray(points, dtype=np.float64)
    return pts[0::3], pts[1::3], pts[2::3], np.roll(pts[0::3], -1, axis=0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _cross_term(a, b, c):
    a, b, c = (np.asarray(p, dtype=np.float64) for p in (a, b, c))
    return (b[..., 1] - a[..., 1]) * (c[..., 0] - b[..., 0]) - (b[..., 0] - a[..., 0]) * (c[..., 1] - b[..., 1])


def orientation(a, b, c):
    """Soft turning direction of ``a -> b -> c``; 0.5 when collinear."""
    return _sigmoid(_cross_term(a, b, c))


def soft_and(p, q):
    return p * q


def soft_xor(p, q, exclusive: bool = False):
    """``p + q - pq`` by default; ``exclusive=True`` gives ``p + q - 2pq``."""
    return p + q - (2.0 if exclusive else 1.0) * p * q


def f_intersect(a, b, c, d, exclusive: bool = False):
    x1 = soft_xor(orientation(a, b, c), orientation(a, b, d), exclusive)
    x2 = soft_xor(orientation(c, d, a), orientation(c, d, b), exclusive)
    return soft_and(x1, x2)


def f_orientation(a, b, c, d):
    return soft_and(orientation(a, b, c), orientation(b, c, d))


def geom_loss_ab(seg, lambda_p: float, exclusive: bool = False):
    a, b, c, d = seg
    return lambda_p * (f_intersect(a, b, c, d, exclusive) + f_orientation(a, b, c, d))


def _cos_between(u, v):
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    ok = (nu > _NORM_EPS) & (nv > _NORM_EPS)
    denom = np.where(ok, nu * nv, 1.0)
    return np.where(ok, np.sum(u * v, axis=-1) / denom, 0.0), ok


def geom_loss_angle(seg):
    a, b, c, d = (np.asarray(p, dtype=np.float64) for p in seg)
    cos1, _ = _cos_between(b - a, c - b)
    cos2, _ = _cos_between(c - b, d - c)
    return np.maximum(-cos1, 0.0) + np.maximum(-cos2, 0.0)


# -- gradients -------------------------------------------------------------


def _orientation_backward(p, q, r, upstream):
    """Scatter ``upstream * dO/d(p, q, r)`` for vectorised triples."""
    o = orientation(p, q, r)
    g = upstream * o * (1.0 - o)
    gp = np.stack([r[:, 1] - q[:, 1], -(r[:, 0] - q[:, 0])], axis=-1)
    gq = np.stack([-(r[:, 1] - p[:, 1]), r[:, 0] - p[:, 0]], axis=-1)
    gr = np.stack([q[:, 1] - p[:, 1], -(q[:, 0] - p[:, 0])], axis=-1)
    return g[:, None] * gp, g[:, None] * gq, g[:, None] * gr


def _cos_backward(u, v, upstream):
    cos, ok = _cos_between(u, v)
    nu2 = np.where(ok, np.sum(u * u, axis=-1), 1.0)
    nv2 = np.where(ok, np.sum(v * v, axis=-1), 1.0)
    inv = np.where(ok, 1.0 / np.sqrt(nu2 * nv2), 0.0)
    g = np.where(ok, upstream, 0.0)[:, None]
    du = g * (v * inv[:, None] - cos[:, None] * u / nu2[:, None])
    dv = g * (u * inv[:, None] - cos[:, None] * v / nv2[:, None])
    return du, dv


def segment_losses_and_grads(points: np.ndarray, lambda_p: float, exclusive: bool = False):
    """Total geometric loss of one closed shape and its ``(3n, 2)`` gradient."""
    A, B, C, D = segment_arrays(points)
    n = len(A)
    sgn = 2.0 if exclusive else 1.0

    o_abc = orientation(A, B, C)
    o_abd = orientation(A, B, D)
    o_cda = orientation(C, D, A)
    o_cdb = orientation(C, D, B)
    o_bcd = orientation(B, C, D)
    x1 = o_abc + o_abd - sgn * o_abc * o_abd
    x2 = o_cda + o_cdb - sgn * o_cda * o_cdb
    ab_term = lambda_p * (x1 * x2 + o_abc * o_bcd)

    cos1, _ = _cos_between(B - A, C - B)
    cos2, _ = _cos_between(C - B, D - C)
    angle_term = np.maximum(-cos1, 0.0) + np.maximum(-cos2, 0.0)
    loss = float(np.sum(ab_term) + np.sum(angle_term))

    gA, gB, gC, gD = (np.zeros((n, 2)) for _ in range(4))

    def add(targets, grads):
        for t, g in zip(targets, grads):
            t += g

    # d/dO of lambda_p * (x1*x2 + o_abc*o_bcd)
    add((gA, gB, gC), _orientation_backward(A, B, C, lambda_p * ((1 - sgn * o_abd) * x2 + o_bcd)))
    add((gA, gB, gD), _orientation_backward(A, B, D, lambda_p * (1 - sgn * o_abc) * x2))
    add((gC, gD, gA), _orientation_backward(C, D, A, lambda_p * (1 - sgn * o_cdb) * x1))
    add((gC, gD, gB), _orientation_backward(C, D, B, lambda_p * (1 - sgn * o_cda) * x1))
    add((gB, gC, gD), _orientation_backward(B, C, D, lambda_p * o_abc))

    du, dv = _cos_backward(B - A, C - B, -(cos1 < 0).astype(np.float64))
    gA -= du
    gB += du - dv
    gC += dv
    du, dv = _cos_backward(C - B, D - C, -(cos2 < 0).astype(np.float64))
    gB -= du
    gC += du - dv
    gD += dv

    grad = np.zeros((3 * n, 2))
    grad[0::3] += gA
    grad[1::3] += gB
    grad[2::3] += gC
    grad[0::3] += np.roll(gD, 1, axis=0)
    return loss, grad


def geometric_loss(scene: Scene, lambda_p: float, exclusive: bool = False) -> float:
    return geometric_loss_and_grad(scene, lambda_p, exclusive)[0]


def geometric_loss_and_grad(scene: Scene, lambda_p: float, exclusive: bool = False):
    """Scene-wide geometric loss and one ``(3n, 2)`` gradient array per shape."""
    total = 0.0
    grads = []
    for shape in scene.shapes:
        loss, g = segment_losses_and_grads(shape.points, lambda_p, exclusive)
        total += loss
        grads.append(g)
    return total, grads


# -- flattening ------------------------------------------------------------


def bernstein_weights(subdivisions: int, include_end: bool = True) -> np.ndarray:
    if subdivisions < 1:
        raise ValueError("subdivisions must be >= 1")
    t = np.arange(subdivisions + 1) / subdivisions
    if not include_end:
        t = t[:-1]
    s = 1.0 - t
    return np.stack([s**3, 3 * s * s * t, 3 * s * t * t, t**3], axis=-1)


def flatten(seg, subdivisions: int) -> list[Point]:
    a, b, c, d = (np.asarray(p, dtype=np.float64) for p in seg)
    w = bernstein_weights(subdivisions)
    pts = w @ np.stack([a, b, c, d])
    pts[0], pts[-1] = a, d
    return [Point(float(x), float(y)) for x, y in pts]


def flatten_matrix(n_segments: int, subdivisions: int = FLATTEN_SUBDIVISIONS) -> np.ndarray:
    """Linear map from ``(3n, 2)`` control points to the closed polyline vertices.

    Each segment contributes ``subdivisions`` vertices (its end point is the
    next segment's start).  The transpose pulls vertex gradients back onto
    control points.
    """
    w = bernstein_weights(subdivisions, include_end=False)
    m = np.zeros((n_segments * subdivisions, 3 * n_segments))
    for k in range(n_segments):
        rows = slice(k * subdivisions, (k + 1) * subdivisions)
        cols = [3 * k, 3 * k + 1, 3 * k + 2, (3 * k + 3) % (3 * n_segments)]
        for j, col in enumerate(cols):
            m[rows, col] += w[:, j]
    return m


_FLATTEN_CACHE: dict[tuple[int, int], np.ndarray] = {}


def flatten_shape(shape: Shape, subdivisions: int = FLATTEN_SUBDIVISIONS) -> np.ndarray:
    key = (shape.n_segments, subdivisions)
    if key not in _FLATTEN_CACHE:
        _FLATTEN_CACHE[key] = flatten_matrix(*key)
    return _FLATTEN_CACHE[key] @ shape.points


def _segments_cross(p1, p2, q1, q2):
    """Proper crossing test; touching or collinear overlap does not count."""
    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def polyline_self_intersections(vertices: np.ndarray) -> int:
    v = np.asarray(vertices, dtype=np.float64)
    m = len(v)
    start, end = v, np.roll(v, -1, axis=0)
    i, j = np.triu_indices(m, k=2)
    keep = ~((i == 0) & (j == m - 1))
    i, j = i[keep], j[keep]
    return int(np.count_nonzero(_segments_cross(start[i], end[i], start[j], end[j])))


def exact_self_intersections(shape: Shape, subdivisions: int = FLATTEN_SUBDIVISIONS) -> int:
    return polyline_self_intersections(flatten_shape(shape, subdivisions))


def circle_shape(center, radius: float, n_segments: int = 4, color=(0.0, 0.0, 0.0, 1.0)) -> Shape:
    """Closed cubic approximation of a circle, anchors at increasing angle."""
    cx, cy = center
    theta = 2 * np.pi * np.arange(n_segments) / n_segments
    handle = 4.0 / 3.0 * np.tan(np.pi / (2 * n_segments)) * radius
    anchors = np.stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)], axis=-1)
    tangents = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    pts = np.empty((3 * n_segments, 2))
    pts[0::3] = anchors
    pts[1::3] = anchors + handle * tangents
    pts[2::3] = np.roll(anchors, -1, axis=0) - handle * np.roll(tangents, -1, axis=0)
    return Shape(pts, color)
