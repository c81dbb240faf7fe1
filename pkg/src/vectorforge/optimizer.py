"""Loss assembly, Adam with separate point/color learning rates, early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import raster
from .geometry import Scene, geometric_loss_and_grad
from .raster import GradientSet, RasterImage

log = logging.getLogger(__name__)

RECON_KINDS = ("l1", "mse")


class NumericalError(FloatingPointError):
    """Non-finite loss or gradient; ``scene`` is the state that produced it."""

    def __init__(self, message: str, scene: Scene):
        super().__init__(message)
        self.scene = scene


@dataclass
class LossConfig:
    recon_kind: str = "l1"
    alpha_blend: float = 1.0
    lambda_geometric: float = 0.01
    lambda_p: float = 10.0
    exclusive_xor: bool = False

    def __post_init__(self):
        self.recon_kind = self.recon_kind.lower()
        if self.recon_kind not in RECON_KINDS:
            raise ValueError(f"recon_kind must be one of {RECON_KINDS}, got {self.recon_kind!r}")
        if not 0.0 <= self.alpha_blend <= 1.0:
            raise ValueError("alpha_blend must lie in [0, 1]")
        for name in ("lambda_geometric", "lambda_p"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass
class StopRule:
    min_iters: int = 50
    max_iters: int = 500
    rel_improve_floor: float = 1e-4

    def __post_init__(self):
        if not 1 <= self.min_iters <= self.max_iters:
            raise ValueError("need 1 <= min_iters <= max_iters")
        if self.rel_improve_floor < 0:
            raise ValueError("rel_improve_floor must be >= 0")


def pixel_loss(kind: str, rendered: np.ndarray, target: np.ndarray):
    """Mean L1 or squared error over pixels and channels, and its image gradient."""
    diff = rendered - target
    n = diff.size
    if kind == "l1":
        return float(np.sum(np.abs(diff)) / n), np.sign(diff) / n
    if kind == "mse":
        return float(np.sum(diff * diff) / n), 2.0 * diff / n
    raise ValueError(f"unknown loss {kind!r}")


def recon_loss(cfg: LossConfig, rendered: np.ndarray, target: np.ndarray):
    """``alpha * recon_kind + (1 - alpha) * MSE``; the MSE stands in for a perceptual term."""
    loss, grad = pixel_loss(cfg.recon_kind, rendered, target)
    if cfg.alpha_blend < 1.0:
        aux, aux_grad = pixel_loss("mse", rendered, target)
        loss = cfg.alpha_blend * loss + (1.0 - cfg.alpha_blend) * aux
        grad = cfg.alpha_blend * grad + (1.0 - cfg.alpha_blend) * aux_grad
    return loss, grad


def loss_and_grad(scene: Scene, target: RasterImage, cfg: LossConfig):
    if (scene.height, scene.width) != (target.height, target.width):
        raise ValueError(
            f"canvas {scene.width}x{scene.height} does not match target {target.width}x{target.height}"
        )
    _, loss, grads = raster.render_and_backward(
        scene, lambda img: recon_loss(cfg, img.pixels, target.pixels)
    )
    if cfg.lambda_geometric > 0:
        geo, geo_grads = geometric_loss_and_grad(scene, cfg.lambda_p, cfg.exclusive_xor)
        loss += cfg.lambda_geometric * geo
        for g, gg in zip(grads, geo_grads):
            g.points += cfg.lambda_geometric * gg
    return loss, grads


@dataclass
class OptimState:
    lr_points: float = 1.0
    lr_colors: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_points: list = field(default_factory=list)
    v_points: list = field(default_factory=list)
    m_colors: list = field(default_factory=list)
    v_colors: list = field(default_factory=list)

    @classmethod
    def for_scene(cls, scene: Scene, lr_points: float = 1.0, lr_colors: float = 0.01) -> "OptimState":
        st = cls(lr_points, lr_colors)
        st.m_points = [np.zeros_like(s.points) for s in scene.shapes]
        st.v_points = [np.zeros_like(s.points) for s in scene.shapes]
        st.m_colors = [np.zeros(4) for _ in scene.shapes]
        st.v_colors = [np.zeros(4) for _ in scene.shapes]
        return st

    def congruent(self, scene: Scene) -> bool:
        return len(self.m_points) == len(scene.shapes) and all(
            m.shape == s.points.shape for m, s in zip(self.m_points, scene.shapes)
        )


def _adam(param, grad, m, v, lr, st: OptimState):
    m *= st.beta1
    m += (1.0 - st.beta1) * grad
    v *= st.beta2
    v += (1.0 - st.beta2) * grad * grad
    m_hat = m / (1.0 - st.beta1 ** st.step)
    v_hat = v / (1.0 - st.beta2 ** st.step)
    return param - lr * m_hat / (np.sqrt(v_hat) + st.eps)


def adam_step(scene: Scene, grads: GradientSet, state: OptimState) -> Scene:
    """One Adam update; returns a new scene and advances ``state`` in place."""
    if not state.congruent(scene) or len(grads) != len(scene.shapes):
        raise ValueError("optimizer state does not match the scene")
    state.step += 1
    out = scene.copy()
    for k, (shape, g) in enumerate(zip(out.shapes, grads)):
        shape.points = _adam(shape.points, g.points, state.m_points[k], state.v_points[k], state.lr_points, state)
        shape.color = np.clip(
            _adam(shape.color, g.color, state.m_colors[k], state.v_colors[k], state.lr_colors, state), 0.0, 1.0
        )
    return out


def optimize(scene: Scene, target: RasterImage, cfg: LossConfig, stop: StopRule, iters_budget: int,
             lr_points: float = 1.0, lr_colors: float = 0.01, callback=None):
    """Adam until the budget, ``stop.max_iters`` or the improvement floor ends it.

    ``callback(iteration, scene, loss)`` sees every evaluated scene.  Returns
    the scene after the last update and the loss of every iteration.
    """
    if iters_budget < 1:
        raise ValueError("iters_budget must be >= 1")
    limit = min(iters_budget, stop.max_iters)
    state = OptimState.for_scene(scene, lr_points, lr_colors)
    trace: list[float] = []
    for it in range(limit):
        if not all(np.isfinite(s.points).all() and np.isfinite(s.color).all() for s in scene.shapes):
            raise NumericalError(f"non-finite scene parameters at iteration {it}", scene)
        loss, grads = loss_and_grad(scene, target, cfg)
        if not (math.isfinite(loss) and grads.is_finite()):
            raise NumericalError(f"non-finite loss or gradient at iteration {it}", scene)
        if callback is not None:
            callback(it, scene, loss)
        trace.append(loss)
        scene = adam_step(scene, grads, state)
        if len(trace) >= stop.min_iters and len(trace) >= 2:
            prev = trace[-2]
            improvement = (prev - loss) / prev if prev > 0 else 0.0
            if improvement < stop.rel_improve_floor:
                log.debug("early stop after %d iterations (improvement %.3g)", len(trace), improvement)
                break
        elif len(trace) >= stop.min_iters and math.isinf(stop.rel_improve_floor):
            break
    return scene, trace
