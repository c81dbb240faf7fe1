"""Optimize & Reduce: schedule driver, shape ranking, pruning, Add, interpolation."""

from __future__ import annotations

import logging
import time

import numpy as np

from . import raster
from .clusterinit import init_scene
from .config import MetricsRecord, RunConfig
from .geometry import Scene, circle_shape, geometric_loss
from .optimizer import optimize, pixel_loss
from .raster import RasterImage

log = logging.getLogger(__name__)

ADD_WINDOW = 15
ADD_RADIUS = 8.0


def rank_shapes(scene: Scene, target: RasterImage, reduce_loss: str = "l1") -> np.ndarray:
    """Loss of the render with each shape left out; higher means more important."""
    if not scene.shapes:
        raise ValueError("cannot rank an empty scene")
    scores = np.empty(len(scene.shapes))
    for i, img in raster.renders_without_each(scene):
        scores[i] = pixel_loss(reduce_loss, img.pixels, target.pixels)[0]
    return scores


def _check_keep(scene: Scene, scores, keep: int):
    if len(scores) != len(scene.shapes):
        raise ValueError("one score per shape required")
    if not 1 <= keep <= len(scene.shapes):
        raise ValueError(f"keep must lie in [1, {len(scene.shapes)}], got {keep}")


def _subset(scene: Scene, indices) -> Scene:
    shapes = [scene.shapes[i].copy() for i in sorted(indices)]
    return Scene(shapes, scene.width, scene.height, scene.background.copy())


def reduce_deterministic(scene: Scene, scores, keep: int) -> Scene:
    _check_keep(scene, scores, keep)
    # stable sort on -score: ties keep the lower index
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return _subset(scene, order[:keep])


def softmax(scores, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(scores, dtype=np.float64) / temperature
    e = np.exp(z - z.max())
    return e / e.sum()


def sample_without_replacement(weights, k: int, rng: np.random.Generator) -> list[int]:
    """Sequential weighted draws, renormalising over the remaining items."""
    w = np.array(weights, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return _sample_logits(np.log(w), k, rng)


def _sample_logits(logits, k: int, rng: np.random.Generator) -> list[int]:
    # softmax over the survivors at each draw, so tiny temperatures never underflow to all-zero
    z = np.array(logits, dtype=np.float64)
    chosen = []
    for _ in range(k):
        p = np.exp(z - z.max())
        p /= p.sum()
        idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        idx = min(idx, len(p) - 1)
        while p[idx] == 0:
            idx -= 1
        chosen.append(idx)
        z[idx] = -np.inf
    return chosen


def reduce_stochastic(scene: Scene, scores, keep: int, temperature: float, seed: int) -> Scene:
    _check_keep(scene, scores, keep)
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    z = np.asarray(scores, dtype=np.float64) / temperature
    return _subset(scene, _sample_logits(z, keep, np.random.default_rng(seed)))


def add_shapes(scene: Scene, target: RasterImage, n_add: int, *, window: int = ADD_WINDOW,
               radius: float = ADD_RADIUS, segments: int = 4) -> Scene:
    """Append circle seeds on top of the scene at greedy squared-error peaks."""
    if n_add < 1:
        raise ValueError("n_add must be >= 1")
    err = np.sum((raster.render(scene).pixels - target.pixels) ** 2, axis=-1)
    free = np.ones_like(err, dtype=bool)
    half = window // 2
    out = scene.copy()
    for _ in range(n_add):
        if not free.any():
            free[:] = True
        masked = np.where(free, err, -np.inf)
        r, c = np.unravel_index(int(np.argmax(masked)), err.shape)
        free[max(r - half, 0):r + half + 1, max(c - half, 0):c + half + 1] = False
        color = (*target.pixels[r, c], 1.0)
        out.shapes.append(circle_shape((c + 0.5, r + 0.5), radius, segments, color))
    return out


def phase_metrics(phase: int, scene: Scene, target: RasterImage, cfg: RunConfig,
                  iterations: int, seconds: float) -> MetricsRecord:
    img = raster.render(scene).pixels
    mse = pixel_loss("mse", img, target.pixels)[0]
    return MetricsRecord(
        phase=phase,
        shapes=len(scene.shapes),
        mse=mse,
        mse_gray2=mse * 255.0**2,
        l1=pixel_loss("l1", img, target.pixels)[0],
        geometric=geometric_loss(scene, cfg.lambda_p, cfg.exclusive_xor),
        iterations=iterations,
        seconds=seconds,
    )


def _check_target(target: RasterImage, cfg: RunConfig):
    if (target.width, target.height) != (cfg.width, cfg.height):
        raise ValueError(
            f"target is {target.width}x{target.height} but config canvas is {cfg.width}x{cfg.height}"
        )


def run_oandr(target: RasterImage, cfg: RunConfig, on_phase=None):
    """Initialise at the first schedule count, then alternate reduce/add and optimize.

    ``on_phase(record, scene)`` is called after every optimize phase.
    Returns the final scene and one :class:`MetricsRecord` per phase.
    """
    _check_target(target, cfg)
    counts = cfg.full_schedule()
    budgets = cfg.phase_budgets()
    loss_cfg, stop = cfg.loss_config(), cfg.stop_rule()
    records = []
    scene = None
    for phase, (count, budget) in enumerate(zip(counts, budgets)):
        t0 = time.perf_counter()
        if scene is None:
            scene = init_scene(target, count, cfg.segments, seed=cfg.seed)
        elif count < len(scene.shapes):
            scores = rank_shapes(scene, target, cfg.reduce_loss)
            if cfg.reduce == "stoch":
                scene = reduce_stochastic(scene, scores, count, cfg.temperature, cfg.seed + phase)
            else:
                scene = reduce_deterministic(scene, scores, count)
        else:
            scene = add_shapes(scene, target, count - len(scene.shapes), segments=cfg.segments)
        scene, trace = optimize(scene, target, loss_cfg, stop, budget, cfg.lr_points, cfg.lr_colors)
        rec = phase_metrics(phase, scene, target, cfg, len(trace), time.perf_counter() - t0)
        log.info("phase %d: %d shapes, %d iterations, mse %.5f", phase, rec.shapes, rec.iterations, rec.mse)
        records.append(rec)
        if on_phase is not None:
            on_phase(rec, scene)
    return scene, records


def random_scene(width: int, height: int, n_shapes: int, segments: int = 4, seed: int = 0,
                 background=(1.0, 1.0, 1.0)) -> Scene:
    """Circle seeds at uniform random centres with random colors."""
    rng = np.random.default_rng(seed)
    size = min(width, height)
    shapes = []
    for _ in range(n_shapes):
        center = rng.uniform([0, 0], [width, height])
        radius = rng.uniform(0.05, 0.15) * size
        shapes.append(circle_shape(center, radius, segments, (*rng.uniform(0, 1, 3), 1.0)))
    return Scene(shapes, width, height, background)


def optimize_direct(target: RasterImage, cfg: RunConfig):
    """Baseline: ``cfg.shapes`` random shapes optimised once with the whole budget."""
    _check_target(target, cfg)
    scene = random_scene(cfg.width, cfg.height, cfg.shapes, cfg.segments, cfg.seed)
    t0 = time.perf_counter()
    scene, trace = optimize(scene, target, cfg.loss_config(), cfg.stop_rule(), cfg.total_iters,
                            cfg.lr_points, cfg.lr_colors)
    return scene, [phase_metrics(0, scene, target, cfg, len(trace), time.perf_counter() - t0)]


def interpolate(source: RasterImage, target: RasterImage, cfg: RunConfig, n_frames: int) -> list[Scene]:
    """Vectorise ``source`` then morph it toward ``target`` by continued optimisation.

    Frames are the best scene found so far (by loss against ``target``)
    sampled at evenly spaced iterations; the first frame is the source
    vectorisation and the last the best final state.
    """
    if source.pixels.shape != target.pixels.shape:
        raise ValueError(f"source {source.pixels.shape} and target {target.pixels.shape} differ in size")
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    start, _ = run_oandr(source, cfg)
    if np.array_equal(source.pixels, target.pixels):
        # the vectorisation already is the fit; continuing would only add optimizer noise
        return [start.copy() for _ in range(n_frames)]

    stop = cfg.stop_rule()
    budget = min(cfg.total_iters, stop.max_iters)
    snap_at = np.linspace(0, budget - 1, n_frames).round().astype(int)[1:-1]
    best = {"loss": np.inf, "scene": start}
    history = {}

    def track(it, scene, loss):
        if loss < best["loss"]:
            best["loss"], best["scene"] = loss, scene
        history[it] = best["scene"]

    optimize(start, target, cfg.loss_config(), stop, budget, cfg.lr_points, cfg.lr_colors, callback=track)
    last = max(history)
    frames = [start.copy()]
    frames += [history[min(int(i), last)].copy() for i in snap_at]
    frames.append(best["scene"].copy())
    return frames
