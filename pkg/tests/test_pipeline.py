import numpy as np
import pytest

from vectorforge import pipeline as pl
from vectorforge.config import RunConfig
from vectorforge.geometry import Scene, circle_shape
from vectorforge.optimizer import pixel_loss
from vectorforge.raster import RasterImage, render
from vectorforge.synthetic import disk, three_disks

from conftest import make_scene


def brute_rank(scene, target, kind="l1"):
    scores = []
    for i in range(len(scene.shapes)):
        shapes = [s for j, s in enumerate(scene.shapes) if j != i]
        img = render(Scene(shapes, scene.width, scene.height, scene.background))
        scores.append(pixel_loss(kind, img.pixels, target.pixels)[0])
    return np.array(scores)


def labelled_scene(n):
    """Shapes whose red channel encodes their original index."""
    shapes = [circle_shape((5 + i, 5), 2, 4, (i / 100, 0, 0, 1)) for i in range(n)]
    return Scene(shapes, 20, 20)


def indices(scene):
    return [int(round(s.color[0] * 100)) for s in scene.shapes]


class TestRank:
    def test_occluded_shape_scores_full_loss(self, rng):
        bottom = circle_shape((10, 10), 3, 4, (1, 0, 0, 1))
        top = circle_shape((10, 10), 9, 4, (0, 1, 0, 1))
        scene = Scene([bottom, top], 20, 20)
        target = RasterImage(rng.uniform(0, 1, (20, 20, 3)))
        full = pixel_loss("l1", render(scene).pixels, target.pixels)[0]
        assert pl.rank_shapes(scene, target)[0] == pytest.approx(full, abs=1e-12)

    def test_single_shape_scores_background(self):
        target = disk(32)
        scene = Scene([circle_shape((16, 16), 9.6, 4, (0.86, 0.16, 0.16, 1))], 32, 32)
        bg = np.ones((32, 32, 3))
        assert pl.rank_shapes(scene, target, "mse")[0] == pytest.approx(
            pixel_loss("mse", bg, target.pixels)[0], abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 9, 16])
    def test_brute_force(self, n):
        rng = np.random.default_rng(n)
        scene = make_scene(rng, n)
        target = RasterImage(rng.uniform(0, 1, (32, 32, 3)))
        for kind in ("l1", "mse"):
            assert np.allclose(pl.rank_shapes(scene, target, kind), brute_rank(scene, target, kind), atol=1e-12, rtol=0)

    def test_empty_scene(self):
        with pytest.raises(ValueError):
            pl.rank_shapes(Scene([], 8, 8), RasterImage(np.ones((8, 8, 3))))


class TestReduce:
    def test_keep_all(self):
        scene = labelled_scene(4)
        assert indices(pl.reduce_deterministic(scene, [1, 4, 2, 3], 4)) == [0, 1, 2, 3]

    def test_selection(self):
        assert indices(pl.reduce_deterministic(labelled_scene(3), [3, 1, 2], 2)) == [0, 2]

    def test_ties_keep_lower_index(self):
        assert indices(pl.reduce_deterministic(labelled_scene(4), [1, 2, 2, 2], 2)) == [1, 2]

    def test_order_is_subsequence(self, rng):
        scores = rng.normal(size=10)
        for keep in range(1, 11):
            kept = indices(pl.reduce_deterministic(labelled_scene(10), scores, keep))
            assert len(kept) == keep and kept == sorted(kept)
            kept = indices(pl.reduce_stochastic(labelled_scene(10), scores, keep, 0.5, keep))
            assert len(kept) == keep and kept == sorted(kept)

    def test_shift_invariant_deterministic(self, rng):
        scores = rng.normal(size=8)
        a = indices(pl.reduce_deterministic(labelled_scene(8), scores, 3))
        b = indices(pl.reduce_deterministic(labelled_scene(8), scores + 17.0, 3))
        assert a == b

    def test_bad_keep(self):
        for keep in (0, 4):
            with pytest.raises(ValueError):
                pl.reduce_deterministic(labelled_scene(3), [1, 2, 3], keep)
            with pytest.raises(ValueError):
                pl.reduce_stochastic(labelled_scene(3), [1, 2, 3], keep, 1.0, 0)
        with pytest.raises(ValueError):
            pl.reduce_stochastic(labelled_scene(3), [1, 2, 3], 1, 0.0, 0)

    def test_softmax(self):
        assert np.allclose(pl.softmax([0.0, 0.0]), [0.5, 0.5])
        z = np.array([0.3, -1.0, 2.0])
        assert np.allclose(pl.softmax(z, 0.5), np.exp(z / 0.5) / np.exp(z / 0.5).sum())
        assert np.allclose(pl.softmax(z + 1000), pl.softmax(z))
        assert np.all(np.isfinite(pl.softmax([1e6, 0.0], 1e-9)))

    def test_low_temperature_matches_deterministic(self, rng):
        for trial in range(20):
            scores = rng.uniform(0, 1, 7)
            det = indices(pl.reduce_deterministic(labelled_scene(7), scores, 3))
            sto = indices(pl.reduce_stochastic(labelled_scene(7), scores, 3, 1e-9, trial))
            assert det == sto

    def test_uniform_inclusion(self):
        rng = np.random.default_rng(0)
        counts = np.zeros(4)
        probs = pl.softmax(np.zeros(4))
        for _ in range(10_000):
            counts[pl.sample_without_replacement(probs, 2, rng)] += 1
        assert np.all(np.abs(counts / 10_000 - 0.5) <= 0.02)

    def test_shift_invariant_distribution(self):
        scores = np.array([0.0, 0.5, 1.0, 1.5])
        freq = []
        for shift in (0.0, 123.0):
            rng = np.random.default_rng(5)
            c = np.zeros(4)
            for _ in range(10_000):
                c[pl.sample_without_replacement(pl.softmax(scores + shift, 1.0), 2, rng)] += 1
            freq.append(c / 10_000)
        assert np.allclose(freq[0], freq[1], atol=0.02)

    def test_sampling_follows_weights(self):
        # inclusion with k=1 is the softmax itself
        rng = np.random.default_rng(1)
        p = np.array([0.1, 0.2, 0.7])
        c = np.bincount([pl.sample_without_replacement(p, 1, rng)[0] for _ in range(10_000)], minlength=3)
        assert np.allclose(c / 10_000, p, atol=0.02)

    def test_seeded(self):
        scores = np.arange(6.0)
        a = indices(pl.reduce_stochastic(labelled_scene(6), scores, 3, 1.0, 42))
        b = indices(pl.reduce_stochastic(labelled_scene(6), scores, 3, 1.0, 42))
        assert a == b


class TestAdd:
    def test_count_on_perfect_fit(self, rng):
        scene = make_scene(rng, 2)
        target = render(scene)
        out = pl.add_shapes(scene, target, 3)
        assert len(out.shapes) == 5
        assert len(scene.shapes) == 2

    def test_blob(self):
        scene = Scene([], 64, 64)
        px = np.ones((64, 64, 3))
        px[40:46, 10:16] = (0, 0.5, 0)
        out = pl.add_shapes(scene, RasterImage(px), 1)
        center = out.shapes[0].points.mean(axis=0)
        assert 10 - 7 <= center[0] <= 16 + 7 and 40 - 7 <= center[1] <= 46 + 7
        assert np.allclose(out.shapes[0].color, (0, 0.5, 0, 1))
        assert np.linalg.norm(out.shapes[0].points[0] - center) == pytest.approx(pl.ADD_RADIUS)

    def test_suppression_separates_peaks(self):
        px = np.ones((64, 64, 3))
        px[20:30, 20:30] = 0
        px[50, 50] = 0.5
        out = pl.add_shapes(Scene([], 64, 64), RasterImage(px), 2)
        c0, c1 = (s.points.mean(axis=0) for s in out.shapes)
        assert np.max(np.abs(c0 - c1)) > pl.ADD_WINDOW // 2

    def test_rejects_zero(self, rng):
        with pytest.raises(ValueError):
            pl.add_shapes(make_scene(rng), RasterImage(np.ones((32, 32, 3))), 0)


def small_cfg(**kw):
    base = dict(width=32, height=32, shapes=4, total_iters=40, min_iters=5, max_iters=40)
    base.update(kw)
    return RunConfig(**base)


class TestRun:
    def test_single_phase(self):
        scene, records = pl.run_oandr(three_disks(32), small_cfg(schedule=(4,)))
        assert len(records) == 1 and len(scene.shapes) == 4
        assert records[0].iterations <= 40

    def test_three_phases(self):
        phases = []
        scene, records = pl.run_oandr(three_disks(32), small_cfg(schedule=(16, 8, 4)),
                                      on_phase=lambda rec, sc: phases.append(len(sc.shapes)))
        assert phases == [16, 8, 4] == [r.shapes for r in records]
        assert len(scene.shapes) == 4
        assert sum(r.iterations for r in records) <= 40

    def test_add_schedule(self):
        cfg = small_cfg(schedule=(8, 4, 2), adds=((2, 2),))
        assert cfg.full_schedule() == [8, 4, 2, 4]
        _, records = pl.run_oandr(three_disks(32), cfg)
        assert [r.shapes for r in records] == [8, 4, 2, 4]

    def test_stochastic_mode(self):
        _, records = pl.run_oandr(three_disks(32), small_cfg(schedule=(8, 4), reduce="stoch", temperature=0.5))
        assert [r.shapes for r in records] == [8, 4]

    def test_deterministic(self):
        cfg = small_cfg(schedule=(8, 4))
        a, ra = pl.run_oandr(three_disks(32), cfg)
        b, rb = pl.run_oandr(three_disks(32), cfg)
        assert [r.mse for r in ra] == [r.mse for r in rb]
        assert all(np.array_equal(p.points, q.points) for p, q in zip(a.shapes, b.shapes))

    def test_metrics(self):
        target = three_disks(32)
        scene, records = pl.run_oandr(target, small_cfg(schedule=(6, 3)))
        rec = records[-1]
        img = render(scene).pixels
        assert rec.mse == pytest.approx(np.mean((img - target.pixels) ** 2), rel=1e-12)
        assert rec.mse_gray2 == pytest.approx(rec.mse * 255**2)
        assert rec.l1 == pytest.approx(np.mean(np.abs(img - target.pixels)), rel=1e-12)

    def test_canvas_mismatch(self):
        with pytest.raises(ValueError):
            pl.run_oandr(three_disks(16), small_cfg())

    def test_direct_baseline(self):
        scene, records = pl.optimize_direct(three_disks(32), small_cfg())
        assert len(scene.shapes) == 4 and len(records) == 1


def shifted_disk(dx, size=32):
    yy, xx = np.mgrid[:size, :size] + 0.5
    px = np.ones((size, size, 3))
    px[np.hypot(xx - 14 - dx, yy - 16) < 7] = (0.2, 0.3, 0.9)
    return RasterImage(px)


class TestInterpolate:
    def test_two_frames(self):
        cfg = small_cfg(schedule=(4, 2))
        frames = pl.interpolate(shifted_disk(0), shifted_disk(4), cfg, 2)
        start, _ = pl.run_oandr(shifted_disk(0), cfg)
        assert len(frames) == 2
        assert all(np.array_equal(a.points, b.points) for a, b in zip(frames[0].shapes, start.shapes))

    def test_identical_images(self):
        img = shifted_disk(0)
        frames = pl.interpolate(img, img, small_cfg(schedule=(4, 2)), 4)
        ref = render(frames[0]).pixels
        for f in frames:
            assert np.mean((render(f).pixels - ref) ** 2) <= 1e-6

    def test_frames_approach_target(self):
        target = shifted_disk(5)
        frames = pl.interpolate(shifted_disk(0), target, small_cfg(schedule=(4, 2), total_iters=80, max_iters=80,
                                                                    min_iters=80, loss="mse", lambda_geom=0.0), 5)
        errs = [np.mean((render(f).pixels - target.pixels) ** 2) for f in frames]
        assert errs == sorted(errs, reverse=True)
        assert errs[-1] < errs[0]

    def test_errors(self):
        cfg = small_cfg(schedule=(4,))
        with pytest.raises(ValueError):
            pl.interpolate(shifted_disk(0), shifted_disk(0, 16), cfg, 3)
        with pytest.raises(ValueError):
            pl.interpolate(shifted_disk(0), shifted_disk(1), cfg, 1)
