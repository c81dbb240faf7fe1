import numpy as np
import pytest

from vectorforge import raster
from vectorforge.geometry import Scene, Shape, circle_shape
from vectorforge.raster import RasterImage, coverage_layers, render, render_with_gradients, render_without

from conftest import central_difference, grad_close, make_scene


def square(x0, y0, x1, y1, color):
    return Shape.from_segments([
        ((x0, y0), (x1, y0), (x1, y0), (x1, y0)),
        ((x1, y0), (x1, y1), (x1, y1), (x1, y1)),
        ((x1, y1), (x0, y1), (x0, y1), (x0, y1)),
        ((x0, y1), (x0, y0), (x0, y0), (x0, y0)),
    ], color)


def mse_grad(img, target):
    return 2.0 * (img - target) / img.size


class TestRender:
    def test_empty_scene_is_background(self):
        img = render(Scene([], 8, 6, (1, 1, 1)))
        assert img.pixels.shape == (6, 8, 3)
        assert np.all(img.pixels == 1.0)

    def test_full_canvas_opaque(self):
        img = render(Scene([square(-10, -10, 30, 30, (1, 0, 0, 1))], 20, 20))
        assert np.allclose(img.pixels, (1, 0, 0), atol=1e-3)

    def test_later_shape_wins_overlap(self):
        a = square(2, 2, 12, 12, (1, 0, 0, 1))
        b = square(6, 6, 18, 18, (0, 0, 1, 1))
        img = render(Scene([a, b], 20, 20))
        assert np.allclose(img.pixels[9, 9], (0, 0, 1))
        img = render(Scene([b, a], 20, 20))
        assert np.allclose(img.pixels[9, 9], (1, 0, 0))

    def test_empty_canvas_rejected(self):
        with pytest.raises(ValueError, match="empty canvas"):
            render(Scene([], 0, 0))
        with pytest.raises(ValueError, match="empty canvas"):
            RasterImage(np.zeros((0, 4, 3)))

    def test_values_in_unit_interval(self, rng):
        img = render(make_scene(rng, 6)).pixels
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_off_canvas_shape(self):
        scene = Scene([circle_shape((-50, -50), 5, color=(0, 0, 0, 1))], 10, 10)
        assert np.all(render(scene).pixels == 1.0)


class TestCoverage:
    def test_bounds_and_saturation(self):
        r, c = 10.0, np.array([16.0, 16.0])
        layer = coverage_layers(Scene([circle_shape(c, r)], 32, 32))[0]
        assert layer.cov.min() >= 0.0 and layer.cov.max() <= 1.0
        ys, xs = np.mgrid[layer.window[0], layer.window[1]]
        dist = np.hypot(xs + 0.5 - c[0], ys + 0.5 - c[1]) - r
        band = 5 * raster.SIGMA + 0.1  # plus flattening sag
        assert np.all(layer.cov[dist <= -band] == 1.0)
        assert np.all(layer.cov[dist >= band] == 0.0)
        edge = np.abs(dist) < 0.05
        assert np.allclose(layer.cov[edge], 0.5, atol=0.1)

    def test_nonzero_winding_overlap_is_inside(self):
        # same square traced twice: winding 2 stays inside
        sq = square(4, 4, 16, 16, (0, 0, 0, 1))
        doubled = Shape(np.vstack([sq.points, sq.points]), (0, 0, 0, 1))
        img = render(Scene([doubled], 20, 20)).pixels
        assert np.allclose(img[10, 10], 0.0)


class TestCompositing:
    def test_associativity_with_background(self, rng):
        scene = make_scene(rng, 2)
        lower = render(Scene(scene.shapes[:1], 32, 32, scene.background)).pixels
        layer = coverage_layers(scene)[1]
        top = scene.shapes[1]
        expected = lower.copy()
        win = layer.window
        a = (layer.cov * top.color[3])[..., None]
        expected[win] = a * top.color[:3] + (1 - a) * lower[win]
        assert np.allclose(render(scene).pixels, expected, atol=1e-12, rtol=0)

    def test_determinism_across_threads(self, rng, monkeypatch):
        scene = make_scene(rng, 8, size=48)
        target = rng.uniform(0, 1, (48, 48, 3))
        monkeypatch.setenv("VECTORFORGE_THREADS", "1")
        img1 = render(scene).pixels
        g1 = render_with_gradients(scene, mse_grad(img1, target))
        monkeypatch.setenv("VECTORFORGE_THREADS", "4")
        img4 = render(scene).pixels
        g4 = render_with_gradients(scene, mse_grad(img4, target))
        assert np.array_equal(img1, img4)
        for a, b in zip(g1, g4):
            assert np.array_equal(a.points, b.points) and np.array_equal(a.color, b.color)


class TestRenderWithout:
    def test_single_shape_leaves_background(self):
        scene = Scene([circle_shape((5, 5), 3, color=(0, 0, 0, 1))], 10, 10, (0.2, 0.4, 0.6))
        assert np.allclose(render_without(scene, 0).pixels, (0.2, 0.4, 0.6))

    def test_occluded_bottom_shape(self):
        bottom = circle_shape((10, 10), 3, color=(1, 0, 0, 1))
        top = square(-5, -5, 25, 25, (0, 1, 0, 1))
        scene = Scene([bottom, top], 20, 20)
        assert np.max(np.abs(render_without(scene, 0).pixels - render(scene).pixels)) <= 1e-9

    def test_matches_naive_rerender(self, rng):
        for _ in range(10):
            scene = make_scene(rng, 5)
            for i in range(5):
                assert np.array_equal(render_without(scene, i).pixels, render(scene.without(i)).pixels)
            for i, img in raster.renders_without_each(scene):
                assert np.array_equal(img.pixels, render(scene.without(i)).pixels)

    def test_index_out_of_range(self, rng):
        with pytest.raises(IndexError):
            render_without(make_scene(rng, 2), 2)


class TestGradients:
    def test_zero_upstream(self, rng):
        scene = make_scene(rng)
        grads = render_with_gradients(scene, np.zeros((32, 32, 3)))
        assert all(not g.points.any() and not g.color.any() for g in grads)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            render_with_gradients(make_scene(rng), np.zeros((31, 32, 3)))

    def test_translation_points_against_shift(self):
        shape = circle_shape((16, 16), 7, color=(0.1, 0.2, 0.8, 1))
        shift = np.array([1.5, -1.0])
        moved = shape.copy()
        moved.points += shift
        target = render(Scene([moved], 32, 32)).pixels
        scene = Scene([shape], 32, 32)
        img = render(scene).pixels
        g = render_with_gradients(scene, mse_grad(img, target))[0]
        assert g.points.sum(axis=0) @ shift < 0

    def test_color_gradient_full_canvas(self, rng):
        scene = Scene([square(-10, -10, 30, 30, (0.3, 0.6, 0.9, 1))], 16, 16)
        target = rng.uniform(0, 1, (16, 16, 3))
        img = render(scene).pixels
        g = render_with_gradients(scene, mse_grad(img, target))[0]
        expected = 2 * np.mean(img - target, axis=(0, 1)) / 3  # mean over channels too
        assert np.allclose(g.color[:3], expected, rtol=1e-9, atol=1e-15)

        def loss():
            return np.mean((render(scene).pixels - target) ** 2)
        for c in range(3):
            num = central_difference(loss, scene.shapes[0].color, c, 1e-4)
            assert num == pytest.approx(g.color[c], rel=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        scene = make_scene(rng)
        target = rng.uniform(0, 1, (32, 32, 3))

        def loss():
            return np.mean((render(scene).pixels - target) ** 2)

        grads = render_with_gradients(scene, mse_grad(render(scene).pixels, target))
        # small step: the distance field has kinks on its medial axis
        for shape, g in zip(scene.shapes, grads):
            for idx in np.ndindex(shape.points.shape):
                num = central_difference(loss, shape.points, idx, 1e-4)
                assert grad_close(g.points[idx], num), (idx, g.points[idx], num)
            for c in range(4):
                num = central_difference(loss, shape.color, c, 1e-4)
                assert grad_close(g.color[c], num), (c, g.color[c], num)

    def test_gradient_set_structure(self, rng):
        scene = make_scene(rng, 4)
        grads = render_with_gradients(scene, np.ones((32, 32, 3)))
        assert len(grads) == 4
        assert all(g.points.shape == s.points.shape and g.color.shape == (4,) for g, s in zip(grads, scene.shapes))
        assert grads.is_finite()
