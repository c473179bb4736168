"""Photometric losses, their gradients and the trajectory-level meta losses."""
from __future__ import annotations

import unittest

import numpy as np

from core.errors import ConfigurationError, ShapeError
from losses.image import d_ssim, inner_loss, l1, psnr, ssim
from losses.meta import (
    low_visibility_grad,
    low_visibility_loss,
    low_visibility_mask,
    meta_loss,
    render_loss,
    render_loss_and_grads,
    stability_loss,
    stability_loss_and_grads,
)
from losses.report import ImageLoss
from losses.scene import scene_gradient
from render.rasterizer import render
from render.settings import RenderSettings
from scene.gaussians import GaussianCloud
from tests.helpers import central_difference, gradient_mismatch, micro_scene


def no_perceptual(reference: np.ndarray, rendered: np.ndarray) -> ImageLoss:
    return ImageLoss(0.0, np.zeros_like(rendered, dtype=np.float64))


def flat(value: float, size: int = 4) -> np.ndarray:
    return np.full((size, size, 3), value)


class ImageLossTests(unittest.TestCase):
    def setUp(self) -> None:
        rng = np.random.default_rng(0)
        self.reference = rng.uniform(size=(8, 8, 3))
        self.rendered = rng.uniform(size=(8, 8, 3))

    def test_l1_value_and_gradient(self) -> None:
        loss = l1(flat(0.2), flat(0.5))

        self.assertAlmostEqual(loss.value, 0.3)
        np.testing.assert_allclose(loss.grad, np.full((4, 4, 3), 1.0 / 48))

    def test_ssim_of_identical_images_is_one(self) -> None:
        self.assertAlmostEqual(ssim(self.reference, self.reference), 1.0, places=10)
        self.assertAlmostEqual(d_ssim(self.reference, self.reference).value, 0.0, places=10)
        self.assertLess(ssim(self.reference, self.rendered), 1.0)

    def test_psnr_known_value_and_cap(self) -> None:
        self.assertAlmostEqual(psnr(flat(0.0), flat(0.5)), 6.0206, places=4)
        self.assertEqual(psnr(self.reference, self.reference), 99.0)
        self.assertEqual(psnr(self.reference, self.reference, cap=50.0), 50.0)

    def test_shape_mismatch_is_rejected(self) -> None:
        for fn in (l1, d_ssim, psnr, ssim):
            with self.assertRaises(ShapeError):
                fn(flat(0.0, 4), flat(0.0, 5))

    def test_d_ssim_gradient_matches_finite_differences(self) -> None:
        shape = self.rendered.shape
        analytic = d_ssim(self.reference, self.rendered).grad
        numeric = central_difference(lambda x: d_ssim(self.reference, x.reshape(shape)).value, self.rendered)

        self.assertEqual(len(gradient_mismatch(analytic, numeric, rtol=1e-4, atol=1e-9)), 0)

    def test_d_ssim_against_the_negative_image(self) -> None:
        rows, cols = np.meshgrid(np.arange(8.0), np.arange(8.0), indexing="ij")
        ramp = 0.005 * (rows + cols)[..., None] + np.array([0.2, 0.4, 0.7])
        for reference in (ramp, self.reference):
            negative = 1.0 - reference
            loss = d_ssim(reference, negative)
            numeric = central_difference(lambda x: d_ssim(reference, x.reshape(negative.shape)).value, negative)

            self.assertEqual(len(gradient_mismatch(loss.grad, numeric, rtol=1e-4, atol=1e-9)), 0)
            self.assertGreater(loss.value, 0.0)
            self.assertLessEqual(loss.value, 1.0)

        # low local contrast keeps SSIM non-negative; textured noise turns it negative
        self.assertLessEqual(d_ssim(ramp, 1.0 - ramp).value, 0.5)
        self.assertGreater(d_ssim(self.reference, 1.0 - self.reference).value, 0.5)

    def test_d_ssim_of_constant_images_is_the_luminance_term(self) -> None:
        a, b = 0.2, 0.8
        luminance = (2.0 * a * b + 0.01**2) / (a * a + b * b + 0.01**2)

        self.assertAlmostEqual(d_ssim(flat(a), flat(b)).value, 0.5 * (1.0 - luminance), places=10)

    def test_inner_loss_weights_and_gradient(self) -> None:
        shape = self.rendered.shape
        report = inner_loss(self.reference, self.rendered)

        expected = 0.8 * l1(self.reference, self.rendered).value + 0.2 * d_ssim(self.reference, self.rendered).value
        self.assertAlmostEqual(report.value, expected, places=12)
        self.assertEqual(report.weights, {"l1": 0.8, "d_ssim": 0.2})
        numeric = central_difference(lambda x: inner_loss(self.reference, x.reshape(shape)).value, self.rendered)
        self.assertEqual(len(gradient_mismatch(report.grad, numeric, rtol=1e-4, atol=1e-9)), 0)

    def test_inner_loss_accepts_a_perceptual_replacement(self) -> None:
        report = inner_loss(flat(0.0), flat(0.25), perceptual=no_perceptual)

        self.assertAlmostEqual(report.value, 0.8 * 0.25)
        self.assertEqual(report.terms["d_ssim"], 0.0)


class TrajectoryLossTests(unittest.TestCase):
    def test_render_loss_discounts_earlier_steps(self) -> None:
        diffs = (0.4, 0.2, 0.1)
        trajectory = [[(flat(0.0), flat(d))] for d in diffs]

        result = render_loss_and_grads(trajectory, gamma=0.5, perceptual=no_perceptual)

        self.assertAlmostEqual(result.value, 0.25 * 0.4 + 0.5 * 0.2 + 0.1)
        np.testing.assert_allclose(result.per_step, diffs)
        np.testing.assert_allclose(result.grads[0][0], np.full((4, 4, 3), 0.25 / 48))
        np.testing.assert_allclose(result.grads[2][0], np.full((4, 4, 3), 1.0 / 48))

    def test_render_loss_averages_views_within_a_step(self) -> None:
        trajectory = [[(flat(0.0), flat(0.2)), (flat(0.0), flat(0.6))]]

        value = render_loss(trajectory, gamma=0.9, perceptual=no_perceptual)

        self.assertAlmostEqual(value, 0.4)

    def test_render_loss_includes_half_the_perceptual_term(self) -> None:
        rng = np.random.default_rng(1)
        reference, rendered = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))

        value = render_loss([[(reference, rendered)]])

        expected = l1(reference, rendered).value + 0.5 * d_ssim(reference, rendered).value
        self.assertAlmostEqual(value, expected, places=12)

    def test_empty_trajectories_are_rejected(self) -> None:
        with self.assertRaises(ConfigurationError):
            render_loss([])
        with self.assertRaises(ConfigurationError):
            render_loss([[]])

    def test_low_visibility_mask_and_values(self) -> None:
        updates = np.array([0.5, -0.2, 0.3, 0.1, 0.0])
        raw = np.array([1e-9, 1.0, 1.0, 1.0, 1.0])
        adam = np.array([1.0, 1.0, -1.0, 1.0, -1.0])

        np.testing.assert_array_equal(low_visibility_mask(updates, raw, adam), [True, True, True, False, False])
        self.assertAlmostEqual(low_visibility_loss(updates, raw, adam), 1.0)
        np.testing.assert_array_equal(low_visibility_grad(updates, raw, adam), [1.0, -1.0, 1.0, 0.0, 0.0])

    def test_low_visibility_needs_matching_shapes(self) -> None:
        with self.assertRaises(ShapeError):
            low_visibility_loss(np.zeros(3), np.zeros(4), np.zeros(3))

    def test_stability_penalises_only_increases(self) -> None:
        value, grads = stability_loss_and_grads([1.0, 0.8, 0.9, 0.95, 0.5])

        self.assertAlmostEqual(value, 0.15)
        np.testing.assert_array_equal(grads, [0.0, 0.0, 1.0, 1.0, 0.0])
        self.assertEqual(stability_loss([0.9, 0.7, 0.3]), 0.0)
        self.assertEqual(stability_loss([0.4]), 0.0)

    def test_meta_loss_is_an_unweighted_sum(self) -> None:
        report = meta_loss(0.5, 0.25, 0.125)

        self.assertAlmostEqual(report.value, 0.875)
        self.assertEqual(set(report.terms), {"render", "lvs", "stability"})


class SceneGradientTests(unittest.TestCase):
    settings = RenderSettings(dtype="float64", alpha_min=1e-12)

    def test_loss_is_the_view_mean_and_gradient_is_a_directional_derivative(self) -> None:
        scene = micro_scene(seed=3)
        cloud, views = scene.initial_cloud, scene.context_views
        result = scene_gradient(cloud, views, self.settings)

        expected = np.mean([inner_loss(v.image, render(cloud, v, self.settings).rgb).value for v in views])
        self.assertAlmostEqual(result.loss, float(expected), places=12)
        self.assertEqual(len(result.renders), len(views))

        direction = np.random.default_rng(4).normal(size=cloud.params.shape)
        h = 1e-6

        def loss_at(step: float) -> float:
            moved = GaussianCloud(cloud.params + step * direction)
            return scene_gradient(moved, views, self.settings).loss

        numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h)
        analytic = float((result.grads * direction).sum())
        self.assertAlmostEqual(analytic, numeric, delta=1e-3 * abs(numeric) + 1e-7)

    def test_needs_at_least_one_view(self) -> None:
        scene = micro_scene(seed=0)
        with self.assertRaises(ConfigurationError):
            scene_gradient(scene.initial_cloud, [])


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
