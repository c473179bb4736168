"""Run settings, per-scene runs, comparisons and the command-line surface."""
from __future__ import annotations

import csv
import logging
import pathlib
import tempfile
import unittest
from unittest import mock

import numpy as np
import yaml

import run_l2s
from config.files import FileConfig, load_config_file, parse_config
from config.settings import AppConfig
from core.errors import ConfigurationError
from harness.commands import make_optimizer
from harness.compare import MeanCurve, Method, compare, mean_curve, threshold_crossing, threshold_table, write_comparison
from harness.context import AppContext, LoadedModel, build_optimizer_registry
from harness.plots import plot_comparison
from harness.run_config import RunConfig
from harness.runner import BASE_COLUMNS, RunResult, optimize_scene, run_optimization, swap_study, write_rows
from l2s.model import init_model
from l2s.model_file import save_trained_model
from l2s.scene_optimizer import LearnedOptimizer
from losses.scene import scene_gradient
from optim.adam import AdamState, adam_displacement
from optim.groups import optimizer_preset, preset_3dgs
from optim.scene_optimizers import AdamOptimizer, SGDOptimizer
from tests.helpers import micro_scene, tiny_config

MICRO_SCENE_SECTION = {
    "n_gaussians": 3,
    "n_context": 2,
    "n_target": 1,
    "image_size": [16, 16],
    "camera_arc": {"radius": 2.0, "elevation_deg": 15.0},
    "focal_scale": 1.5,
}


class RunConfigTests(unittest.TestCase):
    def test_evaluation_points(self) -> None:
        self.assertEqual(RunConfig(iterations=30, cadence=(1, 2, 10, 50)).evaluation_points, (0, 1, 2, 10, 30))
        self.assertEqual(RunConfig(iterations=0).evaluation_points, (0,))

    def test_update_mask(self) -> None:
        only = RunConfig(only=("sh0",)).update_mask()
        frozen = RunConfig(freeze=("means",)).update_mask()

        self.assertEqual(int(only.sum()), 3)
        self.assertTrue(only[11:14].all())
        self.assertFalse(frozen[0:3].any())
        self.assertTrue(frozen[3:].all())

    def test_invalid_settings(self) -> None:
        with self.assertRaises(ConfigurationError):
            RunConfig(freeze=("means",), only=("sh0",))
        with self.assertRaises(ConfigurationError):
            RunConfig(optimizer="lbfgs")
        with self.assertRaises(ConfigurationError):
            RunConfig(cadence=(1, 4, 4))
        with self.assertRaises(ConfigurationError):
            RunConfig(iterations=-1)
        with self.assertRaises(ConfigurationError):
            RunConfig(only=("colours",))
        with self.assertRaises(ConfigurationError):
            RunConfig.from_mapping({"iterations": 5, "learning_rate": 1.0})


class RunnerTests(unittest.TestCase):
    def setUp(self) -> None:
        self.scene = micro_scene(seed=0)

    def test_zero_iterations_only_scores_the_initial_cloud(self) -> None:
        result = run_optimization(self.scene, RunConfig(iterations=0), lambda cloud, grads, i: grads)

        self.assertEqual(len(result.rows), 1)
        self.assertEqual(result.rows[0]["iter"], 0)
        self.assertEqual(result.rows[0]["wall_ms"], 0.0)
        self.assertEqual(result.final_cloud, self.scene.initial_cloud)
        self.assertEqual(result.columns, BASE_COLUMNS)

    def test_rows_follow_the_cadence(self) -> None:
        run = RunConfig(optimizer="sgd", iterations=4, cadence=(1, 2), sgd_lr=1e-2)

        result = optimize_scene(self.scene, run, SGDOptimizer(run.sgd_lr))

        np.testing.assert_array_equal(result.series("iter"), [0, 1, 2, 4])
        self.assertTrue(np.all(np.diff(result.series("wall_ms")) >= 0))
        self.assertIn("update_norm_means", result.columns)
        self.assertIn("loss", result.columns)

    def test_only_the_unlocked_group_moves(self) -> None:
        run = RunConfig(optimizer="sgd", iterations=2, cadence=(1,), only=("sh0",), sgd_lr=1e-2)

        result = optimize_scene(self.scene, run, SGDOptimizer(run.sgd_lr))

        before, after = self.scene.initial_cloud.params, result.final_cloud.params
        np.testing.assert_array_equal(after[:, :11], before[:, :11])
        np.testing.assert_array_equal(after[:, 14:], before[:, 14:])
        self.assertFalse(np.array_equal(after[:, 11:14], before[:, 11:14]))

    def test_first_sgd_step_matches_the_scene_gradient(self) -> None:
        run = RunConfig(optimizer="sgd", iterations=1, sgd_lr=0.05)

        result = optimize_scene(self.scene, run, SGDOptimizer(run.sgd_lr))

        grads = scene_gradient(self.scene.initial_cloud, self.scene.context_views).grads
        np.testing.assert_allclose(result.final_cloud.params, self.scene.initial_cloud.params - 0.05 * grads, rtol=1e-9)

    def test_per_term_losses_add_columns(self) -> None:
        run = RunConfig(optimizer="sgd", iterations=1, per_term_losses=True)

        result = optimize_scene(self.scene, run, SGDOptimizer())

        self.assertIn("l1_target", result.rows[-1])
        self.assertIn("dssim_target", result.columns)

    def test_swap_study_takes_one_group_from_the_source(self) -> None:
        run = RunConfig(iterations=1)
        cloud = self.scene.initial_cloud

        result = swap_study(self.scene, run, "means", SGDOptimizer(0.05), AdamOptimizer(preset="3dgs"))

        grads = scene_gradient(cloud, self.scene.context_views).grads
        adam_delta, _ = adam_displacement(grads, AdamState.zeros(len(cloud)), preset_3dgs())
        after = result.final_cloud.params
        np.testing.assert_allclose(after[:, 0:3], cloud.params[:, 0:3] - 0.05 * grads[:, 0:3], rtol=1e-9)
        np.testing.assert_allclose(after[:, 3:], cloud.params[:, 3:] - adam_delta[:, 3:], rtol=1e-9)
        self.assertEqual(result.label, "adam-3dgs+sgd:means")

    def test_write_rows(self) -> None:
        result = optimize_scene(self.scene, RunConfig(optimizer="sgd", iterations=2, cadence=(1,)), SGDOptimizer())
        with tempfile.TemporaryDirectory() as tmp:
            path = write_rows(pathlib.Path(tmp) / "nested" / "metrics.csv", result)
            with path.open(encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))

        self.assertEqual([row["iter"] for row in rows], ["0", "1", "2"])
        self.assertEqual(rows[0]["update_norm_means"], "")


def curve(label: str, iters, psnrs, wall=None) -> MeanCurve:
    iters = np.asarray(iters, dtype=np.float64)
    wall = np.asarray(wall if wall is not None else iters * 10.0, dtype=np.float64)
    metrics = {"psnr_target": np.asarray(psnrs, dtype=np.float64)}
    return MeanCurve(label, iters, wall, metrics)


class ThresholdTests(unittest.TestCase):
    def test_crossing_interpolates_linearly(self) -> None:
        self.assertAlmostEqual(threshold_crossing([0, 50, 150], [10, 15, 25], 20.0), 100.0)
        self.assertEqual(threshold_crossing([0, 50, 150], [10, 15, 25], 5.0), 0.0)
        self.assertIsNone(threshold_crossing([0, 50, 150], [10, 15, 25], 30.0))

    def test_table_uses_the_reference_gain(self) -> None:
        curves = {
            "adam": curve("adam", [0, 50, 150], [10, 15, 25]),
            "slow": curve("slow", [0, 50, 150], [10, 12, 14]),
        }

        table = threshold_table(curves, "adam", percents=(50, 100))
        timed = threshold_table(curves, "adam", axis="wall_ms", percents=(50,))

        self.assertAlmostEqual(table["adam"][50], 75.0)
        self.assertAlmostEqual(table["adam"][100], 150.0)
        self.assertIsNone(table["slow"][50])
        self.assertAlmostEqual(timed["adam"][50], 750.0)

    def test_unknown_reference(self) -> None:
        with self.assertRaises(ConfigurationError):
            threshold_table({"adam": curve("adam", [0, 1], [1, 2])}, "sgd")

    def test_mean_curve_needs_matching_iterations(self) -> None:
        cloud = micro_scene(seed=0).initial_cloud
        row = dict.fromkeys(BASE_COLUMNS, 1.0)
        first = RunResult("a", "m", [{**row, "iter": 0}, {**row, "iter": 1}], cloud)
        second = RunResult("b", "m", [{**row, "iter": 0}, {**row, "iter": 2}], cloud)

        with self.assertRaises(ConfigurationError):
            mean_curve("m", [first, second])
        self.assertEqual(mean_curve("m", [first, first]).metrics["psnr_target"].tolist(), [1.0, 1.0])


class CompareTests(unittest.TestCase):
    def test_compare_writes_tables_and_plots(self) -> None:
        scenes = [micro_scene(seed=0), micro_scene(seed=1)]
        base = RunConfig(iterations=2, cadence=(1,), snapshots=False)
        methods = [
            Method("sgd", RunConfig(optimizer="sgd", iterations=2, cadence=(1,)), lambda: SGDOptimizer(1e-2)),
            Method("adam-3dgs", base, lambda: AdamOptimizer(preset="3dgs")),
        ]

        comparison = compare(scenes, methods, reference="adam-3dgs", threads=2)

        self.assertEqual([r.scene_id for r in comparison.results["sgd"]], [s.scene_id for s in scenes])
        np.testing.assert_array_equal(comparison.curves["adam-3dgs"].iters, [0, 1, 2])
        self.assertIsNotNone(comparison.thresholds_iter["adam-3dgs"][100])
        with tempfile.TemporaryDirectory() as tmp:
            written = write_comparison(comparison, tmp) + plot_comparison(comparison.curves, tmp)
            names = sorted(path.name for path in written)
            with (pathlib.Path(tmp) / "thresholds_iter.csv").open(encoding="utf-8") as handle:
                header = next(csv.reader(handle))
            with (pathlib.Path(tmp) / "compare_curves.csv").open(encoding="utf-8") as handle:
                curve_rows = list(csv.DictReader(handle))

        self.assertEqual(
            names,
            ["compare_curves.csv", "psnr_iter.png", "psnr_time.png", "thresholds_iter.csv", "thresholds_time.csv"],
        )
        self.assertEqual(header, ["method", "p25", "p50", "p75", "p90", "p100"])
        self.assertEqual(len(curve_rows), 6)

    def test_compare_needs_scenes_and_methods(self) -> None:
        with self.assertRaises(ConfigurationError):
            compare([], [], reference="sgd")


class RegistryTests(unittest.TestCase):
    def setUp(self) -> None:
        self.registry = build_optimizer_registry()

    def test_every_cli_optimizer_is_registered(self) -> None:
        self.assertEqual(self.registry.names(), ["adam-3dgs", "adam-3dgs-star", "l2s", "lo-baseline", "sgd"])

    def test_hand_designed_optimizers(self) -> None:
        sgd = self.registry.create("sgd", run=RunConfig(sgd_lr=0.5))
        star = self.registry.create("adam-3dgs-star", run=RunConfig())

        self.assertEqual(sgd.lr, 0.5)
        self.assertEqual(star.config.betas, (0.99, 0.999))

    def test_learned_optimizers_need_a_matching_model(self) -> None:
        config = tiny_config()
        model = LoadedModel(init_model(config, 0), config)

        with self.assertRaises(ConfigurationError):
            self.registry.create("l2s", run=RunConfig())
        with self.assertRaises(ConfigurationError):
            self.registry.create("lo-baseline", run=RunConfig(), model=model)
        self.assertIsInstance(self.registry.create("l2s", run=RunConfig(), model=model), LearnedOptimizer)


class ConfigFileTests(unittest.TestCase):
    def test_defaults_without_a_file(self) -> None:
        files = load_config_file(None)

        self.assertIsInstance(files, FileConfig)
        self.assertIsNone(files.optimizer)
        self.assertEqual(files.run, RunConfig())

    def test_sections_layer_over_defaults(self) -> None:
        files = parse_config(
            {
                "run": {"optimizer": "sgd", "iterations": 7},
                "optimizer": {"preset": "3dgs-star", "lrs": {"means": 1e-3}},
                "scene": MICRO_SCENE_SECTION,
            }
        )

        self.assertEqual(files.run.iterations, 7)
        self.assertEqual(files.optimizer.lrs["means"], 1e-3)
        self.assertEqual(files.optimizer.betas, (0.99, 0.999))
        self.assertEqual(files.scene.image_size, (16, 16))
        self.assertEqual(files.scene.camera_arc.radius, 2.0)

    def test_optimizer_section_keeps_each_adam_preset(self) -> None:
        config = AppConfig(seed=0, threads=1, log_level="INFO", log_file=None, deterministic=True, output_dir=pathlib.Path("."))
        context = AppContext(config, logging.getLogger("L2S"), build_optimizer_registry())

        def built(files: FileConfig, name: str) -> AdamOptimizer:
            return make_optimizer(context, RunConfig(optimizer=name, adam_total_steps=100), files, {})

        overrides = parse_config({"optimizer": {"eps": 1e-12}})
        plain, star = built(overrides, "adam-3dgs"), built(overrides, "adam-3dgs-star")
        self.assertNotEqual(plain.config, star.config)
        self.assertEqual((plain.config.betas, plain.config.means_decay), ((0.9, 0.999), True))
        self.assertEqual((star.config.betas, star.config.means_decay), ((0.99, 0.999), False))
        self.assertEqual((plain.config.eps, star.config.eps), (1e-12, 1e-12))
        self.assertEqual(plain.config.means_lr_steps, 100)

        named = parse_config({"optimizer": {"preset": "3dgs", "lrs": {"means": 1e-3}}})
        plain, star = built(named, "adam-3dgs"), built(named, "adam-3dgs-star")
        self.assertEqual(plain.config.lrs["means"], 1e-3)
        self.assertEqual(star.config, optimizer_preset("3dgs-star", 100))
        self.assertEqual((plain.name, star.name), ("adam-3dgs", "adam-3dgs-star"))

    def test_unknown_keys_and_sections(self) -> None:
        with self.assertRaises(ConfigurationError):
            parse_config({"renderer": {}})
        with self.assertRaises(ConfigurationError):
            parse_config({"scene": {"n_points": 3}})
        with self.assertRaises(ConfigurationError):
            parse_config({"optimizer": {"momentum": 0.9}})
        with self.assertRaises(ConfigurationError):
            parse_config(["run"])

    def test_unreadable_and_malformed_files(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            broken = pathlib.Path(tmp) / "broken.yaml"
            broken.write_text("run: [unclosed", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_config_file(broken)
            with self.assertRaises(ConfigurationError):
                load_config_file(pathlib.Path(tmp) / "absent.yaml")


class CommandLineTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self._tmp.name)
        self.config_path = self.root / "config.yaml"
        self.config_path.write_text(yaml.safe_dump({"scene": MICRO_SCENE_SECTION}), encoding="utf-8")
        context = AppContext(
            AppConfig(seed=0, threads=1, log_level="INFO", log_file=None, deterministic=True, output_dir=self.root),
            logging.getLogger("L2S"),
            build_optimizer_registry(),
        )
        patcher = mock.patch.object(run_l2s, "get_app_context", return_value=context)
        patcher.start()
        self.addCleanup(patcher.stop)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def run_cli(self, *argv: str) -> int:
        with self.assertLogs("L2S", level="INFO"):
            return run_l2s.main(["--config", str(self.config_path), *argv])

    def generate(self) -> pathlib.Path:
        self.assertEqual(self.run_cli("gen", "--out", str(self.root / "scenes")), run_l2s.EXIT_OK)
        return self.root / "scenes" / "synthetic_000000"

    def test_gen_writes_a_scene_container(self) -> None:
        scene_dir = self.generate()

        self.assertTrue((scene_dir / "scene.json").is_file())

    def test_optimize_writes_metrics_and_snapshots(self) -> None:
        scene_dir = self.generate()
        out = self.root / "run"

        code = self.run_cli(
            "optimize", "--scene", str(scene_dir), "--out", str(out),
            "--optimizer", "sgd", "--iterations", "2", "--cadence", "1",
        )

        self.assertEqual(code, run_l2s.EXIT_OK)
        with (out / "metrics.csv").open(encoding="utf-8") as handle:
            self.assertEqual([row["iter"] for row in csv.DictReader(handle)], ["0", "1", "2"])
        self.assertTrue(any((out / "snapshots").glob("*_000002.png")))

    def test_optimize_with_a_trained_model(self) -> None:
        scene_dir = self.generate()
        config = tiny_config()
        model_path = save_trained_model(self.root / "model.l2sm", init_model(config, 0), config)

        code = self.run_cli(
            "optimize", "--scene", str(scene_dir), "--out", str(self.root / "learned"),
            "--optimizer", "l2s", "--iterations", "1", "--model", str(model_path),
        )

        self.assertEqual(code, run_l2s.EXIT_OK)

    def test_learned_optimizer_without_model_is_a_configuration_error(self) -> None:
        scene_dir = self.generate()

        code = self.run_cli("optimize", "--scene", str(scene_dir), "--out", str(self.root / "x"), "--optimizer", "l2s")

        self.assertEqual(code, run_l2s.EXIT_CONFIG)

    def test_bad_config_file_is_a_configuration_error(self) -> None:
        self.config_path.write_text(yaml.safe_dump({"renderer": {"tile_size": 8}}), encoding="utf-8")

        self.assertEqual(self.run_cli("gen", "--out", str(self.root / "scenes")), run_l2s.EXIT_CONFIG)

    def test_file_system_failures_map_to_the_io_exit_code(self) -> None:
        with mock.patch.object(run_l2s, "dispatch", side_effect=PermissionError("scenes: permission denied")):
            code = self.run_cli("gen", "--out", str(self.root / "scenes"))

        self.assertEqual(code, run_l2s.EXIT_IO)

    def test_compare_and_swap_study(self) -> None:
        scene_dir = self.generate()

        compared = self.run_cli(
            "compare", "--scenes", str(scene_dir), "--methods", "sgd", "adam-3dgs",
            "--reference", "adam-3dgs", "--out", str(self.root / "cmp"), "--iterations", "2", "--cadence", "1",
        )
        swapped = self.run_cli(
            "swap-study", "--scene", str(scene_dir), "--group", "means", "--source", "sgd",
            "--target", "adam-3dgs", "--out", str(self.root / "swap"), "--iterations", "1",
        )

        self.assertEqual(compared, run_l2s.EXIT_OK)
        self.assertTrue((self.root / "cmp" / "thresholds_time.csv").is_file())
        self.assertEqual(swapped, run_l2s.EXIT_OK)
        self.assertTrue((self.root / "swap" / "swap_means_sgd_into_adam-3dgs.csv").is_file())

    def test_reference_must_be_compared(self) -> None:
        scene_dir = self.generate()

        code = self.run_cli(
            "compare", "--scenes", str(scene_dir), "--methods", "sgd",
            "--reference", "adam-3dgs", "--out", str(self.root / "cmp"),
        )

        self.assertEqual(code, run_l2s.EXIT_CONFIG)

    def test_meta_train_writes_a_loadable_model(self) -> None:
        self.config_path.write_text(
            yaml.safe_dump(
                {
                    "scene": MICRO_SCENE_SECTION,
                    "model": {"state_dim": 8, "n_blocks": 1, "attn_dim": 6, "mlp_hidden": 16, "k_neighbors": 2},
                    "meta": {"context_batch": 2, "target_views": 1, "tau_max": 2, "tau_a_end": 2},
                }
            ),
            encoding="utf-8",
        )
        out = self.root / "trained.l2sm"

        code = self.run_cli("--quiet", "meta-train", "--out", str(out), "--synthetic-count", "2", "--iterations", "1")

        self.assertEqual(code, run_l2s.EXIT_OK)
        self.assertTrue(out.is_file())
        self.assertTrue(out.with_suffix(".csv").is_file())


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
