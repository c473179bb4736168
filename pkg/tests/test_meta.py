"""Meta-training: checkpoint buffer, rollouts, the meta objective and the trainer loop."""
from __future__ import annotations

import pathlib
import tempfile
import unittest
from unittest import mock

import numpy as np

from autodiff.params import AdamParamState
from core.errors import ConfigurationError, NumericalError
from l2s.latents import LatentStates, init_latents
from l2s.model import init_model, l2s_step
from losses.meta import low_visibility_loss, render_loss, stability_loss
from meta.buffer import Checkpoint, CheckpointBuffer
from meta.config import L2S_TRAINING, LO_BASELINE_TRAINING, MetaConfig
from meta.metrics_log import METRICS_COLUMNS, MetricsLog, MetricsRow, read_metrics
from meta.objective import meta_objective, target_errors
from meta.pool import DirectoryScenePool, ListScenePool, SyntheticScenePool
from meta.rollout import InnerState, inner_rollout
from meta.trainer import MetaTrainer, fresh_state, meta_iteration, meta_update, simulate_buffer
from optim.adam import AdamState
from render.rasterizer import render
from render.settings import RenderSettings
from scene.io import save_scene
from spatial.knn import build_knn
from tests.helpers import micro_scene, micro_spec, random_cloud, tiny_config

CHECK_SETTINGS = RenderSettings(dtype="float64", alpha_min=1e-12)


def small_meta(**changes) -> MetaConfig:
    values = dict(context_batch=2, target_views=1, tau_max=2, tau_a_end=2, checkpoint_every=1, log_every=1)
    values.update(changes)
    return MetaConfig(**values)


def checkpoint(step: int, count: int = 3) -> Checkpoint:
    cloud = random_cloud(np.random.default_rng(step), count)
    return Checkpoint(f"s{step}", cloud, init_latents(count, 4, step), AdamState.zeros(count), step)


class BufferTests(unittest.TestCase):
    def test_fifo_eviction(self) -> None:
        buffer: CheckpointBuffer[Checkpoint] = CheckpointBuffer(capacity=3)
        entries = [checkpoint(step) for step in range(1, 5)]

        evicted = [buffer.push(entry) for entry in entries]

        self.assertEqual(evicted[:3], [None, None, None])
        self.assertIs(evicted[3], entries[0])
        self.assertEqual([e.inner_step_count for e in buffer], [2, 3, 4])
        self.assertTrue(buffer.is_full)

    def test_sampling_removes_the_entry(self) -> None:
        buffer: CheckpointBuffer[Checkpoint] = CheckpointBuffer(capacity=5)
        for step in range(1, 4):
            buffer.push(checkpoint(step))
        rng = np.random.default_rng(0)

        taken = {buffer.pop_sample(rng).inner_step_count for _ in range(3)}

        self.assertEqual(taken, {1, 2, 3})
        self.assertEqual(len(buffer), 0)
        with self.assertRaises(ConfigurationError):
            buffer.pop_sample(rng)

    def test_checkpoint_validation(self) -> None:
        with self.assertRaises(ConfigurationError):
            CheckpointBuffer(capacity=0)
        with self.assertRaises(ConfigurationError):
            checkpoint(0)
        cloud = random_cloud(np.random.default_rng(0), 3)
        with self.assertRaises(ConfigurationError):
            Checkpoint("bad", cloud, init_latents(2, 4, 0), AdamState.zeros(3), 1)
        adam = AdamState.zeros(3)
        adam.v[0, 0] = np.nan
        with self.assertRaises(NumericalError):
            Checkpoint("bad", cloud, init_latents(3, 4, 0), adam, 1)


class MetaConfigTests(unittest.TestCase):
    def test_rollout_ceiling_ramp(self) -> None:
        self.assertEqual(L2S_TRAINING.tau_a(0), 1)
        self.assertEqual(L2S_TRAINING.tau_a(5000), 25)
        self.assertEqual(L2S_TRAINING.tau_a(10000), 50)
        self.assertEqual(L2S_TRAINING.tau_a(30000), 50)

    def test_rollout_ceiling_is_floored_everywhere(self) -> None:
        for meta_iter in range(0, 12001):
            expected = 1 + (49 * meta_iter) // 10000 if meta_iter < 10000 else 50
            self.assertEqual(L2S_TRAINING.tau_a(meta_iter), expected, f"meta_iter={meta_iter}")
        self.assertEqual(L2S_TRAINING.tau_a(204), 1)
        self.assertEqual(L2S_TRAINING.tau_a(205), 2)
        self.assertEqual(L2S_TRAINING.tau_a(9999), 49)
        self.assertEqual(L2S_TRAINING.tau_a(-5), 1)

    def test_presets(self) -> None:
        self.assertEqual((L2S_TRAINING.tau_max, L2S_TRAINING.buffer_capacity, L2S_TRAINING.p_buffer), (6, 20, 0.7))
        self.assertEqual(LO_BASELINE_TRAINING.fixed_tau, 24)
        self.assertFalse(LO_BASELINE_TRAINING.use_buffer)

        config = MetaConfig.from_mapping({"preset": "lo-baseline", "meta_lr": 1e-3, "meta_betas": [0.8, 0.99]})
        self.assertEqual(config.meta_step_mode, "per_step")
        self.assertEqual(config.meta_betas, (0.8, 0.99))

    def test_validation(self) -> None:
        with self.assertRaises(ConfigurationError):
            MetaConfig(p_buffer=1.5)
        with self.assertRaises(ConfigurationError):
            MetaConfig(tau_a_start=5, tau_a_end=2)
        with self.assertRaises(ConfigurationError):
            MetaConfig(meta_step_mode="sideways")
        with self.assertRaises(ConfigurationError):
            MetaConfig.from_mapping({"buffer_size": 3})


class BufferSimulationTests(unittest.TestCase):
    def test_buffer_spreads_training_over_inner_steps(self) -> None:
        result = simulate_buffer(L2S_TRAINING, 10000, seed=0)

        self.assertEqual(result.visits[1], result.fresh_starts)
        for step in range(1, 7):
            self.assertGreaterEqual(result.visits[step], 400, f"step {step}")
        self.assertGreater(result.max_step, 100)

    def test_without_buffer_every_iteration_starts_fresh(self) -> None:
        config = MetaConfig(use_buffer=False)

        result = simulate_buffer(config, 500, seed=1)

        self.assertEqual(result.fresh_starts, 500)
        self.assertLessEqual(result.max_step, config.tau_max)


class RolloutTests(unittest.TestCase):
    def setUp(self) -> None:
        # same neighbour refresh in both modes
        self.config = tiny_config(knn_refresh=1)
        self.meta = small_meta()
        self.scene = micro_scene(seed=1)
        self.params = init_model(self.config, 0, np.float64)

    def start(self) -> InnerState:
        return fresh_state(self.scene, self.config, np.random.default_rng(5), np.float64)

    def test_frozen_and_train_modes_reach_the_same_cloud(self) -> None:
        train = inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 3, "train", np.random.default_rng(2))
        frozen = inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 3, "frozen", np.random.default_rng(2))

        np.testing.assert_array_equal(train.final.cloud.params, frozen.final.cloud.params)
        np.testing.assert_array_equal(train.final.latents.numpy(), frozen.final.latents.numpy())
        self.assertEqual(frozen.final.inner_step_count, 3)
        self.assertIsNone(frozen.tape)
        self.assertEqual(frozen.records[0].renders, ())

    def test_records_follow_the_steps(self) -> None:
        rollout = inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 3, "train", np.random.default_rng(0))

        self.assertEqual([r.step for r in rollout.records], [1, 2, 3])
        self.assertEqual(len({r.target_names for r in rollout.records}), 1)
        for record in rollout.records:
            self.assertEqual(record.n_context, 2)
            self.assertEqual(len(record.renders), 3)
            self.assertEqual(record.delta.shape, (self.scene.initial_cloud.count, 59))

    def test_single_step(self) -> None:
        rollout = inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 1, "train", np.random.default_rng(0))

        self.assertEqual(len(rollout.records), 1)

    def test_bad_arguments(self) -> None:
        with self.assertRaises(ConfigurationError):
            inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 0, "train", np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            inner_rollout(self.scene, self.start(), self.params, self.config, self.meta, 1, "eval", np.random.default_rng(0))


class MetaObjectiveTests(unittest.TestCase):
    def setUp(self) -> None:
        self.config = tiny_config()
        self.scene = micro_scene(seed=2)

    def rollout(self, params, meta: MetaConfig, tau: int, settings=None):
        state = fresh_state(self.scene, self.config, np.random.default_rng(1), params["pt.in.w"].data.dtype)
        return state, inner_rollout(self.scene, state, params, self.config, meta, tau, "train", np.random.default_rng(3), settings)

    def test_terms_match_their_definitions(self) -> None:
        meta = small_meta()
        _, rollout = self.rollout(init_model(self.config, 0, np.float64), meta, 3)

        objective = meta_objective(rollout.records, meta)

        trajectory = [[(v.image, rgb) for v, rgb in zip(r.views, r.renders)] for r in rollout.records]
        self.assertAlmostEqual(objective.report.terms["render"], render_loss(trajectory, meta.gamma), places=10)
        self.assertAlmostEqual(objective.report.terms["stability"], stability_loss(target_errors(rollout.records)), places=12)
        lvs = sum(low_visibility_loss(r.delta.data, r.raw_grads, r.adam_grads) for r in rollout.records)
        self.assertAlmostEqual(objective.report.terms["lvs"], lvs, places=10)
        self.assertAlmostEqual(objective.report.value, sum(objective.report.terms.values()), places=12)
        self.assertEqual(len(objective.seeds), 3)

    def test_disabled_terms_are_zero(self) -> None:
        meta = small_meta(use_lvs=False, use_stability=False)
        _, rollout = self.rollout(init_model(self.config, 0, np.float64), meta, 2)

        objective = meta_objective(rollout.records, meta)

        self.assertEqual(objective.report.terms["lvs"], 0.0)
        self.assertEqual(objective.report.terms["stability"], 0.0)

    def test_needs_train_mode_records(self) -> None:
        meta = small_meta()
        params = init_model(self.config, 0, np.float64)
        state = fresh_state(self.scene, self.config, np.random.default_rng(1), np.float64)
        frozen = inner_rollout(self.scene, state, params, self.config, meta, 1, "frozen", np.random.default_rng(0))

        with self.assertRaises(ConfigurationError):
            meta_objective(frozen.records, meta)
        with self.assertRaises(ConfigurationError):
            meta_objective([], meta)

    def test_meta_update_moves_the_weights(self) -> None:
        meta = small_meta()
        params = init_model(self.config, 0, np.float64)
        params["update.l2.b"].data[0, -1] = 0.05
        before = params.flatten()
        _, rollout = self.rollout(params, meta, 2)
        adam = AdamParamState()

        meta_update(params, rollout, adam, meta)

        self.assertGreater(max(np.abs(g).max() for g in params.grads().values()), 0.0)
        self.assertFalse(np.array_equal(before, params.flatten()))
        self.assertEqual(adam.step, 1)
        self.assertIsNone(rollout.tape)

    def test_failed_meta_update_still_releases_the_tape(self) -> None:
        meta = small_meta()
        params = init_model(self.config, 0, np.float64)
        before = params.flatten()
        _, rollout = self.rollout(params, meta, 2)
        adam = AdamParamState()

        with mock.patch("meta.trainer.adam_step_params", side_effect=NumericalError("diverged")):
            with self.assertRaises(NumericalError):
                meta_update(params, rollout, adam, meta)

        self.assertIsNone(rollout.tape)
        self.assertEqual(adam.step, 0)
        np.testing.assert_array_equal(before, params.flatten())

    def test_meta_gradient_matches_a_replayed_finite_difference(self) -> None:
        meta = small_meta(use_lvs=False, use_stability=False)
        params = init_model(self.config, 0, np.float64)
        params["update.l2.b"].data[0, -1] = 0.05
        state, rollout = self.rollout(params, meta, 2, CHECK_SETTINGS)
        records = rollout.records

        objective = meta_objective(records, meta, CHECK_SETTINGS)
        params.zero_grad()
        rollout.tape.backward(objective.seeds)
        analytic = {name: tensor.grad.copy() for name, tensor in params.items() if tensor.grad is not None}

        # Replay with every recorded input held fixed; only the deltas and latents depend on the weights.
        inputs = [state.cloud] + [r.cloud_after for r in records[:-1]]
        neighbors = [build_knn(cloud.means, self.config.k_neighbors) for cloud in inputs]

        def replay() -> float:
            latents = LatentStates(state.latents.s.detach())
            trajectory = []
            for record, cloud, table in zip(records, inputs, neighbors):
                result = l2s_step(cloud, record.adam_grads, latents, params, table, self.config)
                latents = result.states
                trajectory.append([(v.image, render(result.cloud, v, CHECK_SETTINGS).rgb) for v in record.views])
            return render_loss(trajectory, meta.gamma)

        self.assertAlmostEqual(replay(), objective.report.value, places=10)
        h = 1e-6
        for name, index in (("update.l2.b", (0, 0)), ("update.l2.b", (0, 59)), ("update.l1.w", (1, 2)), ("pt.in.w", (120, 0))):
            data = params[name].data
            original = data[index]
            data[index] = original + h
            plus = replay()
            data[index] = original - h
            minus = replay()
            data[index] = original
            numeric = (plus - minus) / (2.0 * h)
            self.assertAlmostEqual(analytic[name][index], numeric, delta=1e-2 * abs(numeric) + 1e-7, msg=f"{name}{index}")


class MetaIterationTests(unittest.TestCase):
    def setUp(self) -> None:
        self.config = tiny_config()
        self.pool = ListScenePool([micro_scene(seed=0), micro_scene(seed=1)])

    def test_without_buffer_sampling_every_iteration_starts_at_zero(self) -> None:
        meta = small_meta(p_buffer=0.0)
        params = init_model(self.config, 0)
        buffer: CheckpointBuffer[Checkpoint] = CheckpointBuffer(meta.buffer_capacity)
        adam = AdamParamState()

        rows = [
            meta_iteration(buffer, self.pool, params, adam, meta, np.random.default_rng(i), self.config, i)
            for i in range(3)
        ]

        self.assertEqual([row.start_inner_step for row in rows], [0, 0, 0])
        self.assertEqual(adam.step, len(rows))
        self.assertGreaterEqual(len(buffer), 1)
        for entry in buffer:
            self.assertGreaterEqual(entry.inner_step_count, 1)

    def test_buffered_start_resumes_the_stored_step(self) -> None:
        meta = small_meta(p_buffer=1.0, p_push=1.0, p_push_back=1.0)
        params = init_model(self.config, 0)
        buffer: CheckpointBuffer[Checkpoint] = CheckpointBuffer(meta.buffer_capacity)
        adam = AdamParamState()

        first = meta_iteration(buffer, self.pool, params, adam, meta, np.random.default_rng(0), self.config, 0)
        second = meta_iteration(buffer, self.pool, params, adam, meta, np.random.default_rng(1), self.config, 1)

        self.assertEqual(first.start_inner_step, 0)
        self.assertEqual(second.start_inner_step, first.tau + first.rollout_len)
        self.assertEqual(second.scene_id, first.scene_id)

    def test_per_step_mode_takes_one_meta_step_per_inner_step(self) -> None:
        meta = small_meta(meta_step_mode="per_step", fixed_tau=3, use_buffer=False)
        adam = AdamParamState()

        row = meta_iteration(
            CheckpointBuffer(2), self.pool, init_model(self.config, 0), adam, meta, np.random.default_rng(0), self.config
        )

        self.assertEqual((row.tau, row.rollout_len), (3, 0))
        self.assertEqual(adam.step, 3)


class FailingPool:
    def __len__(self) -> int:
        return 1

    def sample(self, rng):
        raise NumericalError("Scene produced NaNs", scene_id="broken")


class TrainerTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self._tmp.name)
        self.config = tiny_config()
        self.pool = ListScenePool([micro_scene(seed=0)])

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_train_save_and_resume(self) -> None:
        meta = small_meta(iterations=2)
        trainer = MetaTrainer(
            self.config, meta, self.pool, seed=4,
            metrics_path=self.root / "meta.csv", checkpoint_path=self.root / "model.l2sm",
        )

        trainer.train()
        resumed = MetaTrainer.resume(self.root / "model.l2sm", meta, self.pool, metrics_path=self.root / "meta.csv")
        resumed.train(iterations=3)

        self.assertEqual(trainer.meta_iter, 2)
        np.testing.assert_array_equal(
            MetaTrainer.resume(self.root / "model.l2sm", meta, self.pool).params.flatten(), trainer.params.flatten()
        )
        self.assertEqual(resumed.meta_iter, 3)
        self.assertEqual(resumed.seed, 4)
        self.assertEqual(resumed.meta_adam.step, trainer.meta_adam.step + 1)
        rows = read_metrics(self.root / "meta.csv")
        self.assertEqual([row["meta_iter"] for row in rows], ["0", "1", "2"])
        self.assertEqual(tuple(rows[0]), METRICS_COLUMNS)

    def test_same_seed_same_weights(self) -> None:
        meta = small_meta()
        first = MetaTrainer(self.config, meta, self.pool, seed=1)
        second = MetaTrainer(self.config, meta, self.pool, seed=1)

        first.step()
        second.step()

        np.testing.assert_array_equal(first.params.flatten(), second.params.flatten())

    def test_consecutive_failures_abort(self) -> None:
        trainer = MetaTrainer(self.config, small_meta(iterations=10, max_consecutive_failures=2), FailingPool())

        with self.assertRaises(NumericalError):
            trainer.train()

        self.assertEqual(trainer.meta_iter, 2)

    def test_save_needs_a_path(self) -> None:
        with self.assertRaises(ConfigurationError):
            MetaTrainer(self.config, small_meta(), self.pool).save()


class PoolAndLogTests(unittest.TestCase):
    def test_synthetic_pool_is_deterministic_and_cached(self) -> None:
        pool = SyntheticScenePool(micro_spec(), count=3, base_seed=10)

        first = pool.sample(np.random.default_rng(0))
        again = pool.sample(np.random.default_rng(0))

        self.assertIs(first, again)
        self.assertEqual(len(pool), 3)

    def test_empty_pools(self) -> None:
        with self.assertRaises(ConfigurationError):
            ListScenePool([])
        with self.assertRaises(ConfigurationError):
            SyntheticScenePool(micro_spec(), count=0)
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                DirectoryScenePool(tmp)

    def test_directory_pool_loads_scene_containers(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            root = pathlib.Path(tmp)
            save_scene(micro_scene(seed=0, dtype=np.float32), root / "a")
            save_scene(micro_scene(seed=1, dtype=np.float32), root / "b")

            pool = DirectoryScenePool(root)

            self.assertEqual(len(pool), 2)

    def test_metrics_log_appends_under_one_header(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "log.csv"
            row = MetricsRow(0, "s", 0, 2, 1, 0.5, 0.0, 0.0, 0.5, 12.0, 100.0)
            MetricsLog(path).append(row)
            MetricsLog(path).append(row)

            rows = read_metrics(path)

            self.assertEqual(len(rows), 2)
            self.assertEqual(rows[1]["loss_meta"], "0.5")


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
