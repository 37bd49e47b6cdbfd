import json

import numpy as np
import pytest

from chaoslstm.cells import CellSpec, init_params
from chaoslstm.dynamics import WindowedDataset
from chaoslstm.errors import CheckpointError, ConfigError
from chaoslstm.tn import TensorizerSpec
from chaoslstm.training import (
    Checkpoint,
    TrainConfig,
    adam_step,
    evaluate,
    init_adam,
    load_checkpoint,
    predict,
    rollout,
    save_checkpoint,
    train,
)


def toy_dataset(n=600, seed=0, fn=lambda x: 0.5 * x):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 1, 1))
    y = fn(x[:, 0, :])
    k1, k2 = int(0.7 * n), int(0.85 * n)
    return WindowedDataset(
        1, x[:k1], y[:k1], x[k1:k2], y[k1:k2], x[k2:], y[k2:], np.zeros(1), np.ones(1)
    )


class TestAdam:
    def test_first_step_magnitude(self):
        params = {"w": np.zeros(1)}
        grads = {"w": np.ones(1)}
        cfg = TrainConfig(epochs=1, learning_rate=0.01, epsilon=1e-5)
        state = init_adam(params)
        adam_step(params, grads, state, cfg)
        assert params["w"][0] == pytest.approx(-0.01 / (1 + 1e-5), rel=1e-12)

    def test_zero_gradient_fixed_point(self):
        params = {"w": np.array([1.0, -2.0])}
        cfg = TrainConfig(epochs=1)
        state = init_adam(params)
        for _ in range(10):
            adam_step(params, {"w": np.zeros(2)}, state, cfg)
        np.testing.assert_allclose(params["w"], [1.0, -2.0])

    def test_first_step_opposes_gradient_sign(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal(8)
        params = {"w": np.zeros(8)}
        state = init_adam(params)
        adam_step(params, {"w": g.copy()}, state, TrainConfig(epochs=1))
        assert np.all(np.sign(params["w"]) == -np.sign(g))

    def test_epsilon_guard(self):
        state = init_adam({"w": np.zeros(3)})
        cfg = TrainConfig(epochs=1)
        params = {"w": np.zeros(3)}
        adam_step(params, {"w": np.zeros(3)}, state, cfg)
        assert np.all(np.sqrt(state.v["w"]) + cfg.epsilon > 0)


class TestEvaluate:
    def test_perfect_predictor(self):
        spec = CellSpec("vanilla", 2, 1)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        x = np.zeros((10, 2, 1))
        y = np.zeros((10, 1))
        assert evaluate(spec, params, x, y) == 0.0

    def test_constant_offset(self):
        spec = CellSpec("vanilla", 2, 1)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        params["w_x"][:, 0] = 0.25
        x = np.zeros((10, 2, 1))
        y = np.zeros((10, 1))
        assert evaluate(spec, params, x, y) == pytest.approx(0.25)

    def test_zero_predictor_on_standardized_targets(self):
        rng = np.random.default_rng(1)
        spec = CellSpec("vanilla", 2, 1)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, rng).items()}
        x = rng.standard_normal((600, 2, 1))
        y = rng.standard_normal((600, 1))
        assert evaluate(spec, params, x, y) == pytest.approx(1.0, abs=0.1)

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        spec = CellSpec("vanilla", 2, 1)
        params = init_params(spec, rng)
        x = rng.standard_normal((50, 3, 1))
        y = rng.standard_normal((50, 1))
        perm = rng.permutation(50)
        assert evaluate(spec, params, x, y) == pytest.approx(
            evaluate(spec, params, x[perm], y[perm]), rel=1e-12
        )

    def test_empty_windows_rejected(self):
        spec = CellSpec("vanilla", 2, 1)
        params = init_params(spec, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            evaluate(spec, params, np.zeros((0, 2, 1)), np.zeros((0, 1)))


class TestTrain:
    def test_toy_regression(self):
        ds = toy_dataset()
        ckpt, curve = train(CellSpec("vanilla", 2, 1), ds, TrainConfig(epochs=50, seed=3))
        val_rmse = evaluate(ckpt.spec, ckpt.params, ds.val_x, ds.val_y)
        assert val_rmse < 0.05
        # best validation loss never exceeds the first epoch's
        assert min(c[2] for c in curve) <= curve[0][2]
        assert ckpt.meta["epoch"] == int(np.argmin([c[2] for c in curve])) + 1

    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)

    def test_bit_identical_reruns(self):
        ds = toy_dataset()
        spec = CellSpec("vanilla", 2, 1)
        c1, curve1 = train(spec, ds, TrainConfig(epochs=10, seed=5))
        c2, curve2 = train(spec, ds, TrainConfig(epochs=10, seed=5))
        assert curve1 == curve2
        assert all(np.array_equal(c1.params[k], c2.params[k]) for k in c1.params)

    def test_seed_changes_run(self):
        ds = toy_dataset()
        spec = CellSpec("vanilla", 2, 1)
        _, curve1 = train(spec, ds, TrainConfig(epochs=5, seed=5))
        _, curve2 = train(spec, ds, TrainConfig(epochs=5, seed=6))
        assert curve1 != curve2

    def test_tensorized_trains(self):
        ds = toy_dataset(300)
        tn = TensorizerSpec("mera", 4, 2, (2, 2), translation_symmetric_level1=True)
        spec = CellSpec("tensorized", 2, 1, "A", tn)
        ckpt, curve = train(spec, ds, TrainConfig(epochs=15, seed=1))
        assert min(c[2] for c in curve) <= curve[0][2]

    def test_clip_norm_runs(self):
        ds = toy_dataset(200)
        ckpt, _ = train(
            CellSpec("vanilla", 2, 1), ds, TrainConfig(epochs=3, seed=1, clip_norm=0.5)
        )
        assert np.all(np.isfinite(ckpt.params["w_x"]))


class TestRollout:
    def test_single_window_shape(self):
        spec = CellSpec("vanilla", 2, 1)
        params = init_params(spec, np.random.default_rng(0))
        preds = rollout(spec, params, np.zeros((4, 1)), 3)
        assert preds.shape == (3, 1)

    def test_base_case_equals_predict(self):
        spec = CellSpec("vanilla", 3, 2)
        rng = np.random.default_rng(1)
        params = init_params(spec, rng)
        x = rng.uniform(-1, 1, (6, 4, 2))
        np.testing.assert_allclose(
            rollout(spec, params, x, 1)[:, 0], predict(spec, params, x), rtol=1e-12
        )

    def test_bad_horizon(self):
        spec = CellSpec("vanilla", 2, 1)
        params = init_params(spec, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            rollout(spec, params, np.zeros((4, 1)), 0)


class TestCheckpoints:
    def _ckpt(self):
        rng = np.random.default_rng(7)
        tn = TensorizerSpec("mps", 4, 2, (2, 3))
        spec = CellSpec("tensorized", 3, 2, "A", tn)
        return Checkpoint(
            version=1,
            spec=spec,
            params=init_params(spec, rng),
            mean=rng.standard_normal(2),
            std=np.abs(rng.standard_normal(2)) + 0.5,
            meta={"epoch": 4, "val_loss": 0.123456789012345678, "seed": 7},
        )

    def test_bit_exact_round_trip(self, tmp_path):
        path = str(tmp_path / "ck.json")
        ck = self._ckpt()
        save_checkpoint(path, ck)
        back = load_checkpoint(path)
        assert back.spec == ck.spec
        assert set(back.params) == set(ck.params)
        for k in ck.params:
            assert np.array_equal(back.params[k], ck.params[k])
        assert np.array_equal(back.mean, ck.mean)
        assert np.array_equal(back.std, ck.std)

    def test_version_mismatch(self, tmp_path):
        path = str(tmp_path / "ck.json")
        save_checkpoint(path, self._ckpt())
        data = json.loads(open(path).read())
        data["format_version"] = 99
        open(path, "w").write(json.dumps(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        path = str(tmp_path / "ck.json")
        save_checkpoint(path, self._ckpt())
        raw = open(path).read()
        open(path, "w").write(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


class TestTrainingErrors:
    def test_divergent_loss_reports_epoch(self):
        from chaoslstm.errors import TrainingError
        ds = toy_dataset(200)
        with pytest.raises(TrainingError, match="epoch"):
            train(CellSpec("vanilla", 2, 1), ds, TrainConfig(epochs=5, seed=0, learning_rate=1e200))
