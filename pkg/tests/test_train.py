import math

import numpy as np
import pytest
import torch

from tempcast.errors import ConfigurationError, NumericError
from tempcast.grids import GridSpec, latitude_weights
from tempcast.net import ModelConfig, build_model
from tempcast.train import (
    SampleSet,
    TrainConfig,
    lr_at,
    scheduled_lr,
    train,
    weighted_loss,
    weights_tensor,
)


def loss_oracle(pred, truth, lat_deg):
    """Scalar triple-loop evaluation of the latitude-weighted batch loss."""
    B, C, H, W = pred.shape
    cos = [math.cos(math.radians(l)) for l in lat_deg]
    denom = sum(cos)
    total = 0.0
    for b in range(B):
        for c in range(C):
            s = 0.0
            for j in range(H):
                L = cos[j] / denom
                for k in range(W):
                    s += L * (pred[b, c, j, k] - truth[b, c, j, k]) ** 2
            total += math.sqrt(s / (H * W))
    return total / (B * C)


class TestWeightedLoss:
    def test_zero_for_perfect_prediction(self, small_grid):
        w = weights_tensor(latitude_weights(small_grid))
        x = torch.randn(3, 1, *small_grid.shape)
        assert float(weighted_loss(x, x, w)) == 0.0

    def test_constant_offset_closed_form(self):
        grid = GridSpec(lat=np.array([0.0]), lon=np.arange(0.0, 360.0, 45.0))
        w = weights_tensor(latitude_weights(grid))
        truth = torch.randn(2, 1, 1, 8, dtype=torch.float64)
        pred = truth + 0.37
        # single latitude row: the loss reduces to |d|
        assert float(weighted_loss(pred, truth, w.double())) == pytest.approx(
            0.37, rel=1e-12
        )

    def test_multi_row_constant_offset(self, small_grid):
        w = weights_tensor(latitude_weights(small_grid), dtype=torch.float64)
        truth = torch.zeros(1, 1, *small_grid.shape, dtype=torch.float64)
        pred = truth + 2.0
        expected = 2.0 / math.sqrt(small_grid.n_lat)
        assert float(weighted_loss(pred, truth, w)) == pytest.approx(expected, rel=1e-12)

    def test_matches_triple_loop_oracle(self, rng):
        grid = GridSpec.cell_centered(8, 16)
        w = weights_tensor(latitude_weights(grid), dtype=torch.float64)
        pred = rng.normal(size=(3, 2, 8, 16))
        truth = rng.normal(size=(3, 2, 8, 16))
        ours = float(
            weighted_loss(torch.from_numpy(pred), torch.from_numpy(truth), w)
        )
        oracle = loss_oracle(pred, truth, grid.lat)
        assert ours == pytest.approx(oracle, rel=1e-12)

    def test_longitude_rotation_invariance(self, rng, small_grid):
        w = weights_tensor(latitude_weights(small_grid), dtype=torch.float64)
        pred = torch.from_numpy(rng.normal(size=(2, 1, *small_grid.shape)))
        truth = torch.from_numpy(rng.normal(size=(2, 1, *small_grid.shape)))
        a = weighted_loss(pred, truth, w)
        b = weighted_loss(
            torch.roll(pred, 5, dims=-1), torch.roll(truth, 5, dims=-1), w
        )
        assert float(a) == pytest.approx(float(b), rel=1e-14)

    def test_shape_mismatch_rejected(self, small_grid):
        w = weights_tensor(latitude_weights(small_grid))
        with pytest.raises(ConfigurationError):
            weighted_loss(
                torch.zeros(1, 1, 8, 16), torch.zeros(1, 2, 8, 16), w
            )


class TestSchedule:
    def test_initial_rate(self):
        assert lr_at(0) == pytest.approx(1e-3, abs=0)

    def test_cosine_floor_at_period(self):
        assert lr_at(225) == pytest.approx(0.0, abs=1e-19)
        assert lr_at(400) == lr_at(225)

    def test_closed_form_midpoints(self):
        for epoch in (1, 57, 113, 224):
            expected = 0.5e-3 * (1.0 + math.cos(math.pi * epoch / 225))
            assert lr_at(epoch) == pytest.approx(expected, rel=1e-12)

    def test_trainer_holds_last_nonzero_rate(self):
        cfg = TrainConfig()
        assert scheduled_lr(224, cfg) == lr_at(224)
        assert scheduled_lr(225, cfg) == lr_at(224)
        assert scheduled_lr(499, cfg) == lr_at(224)
        assert scheduled_lr(225, cfg) > 0.0


def tiny_model(in_channels=7, seed=0):
    cfg = ModelConfig(
        in_channels=in_channels, out_channels=1, depth=1, base_channels=(4, 8)
    )
    return build_model(cfg, seed=seed)


def identity_task(n, grid, seed):
    """Targets equal the last anomaly channel of the inputs."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 7, *grid.shape)).astype(np.float32)
    y = x[:, :1].copy()
    return SampleSet(inputs=x, targets=y, stamp_labels=tuple(f"s{i}" for i in range(n)))


class TestTrainLoop:
    def test_learnability_smoke(self, small_grid):
        model = tiny_model()
        train_set = identity_task(32, small_grid, seed=1)
        val_set = identity_task(8, small_grid, seed=2)
        w = weights_tensor(latitude_weights(small_grid))
        with torch.no_grad():
            mean, _ = model(torch.from_numpy(val_set.inputs))
            epoch0 = float(weighted_loss(mean, torch.from_numpy(val_set.targets), w))
        cfg = TrainConfig(
            learning_rate=5e-3, batch_size=8, max_epochs=50, patience=49, seed=0
        )
        result = train(model, train_set, val_set, latitude_weights(small_grid), cfg)
        assert result.best.val_loss < 0.1 * epoch0

    def test_early_stop_after_exact_patience(self, small_grid):
        # freeze learning so validation loss never improves after epoch 1
        model = tiny_model()
        data = identity_task(8, small_grid, seed=3)
        cfg = TrainConfig(
            learning_rate=1e-30, batch_size=8, max_epochs=10, patience=1, seed=0
        )
        result = train(model, data, data, latitude_weights(small_grid), cfg)
        assert result.stopped_early
        assert len(result.history) == 2  # stops at epoch 2
        assert result.best.epoch == 1

    def test_best_checkpoint_has_minimum_val_loss(self, small_grid):
        model = tiny_model()
        train_set = identity_task(16, small_grid, seed=4)
        val_set = identity_task(8, small_grid, seed=5)
        cfg = TrainConfig(batch_size=8, max_epochs=12, patience=11, seed=0)
        result = train(model, train_set, val_set, latitude_weights(small_grid), cfg)
        min_val = min(h["val_loss"] for h in result.history)
        assert result.best.val_loss == min_val
        assert result.best.is_best

    def test_seeded_run_reproduces_loss_curve(self, small_grid):
        curves = []
        for _ in range(2):
            model = tiny_model(seed=7)
            train_set = identity_task(16, small_grid, seed=6)
            val_set = identity_task(8, small_grid, seed=7)
            cfg = TrainConfig(batch_size=4, max_epochs=5, patience=4, seed=3)
            result = train(
                model, train_set, val_set, latitude_weights(small_grid), cfg
            )
            curves.append([(h["train_loss"], h["val_loss"]) for h in result.history])
        assert curves[0] == curves[1]

    def test_restored_weights_match_best_epoch(self, small_grid):
        model = tiny_model()
        train_set = identity_task(16, small_grid, seed=8)
        val_set = identity_task(8, small_grid, seed=9)
        cfg = TrainConfig(batch_size=8, max_epochs=8, patience=7, seed=0)
        result = train(model, train_set, val_set, latitude_weights(small_grid), cfg)
        w = weights_tensor(latitude_weights(small_grid))
        x = torch.from_numpy(val_set.inputs)
        with torch.no_grad():
            mean, _ = model(x)
            val_loss = float(weighted_loss(mean, torch.from_numpy(val_set.targets), w))
        assert val_loss == pytest.approx(result.best.val_loss, rel=1e-6)

    def test_leak_guard_rejects_foreign_stamps(self, small_grid):
        model = tiny_model()
        data = identity_task(8, small_grid, seed=10)
        cfg = TrainConfig(batch_size=8, max_epochs=2, patience=1, seed=0)
        with pytest.raises(ConfigurationError, match="outside the training split"):
            train(
                model,
                data,
                data,
                latitude_weights(small_grid),
                cfg,
                allowed_stamps=["s0"],  # everything else is foreign
            )

    def test_non_finite_loss_aborts(self, small_grid):
        model = tiny_model()
        data = identity_task(8, small_grid, seed=11)
        bad = SampleSet(
            inputs=np.where(
                np.arange(8)[:, None, None, None] == 3, np.inf, data.inputs
            ).astype(np.float32),
            targets=data.targets,
        )
        cfg = TrainConfig(batch_size=8, max_epochs=3, patience=2, seed=0)
        with pytest.raises(NumericError):
            train(model, bad, data, latitude_weights(small_grid), cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(patience=500, max_epochs=500)
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.0)
