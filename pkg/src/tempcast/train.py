"""Optimization of the ensemble network against the latitude-weighted loss.

The loss is computed in normalized anomaly space; verification metrics are
computed later on denormalized anomalies. That choice is recorded in every
checkpoint's metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .errors import ConfigurationError, NumericError
from .grids import LatWeights
from .net import Checkpoint, EnsembleNet, ModelConfig, stats_hash

DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH_SIZE = 4
DEFAULT_WEIGHT_DECAY = 1e-4
DEFAULT_COSINE_PERIOD = 225
DEFAULT_MAX_EPOCHS = 500
DEFAULT_PATIENCE = 100


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    cosine_period: int = DEFAULT_COSINE_PERIOD
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ConfigurationError("learning rate and batch size must be positive")
        if self.weight_decay < 0 or self.cosine_period < 1:
            raise ConfigurationError("weight decay and cosine period must be valid")
        if not self.patience < self.max_epochs:
            raise ConfigurationError("patience must be smaller than max_epochs")


def lr_at(
    epoch: int,
    base_lr: float = DEFAULT_LEARNING_RATE,
    period: int = DEFAULT_COSINE_PERIOD,
) -> float:
    """Cosine-annealed rate; the value at the period is held afterwards."""
    if epoch < 0:
        raise ConfigurationError("epoch must be nonnegative")
    e = min(epoch, period)
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * e / period))


def scheduled_lr(epoch: int, cfg: TrainConfig) -> float:
    """Rate actually applied while training.

    The cosine floor at the period is exactly zero, which would freeze all
    later epochs; the last nonzero rate (one epoch before the period) is
    held instead.
    """
    return lr_at(min(epoch, cfg.cosine_period - 1), cfg.learning_rate, cfg.cosine_period)


def weighted_loss(
    pred: torch.Tensor, truth: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """Mean latitude-weighted RMSE over a batch.

    Per sample and output month: sqrt(sum_jk L(j) err^2 / (n_lat n_lon)),
    averaged over the batch. Expects (B, C, H, W) tensors and (H,) weights.
    """
    if pred.shape != truth.shape:
        raise ConfigurationError(
            f"prediction shape {tuple(pred.shape)} != truth {tuple(truth.shape)}"
        )
    n_lat, n_lon = pred.shape[-2], pred.shape[-1]
    if weights.numel() != n_lat:
        raise ConfigurationError("latitude weights do not match grid rows")
    w = weights.view(1, 1, n_lat, 1).to(pred.dtype)
    mean_sq = (w * (pred - truth) ** 2).sum(dim=(-2, -1)) / (n_lat * n_lon)
    return mean_sq.sqrt().mean()


def weights_tensor(weights: LatWeights, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.array(weights.weights), dtype=dtype)


@dataclass
class SampleSet:
    """In-memory supervised samples: normalized stacks and targets."""

    inputs: np.ndarray  # (N, C, H, W) float32
    targets: np.ndarray  # (N, out_channels, H, W) float32
    stamp_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.inputs) != len(self.targets):
            raise ConfigurationError("inputs and targets must pair up")

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass
class CheckpointRecord:
    epoch: int
    train_loss: float
    val_loss: float
    is_best: bool


@dataclass
class TrainResult:
    best: CheckpointRecord
    history: list[dict] = field(default_factory=list)
    stopped_early: bool = False


def _epoch_pass(
    model: EnsembleNet,
    data: SampleSet,
    weights: torch.Tensor,
    batch_size: int,
    optimizer: torch.optim.Optimizer | None,
    order: np.ndarray | None = None,
) -> float:
    training = optimizer is not None
    model.train(training)
    idx = order if order is not None else np.arange(len(data))
    total, count = 0.0, 0
    with torch.enable_grad() if training else torch.no_grad():
        for start in range(0, len(idx), batch_size):
            sel = idx[start : start + batch_size]
            x = torch.from_numpy(data.inputs[sel])
            y = torch.from_numpy(data.targets[sel])
            mean_out, _ = model(x)
            loss = weighted_loss(mean_out, y, weights)
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            value = float(loss.detach())
            if not math.isfinite(value):
                raise NumericError(
                    f"non-finite loss at batch starting {start} "
                    f"({'train' if training else 'eval'} pass)"
                )
            total += value * len(sel)
            count += len(sel)
    return total / max(count, 1)


def train(
    model: EnsembleNet,
    train_set: SampleSet,
    val_set: SampleSet,
    lat_weights: LatWeights,
    cfg: TrainConfig,
    *,
    log_path: str | Path | None = None,
    allowed_stamps: Sequence[str] | None = None,
) -> TrainResult:
    """Run the optimization loop with early stopping on validation loss.

    Stops when no new validation minimum appears within `patience` epochs
    (or at max_epochs) and restores the best weights into the model. When
    allowed_stamps is given, every training target stamp must be in it;
    this is the guard against validation/test leakage.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigurationError("train and validation sets must be nonempty")
    if allowed_stamps is not None:
        allowed = set(allowed_stamps)
        offenders = [s for s in train_set.stamp_labels if s not in allowed]
        if offenders:
            raise ConfigurationError(
                f"training samples outside the training split: {offenders[:4]}"
            )

    weights = weights_tensor(lat_weights, dtype=torch.float32)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    rng = np.random.default_rng(cfg.seed)

    history: list[dict] = []
    best_state = None
    best = CheckpointRecord(epoch=0, train_loss=math.inf, val_loss=math.inf, is_best=True)
    since_best = 0
    stopped_early = False
    log_fh = open(log_path, "w") if log_path is not None else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            lr = scheduled_lr(epoch - 1, cfg)
            for group in optimizer.param_groups:
                group["lr"] = lr
            order = rng.permutation(len(train_set))
            train_loss = _epoch_pass(
                model, train_set, weights, cfg.batch_size, optimizer, order
            )
            val_loss = _epoch_pass(model, val_set, weights, cfg.batch_size, None)
            record = {
                "epoch": epoch,
                "lr": lr,
                "train_loss": train_loss,
                "val_loss": val_loss,
            }
            history.append(record)
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            if val_loss < best.val_loss:
                best = CheckpointRecord(
                    epoch=epoch, train_loss=train_loss, val_loss=val_loss, is_best=True
                )
                best_state = {
                    k: v.detach().clone() for k, v in model.state_dict().items()
                }
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    stopped_early = True
                    break
    finally:
        if log_fh is not None:
            log_fh.close()
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return TrainResult(best=best, history=history, stopped_early=stopped_early)


def make_checkpoint(
    model: EnsembleNet,
    config: ModelConfig,
    cfg: TrainConfig,
    norm_stats,
    result: TrainResult,
    extra: dict | None = None,
) -> Checkpoint:
    meta = {
        "loss_space": "normalized_anomaly",
        "train_config": {
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "weight_decay": cfg.weight_decay,
            "cosine_period": cfg.cosine_period,
            "max_epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "seed": cfg.seed,
        },
        "best_epoch": result.best.epoch,
        "best_val_loss": result.best.val_loss,
        "stopped_early": result.stopped_early,
        "stats_hash": stats_hash(norm_stats),
    }
    if extra:
        meta.update(extra)
    return Checkpoint(
        config=config,
        seed=cfg.seed,
        norm_stats=dict(norm_stats),
        history=result.history,
        state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
        meta=meta,
    )
