"""Nested encoder-decoder ensemble network for gridded anomaly prediction.

A UNet++-style node grid of residual convolution blocks. Encoder nodes
receive average-pooled copies of every shallower encoder output (cross-scale
dense skips); nested decoder columns receive all same-row predecessors plus
an upsampled feature map from the previous column. Four prediction heads
read the four top-row nested nodes through 1x1 convolutions and the model
output is their arithmetic mean.

All feature maps live on the physical grid: convolutions pad circularly in
longitude and replicate in latitude. Every convolution is followed by a
ReLU except the four head 1x1s.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError
from .grids import NormStats

HEAD_COUNT = 4
FULL_SCALE_CHANNELS = (64, 128, 256, 512, 1024)
DESK_CHANNELS = (8, 16, 32, 64, 128)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; in_channels is 2W + 5 for window W.

    Working precision is single by default; the gradient-check harness
    converts to double.
    """

    in_channels: int
    out_channels: int = 1
    depth: int = 4
    base_channels: tuple[int, ...] = FULL_SCALE_CHANNELS
    precision: str = "float32"

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_channels", tuple(self.base_channels))
        if self.depth < 1:
            raise ConfigurationError("depth must be at least 1")
        if len(self.base_channels) != self.depth + 1:
            raise ConfigurationError(
                f"base_channels must have depth+1 entries, "
                f"got {len(self.base_channels)} for depth {self.depth}"
            )
        if any(b >= a for a, b in zip(self.base_channels[1:], self.base_channels)):
            raise ConfigurationError("base_channels must strictly increase with depth")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError("channel counts must be positive")
        if self.precision not in ("float32", "float64"):
            raise ConfigurationError("precision must be float32 or float64")

    @property
    def dtype(self):
        return torch.float32 if self.precision == "float32" else torch.float64

    @property
    def window(self) -> int:
        return (self.in_channels - 5) // 2

    def validate_grid(self, n_lat: int, n_lon: int) -> None:
        step = 2**self.depth
        if n_lat % step or n_lon % step:
            raise ConfigurationError(
                f"grid {n_lat}x{n_lon} not divisible by 2^depth ({step})"
            )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Mapping) -> "ModelConfig":
        return cls(
            in_channels=int(data["in_channels"]),
            out_channels=int(data["out_channels"]),
            depth=int(data["depth"]),
            base_channels=tuple(data["base_channels"]),
            precision=data.get("precision", "float32"),
        )


def pad_lonlat(x: torch.Tensor, margin: int = 1) -> torch.Tensor:
    """Pad feature maps: circular around longitude, replicate at the poles."""
    x = F.pad(x, (margin, margin, 0, 0), mode="circular")
    return F.pad(x, (0, 0, margin, margin), mode="replicate")


class ResidualBlock(nn.Module):
    """conv3x3 -> ReLU -> conv3x3, plus a (possibly 1x1-mapped) shortcut."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3)
        self.shortcut = (
            nn.Conv2d(in_channels, out_channels, 1)
            if in_channels != out_channels
            else None
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.conv1(pad_lonlat(x)))
        h = self.conv2(pad_lonlat(h))
        s = x if self.shortcut is None else self.shortcut(x)
        return F.relu(h + s)


class NodeBlock(nn.Module):
    """Two residual blocks, the unit of computation at every grid node."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.blocks = nn.ModuleList(
            [
                ResidualBlock(in_channels, out_channels),
                ResidualBlock(out_channels, out_channels),
            ]
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x = block(x)
        return x


class Upsample(nn.Module):
    """Stride-2 transposed convolution doubling both spatial dims."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.ConvTranspose2d(in_channels, out_channels, 2, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.conv(x))


def downsample(x: torch.Tensor, factor: int = 2) -> torch.Tensor:
    """Average over factor x factor sub-grids."""
    if x.shape[-2] % factor or x.shape[-1] % factor:
        raise ConfigurationError(
            f"spatial dims {tuple(x.shape[-2:])} not divisible by {factor}"
        )
    return F.avg_pool2d(x, factor)


class EnsembleNet(nn.Module):
    """The nested-grid network; forward returns (mean, per-head outputs)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        ch = config.base_channels
        d = config.depth
        self.nodes = nn.ModuleDict()
        self.ups = nn.ModuleDict()

        # encoder column: node i sees pooled outputs of all shallower nodes
        for i in range(d + 1):
            cin = config.in_channels if i == 0 else sum(ch[j] for j in range(i))
            self.nodes[f"n{i}_0"] = NodeBlock(cin, ch[i])

        # nested columns: dense same-row inputs plus an upsampled map when
        # the previous column reaches one level deeper
        for j in range(1, HEAD_COUNT + 1):
            for i in range(max(d - j, 0) + 1):
                has_up = i + 1 <= max(d - (j - 1), 0)
                cin = j * ch[i] + (ch[i] if has_up else 0)
                self.nodes[f"n{i}_{j}"] = NodeBlock(cin, ch[i])
                if has_up:
                    self.ups[f"u{i}_{j}"] = Upsample(ch[i + 1], ch[i])

        self.heads = nn.ModuleList(
            [
                nn.Conv2d(ch[0], config.out_channels, 1)
                for _ in range(HEAD_COUNT)
            ]
        )

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        cfg = self.config
        if x.shape[1] != cfg.in_channels:
            raise ConfigurationError(
                f"expected {cfg.in_channels} input channels, got {x.shape[1]}"
            )
        cfg.validate_grid(x.shape[-2], x.shape[-1])
        d = cfg.depth

        feats: dict[tuple[int, int], torch.Tensor] = {}
        for i in range(d + 1):
            if i == 0:
                cin = x
            else:
                cin = torch.cat(
                    [downsample(feats[(j, 0)], 2 ** (i - j)) for j in range(i)],
                    dim=1,
                )
            feats[(i, 0)] = self.nodes[f"n{i}_0"](cin)

        for j in range(1, HEAD_COUNT + 1):
            for i in range(max(d - j, 0) + 1):
                parts = [feats[(i, jj)] for jj in range(j)]
                key = f"u{i}_{j}"
                if key in self.ups:
                    parts.append(self.ups[key](feats[(i + 1, j - 1)]))
                feats[(i, j)] = self.nodes[f"n{i}_{j}"](torch.cat(parts, dim=1))

        head_outputs = torch.stack(
            [head(feats[(0, j + 1)]) for j, head in enumerate(self.heads)], dim=1
        )
        return head_outputs.mean(dim=1), head_outputs


def init_parameters(model: nn.Module, seed: int) -> None:
    """Deterministic fan-in scaled normal init; all biases zero.

    fan_in follows the weight layout convention: size(1) x kernel area.
    """
    gen = torch.Generator().manual_seed(seed)
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            w = m.weight
            fan_in = w.shape[1] * w.shape[2] * w.shape[3]
            std = (2.0 / fan_in) ** 0.5
            with torch.no_grad():
                w.copy_(torch.randn(w.shape, generator=gen, dtype=w.dtype) * std)
                if m.bias is not None:
                    m.bias.zero_()


def build_model(config: ModelConfig, seed: int = 0) -> EnsembleNet:
    model = EnsembleNet(config).to(config.dtype)
    init_parameters(model, seed)
    return model


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def model_summary(config: ModelConfig) -> str:
    """Human-readable node table with the total trainable parameter count."""
    model = EnsembleNet(config)
    lines = [
        f"depth {config.depth}, channels {config.base_channels}, "
        f"in {config.in_channels}, out {config.out_channels}, heads {HEAD_COUNT}",
        f"{'node':<10}{'params':>12}",
    ]
    for name, module in model.nodes.items():
        lines.append(f"{name:<10}{parameter_count(module):>12,}")
    for name, module in model.ups.items():
        lines.append(f"{name:<10}{parameter_count(module):>12,}")
    lines.append(f"{'heads':<10}{parameter_count(model.heads):>12,}")
    lines.append(f"total trainable parameters: {parameter_count(model):,}")
    return "\n".join(lines)


# --- checkpoints -------------------------------------------------------------


def stats_hash(norm_stats: Mapping[str, NormStats]) -> str:
    canon = sorted(
        (name, s.x_min, s.x_max) for name, s in norm_stats.items()
    )
    return hashlib.sha256(json.dumps(canon).encode()).hexdigest()[:16]


@dataclass
class Checkpoint:
    """A trained model with everything needed to run it standalone."""

    config: ModelConfig
    seed: int
    norm_stats: dict[str, NormStats]
    history: list[dict]
    state_dict: dict
    meta: dict

    @property
    def stats_hash(self) -> str:
        return stats_hash(self.norm_stats)

    def build(self) -> EnsembleNet:
        model = EnsembleNet(self.config).to(self.config.dtype)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    meta = {
        "config": ckpt.config.to_json(),
        "seed": ckpt.seed,
        "norm_stats": {
            k: [v.x_min, v.x_max] for k, v in ckpt.norm_stats.items()
        },
        "history": ckpt.history,
        "stats_hash": ckpt.stats_hash,
        "meta": ckpt.meta,
    }
    payload = {"meta_json": json.dumps(meta), "state_dict": ckpt.state_dict}
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    meta = json.loads(payload["meta_json"])
    return Checkpoint(
        config=ModelConfig.from_json(meta["config"]),
        seed=meta["seed"],
        norm_stats={
            k: NormStats(channel_id=k, x_min=lo, x_max=hi)
            for k, (lo, hi) in meta["norm_stats"].items()
        },
        history=meta["history"],
        state_dict=payload["state_dict"],
        meta=meta["meta"],
    )
