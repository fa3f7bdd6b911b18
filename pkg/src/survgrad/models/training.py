"""Training configuration and the shared epoch loop with early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import AdamState, DenseNet, adam_step
from ..data import SurvivalDataset
from ..errors import ConfigError, TrainingError


@dataclass
class TrainConfig:
    hidden: tuple[int, ...] = (32, 32)
    dropout: float = 0.1
    batch_size: int = 1024
    max_epochs: int = 500
    patience: int = 10
    learning_rate: float = 0.01
    validation_fraction: float = 0.3
    seed: int = 0
    activation: str = "relu"
    deephit_alpha: float = 0.5  # weight on the rank loss
    deephit_sigma: float = 0.1  # rank-loss scale
    deephit_bins: int = 32

    def __post_init__(self):
        if not all(h > 0 for h in self.hidden):
            raise ConfigError("hidden widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if min(self.batch_size, self.max_epochs, self.patience, self.deephit_bins) < 1:
            raise ConfigError("batch_size, max_epochs, patience, deephit_bins must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation fraction must be in (0, 1)")
        if not 0.0 <= self.deephit_alpha <= 1.0:
            raise ConfigError("deephit_alpha must be in [0, 1]")
        if self.deephit_sigma <= 0:
            raise ConfigError("deephit_sigma must be positive")

    def to_json_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "dropout": self.dropout,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "learning_rate": self.learning_rate,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
            "activation": self.activation,
            "deephit_alpha": self.deephit_alpha,
            "deephit_sigma": self.deephit_sigma,
            "deephit_bins": self.deephit_bins,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        doc["hidden"] = tuple(doc.get("hidden", (32, 32)))
        return cls(**doc)


def split_train_val(
    data: SurvivalDataset, fraction: float, rng: np.random.Generator
) -> tuple[SurvivalDataset, SurvivalDataset]:
    """Shuffle rows and hold out ``fraction`` of them for validation."""
    n_val = max(1, int(round(data.n * fraction)))
    if n_val >= data.n:
        raise TrainingError(f"validation split leaves no training rows (n={data.n})")
    perm = rng.permutation(data.n)
    return data.subset(np.sort(perm[n_val:])), data.subset(np.sort(perm[:n_val]))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1


def run_epochs(
    net: DenseNet,
    n_train: int,
    cfg: TrainConfig,
    batch_step,
    val_loss_fn,
    rng_shuffle: np.random.Generator,
) -> TrainHistory:
    """Adam + early stopping on validation loss; restores the best parameters.

    ``batch_step(net, idx) -> (loss, grads) | None`` computes one minibatch
    (None skips it, e.g. a batch without events);
    ``val_loss_fn(net) -> float`` scores the held-out rows in eval mode.
    """
    state = AdamState.for_net(net)
    history = TrainHistory()
    best_val = np.inf
    best_params = None
    stall = 0

    for epoch in range(cfg.max_epochs):
        perm = rng_shuffle.permutation(n_train)
        epoch_losses = []
        for start in range(0, n_train, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if idx.size < 2:
                continue  # degenerate tail batch carries no risk-set signal
            result = batch_step(net, idx)
            if result is None:
                continue
            loss, grads = result
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            adam_step(net, grads, state, cfg.learning_rate)
            epoch_losses.append(loss)
        if not epoch_losses:
            raise TrainingError("no usable minibatch in an epoch")
        history.train_loss.append(float(np.mean(epoch_losses)))

        val = float(val_loss_fn(net))
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.val_loss.append(val)

        if val < best_val - 1e-12:
            best_val = val
            best_params = [(l.weight.copy(), l.bias.copy()) for l in net.layers]
            history.best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break

    if best_params is not None:
        for layer, (w, b) in zip(net.layers, best_params):
            layer.weight[...] = w
            layer.bias[...] = b
    return history
