"""SGD with momentum and per-epoch exponential learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TrainConfig", "SGD"]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    momentum: float = 0.9
    lr0: float = 0.01
    lr_decay: float = 0.96
    epochs: int = 2
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValueError("lr_decay must be in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    def lr(self, epoch: int) -> float:
        return self.lr0 * self.lr_decay**epoch

    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "momentum": self.momentum,
            "lr0": self.lr0,
            "lr_decay": self.lr_decay,
            "epochs": self.epochs,
            "seed": self.seed,
            "dtype": self.dtype,
        }


class SGD:
    """v <- momentum * v + g;  w <- w - lr(epoch) * v."""

    def __init__(self, params: list[np.ndarray], config: TrainConfig):
        self.params = params
        self.config = config
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray], epoch: int) -> None:
        lr = self.config.lr(epoch)
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.config.momentum
            v += g
            p -= lr * v
