"""Mini-batch training loop with per-epoch checkpoints and a CSV loss log."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..rng import Rng
from .layers import Network, NetworkSpec, build_network
from .loss import bce_loss
from .optim import SGD, TrainConfig
from .weights_io import save_weights

__all__ = ["EmptyDataset", "TrainResult", "train", "write_loss_log"]


class EmptyDataset(Exception):
    pass


@dataclass
class TrainResult:
    network: Network
    log: list[tuple[int, float, float]]  # (epoch, lr, mean loss)
    step_losses: list[float]


def train(
    dataset,
    spec: NetworkSpec,
    config: TrainConfig,
    checkpoint_dir=None,
    grid_info: dict | None = None,
    progress=None,
) -> TrainResult:
    """Train a fresh network on `dataset`.

    `dataset` supplies ``len(dataset)`` and ``batch(indices) -> (x, y)`` with
    x shaped (b, C, S, S) and y (b, out_width). Batches are reshuffled each
    epoch from a seeded stream, so a (seed, dataset, config) triple fully
    determines the run.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("training dataset is empty")
    dtype = config.np_dtype()
    rng = Rng(config.seed)
    network = build_network(spec, rng.child("init"), dtype=dtype)
    opt = SGD([p for _, p in network.parameters()], config)
    log: list[tuple[int, float, float]] = []
    step_losses: list[float] = []
    for epoch in range(config.epochs):
        order = rng.child(f"epoch/{epoch}").np.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x, y = dataset.batch(idx)
            x = np.ascontiguousarray(x, dtype=dtype)
            y = np.ascontiguousarray(y, dtype=dtype)
            pred = network.forward(x)
            loss, grad = bce_loss(pred, y)
            network.backward(grad)
            opt.step(network.gradients(), epoch)
            total += loss
            batches += 1
            step_losses.append(loss)
            if progress is not None:
                progress(epoch, batches, loss)
        log.append((epoch, config.lr(epoch), total / batches))
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"epoch_{epoch:03d}.gfnn"
            save_weights(path, network, grid_info, {"train": config.to_dict(), "epoch": epoch})
    return TrainResult(network, log, step_losses)


def write_loss_log(path, log: list[tuple[int, float, float]]) -> None:
    rows = ["epoch,lr,mean_loss"]
    rows += [f"{e},{lr:.9g},{loss:.9g}" for e, lr, loss in log]
    Path(path).write_text("\n".join(rows) + "\n")
