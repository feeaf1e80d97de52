"""Mini-batch SGD with momentum, weight decay, and cosine-annealed rates.

Each step samples a batch from a per-epoch shuffle, runs the mode's forward
pass, reduces the combined loss to a batch mean, and applies one momentum-SGD
update with separate learning rates for the backbone and the heads.  The whole
loop is deterministic per (seed, config, dataset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Gradients, Tape, Tensor
from .data import Dataset
from .errors import (
    HierarchyMismatch,
    ModeMismatch,
    NegativeLambda,
    NumericalError,
    ShapeMismatch,
    StepOutOfRange,
)
from .evaluation import MetricsReport, evaluate
from .losses import DEFAULT_LAMBDA, LossBreakdown, batch_losses
from .model import MODES, LhtModel

__all__ = [
    "TrainConfig",
    "StepRecord",
    "TrainResult",
    "cosine_lr",
    "sgd_step",
    "MomentumSGD",
    "train",
]


@dataclass(frozen=True)
class TrainConfig:
    """One training run's knobs.

    Defaults target the bundled synthetic benchmark on a single CPU core; the
    head rate is 10x the backbone rate and both decay to 0 on a cosine.
    """

    mode: str = "lht_f2c"
    batch_size: int = 64
    epochs: int = 80
    max_steps: int | None = None  # overrides epochs when set
    lr_backbone: float = 0.01
    lr_heads: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lam: float = DEFAULT_LAMBDA
    seed: int = 0
    eval_every: int = 0           # 0 disables mid-training evaluation

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ModeMismatch(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 0 or (self.max_steps is not None and self.max_steps < 0):
            raise ValueError("epochs and max_steps must be nonnegative")
        if min(self.lr_backbone, self.lr_heads, self.momentum, self.weight_decay) < 0:
            raise ValueError("learning rates, momentum, and weight decay must be nonnegative")
        if self.lam < 0:
            raise NegativeLambda(f"lambda must be nonnegative, got {self.lam}")
        if self.eval_every < 0:
            raise ValueError(f"eval_every must be nonnegative, got {self.eval_every}")


def cosine_lr(step: int, max_steps: int, lr0: float) -> float:
    """lr0 * (1 + cos(pi * step / max_steps)) / 2, reaching 0 at max_steps."""
    if step < 0 or step > max_steps:
        raise StepOutOfRange(f"step {step} outside [0, {max_steps}]")
    if max_steps == 0:
        return lr0
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / max_steps))


def sgd_step(
    param: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One momentum update with coupled weight decay.

    v <- momentum * v + grad + weight_decay * param; param <- param - lr * v.
    """
    if param.shape != grad.shape or param.shape != velocity.shape:
        raise ShapeMismatch(
            f"parameter {param.shape}, gradient {grad.shape}, and velocity "
            f"{velocity.shape} shapes must agree"
        )
    v = momentum * velocity + grad + weight_decay * param
    return param - lr * v, v


class MomentumSGD:
    """Velocity buffers plus per-group learning-rate application."""

    def __init__(self, model: LhtModel, momentum: float = 0.9, weight_decay: float = 0.0) -> None:
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self._entries = model.parameter_entries()
        self._velocity = {name: np.zeros_like(t.data) for name, t, _ in self._entries}
        self.step_count = 0

    def step(self, grads: Gradients, lr_by_group: dict[str, float]) -> None:
        for name, tensor, group in self._entries:
            tensor.data, self._velocity[name] = sgd_step(
                tensor.data,
                grads.wrt(tensor),
                self._velocity[name],
                lr_by_group[group],
                self.momentum,
                self.weight_decay,
            )
        self.step_count += 1


@dataclass(frozen=True)
class StepRecord:
    step: int
    lr_backbone: float
    lr_heads: float
    losses: LossBreakdown


@dataclass
class TrainResult:
    history: list[StepRecord]
    evals: list[tuple[int, MetricsReport]]

    @property
    def final_losses(self) -> LossBreakdown | None:
        return self.history[-1].losses if self.history else None


def train(
    model: LhtModel,
    train_data: Dataset,
    config: TrainConfig,
    *,
    eval_data: Dataset | None = None,
) -> TrainResult:
    """Run the configured number of steps, mutating the model's parameters.

    Batches come from a fresh permutation each epoch (the trailing partial
    batch is kept).  Numerical failures are re-raised with the step index.
    """
    config.validate()
    if model.mode != config.mode:
        raise ModeMismatch(f"config mode {config.mode!r} does not match model mode {model.mode!r}")
    if model.hierarchy.sha256() != train_data.hierarchy.sha256():
        raise HierarchyMismatch("model and training data use different hierarchies")
    n = len(train_data)
    if n == 0:
        raise ShapeMismatch("cannot train on an empty dataset")
    steps_per_epoch = math.ceil(n / config.batch_size)
    total = config.max_steps if config.max_steps is not None else config.epochs * steps_per_epoch
    rng = np.random.Generator(np.random.PCG64(config.seed))
    optimizer = MomentumSGD(model, config.momentum, config.weight_decay)
    history: list[StepRecord] = []
    evals: list[tuple[int, MetricsReport]] = []
    features, labels = train_data.features, train_data.labels
    step = 0
    while step < total:
        order = rng.permutation(n)
        for b in range(steps_per_epoch):
            if step >= total:
                break
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            lr_b = cosine_lr(step, total, config.lr_backbone)
            lr_h = cosine_lr(step, total, config.lr_heads)
            try:
                with Tape() as tape:
                    chain = model.forward(Tensor(features[idx]))
                    objective, breakdown = batch_losses(chain, labels[idx], config.lam)
                    grads = tape.gradients(objective)
            except NumericalError as err:
                raise NumericalError(f"step {step}: {err}") from err
            optimizer.step(grads, {"backbone": lr_b, "heads": lr_h})
            history.append(StepRecord(step, lr_b, lr_h, breakdown))
            step += 1
            if eval_data is not None and config.eval_every and step % config.eval_every == 0:
                evals.append((step, evaluate(model, eval_data)))
    return TrainResult(history, evals)
