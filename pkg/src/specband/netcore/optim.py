"""Adam with cosine-annealed learning rate."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class TrainConfig:
    alpha: float = 5.0
    learning_rate: float = 1e-4
    epochs: int = 40
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    original_pair_loss: str = "both"
    # fraction of all steps over which alpha ramps linearly up from 0
    alpha_warmup: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.alpha_warmup <= 1:
            raise ValueError(f"alpha_warmup must be in [0, 1], got {self.alpha_warmup}")
        if self.original_pair_loss not in ("both", "cls_only", "none"):
            raise ValueError(f"unknown original_pair_loss {self.original_pair_loss!r}")


def alpha_at(config, step, total_steps):
    """Consistency weight at 1-based ``step``."""
    ramp = config.alpha_warmup * total_steps
    if ramp <= 0 or step >= ramp:
        return config.alpha
    return config.alpha * step / ramp


def cosine_lr(lr0, step, total_steps):
    """Learning rate at 1-based ``step`` of ``total_steps``; reaches 0 at the last step."""
    if total_steps <= 0:
        return lr0
    t = min(step, total_steps)
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total_steps))


def adam_step(params, grads, state, config, step, total_steps):
    """In-place Adam update of ``params`` (arrays) from ``grads``.

    ``state`` is a dict holding the first/second moment lists; it is created
    on the first call. ``step`` is 1-based.
    """
    if step < 1:
        raise ValueError("step index starts at 1")
    if not state:
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    lr = cosine_lr(config.learning_rate, step, total_steps)
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** step
    bc2 = 1.0 - b2 ** step
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if config.weight_decay:
            g = g + config.weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if lr == 0.0:
            continue
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return lr


class Adam:
    """Adam over autograd parameters with a fixed total step budget."""

    def __init__(self, params, config, total_steps):
        self.params = list(params)
        self.config = config
        self.total_steps = total_steps
        self.step_index = 0
        self.state = {}

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_index += 1
        return adam_step([p.value for p in self.params], [p.grad for p in self.params],
                         self.state, self.config, self.step_index, self.total_steps)
