"""SGD with momentum, cosine-annealed learning rate, and scalar clamping.

Update convention: v <- mu*v + g, p <- p - lr*v, then clamp any parameter
with declared bounds (the learnable logit scale stays in [0, 100]).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, UsageError
from .store import EmbeddingDataset


def lr_at(step: int, total_steps: int, base_lr: float) -> float:
    if total_steps <= 0:
        raise ConfigError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside 0..{total_steps}")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * step / total_steps))


def nominal_batch_size(dataset: EmbeddingDataset, frames_per_batch: int) -> int:
    """K * (max detections per frame) * 2; the full-visibility batch size the
    paper's lr rule assumes even though actual batches are dynamic."""
    max_dets = max(b - a for a, b in dataset.frame_index.values())
    return frames_per_batch * max_dets * 2


def base_lr_for(nominal_batch: int) -> float:
    return 0.3 * nominal_batch / 256.0


class SGD:
    def __init__(self, params, base_lr, total_steps, momentum=0.9, weight_decay=0.0,
                 clamps=None):
        self.params = list(params)  # (name, array) pairs, arrays updated in place
        self.velocity = {name: np.zeros_like(p) for name, p in self.params}
        self.base_lr = float(base_lr)
        self.total_steps = int(total_steps)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.clamps = dict(clamps or {})
        self.step_count = 0
        if self.total_steps <= 0:
            raise ConfigError(f"total_steps must be positive, got {total_steps}")

    def current_lr(self) -> float:
        return lr_at(self.step_count, self.total_steps, self.base_lr)

    def step(self, grads: dict[str, np.ndarray]) -> float:
        """One update from the given gradients; returns the lr used."""
        lr = self.current_lr()
        for name, p in self.params:
            if name not in grads:
                raise UsageError(f"missing gradient for {name!r}")
            g = np.asarray(grads[name], dtype=p.dtype)
            if g.shape != p.shape:
                raise UsageError(f"{name}: gradient shape {g.shape} != param {p.shape}")
            if self.weight_decay:
                g = g + self.weight_decay * p
            v = self.velocity[name]
            v *= self.momentum
            v += g
            p -= lr * v
            if name in self.clamps:
                lo, hi = self.clamps[name]
                np.clip(p, lo, hi, out=p)
        self.step_count += 1
        return lr

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Velocity buffers plus counters, for checkpointing."""
        out = [(f"velocity.{name}", v) for name, v in self.velocity.items()]
        out.append(("step_count", np.asarray(self.step_count, dtype=np.int64)))
        out.append(("total_steps", np.asarray(self.total_steps, dtype=np.int64)))
        out.append(("base_lr", np.asarray(self.base_lr, dtype=np.float64)))
        return out

    def load_state_arrays(self, state: dict[str, np.ndarray]):
        for name, v in self.velocity.items():
            key = f"velocity.{name}"
            if key in state:
                v[...] = state[key]
        self.step_count = int(state.get("step_count", self.step_count))
