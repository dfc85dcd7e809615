"""Trainable projection MLP: affine(D->256)+BN+ReLU, affine(256->128)+BN+ReLU,
affine(128->128)+BN+ReLU, affine(128->64).

Forward and backward passes are differentiated by hand; the backward pass is
exact, including the batch-statistics pathway of train-mode batch norm.
Arithmetic is generic over float32 (production) and float64 (test oracles).

A head is exclusively owned during train steps (it mutates cached activations
and running statistics); eval-mode forward is read-only and shareable.
"""

from __future__ import annotations

import numpy as np

from .errors import BatchSizeError, ShapeError, UsageError

HIDDEN_DIMS = (256, 128, 128)
OUTPUT_DIM = 64

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Affine:
    """y = x @ W.T + b with fan-in-scaled uniform weights and zero biases."""

    def __init__(self, in_dim, out_dim, rng, dtype):
        bound = 1.0 / np.sqrt(in_dim)
        self.weight = rng.uniform(-bound, bound, (out_dim, in_dim)).astype(dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)

    def forward(self, x):
        return x @ self.weight.T + self.bias

    def backward(self, x, dy):
        dw = dy.T @ x
        db = dy.sum(axis=0)
        dx = dy @ self.weight
        return dx, dw, db

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class BatchNorm:
    """1-D batch norm. Train mode normalizes with batch statistics (biased
    variance) and updates running stats (unbiased variance, momentum 0.1);
    eval mode normalizes with running statistics only."""

    def __init__(self, dim, dtype):
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)

    def forward_train(self, x, update_stats=True):
        b = x.shape[0]
        mean = x.mean(axis=0)
        var = x.var(axis=0)  # biased, used for normalization
        istd = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mean) * istd
        if update_stats:
            unbiased = var * (b / (b - 1))
            self.running_mean += BN_MOMENTUM * (mean - self.running_mean)
            self.running_var += BN_MOMENTUM * (unbiased - self.running_var)
        return self.gamma * xhat + self.beta, (xhat, istd)

    def forward_eval(self, x):
        istd = 1.0 / np.sqrt(self.running_var + BN_EPS)
        return self.gamma * (x - self.running_mean) * istd + self.beta

    def backward(self, cache, dy):
        xhat, istd = cache
        b = xhat.shape[0]
        dgamma = (dy * xhat).sum(axis=0)
        dbeta = dy.sum(axis=0)
        dxhat = dy * self.gamma
        dx = (istd / b) * (
            b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        return dx, dgamma, dbeta

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class ProjectionHead:
    def __init__(self, input_dim: int, seed: int = 0, dtype=np.float32):
        if input_dim < 1:
            raise ShapeError(f"input_dim must be >= 1, got {input_dim}")
        self.input_dim = input_dim
        self.dtype = np.dtype(dtype)
        rng = np.random.Generator(np.random.PCG64(seed))
        dims = (input_dim,) + HIDDEN_DIMS + (OUTPUT_DIM,)
        self.affines = [Affine(dims[i], dims[i + 1], rng, self.dtype) for i in range(4)]
        self.norms = [BatchNorm(dims[i + 1], self.dtype) for i in range(3)]
        self.training = True
        self._cache = None

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        self._cache = None
        return self

    def forward(self, batch: np.ndarray, update_stats: bool = True) -> np.ndarray:
        x = np.asarray(batch, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"batch must be (B, {self.input_dim}), got {x.shape}")
        if not self.training:
            for i in range(3):
                x = np.maximum(self.norms[i].forward_eval(self.affines[i].forward(x)), 0)
            return self.affines[3].forward(x)

        if x.shape[0] < 2:
            raise BatchSizeError("train mode needs a batch of at least 2 rows")
        cache = {"input": x}
        for i in range(3):
            z = self.affines[i].forward(x)
            y, bn_cache = self.norms[i].forward_train(z, update_stats=update_stats)
            cache[f"x{i}"] = x
            cache[f"bn{i}"] = bn_cache
            cache[f"pre_relu{i}"] = y
            x = np.maximum(y, 0)
        cache["x3"] = x
        self._cache = cache
        return self.affines[3].forward(x)

    def backward(self, upstream_grad: np.ndarray) -> dict[str, np.ndarray]:
        """Exact parameter gradients for the train-mode forward that produced
        the cached activations. Keys match named_parameters()."""
        if self._cache is None:
            raise UsageError("backward requires a preceding train-mode forward")
        cache = self._cache
        dy = np.asarray(upstream_grad, dtype=self.dtype)
        if dy.shape != (cache["x3"].shape[0], OUTPUT_DIM):
            raise ShapeError(f"upstream_grad must be (B, {OUTPUT_DIM}), got {dy.shape}")

        grads: dict[str, np.ndarray] = {}
        dx, dw, db = self.affines[3].backward(cache["x3"], dy)
        grads["fc4.weight"] = dw
        grads["fc4.bias"] = db
        for i in (2, 1, 0):
            dx = dx * (cache[f"pre_relu{i}"] > 0)
            dx, dgamma, dbeta = self.norms[i].backward(cache[f"bn{i}"], dx)
            grads[f"bn{i + 1}.gamma"] = dgamma
            grads[f"bn{i + 1}.beta"] = dbeta
            dx, dw, db = self.affines[i].backward(cache[f"x{i}"], dx)
            grads[f"fc{i + 1}.weight"] = dw
            grads[f"fc{i + 1}.bias"] = db
        return grads

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, aff in enumerate(self.affines):
            for name, arr in aff.params():
                out.append((f"fc{i + 1}.{name}", arr))
        for i, bn in enumerate(self.norms):
            for name, arr in bn.params():
                out.append((f"bn{i + 1}.{name}", arr))
        return out

    def named_state(self) -> list[tuple[str, np.ndarray]]:
        """Parameters plus batch-norm running statistics (checkpoint payload)."""
        out = self.named_parameters()
        for i, bn in enumerate(self.norms):
            for name, arr in bn.state():
                out.append((f"bn{i + 1}.{name}", arr))
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.named_state()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, arr in self.named_state():
            if name not in state:
                raise UsageError(f"state is missing tensor {name!r}")
            src = np.asarray(state[name], dtype=self.dtype)
            if src.shape != arr.shape:
                raise ShapeError(f"{name}: expected shape {arr.shape}, got {src.shape}")
            arr[...] = src

    def num_parameters(self) -> int:
        return sum(arr.size for _, arr in self.named_parameters())


def init(input_dim: int, seed: int = 0, dtype=np.float32) -> ProjectionHead:
    """Fresh head; affine weights fan-in uniform, biases zero, BN scale 1 /
    shift 0 / running mean 0 / running var 1. Deterministic given seed."""
    return ProjectionHead(input_dim, seed=seed, dtype=dtype)


def expected_num_parameters(input_dim: int) -> int:
    dims = (input_dim,) + HIDDEN_DIMS + (OUTPUT_DIM,)
    affine = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(4))
    bn = sum(2 * dims[i + 1] for i in range(3))
    return affine + bn
