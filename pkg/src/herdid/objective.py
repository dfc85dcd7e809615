"""Similarity matrix, Hungarian pseudo-label mask, and the loss functions
(fixed/learnable-temperature contrastive and sigmoid pairwise) with exact
analytic gradients w.r.t. the similarity matrix and the learnable scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assign import solve_max
from .batching import TrainingBatch
from .errors import ConfigError, DegenerateFeatureError, EmptyPositiveError, ShapeError

# mask entry values
POSITIVE = 1
NEGATIVE = -1
DISCARD = 0

# loss variants
SUPCON_FIXED = "supcon"
SUPCON_LEARNABLE = "supcon-learnable"
BCE = "bce"
VARIANTS = (SUPCON_FIXED, SUPCON_LEARNABLE, BCE)

T_MIN, T_MAX = 0.0, 100.0  # clamp range for the learnable scale
SUPCON_T_INIT = 14.0
BCE_T_INIT = 10.0
BCE_B_INIT = -10.0


@dataclass
class LossParams:
    """Learnable scalars held as 0-d arrays so the optimizer mutates in place."""

    variant: str
    tau: float = 0.5  # fixed-temperature variant only
    t: np.ndarray = field(default=None)
    b: np.ndarray = field(default=None)

    @staticmethod
    def create(variant: str, tau: float = 0.5, dtype=np.float32) -> "LossParams":
        if variant not in VARIANTS:
            raise ConfigError(f"unknown loss variant {variant!r}")
        if variant == SUPCON_FIXED and tau <= 0:
            raise ConfigError(f"tau must be > 0, got {tau}")
        t_init = {SUPCON_FIXED: 0.0, SUPCON_LEARNABLE: SUPCON_T_INIT, BCE: BCE_T_INIT}[variant]
        b_init = BCE_B_INIT if variant == BCE else 0.0
        return LossParams(
            variant=variant,
            tau=tau,
            t=np.asarray(t_init, dtype=dtype),
            b=np.asarray(b_init, dtype=dtype),
        )

    def scale(self) -> float:
        """The logit scale s in effect: 1/tau when fixed, learnable t otherwise."""
        return 1.0 / self.tau if self.variant == SUPCON_FIXED else float(self.t)

    def learnable(self) -> list[tuple[str, np.ndarray]]:
        if self.variant == SUPCON_FIXED:
            return []
        if self.variant == SUPCON_LEARNABLE:
            return [("loss.t", self.t)]
        return [("loss.t", self.t), ("loss.b", self.b)]


@dataclass
class LossResult:
    loss: float
    d_sim: np.ndarray  # (N, N)
    d_t: float
    d_b: float


def similarity(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine scores of the L2-normalized feature rows."""
    f = np.asarray(features)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ShapeError(f"features must be (N>=2, D), got {f.shape}")
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    if not np.all(norms > 0):
        raise DegenerateFeatureError("zero-norm feature row")
    z = f / norms
    return z @ z.T


def similarity_backward(features: np.ndarray, d_sim: np.ndarray) -> np.ndarray:
    """Exact gradient of the similarity matrix w.r.t. the raw features."""
    f = np.asarray(features)
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    z = f / norms
    dz = (d_sim + d_sim.T) @ z
    return (dz - (z * dz).sum(axis=1, keepdims=True) * z) / norms


def build_mask(sim: np.ndarray, batch: TrainingBatch) -> np.ndarray:
    """Per-entry pseudo-labels over one batch's similarity matrix.

    Main diagonal DISCARD; same-crop cross-view entries POSITIVE; remaining
    same-frame entries NEGATIVE; every cross-frame block (per unordered frame
    pair, per view-quadrant combination) gets its maximum-similarity
    assignment marked POSITIVE and is mirrored to the transposed block, so
    the mask is symmetric by construction.
    """
    n = sim.shape[0]
    if n != batch.n_rows:
        raise ShapeError(f"similarity is {sim.shape[0]} rows, batch has {batch.n_rows}")
    half = batch.half
    bounds = batch.block_bounds()
    k = len(batch.frame_counts)

    mask = np.full((n, n), NEGATIVE, dtype=np.int8)
    for a in range(k):
        for b in range(a + 1, k):
            for u in (0, 1):
                for w in (0, 1):
                    r0 = u * half + bounds[a]
                    c0 = w * half + bounds[b]
                    block = sim[r0 : u * half + bounds[a + 1], c0 : w * half + bounds[b + 1]]
                    for i, j in solve_max(block).pairs:
                        mask[r0 + i, c0 + j] = POSITIVE
                        mask[c0 + j, r0 + i] = POSITIVE
    idx = np.arange(half)
    mask[idx, idx + half] = POSITIVE
    mask[idx + half, idx] = POSITIVE
    np.fill_diagonal(mask, DISCARD)
    return mask


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _supcon(sim, mask, scale, learnable):
    n = sim.shape[0]
    pos_i, pos_j = np.nonzero(mask == POSITIVE)
    n_pos = pos_i.size
    if n_pos == 0:
        raise EmptyPositiveError("mask has no positive entries")

    logits = scale * sim
    np.fill_diagonal(logits, -np.inf)  # denominator excludes k = i only
    row_max = logits.max(axis=1, keepdims=True)
    expv = np.exp(logits - row_max)
    denom = expv.sum(axis=1, keepdims=True)
    lse = (row_max + np.log(denom)).ravel()

    loss = float((lse[pos_i] - scale * sim[pos_i, pos_j]).sum() / n_pos)

    softmax = expv / denom  # rows sum to 1, zero diagonal
    pos_per_row = np.bincount(pos_i, minlength=n).astype(sim.dtype)
    d_logits = softmax * pos_per_row[:, None]
    d_logits[pos_i, pos_j] -= 1.0
    d_sim = (scale / n_pos) * d_logits

    d_t = 0.0
    if learnable:
        row_expect = (softmax * sim).sum(axis=1)
        d_t = float((row_expect[pos_i].sum() - sim[pos_i, pos_j].sum()) / n_pos)
    return LossResult(loss=loss, d_sim=d_sim, d_t=d_t, d_b=0.0)


def _bce(sim, mask, t, b):
    n = sim.shape[0]
    scored = mask != DISCARD
    m = mask.astype(sim.dtype)
    z = m * (sim * t + b)
    # -log(sigmoid(z)) = softplus(-z); normalization keeps the full 1/N^2
    loss = float(np.logaddexp(0.0, -z[scored]).sum() / (n * n))
    dz = np.zeros_like(sim)
    dz[scored] = -_sigmoid(-z[scored]) / (n * n)
    d_sim = dz * m * t
    d_t = float((dz * m * sim).sum())
    d_b = float((dz * m).sum())
    return LossResult(loss=loss, d_sim=d_sim, d_t=d_t, d_b=d_b)


def loss_and_grads(sim: np.ndarray, mask: np.ndarray, params: LossParams) -> LossResult:
    """Loss and exact gradients (d_sim, d_t, d_b) for the configured variant.

    Contrastive: each positive (i,j) contributes -log(exp(s*Sim_ij) /
    sum_{k != i} exp(s*Sim_ik)), averaged over positives; s = 1/tau (fixed)
    or the learnable t. Sigmoid pairwise: -(1/N^2) * sum_{i != j}
    log sigmoid(m_ij * (Sim_ij * t + b)) with m = +1 positive, -1 negative.
    """
    if params.variant == SUPCON_FIXED:
        return _supcon(sim, mask, 1.0 / params.tau, learnable=False)
    if params.variant == SUPCON_LEARNABLE:
        return _supcon(sim, mask, float(params.t), learnable=True)
    if params.variant == BCE:
        return _bce(sim, mask, float(params.t), float(params.b))
    raise ConfigError(f"unknown loss variant {params.variant!r}")
