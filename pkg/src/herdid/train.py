"""Training orchestration: the self-supervised loop (sample -> project ->
similarity -> Hungarian mask -> loss -> SGD) and the supervised cross-entropy
baseline with early stopping.

The self-supervised path never reads ground-truth labels: it trains on a
label-stripped dataset view, so poisoned labels cannot change its trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .batching import build_batch, epoch_frame_groups
from .errors import ConfigError, EmptyPositiveError
from .head import Affine, ProjectionHead
from .objective import (
    BCE,
    LossParams,
    T_MAX,
    T_MIN,
    VARIANTS,
    build_mask,
    loss_and_grads,
    similarity,
    similarity_backward,
)
from .optim import SGD, base_lr_for, nominal_batch_size
from .store import EmbeddingDataset


@dataclass
class TrainConfig:
    epochs: int = 10
    frames_per_batch: int = 2
    loss_variant: str = BCE
    tau: float = 0.5  # fixed-temperature contrastive only
    seed: int = 0
    eval_every: int = 0  # extra running-mean-loss log records every N batches; 0 = off
    supervised: bool = False
    train_frames: int = 0  # supervised split sizes (frames); remainder is test
    val_frames: int = 0
    patience: int = 10

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.frames_per_batch < 2:
            raise ConfigError(f"frames_per_batch must be >= 2, got {self.frames_per_batch}")
        if self.loss_variant not in VARIANTS:
            raise ConfigError(f"unknown loss variant {self.loss_variant!r}")
        if self.supervised and (self.train_frames < 1 or self.val_frames < 1):
            raise ConfigError("supervised mode needs train_frames and val_frames >= 1")


@dataclass
class TrainResult:
    head: ProjectionHead
    loss_params: LossParams
    optimizer: SGD
    log: list[dict] = field(default_factory=list)
    classifier: Affine | None = None  # supervised only
    splits: dict[str, np.ndarray] | None = None  # supervised only
    best_epoch: int | None = None  # supervised only


def steps_per_epoch(n_usable_frames: int, k: int) -> int:
    return math.ceil(n_usable_frames / k)


def train_selfsup(dataset: EmbeddingDataset, head: ProjectionHead,
                  config: TrainConfig) -> TrainResult:
    config.validate()
    ds = dataset.without_labels()  # structural label blindness
    k = config.frames_per_batch
    frames = np.array(ds.frames, dtype=np.uint64)
    per_epoch = steps_per_epoch(frames.size, k)
    total_steps = config.epochs * per_epoch

    loss_params = LossParams.create(config.loss_variant, tau=config.tau, dtype=head.dtype)
    params = head.named_parameters() + loss_params.learnable()
    opt = SGD(
        params,
        base_lr=base_lr_for(nominal_batch_size(ds, k)),
        total_steps=total_steps,
        momentum=0.9,
        weight_decay=0.0,
        clamps={"loss.t": (T_MIN, T_MAX)},
    )

    rng = np.random.Generator(np.random.PCG64(config.seed))
    head.train()
    log: list[dict] = []
    step = 0
    window: list[float] = []
    for epoch in range(config.epochs):
        for group in epoch_frame_groups(frames, k, rng):
            batch = build_batch(ds, group, rng)
            out = head.forward(batch.features)
            sim = similarity(out)
            mask = build_mask(sim, batch)
            try:
                res = loss_and_grads(sim, mask, loss_params)
            except EmptyPositiveError as e:
                raise EmptyPositiveError(
                    f"step {step} (epoch {epoch}, frames {group.tolist()}): {e}"
                ) from e
            grads = head.backward(similarity_backward(out, res.d_sim))
            for name, _ in loss_params.learnable():
                grads[name] = np.asarray(res.d_t if name == "loss.t" else res.d_b,
                                         dtype=head.dtype)
            lr = opt.step(grads)
            log.append({
                "step": step,
                "epoch": epoch,
                "loss": float(res.loss),
                "lr": float(lr),
                "t": float(loss_params.scale()),
                "b": float(loss_params.b),
            })
            window.append(float(res.loss))
            step += 1
            if config.eval_every and step % config.eval_every == 0:
                log.append({"step": step, "epoch": epoch,
                            "mean_loss": float(np.mean(window))})
                window.clear()
    return TrainResult(head=head, loss_params=loss_params, optimizer=opt, log=log)


# -- supervised baseline -------------------------------------------------------


def _cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean CE and its exact logit gradient."""
    n = logits.shape[0]
    m = logits.max(axis=1, keepdims=True)
    expv = np.exp(logits - m)
    denom = expv.sum(axis=1, keepdims=True)
    lse = (m + np.log(denom)).ravel()
    loss = float((lse - logits[np.arange(n), labels]).mean())
    d = expv / denom
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def split_frames(frames: np.ndarray, train_n: int, val_n: int,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    if train_n + val_n >= frames.size:
        raise ConfigError(
            f"splits need train+val < usable frames ({frames.size}), "
            f"got {train_n}+{val_n}"
        )
    order = rng.permutation(frames)
    return {
        "train": np.sort(order[:train_n]),
        "val": np.sort(order[train_n : train_n + val_n]),
        "test": np.sort(order[train_n + val_n :]),
    }


def _eval_split_loss(dataset, head, classifier, frames, chunk=2048) -> float:
    """Eval-mode cross entropy over every stored view of the split's detections."""
    head.eval()
    rows = np.concatenate([np.arange(*dataset.frame_rows(int(f))) for f in frames])
    v = dataset.views_per_detection
    labels = np.repeat(dataset.gt_labels[rows], v)
    flat = dataset.views[rows].reshape(-1, dataset.embedding_dim)
    total = 0.0
    for a in range(0, flat.shape[0], chunk):
        out = head.forward(flat[a : a + chunk])
        logits = classifier.forward(out)
        loss, _ = _cross_entropy(logits, labels[a : a + chunk])
        total += loss * min(chunk, flat.shape[0] - a)
    head.train()
    return total / flat.shape[0]


def train_supervised(dataset: EmbeddingDataset, head: ProjectionHead,
                     config: TrainConfig) -> TrainResult:
    """Same architecture, optimizer, and batch construction as the
    self-supervised path, plus an affine 64 -> N_ID classifier trained with
    cross entropy on ground truth; early-stops on val loss and returns the
    best-val-epoch parameters."""
    config.validate()
    if not dataset.has_labels():
        raise ConfigError("supervised training needs ground-truth labels on every record")
    if dataset.n_identities is None:
        raise ConfigError("supervised training needs a known identity count")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    splits = split_frames(np.array(dataset.frames, dtype=np.uint64),
                          config.train_frames, config.val_frames, rng)
    k = config.frames_per_batch
    if splits["train"].size < k:
        raise ConfigError(f"train split smaller than frames_per_batch={k}")

    classifier = Affine(64, dataset.n_identities, rng, head.dtype)
    loss_params = LossParams.create(config.loss_variant, tau=config.tau, dtype=head.dtype)
    params = head.named_parameters() + [("clf.weight", classifier.weight),
                                        ("clf.bias", classifier.bias)]
    per_epoch = steps_per_epoch(splits["train"].size, k)
    opt = SGD(
        params,
        base_lr=base_lr_for(nominal_batch_size(dataset, k)),
        total_steps=config.epochs * per_epoch,
        momentum=0.9,
        weight_decay=0.0,
    )

    head.train()
    log: list[dict] = []
    best_val = math.inf
    best_epoch = -1
    best_state: dict[str, np.ndarray] = {}
    since_improve = 0
    step = 0
    for epoch in range(config.epochs):
        for group in epoch_frame_groups(splits["train"], k, rng):
            batch = build_batch(dataset, group, rng)
            labels = np.tile(dataset.gt_labels[batch.record_rows], 2)
            out = head.forward(batch.features)
            logits = classifier.forward(out)
            loss, d_logits = _cross_entropy(logits, labels)
            d_out, dw, db = classifier.backward(out, d_logits.astype(head.dtype))
            grads = head.backward(d_out)
            grads["clf.weight"] = dw
            grads["clf.bias"] = db
            lr = opt.step(grads)
            log.append({"step": step, "epoch": epoch, "loss": float(loss),
                        "lr": float(lr)})
            step += 1
        val_loss = _eval_split_loss(dataset, head, classifier, splits["val"])
        log.append({"epoch": epoch, "val_loss": float(val_loss)})
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = head.state_dict()
            best_state["clf.weight"] = classifier.weight.copy()
            best_state["clf.bias"] = classifier.bias.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.patience:
                break

    head.load_state_dict({k: v for k, v in best_state.items() if not k.startswith("clf.")})
    classifier.weight[...] = best_state["clf.weight"]
    classifier.bias[...] = best_state["clf.bias"]
    return TrainResult(head=head, loss_params=loss_params, optimizer=opt, log=log,
                       classifier=classifier, splits=splits, best_epoch=best_epoch)


def classify(dataset: EmbeddingDataset, head: ProjectionHead, classifier: Affine,
             frames, chunk=2048) -> tuple[np.ndarray, np.ndarray]:
    """Per-detection predictions on the given frames: mean view logits, argmax.
    Returns (dataset rows, predicted labels)."""
    head.eval()
    rows = np.concatenate([np.arange(*dataset.frame_rows(int(f))) for f in frames])
    v = dataset.views_per_detection
    flat = dataset.views[rows].reshape(-1, dataset.embedding_dim)
    logits = np.empty((flat.shape[0], classifier.bias.size), dtype=head.dtype)
    for a in range(0, flat.shape[0], chunk):
        logits[a : a + chunk] = classifier.forward(head.forward(flat[a : a + chunk]))
    pooled = logits.reshape(rows.size, v, -1).mean(axis=1)
    return rows, pooled.argmax(axis=1).astype(np.int32)
