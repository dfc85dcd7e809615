"""Training-batch construction: sample K frames, gather their detections,
pick 2 stored views per detection, and record block structure for the mask.

Row layout: [all view-1 rows grouped by frame | all view-2 rows in identical
order], so the four N/2 x N/2 corners of the similarity matrix are exactly
the view quadrants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .store import EmbeddingDataset


@dataclass
class BatchSpec:
    frames_per_batch: int  # K >= 2
    rng: np.random.Generator  # sampling stream, owned by the trainer

    def validate(self):
        if self.frames_per_batch < 2:
            raise ConfigError(f"frames_per_batch must be >= 2, got {self.frames_per_batch}")


@dataclass
class TrainingBatch:
    features: np.ndarray  # (N, D) float32
    frame_ids: np.ndarray  # (K,) sampled frames, in sampled order
    frame_counts: np.ndarray  # (K,) detections per sampled frame
    record_rows: np.ndarray  # (N/2,) dataset row per half-row
    view_picks: np.ndarray  # (N/2, 2) stored-view index feeding half 1 / half 2

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def half(self) -> int:
        return self.n_rows // 2

    @property
    def frame_slots(self) -> np.ndarray:
        """Frame slot (0..K-1) per half-row; applies to both halves."""
        return np.repeat(np.arange(len(self.frame_counts)), self.frame_counts)

    def block_bounds(self) -> np.ndarray:
        """Row offsets of each frame's block within a half: bounds[i]..bounds[i+1]."""
        return np.concatenate([[0], np.cumsum(self.frame_counts)])


def build_batch(dataset: EmbeddingDataset, frame_ids, rng: np.random.Generator) -> TrainingBatch:
    """Assemble the two-view batch for the given frames (in the given order)."""
    rows = []
    counts = []
    for fid in frame_ids:
        a, b = dataset.frame_rows(int(fid))
        rows.append(np.arange(a, b))
        counts.append(b - a)
    record_rows = np.concatenate(rows)
    half = record_rows.size
    v = dataset.views_per_detection
    picks = np.empty((half, 2), dtype=np.int64)
    for i in range(half):
        picks[i] = rng.permutation(v)[:2]
    first = dataset.views[record_rows, picks[:, 0]]
    second = dataset.views[record_rows, picks[:, 1]]
    return TrainingBatch(
        features=np.concatenate([first, second], axis=0),
        frame_ids=np.asarray(frame_ids, dtype=np.uint64),
        frame_counts=np.asarray(counts, dtype=np.int64),
        record_rows=record_rows,
        view_picks=picks,
    )


def sample_batch(dataset: EmbeddingDataset, spec: BatchSpec) -> TrainingBatch:
    """K distinct frames drawn uniformly without replacement from frames with
    at least one detection; advances the spec's sampling stream."""
    spec.validate()
    usable = np.array(dataset.frames, dtype=np.uint64)
    k = spec.frames_per_batch
    if usable.size < k:
        raise InsufficientDataError(
            f"need {k} frames with detections, dataset has {usable.size}"
        )
    chosen = spec.rng.choice(usable, size=k, replace=False)
    return build_batch(dataset, chosen, spec.rng)


def epoch_frame_groups(frames, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """One epoch's frame groups: a fresh shuffle chunked into ceil(F/K) groups
    of K distinct frames. The ragged tail is topped up with frames re-drawn
    from the already-consumed part of the shuffle."""
    frames = np.asarray(frames, dtype=np.uint64)
    if frames.size < k:
        raise InsufficientDataError(f"need {k} frames with detections, got {frames.size}")
    order = rng.permutation(frames)
    groups = []
    for pos in range(0, frames.size, k):
        group = order[pos : pos + k]
        short = k - group.size
        if short > 0:
            group = np.concatenate([group, rng.choice(order[:pos], size=short, replace=False)])
        groups.append(group)
    return groups
