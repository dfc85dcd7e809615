"""Synthetic herd-video generator with known ground truth.

Identities are unit-norm prototype vectors; per-frame appearance drift and
per-view augmentation noise are isotropic Gaussians re-normalized to the unit
sphere. The random stream is PCG64 (numpy Generator) seeded explicitly, so a
config reproduces its dataset bit-for-bit on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .store import EmbeddingDataset


@dataclass
class SimConfig:
    n_identities: int
    n_frames: int
    embedding_dim: int = 512
    views_per_detection: int = 2
    identity_noise_sigma: float = 0.05  # per-frame appearance drift
    view_noise_sigma: float = 0.1  # augmentation analogue
    visibility_prob: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_identities < 2:
            raise ConfigError(f"n_identities must be >= 2, got {self.n_identities}")
        if self.n_frames < 2:
            raise ConfigError(f"n_frames must be >= 2, got {self.n_frames}")
        if self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        if self.views_per_detection < 2:
            raise ConfigError("views_per_detection must be >= 2")
        for name in ("identity_noise_sigma", "view_noise_sigma"):
            sigma = getattr(self, name)
            if not np.isfinite(sigma) or sigma < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {sigma}")
        if not (0.0 < self.visibility_prob <= 1.0):
            raise ConfigError(f"visibility_prob must be in (0, 1], got {self.visibility_prob}")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate(config: SimConfig) -> EmbeddingDataset:
    """Deterministic synthetic dataset: per frame, each identity is visible with
    probability p_vis; each visible detection carries V noisy views of its
    drifted prototype. gt_label is the identity index."""
    config.validate()
    n_id = config.n_identities
    d = config.embedding_dim
    v = config.views_per_detection
    rng = np.random.Generator(np.random.PCG64(config.seed))

    prototypes = _unit_rows(rng.standard_normal((n_id, d)))

    frame_ids = []
    det_idx = []
    gt = []
    views = []
    for frame in range(config.n_frames):
        visible = rng.random(n_id) < config.visibility_prob
        slot = 0
        for identity in range(n_id):
            if not visible[identity]:
                continue
            proto = prototypes[identity]
            if config.identity_noise_sigma > 0:
                base = _unit_rows(proto + rng.normal(0.0, config.identity_noise_sigma, d))
            else:
                base = proto  # exact: zero drift keeps the prototype bit-identical
            if config.view_noise_sigma > 0:
                vv = _unit_rows(base + rng.normal(0.0, config.view_noise_sigma, (v, d)))
            else:
                vv = np.broadcast_to(base, (v, d))
            frame_ids.append(frame)
            det_idx.append(slot)
            gt.append(identity)
            views.append(np.asarray(vv, dtype=np.float32))
            slot += 1

    m = len(frame_ids)
    return EmbeddingDataset(
        frame_ids=np.array(frame_ids, dtype=np.uint64),
        detection_idx=np.array(det_idx, dtype=np.uint32),
        gt_labels=np.array(gt, dtype=np.int32),
        views=np.stack(views) if m else np.zeros((0, v, d), dtype=np.float32),
        n_identities=n_id,
    )
