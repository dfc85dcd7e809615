"""Detection-embedding data model and the HERDEMB1 on-disk container.

Layout (little-endian):
  header  = magic "HERDEMB\\x01" | u32 D | u32 V | u32 N_ID (0 = unknown)
            | u32 reserved=0 | u64 num_records            (32 bytes)
  record  = u64 frame_id | u32 detection_idx | i32 gt_label (-1 = unknown)
            | V*D float32                                 (16 + 4*V*D bytes)

Records are stored sorted by (frame_id, detection_idx). Datasets are
read-only after load and safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator

import numpy as np

from .errors import (
    DataError,
    DuplicateRecordError,
    FormatError,
    InvariantError,
    LengthError,
)

MAGIC = b"HERDEMB\x01"
HEADER_SIZE = 32
HEADER_FMT = "<8sIIIIQ"

UNKNOWN = -1  # gt_label sentinel; n_identities uses None in memory / 0 on disk

_READ_CHUNK = 64 * 1024 * 1024  # cap per-read allocation while streaming records


@dataclass
class DetectionRecord:
    """One bounding-boxed animal instance in one frame, as V embedding views."""

    frame_id: int
    detection_idx: int
    gt_label: int  # UNKNOWN when no ground truth
    views: np.ndarray  # (V, D) float32


@dataclass
class EmbeddingDataset:
    """All detections of one video, columnar, sorted by (frame_id, detection_idx).

    frame_index maps frame_id -> (start, stop) row range into the arrays.
    """

    frame_ids: np.ndarray  # (M,) uint64
    detection_idx: np.ndarray  # (M,) uint32
    gt_labels: np.ndarray  # (M,) int32, UNKNOWN = -1
    views: np.ndarray  # (M, V, D) float32
    n_identities: int | None = None
    frame_index: dict[int, tuple[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.frame_ids = np.ascontiguousarray(self.frame_ids, dtype=np.uint64)
        self.detection_idx = np.ascontiguousarray(self.detection_idx, dtype=np.uint32)
        self.gt_labels = np.ascontiguousarray(self.gt_labels, dtype=np.int32)
        self.views = np.ascontiguousarray(self.views, dtype=np.float32)
        self.validate()
        self.frame_index = self._build_frame_index()

    # -- derived shape info --------------------------------------------------

    @property
    def num_records(self) -> int:
        return self.views.shape[0]

    @property
    def views_per_detection(self) -> int:
        return self.views.shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.views.shape[2]

    @property
    def frames(self) -> list[int]:
        """Frame ids with at least one detection, ascending."""
        return list(self.frame_index.keys())

    def frame_rows(self, frame_id: int) -> tuple[int, int]:
        return self.frame_index[frame_id]

    def record(self, row: int) -> DetectionRecord:
        return DetectionRecord(
            frame_id=int(self.frame_ids[row]),
            detection_idx=int(self.detection_idx[row]),
            gt_label=int(self.gt_labels[row]),
            views=self.views[row],
        )

    def __iter__(self) -> Iterator[DetectionRecord]:
        return (self.record(i) for i in range(self.num_records))

    def has_labels(self) -> bool:
        return self.num_records > 0 and bool(np.all(self.gt_labels != UNKNOWN))

    def without_labels(self) -> "EmbeddingDataset":
        """Label-stripped view for the self-supervised path (shares view storage)."""
        return EmbeddingDataset(
            frame_ids=self.frame_ids,
            detection_idx=self.detection_idx,
            gt_labels=np.full(self.num_records, UNKNOWN, dtype=np.int32),
            views=self.views,
            n_identities=self.n_identities,
        )

    # -- validation ----------------------------------------------------------

    def validate(self):
        if self.views.ndim != 3:
            raise InvariantError("views must have shape (records, V, D)")
        m, v, d = self.views.shape
        if v < 2:
            raise InvariantError(f"need at least 2 views per detection, got V={v}")
        if d < 1:
            raise InvariantError(f"embedding dimension must be >= 1, got D={d}")
        if not (self.frame_ids.shape == self.detection_idx.shape == self.gt_labels.shape == (m,)):
            raise InvariantError("column arrays must all have one entry per record")
        if not np.isfinite(self.views).all():
            raise DataError("views contain NaN or Inf components")
        if self.n_identities is not None and self.n_identities < 1:
            raise InvariantError(f"n_identities must be >= 1 or None, got {self.n_identities}")
        if m == 0:
            return
        if self.gt_labels.min() < UNKNOWN:
            raise DataError("gt labels must be -1 (unknown) or >= 0")
        if self.n_identities is not None and self.gt_labels.max() >= self.n_identities:
            raise DataError("gt labels must lie in 0..n_identities-1")
        order = np.lexsort((self.detection_idx, self.frame_ids))
        if not np.array_equal(order, np.arange(m)):
            raise FormatError("records must be sorted by (frame_id, detection_idx)")
        same = (self.frame_ids[1:] == self.frame_ids[:-1]) & (
            self.detection_idx[1:] == self.detection_idx[:-1]
        )
        if same.any():
            i = int(np.argmax(same))
            raise DuplicateRecordError(
                f"duplicate record (frame_id={self.frame_ids[i]}, "
                f"detection_idx={self.detection_idx[i]})"
            )
        if self.n_identities is not None:
            _, counts = np.unique(self.frame_ids, return_counts=True)
            if counts.max() > self.n_identities:
                raise InvariantError(
                    f"a frame holds {counts.max()} detections, more than "
                    f"n_identities={self.n_identities}"
                )

    def _build_frame_index(self) -> dict[int, tuple[int, int]]:
        index: dict[int, tuple[int, int]] = {}
        if self.num_records == 0:
            return index
        uniq, starts = np.unique(self.frame_ids, return_index=True)
        stops = np.append(starts[1:], self.num_records)
        for fid, a, b in zip(uniq, starts, stops):
            index[int(fid)] = (int(a), int(b))
        return index


def dataset_from_records(
    records: list[DetectionRecord], n_identities: int | None, embedding_dim: int | None = None,
    views_per_detection: int | None = None,
) -> EmbeddingDataset:
    """Assemble a dataset from per-detection records; sorts, then validates.

    Shape arguments are only needed for an empty record list.
    """
    if not records:
        if embedding_dim is None or views_per_detection is None:
            raise InvariantError("empty dataset needs explicit embedding_dim and views_per_detection")
        return EmbeddingDataset(
            frame_ids=np.zeros(0, dtype=np.uint64),
            detection_idx=np.zeros(0, dtype=np.uint32),
            gt_labels=np.zeros(0, dtype=np.int32),
            views=np.zeros((0, views_per_detection, embedding_dim), dtype=np.float32),
            n_identities=n_identities,
        )
    records = sorted(records, key=lambda r: (r.frame_id, r.detection_idx))
    views = np.stack([np.asarray(r.views, dtype=np.float32) for r in records])
    return EmbeddingDataset(
        frame_ids=np.array([r.frame_id for r in records], dtype=np.uint64),
        detection_idx=np.array([r.detection_idx for r in records], dtype=np.uint32),
        gt_labels=np.array([r.gt_label for r in records], dtype=np.int32),
        views=views,
        n_identities=n_identities,
    )


def _record_dtype(v: int, d: int) -> np.dtype:
    return np.dtype(
        [
            ("frame_id", "<u8"),
            ("detection_idx", "<u4"),
            ("gt_label", "<i4"),
            ("views", "<f4", (v, d)),
        ]
    )


def write_dataset(dataset: EmbeddingDataset, destination: BinaryIO) -> int:
    """Serialize to the HERDEMB1 container. Returns the byte count written."""
    dataset.validate()
    m, v, d = dataset.views.shape
    n_id = 0 if dataset.n_identities is None else dataset.n_identities
    header = struct.pack(HEADER_FMT, MAGIC, d, v, n_id, 0, m)
    destination.write(header)
    body = np.empty(m, dtype=_record_dtype(v, d))
    body["frame_id"] = dataset.frame_ids
    body["detection_idx"] = dataset.detection_idx
    body["gt_label"] = dataset.gt_labels
    body["views"] = dataset.views
    raw = body.tobytes()
    destination.write(raw)
    return len(header) + len(raw)


def _read_exact(source: BinaryIO, n: int) -> bytes:
    """Read exactly n bytes in capped chunks so a corrupt header cannot force a
    single oversized allocation."""
    parts = []
    remaining = n
    while remaining > 0:
        chunk = source.read(min(remaining, _READ_CHUNK))
        if not chunk:
            break
        parts.append(chunk)
        remaining -= len(chunk)
    data = b"".join(parts)
    if len(data) < n:
        raise LengthError(f"truncated payload: expected {n} bytes, got {len(data)}")
    return data


def read_dataset(source: BinaryIO) -> EmbeddingDataset:
    """Parse a HERDEMB1 container into a validated EmbeddingDataset."""
    header = source.read(HEADER_SIZE)
    if len(header) < HEADER_SIZE:
        raise LengthError(f"truncated header: expected {HEADER_SIZE} bytes, got {len(header)}")
    magic, d, v, n_id, reserved, m = struct.unpack(HEADER_FMT, header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if reserved != 0:
        raise FormatError(f"reserved header field must be 0, got {reserved}")
    if v < 2:
        raise InvariantError(f"need at least 2 views per detection, got V={v}")
    if d < 1:
        raise InvariantError(f"embedding dimension must be >= 1, got D={d}")
    rec_dtype = _record_dtype(v, d)
    raw = _read_exact(source, m * rec_dtype.itemsize)
    body = np.frombuffer(raw, dtype=rec_dtype)
    return EmbeddingDataset(
        frame_ids=body["frame_id"],
        detection_idx=body["detection_idx"],
        gt_labels=body["gt_label"],
        views=body["views"],
        n_identities=None if n_id == 0 else int(n_id),
    )


def save(dataset: EmbeddingDataset, path) -> int:
    with open(path, "wb") as f:
        return write_dataset(dataset, f)


def load(path) -> EmbeddingDataset:
    with open(path, "rb") as f:
        return read_dataset(f)
