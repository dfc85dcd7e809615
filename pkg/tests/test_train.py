import json
import math

import numpy as np
import pytest

from herdid import checkpoint
from herdid.errors import ConfigError, FormatError, LengthError
from herdid.head import init
from herdid.objective import BCE, SUPCON_LEARNABLE
from herdid.simulate import SimConfig, generate
from herdid.store import DetectionRecord, dataset_from_records
from herdid.train import TrainConfig, classify, train_selfsup, train_supervised


def small_dataset(seed=0, **kwargs):
    cfg = dict(n_identities=4, n_frames=24, embedding_dim=12,
               identity_noise_sigma=0.05, view_noise_sigma=0.1,
               visibility_prob=0.9, seed=seed)
    cfg.update(kwargs)
    return generate(SimConfig(**cfg))


def log_bytes(log):
    return "\n".join(json.dumps(rec, sort_keys=True) for rec in log).encode()


def test_loss_descends_on_separable_data():
    # full visibility keeps every batch's positive structure identical, so the
    # descent is visible within one epoch
    ds = small_dataset(identity_noise_sigma=0.0, view_noise_sigma=0.0,
                       visibility_prob=1.0, n_frames=60)
    result = train_selfsup(ds, init(12, seed=1), TrainConfig(epochs=1, seed=1))
    losses = [r["loss"] for r in result.log]
    final_epoch_mean = np.mean(losses[-len(losses) // 4 :])
    assert final_epoch_mean < losses[0]


def test_double_run_bit_identical():
    cfg = TrainConfig(epochs=2, seed=7)
    r1 = train_selfsup(small_dataset(), init(12, seed=3), cfg)
    r2 = train_selfsup(small_dataset(), init(12, seed=3), cfg)
    assert log_bytes(r1.log) == log_bytes(r2.log)
    for (n1, a1), (n2, a2) in zip(r1.head.named_state(), r2.head.named_state()):
        assert n1 == n2
        assert np.array_equal(a1, a2)
    assert float(r1.loss_params.t) == float(r2.loss_params.t)


def test_label_blindness():
    ds = small_dataset(seed=5)
    poisoned = dataset_from_records(
        [DetectionRecord(r.frame_id, r.detection_idx,
                         int(np.random.default_rng(i).integers(0, 4)), r.views)
         for i, r in enumerate(ds)],
        n_identities=ds.n_identities,
    )
    cfg = TrainConfig(epochs=1, seed=11)
    r1 = train_selfsup(ds, init(12, seed=2), cfg)
    r2 = train_selfsup(poisoned, init(12, seed=2), cfg)
    assert log_bytes(r1.log) == log_bytes(r2.log)
    for (_, a1), (_, a2) in zip(r1.head.named_state(), r2.head.named_state()):
        assert np.array_equal(a1, a2)


def test_log_length_formula():
    ds = small_dataset(n_frames=11, visibility_prob=1.0)
    result = train_selfsup(ds, init(12, seed=1), TrainConfig(epochs=3, seed=1))
    assert len(result.log) == 3 * math.ceil(11 / 2)
    steps = [r["step"] for r in result.log]
    assert steps == list(range(len(steps)))


def test_log_records_track_learnables():
    ds = small_dataset()
    result = train_selfsup(ds, init(12, seed=1),
                           TrainConfig(epochs=1, loss_variant=BCE, seed=1))
    first = result.log[0]
    assert set(first) == {"step", "epoch", "loss", "lr", "t", "b"}
    # BCE starts from t=10, b=-10 and both move
    assert first["t"] != 10.0 or result.log[-1]["t"] != 10.0
    sup = train_selfsup(ds, init(12, seed=1),
                        TrainConfig(epochs=1, loss_variant=SUPCON_LEARNABLE, seed=1))
    assert sup.log[0]["b"] == 0.0


def test_supcon_learnable_t_initialized_at_14_and_clamped():
    ds = small_dataset()
    result = train_selfsup(ds, init(12, seed=1),
                           TrainConfig(epochs=1, loss_variant=SUPCON_LEARNABLE, seed=1))
    assert 0.0 <= float(result.loss_params.t) <= 100.0
    # the first step departs from exactly 14
    assert abs(result.log[0]["t"] - 14.0) < 2.0


def test_eval_every_adds_summary_records():
    ds = small_dataset(n_frames=12, visibility_prob=1.0)
    result = train_selfsup(ds, init(12, seed=1),
                           TrainConfig(epochs=1, seed=1, eval_every=3))
    summaries = [r for r in result.log if "mean_loss" in r]
    assert len(summaries) == 2  # 6 steps, every 3


def test_invalid_configs_rejected():
    ds = small_dataset()
    with pytest.raises(ConfigError):
        train_selfsup(ds, init(12, seed=1), TrainConfig(epochs=0))
    with pytest.raises(ConfigError):
        train_selfsup(ds, init(12, seed=1), TrainConfig(frames_per_batch=1))
    with pytest.raises(ConfigError):
        train_selfsup(ds, init(12, seed=1), TrainConfig(loss_variant="nope"))


# -- supervised ----------------------------------------------------------------


def one_class_dataset():
    rng = np.random.default_rng(20)
    recs = []
    for f in range(8):
        vec = rng.normal(size=(2, 6)).astype(np.float32)
        recs.append(DetectionRecord(f, 0, 0, vec))
    return dataset_from_records(recs, n_identities=1)


def test_supervised_one_class_loss_is_zero():
    ds = one_class_dataset()
    cfg = TrainConfig(epochs=1, seed=1, supervised=True, train_frames=4, val_frames=2)
    result = train_supervised(ds, init(6, seed=1), cfg)
    step_losses = [r["loss"] for r in result.log if "loss" in r]
    assert all(l == pytest.approx(0.0, abs=1e-12) for l in step_losses)


def test_supervised_initial_loss_near_log_nid():
    ds = small_dataset(seed=9)
    cfg = TrainConfig(epochs=1, seed=2, supervised=True, train_frames=10, val_frames=4)
    result = train_supervised(ds, init(12, seed=4), cfg)
    first = [r["loss"] for r in result.log if "loss" in r][0]
    assert first >= math.log(4) - 0.3


def test_supervised_requires_labels_and_nid():
    ds = small_dataset()
    cfg = TrainConfig(epochs=1, seed=1, supervised=True, train_frames=8, val_frames=4)
    with pytest.raises(ConfigError):
        train_supervised(ds.without_labels(), init(12, seed=1), cfg)
    with pytest.raises(ConfigError):
        train_supervised(ds, init(12, seed=1),
                         TrainConfig(epochs=1, supervised=True, train_frames=0, val_frames=0))


def test_supervised_splits_disjoint_by_frame():
    ds = small_dataset(n_frames=30, visibility_prob=1.0)
    cfg = TrainConfig(epochs=1, seed=3, supervised=True, train_frames=15, val_frames=5)
    result = train_supervised(ds, init(12, seed=5), cfg)
    tr = set(result.splits["train"].tolist())
    va = set(result.splits["val"].tolist())
    te = set(result.splits["test"].tolist())
    assert not (tr & va) and not (tr & te) and not (va & te)
    assert len(tr) == 15 and len(va) == 5 and len(te) == 10


def test_early_stopping_returns_best_epoch_state():
    ds = small_dataset(seed=13, n_frames=30)
    cfg = TrainConfig(epochs=25, seed=4, supervised=True, train_frames=16,
                      val_frames=6, patience=5)
    result = train_supervised(ds, init(12, seed=6), cfg)
    val_records = [(r["epoch"], r["val_loss"]) for r in result.log if "val_loss" in r]
    best_epoch, best_val = min(val_records, key=lambda p: p[1])
    assert result.best_epoch == best_epoch
    # returned parameters reproduce the recorded best val loss
    from herdid.train import _eval_split_loss
    recomputed = _eval_split_loss(ds, result.head, result.classifier, result.splits["val"])
    assert recomputed == pytest.approx(best_val, rel=1e-6)


def test_classify_returns_per_detection_predictions():
    ds = small_dataset(seed=15, n_frames=30)
    cfg = TrainConfig(epochs=8, seed=5, supervised=True, train_frames=20, val_frames=4)
    result = train_supervised(ds, init(12, seed=7), cfg)
    rows, pred = classify(ds, result.head, result.classifier, result.splits["test"])
    assert rows.size == pred.size
    acc = float((pred == ds.gt_labels[rows]).mean())
    assert acc > 0.5  # separable synthetic data learns quickly


# -- checkpoint container --------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    ds = small_dataset()
    result = train_selfsup(ds, init(12, seed=8), TrainConfig(epochs=1, seed=21))
    path = tmp_path / "ckpt.herdckp"
    checkpoint.save(path, result.head, result.loss_params, result.optimizer,
                    meta={"n_identities": np.asarray(4, dtype=np.int64)})
    bundle = checkpoint.load(path)
    for (name, arr) in result.head.named_state():
        assert np.array_equal(bundle.head.state_dict()[name], arr), name
    assert bundle.loss_params.variant == BCE
    assert float(bundle.loss_params.t) == pytest.approx(float(result.loss_params.t))
    assert int(bundle.meta["n_identities"]) == 4
    assert "velocity.fc1.weight" in bundle.optim_state


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.herdckp"
    path.write_bytes(b"NOTHERD!" + b"\x00" * 16)
    with pytest.raises(FormatError):
        checkpoint.load(path)


def test_checkpoint_truncation(tmp_path):
    ds = small_dataset()
    result = train_selfsup(ds, init(12, seed=8), TrainConfig(epochs=1, seed=21))
    path = tmp_path / "ckpt.herdckp"
    checkpoint.save(path, result.head, result.loss_params)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(LengthError):
        checkpoint.load(path)


def test_checkpoint_with_classifier(tmp_path):
    ds = small_dataset(n_frames=20)
    cfg = TrainConfig(epochs=2, seed=6, supervised=True, train_frames=10, val_frames=4)
    result = train_supervised(ds, init(12, seed=9), cfg)
    path = tmp_path / "sup.herdckp"
    checkpoint.save(path, result.head, result.loss_params, result.optimizer,
                    classifier=result.classifier)
    bundle = checkpoint.load(path)
    assert bundle.classifier is not None
    assert np.array_equal(bundle.classifier.weight, result.classifier.weight)
