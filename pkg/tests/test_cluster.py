import itertools

import numpy as np
import pytest

from herdid.cluster import cluster_dataset, embed_all, kmeans
from herdid.errors import ConfigError
from herdid.evaluate import evaluate
from herdid.head import init
from herdid.simulate import SimConfig, generate
from herdid.store import DetectionRecord, dataset_from_records


def brute_force_partition_inertia(points, k):
    """Minimum inertia over every labeling of the points into <= k groups."""
    pts = np.asarray(points, dtype=np.float64)
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(pts)):
        inertia = 0.0
        for c in range(k):
            members = pts[[i for i, l in enumerate(labels) if l == c]]
            if len(members):
                inertia += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, inertia)
    return best


def test_two_separated_points_exact_fit():
    res = kmeans(np.array([[0.0], [10.0]]), k=2, seed=0)
    assert res.inertia == 0.0


def test_four_point_line_case():
    pts = np.array([[0.0], [1.0], [9.0], [10.0]])
    res = kmeans(pts, k=2, seed=1)
    assert res.inertia == pytest.approx(1.0, abs=1e-12)
    assert sorted(res.centers.ravel().tolist()) == pytest.approx([0.5, 9.5])
    assert res.inertia == pytest.approx(brute_force_partition_inertia(pts, 2), abs=1e-12)


def test_matches_brute_force_small_random():
    rng = np.random.default_rng(2)
    for _ in range(10):
        pts = rng.normal(size=(8, 2))
        res = kmeans(pts, k=2, seed=3, restarts=10)
        assert res.inertia == pytest.approx(
            brute_force_partition_inertia(pts, 2), rel=1e-9)


def test_inertia_matches_assignments_exactly():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(40, 5))
    res = kmeans(pts, k=4, seed=4)
    recomputed = ((pts - res.centers[res.assignments]) ** 2).sum()
    assert res.inertia == pytest.approx(recomputed, rel=1e-12)
    assert res.assignments.shape == (40,)
    assert set(np.unique(res.assignments)) <= set(range(4))


def test_histories_non_increasing():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(120, 8))
    res = kmeans(pts, k=6, seed=6)
    assert len(res.histories) == 10
    for history in res.histories:
        assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(history, history[1:]))
    assert res.inertia == pytest.approx(min(h[-1] for h in res.histories))


def test_permuting_points_preserves_partition():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(30, 3))
    base = kmeans(pts, k=3, seed=8)
    perm = rng.permutation(30)
    permuted = kmeans(pts[perm], k=3, seed=8)
    # same partition: pairwise co-membership is identical
    a = base.assignments[perm]
    b = permuted.assignments
    co_a = a[:, None] == a[None, :]
    co_b = b[:, None] == b[None, :]
    assert np.array_equal(co_a, co_b)


def test_empty_cluster_repair():
    # 3 distinct values, k=3, but two seeds may collide on duplicates
    pts = np.array([[0.0], [0.0], [0.0], [0.0], [5.0], [9.0]])
    res = kmeans(pts, k=3, seed=9)
    assert set(np.unique(res.assignments)) == {0, 1, 2}
    assert res.inertia == pytest.approx(0.0, abs=1e-12)


def test_repair_with_all_duplicate_points():
    # seeding lands on identical centers; repair must fill every cluster
    # without stealing the same point twice
    pts = np.zeros((5, 2))
    res = kmeans(pts, k=3, seed=0, restarts=2)
    assert set(np.unique(res.assignments)) == {0, 1, 2}
    assert res.inertia == 0.0


def test_m_below_k_rejected():
    with pytest.raises(ConfigError):
        kmeans(np.zeros((2, 3)), k=4)


def test_embed_all_identical_views_equal_single_projection():
    recs = []
    rng = np.random.default_rng(10)
    for f in range(3):
        for d in range(2):
            vec = rng.normal(size=4).astype(np.float32)
            recs.append(DetectionRecord(f, d, -1, np.stack([vec, vec, vec])))
    ds = dataset_from_records(recs, None)
    head = init(4, seed=0)
    pooled = embed_all(ds, head)
    assert pooled.shape == (6, 64)
    head.eval()
    single = head.forward(ds.views[:, 0]).astype(np.float64)
    single /= np.linalg.norm(single, axis=1, keepdims=True)
    assert np.allclose(pooled, single, atol=1e-6)
    assert np.abs(np.linalg.norm(pooled, axis=1) - 1.0).max() < 1e-6


def test_embed_all_count_and_norms():
    ds = generate(SimConfig(n_identities=4, n_frames=25, embedding_dim=16,
                            visibility_prob=0.8, seed=11))
    pooled = embed_all(ds, init(16, seed=1))
    assert pooled.shape == (ds.num_records, 64)
    assert np.abs(np.linalg.norm(pooled, axis=1) - 1.0).max() < 1e-6


def test_zero_noise_raw_kmeans_perfect_accuracy():
    ds = generate(SimConfig(n_identities=5, n_frames=30, embedding_dim=24,
                            identity_noise_sigma=0.0, view_noise_sigma=0.0, seed=12))
    res = kmeans(ds.views[:, 0], k=5, seed=13)
    report = evaluate(res.assignments, ds.gt_labels, 5)
    assert report.accuracy == 1.0


def test_zero_noise_projected_kmeans_perfect_accuracy():
    # untrained head still maps equal inputs to equal outputs
    ds = generate(SimConfig(n_identities=4, n_frames=20, embedding_dim=12,
                            identity_noise_sigma=0.0, view_noise_sigma=0.0, seed=14))
    res = cluster_dataset(ds, init(12, seed=2), n_clusters=4, seed=15)
    report = evaluate(res.assignments, ds.gt_labels, 4)
    assert report.accuracy == 1.0


def test_per_view_majority_vote_mode():
    ds = generate(SimConfig(n_identities=3, n_frames=20, embedding_dim=8,
                            identity_noise_sigma=0.0, view_noise_sigma=0.0, seed=16))
    res = cluster_dataset(ds, init(8, seed=3), n_clusters=3, seed=17, per_view=True)
    assert res.assignments.shape == (ds.num_records,)
    report = evaluate(res.assignments, ds.gt_labels, 3)
    assert report.accuracy == 1.0
