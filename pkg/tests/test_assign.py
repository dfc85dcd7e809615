import itertools

import numpy as np
import pytest

from herdid.assign import solve_max
from herdid.errors import DataError, DimensionError


def brute_force_max(mat):
    """Enumerate every injective row->column mapping of size min(dims)."""
    mat = np.asarray(mat, dtype=np.float64)
    r, c = mat.shape
    best = -np.inf
    if r <= c:
        for cols in itertools.permutations(range(c), r):
            best = max(best, sum(mat[i, j] for i, j in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(r), c):
            best = max(best, sum(mat[i, j] for j, i in enumerate(rows)))
    return best


def test_one_by_one():
    a = solve_max([[5.0]])
    assert a.pairs == [(0, 0)]
    assert a.total == 5.0


def test_two_by_two():
    # brute force over both permutations: (0,0)+(1,1)=5 beats (0,1)+(1,0)=2
    a = solve_max([[2.0, 1.0], [1.0, 3.0]])
    assert a.pairs == [(0, 0), (1, 1)]
    assert a.total == 5.0


def test_two_by_three_rectangular():
    # brute force over all 6 injective 2-of-3 selections: max is 9+8=17
    a = solve_max([[1.0, 9.0, 2.0], [8.0, 1.0, 3.0]])
    assert a.pairs == [(0, 1), (1, 0)]
    assert a.total == 17.0


def test_pairs_injective_and_sized():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.integers(1, 8)
        c = rng.integers(1, 8)
        mat = rng.uniform(-1, 1, (r, c))
        a = solve_max(mat)
        rows = [p[0] for p in a.pairs]
        cols = [p[1] for p in a.pairs]
        assert len(a.pairs) == min(r, c)
        assert len(set(rows)) == len(rows)
        assert len(set(cols)) == len(cols)
        assert a.total == pytest.approx(sum(mat[i, j] for i, j in a.pairs), abs=1e-12)


def test_matches_brute_force_random():
    rng = np.random.default_rng(42)
    for _ in range(300):
        r = int(rng.integers(1, 8))
        c = int(rng.integers(1, 8))
        mat = rng.uniform(-1, 1, (r, c))
        assert solve_max(mat).total == pytest.approx(brute_force_max(mat), abs=1e-9)


def test_transpose_property_when_unique():
    # continuous entries make the optimum almost surely unique
    rng = np.random.default_rng(7)
    for _ in range(100):
        r = int(rng.integers(1, 7))
        c = int(rng.integers(1, 7))
        mat = rng.uniform(-1, 1, (r, c))
        direct = set(solve_max(mat).pairs)
        flipped = {(j, i) for i, j in solve_max(mat.T).pairs}
        assert direct == flipped


def test_constant_shift_preserves_optimizers():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        mat = rng.uniform(-1, 1, (n, n))
        shift = float(rng.uniform(-5, 5))
        base = solve_max(mat)
        shifted = solve_max(mat + shift)
        # shifted optimum must also be optimal for the unshifted matrix
        unshifted_total = sum(mat[i, j] for i, j in shifted.pairs)
        assert unshifted_total == pytest.approx(base.total, abs=1e-9)
        assert shifted.total == pytest.approx(base.total + n * shift, abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(3)
    mat = rng.uniform(-1, 1, (6, 6))
    first = solve_max(mat)
    for _ in range(5):
        again = solve_max(mat)
        assert again.pairs == first.pairs
        assert again.total == first.total


def test_tied_entries_still_valid():
    mat = np.zeros((4, 4))
    a = solve_max(mat)
    assert len(a.pairs) == 4
    assert a.total == 0.0


def test_empty_matrix_rejected():
    with pytest.raises(DimensionError):
        solve_max(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        solve_max(np.zeros((3, 0)))


def test_nonfinite_rejected():
    with pytest.raises(DataError):
        solve_max([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(DataError):
        solve_max([[np.inf]])
