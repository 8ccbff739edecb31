import numpy as np
import pytest

from models.experiment import SmoteConfig
from services.resampling import smote, synthetic_count
from utils.errors import ResamplingError


def _imbalanced(n_presence=10, n_absence=90, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(2.0, 1.0, (n_presence, 2)), rng.normal(0.0, 1.0, (n_absence, 2))])
    y = np.concatenate([np.ones(n_presence, dtype=int), np.zeros(n_absence, dtype=int)])
    return X, y, np.arange(len(y)) + 100


def _distance_to_segment(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


@pytest.mark.parametrize("n_presence, n_absence, ratio, expected", [
    (10, 90, 0.3, 29),
    (30, 70, 0.3, 0),
    (50, 50, 0.3, 0),
    (0, 10, 0.5, 10),
])
def test_synthetic_count(n_presence, n_absence, ratio, expected):
    assert synthetic_count(n_presence, n_absence, ratio) == expected


def test_smote_reaches_target_ratio():
    X, y, ids = _imbalanced()
    table = smote(X, y, ids, SmoteConfig(target_presence_ratio=0.3, k_neighbors=5, seed=1))
    assert table.n_synthetic == 29
    assert len(table.y) == 129
    assert table.presence_ratio >= 0.3


def test_smote_keeps_originals_and_marks_synthetic_rows():
    X, y, ids = _imbalanced()
    table = smote(X, y, ids, SmoteConfig(seed=2))
    original = table.ids >= 0
    assert np.array_equal(table.ids[original], ids)
    assert np.array_equal(table.X[original], X)
    assert np.all(table.ids[~original] == -1)
    assert np.all(table.y[~original] == 1)


def test_smote_already_balanced_is_unchanged():
    X, y, ids = _imbalanced(n_presence=40, n_absence=60)
    table = smote(X, y, ids, SmoteConfig(target_presence_ratio=0.3))
    assert table.n_synthetic == 0
    assert np.array_equal(table.X, X)


def test_synthetic_rows_lie_between_presences():
    X, y, ids = _imbalanced(seed=4)
    table = smote(X, y, ids, SmoteConfig(k_neighbors=3, seed=5))
    presences = X[y == 1]
    for s in table.X[table.ids == -1]:
        best = min(_distance_to_segment(s, a, b) for a in presences for b in presences)
        assert best == pytest.approx(0.0, abs=1e-9)


def test_smote_is_deterministic_and_order_free():
    X, y, ids = _imbalanced(seed=6)
    cfg = SmoteConfig(seed=7)
    a = smote(X, y, ids, cfg)
    perm = np.random.default_rng(0).permutation(len(y))
    b = smote(X[perm], y[perm], ids[perm], cfg)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.ids, b.ids)


def test_smote_single_presence_fails():
    X, y, ids = _imbalanced(n_presence=1, n_absence=50)
    with pytest.raises(ResamplingError):
        smote(X, y, ids, SmoteConfig())


def test_smote_clamps_k_to_available_neighbours():
    X, y, ids = _imbalanced(n_presence=3, n_absence=50)
    table = smote(X, y, ids, SmoteConfig(k_neighbors=10, seed=0))
    assert table.n_synthetic == synthetic_count(3, 50, 0.3)
