import logging
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from config import KMEANS_MAX_ITER, KMEANS_TOLERANCE
from models.dataset import Dataset
from models.folds import Fold, FoldPlan, TemporalIntervals
from services.data_service import class_counts
from services.geospatial import assign_grid_blocks
from utils.errors import FoldConstructionError
from utils.kmeans import kmeans, squared_distances, standardize

logger = logging.getLogger(__name__)


def _make_fold(d: Dataset, train_ids, val_ids, interval: int = -1) -> Fold:
    val_labels = d.label[d.positions_of(val_ids)]
    single = len(np.unique(val_labels)) < 2
    return Fold(
        train_ids=np.sort(np.asarray(train_ids, dtype=np.int64)),
        val_ids=np.sort(np.asarray(val_ids, dtype=np.int64)),
        interval=interval,
        single_class_val=bool(single),
    )


def _plan(folds: List[Fold], scheme: str, params: Dict) -> FoldPlan:
    plan = FoldPlan(folds=folds, scheme=scheme, params=params)
    if plan.n_flagged:
        logger.warning(f"{scheme} plan {params}: {plan.n_flagged} of {len(plan)} folds have a single-class validation set")
    return plan


def _folds_from_groups(d: Dataset, group_of_record: np.ndarray, k: int, interval: int = -1) -> List[Fold]:
    folds = []
    for j in range(k):
        in_fold = group_of_record == j
        folds.append(_make_fold(d, d.ids[~in_fold], d.ids[in_fold], interval))
    return folds


def random_kfold(d: Dataset, k: int, seed: int = 0, repeats: int = 1) -> FoldPlan:
    """Seeded permutation split into k near-equal validation sets (repeated `repeats` times)."""
    if k < 2:
        raise FoldConstructionError(f"k must be >= 2, got {k}")
    if k > len(d):
        raise FoldConstructionError(f"k={k} exceeds record count {len(d)}")

    ids = np.sort(d.ids)
    folds = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        perm = rng.permutation(ids)
        for val in np.array_split(perm, k):
            folds.append(_make_fold(d, np.setdiff1d(ids, val), val))
    return _plan(folds, "random", {"k": k, "seed": seed, "repeats": repeats})


def allocate_blocks(block_ids: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Greedy size balancing: blocks by descending record count go to the currently smallest fold.

    Equal-sized blocks are ordered by a seeded shuffle; equal-sized folds by index.
    Returns the fold of every block.
    """
    counts = np.bincount(block_ids)
    tie_break = np.random.default_rng(seed).permutation(len(counts))
    order = np.lexsort((tie_break, -counts))
    fold_of_block = np.empty(len(counts), dtype=np.int64)
    fold_sizes = np.zeros(k, dtype=np.int64)
    for b in order:
        target = int(np.argmin(fold_sizes))
        fold_of_block[b] = target
        fold_sizes[target] += counts[b]
    return fold_of_block


def spatial_blocks_cv(d: Dataset, block_km: float, k: int, seed: int = 0, jitter: bool = True,
                      interval: int = -1) -> FoldPlan:
    if k < 2:
        raise FoldConstructionError(f"k must be >= 2, got {k}")
    blocks = assign_grid_blocks(d, block_km, seed, jitter=jitter)
    if blocks.n_blocks < k:
        raise FoldConstructionError(f"Only {blocks.n_blocks} non-empty blocks at {block_km:g} km, need k={k}")

    fold_of_block = allocate_blocks(blocks.block_ids, k, seed)
    folds = _folds_from_groups(d, fold_of_block[blocks.block_ids], k, interval)
    return _plan(folds, "spatial", {"k": k, "block_km": block_km, "seed": seed, "n_blocks": blocks.n_blocks})


def repair_class_balance(Z: np.ndarray, labels: np.ndarray, clusters: np.ndarray,
                         centers: np.ndarray, k: int) -> tuple:
    """Move records until every cluster holds both classes.

    For a cluster missing class c, the class-c record nearest its center is
    moved in, taken only from clusters that keep at least one class-c record.
    """
    clusters = clusters.copy()
    moves = 0
    while True:
        lacking = [(j, c) for j in range(k) for c in (0, 1)
                   if not np.any((clusters == j) & (labels == c))]
        if not lacking:
            return clusters, moves
        j, c = lacking[0]
        per_cluster = np.bincount(clusters[labels == c], minlength=k)
        donors = (labels == c) & (clusters != j) & (per_cluster[clusters] >= 2)
        if not np.any(donors):
            raise FoldConstructionError(f"Cannot give cluster {j} a record of class {c}")
        candidates = np.nonzero(donors)[0]
        dist = squared_distances(Z[candidates], centers[j:j + 1])[:, 0]
        clusters[candidates[int(np.argmin(dist))]] = j
        moves += 1


def env_blocks_cv(d: Dataset, k: int, seed: int = 0, tolerance: float = KMEANS_TOLERANCE,
                  max_iter: int = KMEANS_MAX_ITER) -> FoldPlan:
    """k-means clusters in standardized feature space, repaired so each cluster holds both classes."""
    if k < 2:
        raise FoldConstructionError(f"k must be >= 2, got {k}")
    n_presence, n_absence = class_counts(d)
    if min(n_presence, n_absence) < k:
        raise FoldConstructionError(
            f"Environmental blocking with k={k} needs >= k records per class (presence={n_presence}, absence={n_absence})"
        )

    Z = standardize(d.X)
    centers, clusters, inertia = kmeans(Z, k, seed=seed, tolerance=tolerance, max_iter=max_iter)
    clusters, moves = repair_class_balance(Z, d.label, clusters, centers, k)
    if moves:
        logger.info(f"Environmental blocking moved {moves} records to give every cluster both classes")
    folds = _folds_from_groups(d, clusters, k)
    return _plan(folds, "environmental", {"k": k, "seed": seed, "inertia": inertia, "repair_moves": moves})


def elbow_curve(d: Dataset, k_values: Sequence[int], seed: int = 0) -> pd.DataFrame:
    """k-means inertia per k on standardized features, for choosing k by the elbow method."""
    Z = standardize(d.X)
    rows = []
    for k in k_values:
        _, _, inertia = kmeans(Z, int(k), seed=seed)
        rows.append({"k": int(k), "inertia": inertia})
    return pd.DataFrame(rows, columns=["k", "inertia"])


def spatiotemporal_cv(d: Dataset, block_km: float, k_spatial: int, intervals: TemporalIntervals,
                      seed: int = 0, jitter: bool = True) -> FoldPlan:
    """Spatial folds built independently inside each interval; training never crosses intervals."""
    interval_of = intervals.index_of(d.year)
    folds = []
    for t in range(len(intervals)):
        sub = d.take(np.nonzero(interval_of == t)[0])
        n_presence, n_absence = class_counts(sub)
        if n_presence == 0 or n_absence == 0:
            raise FoldConstructionError(
                f"Interval {intervals.label(t)} needs both classes (presence={n_presence}, absence={n_absence})"
            )
        try:
            plan_t = spatial_blocks_cv(sub, block_km, k_spatial, seed, jitter=jitter, interval=t)
        except FoldConstructionError as e:
            raise FoldConstructionError(f"Interval {intervals.label(t)}: {e}")
        folds.extend(plan_t.folds)

    outside = int(np.sum(interval_of < 0))
    if outside:
        logger.warning(f"{outside} records fall outside every temporal interval and are unused")
    return _plan(folds, "spatio_temporal", {
        "k": k_spatial, "block_km": block_km, "seed": seed, "intervals": [list(iv) for iv in intervals.intervals],
    })


def tss_cv(d: Dataset, intervals: TemporalIntervals) -> FoldPlan:
    """Forward chaining: fold j trains on intervals 1..j and validates on interval j+1."""
    if len(intervals) < 2:
        raise FoldConstructionError("TimeSeriesSplit needs at least 2 intervals")
    interval_of = intervals.index_of(d.year)
    for t in range(len(intervals)):
        if not np.any(interval_of == t):
            raise FoldConstructionError(f"Interval {intervals.label(t)} is empty")

    folds = []
    for j in range(1, len(intervals)):
        train = d.ids[(interval_of >= 0) & (interval_of < j)]
        if len(np.unique(d.label[d.positions_of(train)])) < 2:
            raise FoldConstructionError(f"Training window up to {intervals.label(j - 1)} lacks a class")
        val = d.ids[interval_of == j]
        folds.append(_make_fold(d, train, val, interval=j))
    return _plan(folds, "tss", {"intervals": [list(iv) for iv in intervals.intervals], "T": len(intervals)})
