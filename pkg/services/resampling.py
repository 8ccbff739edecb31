import logging
import math
from typing import Optional

import numpy as np
from sklearn.neighbors import NearestNeighbors
from sklearn.preprocessing import StandardScaler

from models.experiment import ResampledTable, SmoteConfig
from utils.errors import ResamplingError

logger = logging.getLogger(__name__)


def synthetic_count(n_presence: int, n_absence: int, target_ratio: float) -> int:
    """Presences to add so that presence / total reaches target_ratio (ceiling rounding)."""
    # the epsilon keeps exact products such as 0.3 * 90 / 0.7 = 38.57... stable
    needed = math.ceil(target_ratio * n_absence / (1.0 - target_ratio) - 1e-9)
    return max(needed - n_presence, 0)


def _neighbour_table(Z: np.ndarray, k: int) -> np.ndarray:
    """k nearest other rows for every row of Z."""
    nn = NearestNeighbors(n_neighbors=k + 1).fit(Z)
    idx = nn.kneighbors(Z, return_distance=False)
    table = np.empty((len(Z), k), dtype=np.int64)
    for i, row in enumerate(idx):
        others = row[row != i]
        table[i] = others[:k]
    return table


def smote(X: np.ndarray, y: np.ndarray, ids: Optional[np.ndarray], cfg: SmoteConfig) -> ResampledTable:
    """Oversample the presence class up to cfg.target_presence_ratio.

    Every original row is kept. Synthetic rows are x_i + u * (x_nn - x_i) with
    x_i a seeded draw from the presences and x_nn one of its k nearest
    presence neighbours (standardized Euclidean). Rows are first put in
    canonical id order so the result does not depend on input order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    ids = np.arange(len(y), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    if not (len(X) == len(y) == len(ids)):
        raise ResamplingError("X, y and ids must have the same length")

    order = np.argsort(ids, kind="stable")
    X, y, ids = X[order], y[order], ids[order]

    n_presence = int(np.sum(y == 1))
    n_absence = len(y) - n_presence
    n_syn = synthetic_count(n_presence, n_absence, cfg.target_presence_ratio)
    if n_syn == 0:
        logger.info(f"Presence ratio {n_presence / max(len(y), 1):.3f} already meets target "
                    f"{cfg.target_presence_ratio:.2f}, SMOTE skipped")
        return ResampledTable(X=X, y=y, ids=ids, n_synthetic=0)
    if n_presence < 2:
        raise ResamplingError(f"SMOTE needs at least 2 presence records, got {n_presence}")

    k = min(cfg.k_neighbors, n_presence - 1)
    if k < cfg.k_neighbors:
        logger.warning(f"SMOTE k_neighbors clamped from {cfg.k_neighbors} to {k}")

    minority = X[y == 1]
    Z = StandardScaler().fit(X).transform(minority)
    neighbours = _neighbour_table(Z, k)

    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(n_presence, size=n_syn)
    partner = neighbours[base, rng.integers(k, size=n_syn)]
    u = rng.uniform(0.0, 1.0, size=(n_syn, 1))
    synthetic = minority[base] + u * (minority[partner] - minority[base])

    table = ResampledTable(
        X=np.vstack([X, synthetic]),
        y=np.concatenate([y, np.ones(n_syn, dtype=np.int64)]),
        ids=np.concatenate([ids, np.full(n_syn, -1, dtype=np.int64)]),
        n_synthetic=n_syn,
    )
    logger.info(f"SMOTE {{\"presence\": {n_presence}, \"absence\": {n_absence}, \"synthetic\": {n_syn}, "
                f"\"ratio\": {table.presence_ratio:.4f}}}")
    return table
