from typing import Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from config import KMEANS_MAX_ITER, KMEANS_TOLERANCE


def standardize(X: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per column; constant columns become zeros."""
    return StandardScaler().fit_transform(np.asarray(X, dtype=np.float64))


def squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.sum((X[:, np.newaxis, :] - centers[np.newaxis, :, :]) ** 2, axis=2)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [X[rng.integers(len(X))]]
    for _ in range(k - 1):
        d2 = squared_distances(X, np.array(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            # every point coincides with a center already
            centers.append(X[rng.integers(len(X))])
            continue
        centers.append(X[rng.choice(len(X), p=d2 / total)])
    return np.array(centers)


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    tolerance: float = KMEANS_TOLERANCE,
    max_iter: int = KMEANS_MAX_ITER,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """k-means++ seeding followed by Lloyd iterations.

    Stops when no center moves more than `tolerance` or after `max_iter`
    iterations. An emptied cluster is re-seeded at the point farthest from its
    current center. Returns (centers, labels, inertia).
    """
    if k < 1 or k > len(X):
        raise ValueError(f"k must be in [1, {len(X)}], got {k}")
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(X, k, rng)

    for _ in range(max_iter):
        labels = np.argmin(squared_distances(X, centers), axis=1)
        new_centers = np.empty_like(centers)
        for c in range(k):
            members = X[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
            else:
                d2 = squared_distances(X, centers).min(axis=1)
                new_centers[c] = X[int(np.argmax(d2))]
        shift = np.sqrt(np.sum((new_centers - centers) ** 2, axis=1)).max()
        centers = new_centers
        if shift <= tolerance:
            break

    d2 = squared_distances(X, centers)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    return centers, labels, inertia
