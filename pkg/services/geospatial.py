import logging
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import EARTH_RADIUS_KM
from models.dataset import Dataset
from models.folds import BlockAssignment
from utils.errors import DataValidationError

logger = logging.getLogger(__name__)


def haversine_km(a, b) -> float:
    """Great-circle distance between two (lon, lat) points in degrees."""
    return float(haversine_many(np.array([a[0]]), np.array([a[1]]), np.array([b[0]]), np.array([b[1]]))[0])


def haversine_many(lon1, lat1, lon2, lat2) -> np.ndarray:
    """Element-wise (broadcasting) haversine distance in km."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lon1, lat1, lon2, lat2))
    dlon = lon2 - lon1
    dlat = lat2 - lat1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def project_local(lon, lat, lon0: float, lat0: float, ref_lat: float,
                  lon_shrink: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Local equirectangular projection to km, longitude scaled by lon_shrink * cos(ref_lat)."""
    scale = np.pi / 180.0 * EARTH_RADIUS_KM
    x = (np.asarray(lon, dtype=np.float64) - lon0) * scale * np.cos(np.radians(ref_lat)) * lon_shrink
    y = (np.asarray(lat, dtype=np.float64) - lat0) * scale
    return x, y


def unproject_local(x: float, y: float, lon0: float, lat0: float, ref_lat: float,
                    lon_shrink: float = 1.0) -> Tuple[float, float]:
    scale = np.pi / 180.0 * EARTH_RADIUS_KM
    return lon0 + x / (scale * np.cos(np.radians(ref_lat)) * lon_shrink), lat0 + y / scale


def bbox_diagonal_km(d: Dataset) -> float:
    return haversine_km((d.lon.min(), d.lat.min()), (d.lon.max(), d.lat.max()))


def assign_grid_blocks(d: Dataset, block_size_km: float, seed: int = 0, jitter: bool = True) -> BlockAssignment:
    """Assign every record to a square grid cell of side block_size_km.

    The grid is anchored at the bounding-box lower-left corner, shifted by a
    seed-dependent offset in [0, block_size_km) on each axis when jitter is on.
    Block ids are numbered over the non-empty cells in (row, column) order.
    """
    if len(d) == 0:
        raise DataValidationError("Cannot assign blocks on an empty dataset")
    if block_size_km <= 0:
        raise ValueError(f"block_size_km must be positive, got {block_size_km}")

    lon0, lat0 = float(d.lon.min()), float(d.lat.min())
    # cos of the most poleward latitude, shrunk by the chord term of the widest
    # longitude gap, keeps records in non-adjacent cells >= block_size_km apart
    ref_lat = float(np.abs(d.lat).max())
    span = np.radians(float(d.lon.max()) - lon0)
    shrink = 1.0 - span ** 2 / 24.0
    x, y = project_local(d.lon, d.lat, lon0, lat0, ref_lat, shrink)

    if jitter:
        offset = np.random.default_rng(seed).uniform(0.0, block_size_km, size=2)
    else:
        offset = np.zeros(2)
    col = np.floor((x + offset[0]) / block_size_km).astype(np.int64)
    row = np.floor((y + offset[1]) / block_size_km).astype(np.int64)

    cells, block_ids = np.unique(np.stack([row, col], axis=1), axis=0, return_inverse=True)
    origin = unproject_local(-offset[0], -offset[1], lon0, lat0, ref_lat, shrink)
    logger.info(f"Grid blocking at {block_size_km:g} km: {len(cells)} non-empty blocks for {len(d)} records")
    return BlockAssignment(
        ids=d.ids,
        block_ids=block_ids.reshape(-1),
        cells=[(int(c), int(r)) for r, c in cells],
        block_size_km=block_size_km,
        origin=(float(origin[0]), float(origin[1])),
    )


def _unit_vectors(lon, lat) -> np.ndarray:
    lon, lat = np.radians(lon), np.radians(lat)
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)


def conflict_pairs(d: Dataset, min_dist_km: float) -> np.ndarray:
    """All position pairs (i < j) closer than min_dist_km, via a KD-tree on the unit sphere."""
    if len(d) < 2:
        return np.empty((0, 2), dtype=np.int64)
    chord = 2.0 * np.sin(min(min_dist_km / (2.0 * EARTH_RADIUS_KM), np.pi / 2.0))
    tree = cKDTree(_unit_vectors(d.lon, d.lat))
    pairs = tree.query_pairs(r=chord * (1.0 + 1e-9) + 1e-15, output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2).astype(np.int64)
    dist = haversine_many(d.lon[pairs[:, 0]], d.lat[pairs[:, 0]], d.lon[pairs[:, 1]], d.lat[pairs[:, 1]])
    return pairs[dist < min_dist_km].astype(np.int64)


def thin(d: Dataset, min_dist_m: float, seed: int = 0) -> np.ndarray:
    """Randomized greedy thinning; returns retained ids in dataset order.

    Repeatedly removes one of the records with the most conflicts (ties drawn
    by seed) until no pair is closer than min_dist_m, then re-admits removed
    records that no longer conflict so the retained set is maximal.
    """
    if min_dist_m <= 0:
        raise ValueError(f"min_dist_m must be positive, got {min_dist_m}")
    n = len(d)
    pairs = conflict_pairs(d, min_dist_m / 1000.0)
    neighbours = [set() for _ in range(n)]
    for i, j in pairs:
        neighbours[i].add(int(j))
        neighbours[j].add(int(i))

    rng = np.random.default_rng(seed)
    degree = np.array([len(nb) for nb in neighbours], dtype=np.int64)
    retained = np.ones(n, dtype=bool)
    removed_order = []
    while n and degree.max() > 0:
        worst = np.nonzero(degree == degree.max())[0]
        victim = int(worst[rng.integers(len(worst))])
        retained[victim] = False
        removed_order.append(victim)
        degree[victim] = 0
        for nb in neighbours[victim]:
            if retained[nb]:
                degree[nb] -= 1

    for victim in removed_order:
        if not any(retained[nb] for nb in neighbours[victim]):
            retained[victim] = True

    kept = d.ids[retained]
    if n - len(kept):
        logger.warning(f"Thinning at {min_dist_m:g} m removed {n - len(kept)} of {n} records")
    return kept
