import logging
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from config import (
    SAC_AGGREGATION, VARIOGRAM_MAX_LAG_FRACTION, VARIOGRAM_MAX_PAIRS, VARIOGRAM_MODEL, VARIOGRAM_N_LAGS,
    VARIOGRAM_N_STARTS, VARIOGRAM_WEIGHTINGS, VARIOGRAM_WEIGHTS,
)
from models.dataset import Dataset
from models.variogram import EmpiricalVariogram, FeatureVariogram, FittedVariogram, SacRangeResult
from services.geospatial import bbox_diagonal_km, haversine_many
from utils.errors import VariogramFitError

logger = logging.getLogger(__name__)


def spherical_model(h, nugget, psill, range_km):
    h = np.asarray(h, dtype=np.float64)
    s = np.minimum(h / range_km, 1.0)
    return nugget + psill * (1.5 * s - 0.5 * s ** 3)


def exponential_model(h, nugget, psill, range_km):
    return nugget + psill * (1.0 - np.exp(-np.asarray(h, dtype=np.float64) / range_km))


VARIOGRAM_MODELS = {
    "spherical": spherical_model,
    "exponential": exponential_model,
}


def _pair_indices(n: int, max_pairs: Optional[int], rng: np.random.Generator):
    """Upper-triangle pairs (i < j); a uniform sample without replacement above max_pairs."""
    total = n * (n - 1) // 2
    if max_pairs is None or total <= max_pairs:
        return np.triu_indices(n, k=1)
    k = np.sort(rng.choice(total, size=max_pairs, replace=False))
    # row i starts at offset i*(2n - i - 1)/2 in the flattened upper triangle
    rows = np.arange(n, dtype=np.int64)
    offsets = rows * (2 * n - rows - 1) // 2
    i = np.searchsorted(offsets, k, side="right") - 1
    j = k - offsets[i] + i + 1
    return i, j


def empirical_variogram(
    d: Dataset,
    feature_index: int,
    n_lags: int = VARIOGRAM_N_LAGS,
    max_lag_km: Optional[float] = None,
    max_pairs: Optional[int] = VARIOGRAM_MAX_PAIRS,
    seed: int = 0,
) -> EmpiricalVariogram:
    """Matheron estimator over haversine-binned pairs; empty bins are dropped.

    Lag centers are the mean pair distance inside each bin. max_pairs=None
    enumerates every pair.
    """
    if n_lags < 3:
        raise VariogramFitError(f"n_lags must be >= 3, got {n_lags}")
    if max_lag_km is None:
        max_lag_km = VARIOGRAM_MAX_LAG_FRACTION * bbox_diagonal_km(d)
    if max_lag_km <= 0:
        raise VariogramFitError("max_lag_km must be positive (are all points coincident?)")

    z = d.X[:, feature_index]
    i, j = _pair_indices(len(d), max_pairs, np.random.default_rng(seed))
    dist = haversine_many(d.lon[i], d.lat[i], d.lon[j], d.lat[j])
    sq = (z[i] - z[j]) ** 2

    edges = np.linspace(0.0, max_lag_km, n_lags + 1)
    inside = dist < max_lag_km
    bins = np.digitize(dist[inside], edges[1:-1])
    counts = np.bincount(bins, minlength=n_lags)
    sums = np.bincount(bins, weights=sq[inside], minlength=n_lags)
    dist_sums = np.bincount(bins, weights=dist[inside], minlength=n_lags)

    used = counts > 0
    if used.sum() < 3:
        raise VariogramFitError(f"Only {int(used.sum())} non-empty lag bins (need 3)")
    return EmpiricalVariogram(
        lag_centers=dist_sums[used] / counts[used],
        semivariances=sums[used] / (2.0 * counts[used]),
        pair_counts=counts[used],
        max_lag_km=max_lag_km,
    )


def lag_weights(v: EmpiricalVariogram, weighting: str = VARIOGRAM_WEIGHTS) -> np.ndarray:
    counts = v.pair_counts.astype(np.float64)
    if weighting == "pairs":
        return counts
    if weighting == "cressie":
        # floor keeps near-zero short-lag bins from taking all the weight
        floor = 1e-3 * max(float(v.semivariances.max()), 1e-300)
        return counts / np.maximum(v.semivariances, floor) ** 2
    raise VariogramFitError(f"Unknown variogram weighting '{weighting}'")


def weighted_rss(v: EmpiricalVariogram, model_kind: str, params, weighting: str = VARIOGRAM_WEIGHTS) -> float:
    model = VARIOGRAM_MODELS[model_kind]
    resid = v.semivariances - model(v.lag_centers, *params)
    return float(np.sum(lag_weights(v, weighting) * resid ** 2))


def fit_variogram(
    v: EmpiricalVariogram,
    model_kind: str = VARIOGRAM_MODEL,
    n_starts: int = VARIOGRAM_N_STARTS,
    seed: int = 0,
    weighting: str = VARIOGRAM_WEIGHTS,
) -> FittedVariogram:
    """Weighted least squares by multi-start bounded Nelder-Mead.

    The default "cressie" weighting divides each bin's pair count by its
    squared semivariance, so the short lags that fix the range count as much
    as the long, well-populated lags near the sill. "pairs" weights by pair
    count alone.
    """
    if model_kind not in VARIOGRAM_MODELS:
        raise VariogramFitError(f"Unknown variogram model '{model_kind}'")
    if len(v) < 3:
        raise VariogramFitError(f"Need at least 3 lag bins, got {len(v)}")

    gamma_max = float(v.semivariances.max())
    max_lag = float(v.lag_centers.max())
    if gamma_max <= 0.0:
        logger.warning("All semivariances are zero, flagging a degenerate variogram")
        return FittedVariogram(
            model_kind=model_kind, nugget=0.0, partial_sill=0.0, range_km=max_lag, rss=0.0, degenerate=True,
        )

    range_hi = 2.0 * max_lag
    bounds = [(0.0, gamma_max), (0.0, 2.0 * gamma_max), (range_hi * 1e-6, range_hi)]
    rng = np.random.default_rng(seed)
    weights = lag_weights(v, weighting)
    weighted_mean = float(np.average(v.semivariances, weights=weights))
    starts = [
        np.array([weighted_mean, 0.0, max_lag / 2.0]),
        np.array([float(v.semivariances.min()), gamma_max - float(v.semivariances.min()), max_lag / 3.0]),
    ]
    while len(starts) < n_starts:
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in bounds]))

    def objective(params):
        value = weighted_rss(v, model_kind, params, weighting)
        return value if np.isfinite(value) else np.inf

    best = None
    for x0 in starts[:n_starts]:
        try:
            res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000, "maxfev": 8000})
        except Exception as e:
            logger.warning(f"Variogram start {x0.tolist()} failed: {e}")
            continue
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise VariogramFitError("Variogram optimizer failed on every start")

    nugget, psill, range_km = (float(p) for p in best.x)
    nugget, psill = max(nugget, 0.0), max(psill, 0.0)
    degenerate = psill <= 1e-9 * gamma_max
    if degenerate:
        logger.warning(f"Degenerate {model_kind} fit: partial sill ~0 (nugget {nugget:.4g})")
    return FittedVariogram(
        model_kind=model_kind,
        nugget=nugget,
        partial_sill=psill,
        range_km=max(range_km, bounds[2][0]),
        rss=float(best.fun),
        degenerate=bool(degenerate),
    )


def _fit_feature(d: Dataset, j: int, model_kind: str, n_lags: int, max_lag_km, max_pairs, seed: int,
                 weighting: str = VARIOGRAM_WEIGHTS) -> FeatureVariogram:
    name = d.feature_names[j]
    try:
        v = empirical_variogram(d, j, n_lags=n_lags, max_lag_km=max_lag_km, max_pairs=max_pairs, seed=seed)
        fit = fit_variogram(v, model_kind, seed=seed, weighting=weighting)
    except VariogramFitError as e:
        logger.warning(f"Variogram for feature '{name}' failed: {e}")
        fit = FittedVariogram(model_kind=model_kind, nugget=0.0, partial_sill=0.0, range_km=1.0,
                              rss=float("nan"), degenerate=True)
    return FeatureVariogram(feature=name, fit=fit)


def sac_range(
    d: Dataset,
    model_kind: str = VARIOGRAM_MODEL,
    aggregation: str = SAC_AGGREGATION,
    n_lags: int = VARIOGRAM_N_LAGS,
    max_lag_km: Optional[float] = None,
    max_pairs: Optional[int] = VARIOGRAM_MAX_PAIRS,
    seed: int = 0,
    n_jobs: int = 1,
    weighting: str = VARIOGRAM_WEIGHTS,
) -> SacRangeResult:
    """Fit one variogram per continuous feature and aggregate the effective ranges."""
    if weighting not in VARIOGRAM_WEIGHTINGS:
        raise ValueError(f"Unknown variogram weighting '{weighting}'")
    columns = d.continuous_indices()
    if not columns:
        raise VariogramFitError("No continuous features to fit")
    if max_lag_km is None:
        max_lag_km = VARIOGRAM_MAX_LAG_FRACTION * bbox_diagonal_km(d)

    table = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_fit_feature)(d, j, model_kind, n_lags, max_lag_km, max_pairs, seed, weighting) for j in columns
    )
    ranges = np.array([row.fit.effective_range_km for row in table if not row.fit.degenerate])
    if len(ranges) == 0:
        raise VariogramFitError("All per-feature variogram fits are degenerate")

    if aggregation == "median":
        value = float(np.median(ranges))
    elif aggregation == "mean":
        value = float(np.mean(ranges))
    elif aggregation == "max":
        value = float(np.max(ranges))
    else:
        raise ValueError(f"Unknown aggregation '{aggregation}'")

    skipped = [name for j, name in enumerate(d.feature_names) if j not in columns]
    logger.info(f"SAC range ({aggregation} of {len(ranges)} {model_kind} fits): {value:.1f} km")
    return SacRangeResult(range_km=value, aggregation=aggregation, model_kind=model_kind,
                          table=list(table), skipped_features=skipped)
