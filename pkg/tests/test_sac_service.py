import numpy as np
import pytest

import services.sac_service as sac_service
from models.dataset import Dataset
from models.variogram import EmpiricalVariogram, FeatureVariogram, FittedVariogram
from services.sac_service import (
    empirical_variogram, fit_variogram, lag_weights, sac_range, spherical_model, exponential_model, weighted_rss,
)
from services.geospatial import haversine_km
from tests.factories import make_dataset
from utils.errors import VariogramFitError

KM_PER_DEGREE = np.pi / 180.0 * 6371.0


def _equator_line(values):
    n = len(values)
    return Dataset(ids=np.arange(n), lon=np.arange(n, dtype=float), lat=np.zeros(n), year=np.full(n, 2010),
                   label=np.arange(n) % 2, X=np.asarray(values, dtype=float).reshape(n, 1), feature_names=["z"])


def _synthetic(model, nugget, psill, range_km, lags=np.linspace(10.0, 400.0, 15)):
    return EmpiricalVariogram(
        lag_centers=lags,
        semivariances=model(lags, nugget, psill, range_km),
        pair_counts=np.full(len(lags), 100),
        max_lag_km=float(lags[-1]) + 10.0,
    )


def test_three_bin_example_matches_hand_computation():
    d = _equator_line([0.0, 1.0, 3.0, 6.0])
    v = empirical_variogram(d, 0, n_lags=3, max_lag_km=3.5 * KM_PER_DEGREE, max_pairs=None)
    assert v.pair_counts.tolist() == [3, 2, 1]
    assert v.semivariances == pytest.approx([7.0 / 3.0, 8.5, 18.0])
    assert v.lag_centers == pytest.approx(np.array([1.0, 2.0, 3.0]) * KM_PER_DEGREE)


def test_empirical_variogram_matches_brute_force():
    dataset = make_dataset(n=60, seed=4)
    v = empirical_variogram(dataset, 1, n_lags=6, max_pairs=None)
    edges = np.linspace(0.0, v.max_lag_km, 7)
    sums, counts = np.zeros(6), np.zeros(6)
    n = len(dataset)
    for i in range(n):
        for j in range(i + 1, n):
            h = haversine_km((dataset.lon[i], dataset.lat[i]), (dataset.lon[j], dataset.lat[j]))
            if h >= v.max_lag_km:
                continue
            b = min(int(np.searchsorted(edges, h, side="right")) - 1, 5)
            sums[b] += (dataset.X[i, 1] - dataset.X[j, 1]) ** 2
            counts[b] += 1
    used = counts > 0
    assert v.pair_counts.tolist() == counts[used].astype(int).tolist()
    assert v.semivariances == pytest.approx(sums[used] / (2.0 * counts[used]))


def test_constant_feature_has_zero_semivariance():
    d = make_dataset(n=80)
    flat = Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=d.label,
                   X=np.full((80, 1), 4.2), feature_names=["c"])
    v = empirical_variogram(flat, 0, n_lags=5)
    assert np.all(v.semivariances == 0.0)
    assert fit_variogram(v, "spherical").degenerate


def test_too_few_lags_rejected(dataset):
    with pytest.raises(VariogramFitError):
        empirical_variogram(dataset, 0, n_lags=2)


def test_pair_sampling_is_deterministic(dataset):
    a = empirical_variogram(dataset, 0, n_lags=5, max_pairs=500, seed=3)
    b = empirical_variogram(dataset, 0, n_lags=5, max_pairs=500, seed=3)
    assert np.array_equal(a.semivariances, b.semivariances)
    assert a.pair_counts.sum() <= 500


@pytest.mark.parametrize("weighting", ["cressie", "pairs"])
@pytest.mark.parametrize("kind, model", [("spherical", spherical_model), ("exponential", exponential_model)])
def test_fit_recovers_noise_free_range(kind, model, weighting):
    v = _synthetic(model, 0.1, 1.0, 150.0)
    fit = fit_variogram(v, kind, seed=1, weighting=weighting)
    assert fit.range_km == pytest.approx(150.0, rel=0.05)
    assert fit.sill == pytest.approx(1.1, rel=0.05)
    assert not fit.degenerate


def test_fit_is_no_worse_than_flat_line():
    rng = np.random.default_rng(0)
    lags = np.linspace(10.0, 400.0, 15)
    noisy = spherical_model(lags, 0.2, 0.8, 200.0) + rng.normal(0, 0.05, 15)
    v = EmpiricalVariogram(lag_centers=lags, semivariances=np.clip(noisy, 0, None), pair_counts=rng.integers(20, 200, 15),
                           max_lag_km=410.0)
    fit = fit_variogram(v, "spherical")
    flat = float(np.average(v.semivariances, weights=v.pair_counts))
    assert fit.rss <= weighted_rss(v, "spherical", [flat, 0.0, 100.0]) + 1e-12


def test_cressie_weights_favour_short_lags():
    v = _synthetic(exponential_model, 0.0, 1.0, 100.0)
    pairs, cressie = lag_weights(v, "pairs"), lag_weights(v, "cressie")
    assert np.all(pairs == 100.0)
    assert np.all(np.diff(cressie) < 0)
    assert cressie == pytest.approx(100.0 / v.semivariances ** 2)


def test_cressie_fit_ignores_the_scale_of_the_feature():
    rng = np.random.default_rng(2)
    lags = np.linspace(10.0, 300.0, 15)
    gamma = exponential_model(lags, 0.1, 1.0, 40.0) * rng.uniform(0.9, 1.1, 15)
    counts = rng.integers(50, 2000, 15)
    small = EmpiricalVariogram(lag_centers=lags, semivariances=gamma, pair_counts=counts, max_lag_km=310.0)
    large = EmpiricalVariogram(lag_centers=lags, semivariances=100.0 * gamma, pair_counts=counts, max_lag_km=310.0)
    a, b = fit_variogram(small, "exponential", seed=0), fit_variogram(large, "exponential", seed=0)
    assert b.range_km == pytest.approx(a.range_km, rel=1e-3)
    assert b.sill == pytest.approx(100.0 * a.sill, rel=1e-3)


def test_unknown_weighting_rejected(dataset):
    v = _synthetic(spherical_model, 0.0, 1.0, 100.0)
    with pytest.raises(VariogramFitError):
        fit_variogram(v, "spherical", weighting="inverse")
    with pytest.raises(ValueError):
        sac_range(dataset, weighting="inverse")


def test_fit_unknown_model():
    v = _synthetic(spherical_model, 0.0, 1.0, 100.0)
    with pytest.raises(VariogramFitError):
        fit_variogram(v, "gaussian")


def _fake_fit(ranges):
    def fit_feature(d, j, model_kind, *args):
        fit = FittedVariogram(model_kind="spherical", nugget=0.0, partial_sill=1.0, range_km=ranges[j], rss=0.0)
        return FeatureVariogram(feature=d.feature_names[j], fit=fit)
    return fit_feature


@pytest.mark.parametrize("aggregation, expected", [("median", 85.0), ("mean", 425.0 / 3.0), ("max", 300.0)])
def test_sac_range_aggregation(monkeypatch, dataset, aggregation, expected):
    monkeypatch.setattr(sac_service, "_fit_feature", _fake_fit([40.0, 85.0, 300.0]))
    result = sac_range(dataset, model_kind="spherical", aggregation=aggregation)
    assert result.range_km == pytest.approx(expected)
    assert len(result.to_frame()) == 3


def test_sac_range_all_constant_features():
    d = make_dataset(n=60)
    flat = Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=d.label,
                   X=np.ones((60, 2)), feature_names=["a", "b"])
    with pytest.raises(VariogramFitError):
        sac_range(flat)


def test_sac_range_skips_binary_features(monkeypatch):
    monkeypatch.setattr(sac_service, "_fit_feature", _fake_fit([40.0, 85.0, 300.0]))
    d = make_dataset(n=100)
    X = d.X.copy()
    X[:, 2] = (X[:, 2] > 0).astype(float)
    mixed = Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=d.label, X=X, feature_names=d.feature_names)
    result = sac_range(mixed, n_lags=6)
    assert result.skipped_features == ["f2"]
    assert [row.feature for row in result.table] == ["f0", "f1"]



@pytest.mark.parametrize("aggregation", ["median", "mean", "max"])
def test_sac_range_ignores_feature_order(aggregation):
    d = make_dataset(n=150, seed=3)
    rng = np.random.default_rng(3)
    X = np.column_stack([d.lon, d.lat + rng.normal(0.0, 0.2, 150), np.sin(2.0 * d.lon) + np.cos(3.0 * d.lat)])
    names = ["east", "north", "wave"]
    order = [2, 0, 1]
    a = sac_range(Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=d.label, X=X, feature_names=names),
                  aggregation=aggregation, seed=1)
    b = sac_range(Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=d.label, X=X[:, order],
                          feature_names=[names[j] for j in order]), aggregation=aggregation, seed=1)
    assert b.range_km == pytest.approx(a.range_km, rel=1e-12)
    ranges = {row.feature: row.fit.range_km for row in a.table}
    assert {row.feature: row.fit.range_km for row in b.table} == pytest.approx(ranges, rel=1e-12)
