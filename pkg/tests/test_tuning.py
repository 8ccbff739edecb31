import numpy as np
import pytest

from models.experiment import SmoteConfig
from models.folds import Fold, FoldPlan, TemporalIntervals
from models.learners import HyperparamConfig, ParamRange
from models.results import ConfigResult, FoldScore, SearchResult
from services import learner_service
from services.metrics import roc_auc_bruteforce
from services.splitters import random_kfold, tss_cv
from services.tuning import (
    cv_evaluate, evaluate_test, finalize, oracle_best, run_search, sample_configs, score_out_of_time, select_best,
)
from tests.factories import make_dataset
from utils.errors import TuningError

RF_SPACE = {
    "n_trees": ParamRange(low=5, high=15),
    "max_depth": ParamRange(low=2, high=5),
    "min_samples_leaf": ParamRange(low=1, high=5),
    "mtry_fraction": ParamRange(low=0.3, high=1.0),
    "bootstrap_fraction": ParamRange(low=0.6, high=1.0),
}


def rf_config(config_id=1, n_trees=10, seed=0):
    params = {"n_trees": n_trees, "max_depth": 4, "min_samples_leaf": 2, "mtry_fraction": 1.0,
              "bootstrap_fraction": 1.0}
    return HyperparamConfig(config_id=config_id, learner="rf", kind="rf", params=params, seed=seed)


def gbm_config(config_id=1, n_trees=20, seed=0):
    params = {"n_trees": n_trees, "learning_rate": 0.1, "max_depth": 1, "min_samples_leaf": 1,
              "subsample_fraction": 1.0, "colsample_fraction": 1.0, "l2_leaf_penalty": 0.0}
    return HyperparamConfig(config_id=config_id, learner="gbm", kind="gbm", params=params, seed=seed)


def result_with_means(means):
    rows = [
        ConfigResult(config=rf_config(config_id=i + 1), fold_scores=[FoldScore(fold_index=0, val_auc=m)],
                     mean_val_auc=m)
        for i, m in enumerate(means)
    ]
    return SearchResult(scheme="random", learner="rf", rows=rows)


def test_sample_configs_is_deterministic():
    a = sample_configs(RF_SPACE, 6, seed=4)
    b = sample_configs(RF_SPACE, 6, seed=4)
    assert [c.model_dump() for c in a] == [c.model_dump() for c in b]
    assert [c.config_id for c in a] == [1, 2, 3, 4, 5, 6]


def test_sample_configs_respects_ranges():
    for config in sample_configs(RF_SPACE, 20, seed=1):
        for name, r in RF_SPACE.items():
            assert r.low <= config.params[name] <= r.high
        assert float(config.params["n_trees"]).is_integer()


def test_log_uniform_draws_stay_positive():
    space = {"learning_rate": ParamRange(low=0.005, high=0.3, log=True)}
    values = [c.params["learning_rate"] for c in sample_configs(space, 50, seed=2)]
    assert min(values) >= 0.005 and max(values) <= 0.3


def test_degenerate_space_gives_identical_params():
    space = {name: ParamRange(low=r.low, high=r.low) for name, r in RF_SPACE.items()}
    configs = sample_configs(space, 3, seed=0)
    assert len({tuple(sorted(c.params.items())) for c in configs}) == 1


def test_single_config_sample():
    assert len(sample_configs(RF_SPACE, 1, seed=8)) == 1


def test_empty_space_is_an_error():
    with pytest.raises(TuningError):
        sample_configs({}, 5)


@pytest.mark.parametrize("means, expected", [([0.7, 0.9, 0.8], 2), ([0.75, 0.75, 0.75], 1), ([0.6], 1)])
def test_select_best(means, expected):
    assert select_best(result_with_means(means)).config_id == expected


@pytest.mark.parametrize("transform", [lambda m: m ** 3, np.exp, lambda m: np.log(m + 1.0)])
def test_select_best_ignores_increasing_transforms(transform):
    rng = np.random.default_rng(12)
    for _ in range(50):
        means = np.round(rng.uniform(0.5, 1.0, size=int(rng.integers(1, 12))), 2)
        expected = select_best(result_with_means(means.tolist())).config_id
        assert select_best(result_with_means(transform(means).tolist())).config_id == expected


@pytest.mark.parametrize("config", [rf_config(), gbm_config()])
def test_separable_data_scores_perfectly(separable_dataset, config):
    plan = random_kfold(separable_dataset, k=5, seed=0)
    result = cv_evaluate(config, plan, separable_dataset)
    assert all(s.val_auc == 1.0 for s in result.fold_scores)
    assert result.mean_val_auc == 1.0


def test_independent_labels_average_near_chance():
    means = []
    for seed in range(20):
        d = make_dataset(n=200, seed=seed, prevalence=0.5)
        plan = random_kfold(d, k=5, seed=seed)
        means.append(cv_evaluate(rf_config(n_trees=5, seed=seed), plan, d).mean_val_auc)
    assert np.mean(means) == pytest.approx(0.5, abs=0.05)


def test_single_class_fold_is_skipped(separable_dataset):
    d = separable_dataset
    ids = np.sort(d.ids)
    negatives = ids[d.select(ids).label == 0]
    pure = negatives[:10]
    rest = np.random.default_rng(0).permutation(np.setdiff1d(ids, pure))
    folds = [Fold(train_ids=np.setdiff1d(ids, pure), val_ids=pure, single_class_val=True)]
    for chunk in np.array_split(rest, 4):
        folds.append(Fold(train_ids=np.setdiff1d(ids, chunk), val_ids=np.sort(chunk)))
    plan = FoldPlan(folds=folds, scheme="random", params={})

    result = cv_evaluate(rf_config(), plan, d)
    assert result.n_skipped == 1
    assert result.fold_scores[0].skipped and result.fold_scores[0].val_auc is None
    assert result.mean_val_auc == pytest.approx(np.mean([s.val_auc for s in result.fold_scores[1:]]))


def test_every_fold_skipped_is_an_error(dataset):
    pure = dataset.ids[dataset.label == 0][:5]
    fold = Fold(train_ids=np.setdiff1d(dataset.ids, pure), val_ids=pure, single_class_val=True)
    with pytest.raises(TuningError):
        cv_evaluate(rf_config(), FoldPlan(folds=[fold], scheme="random"), dataset)


def test_search_is_reproducible_and_independent_of_workers(dataset):
    configs = sample_configs(RF_SPACE, 3, seed=1)
    plan = random_kfold(dataset, k=3, seed=1)
    serial = run_search(configs, plan, dataset, "random", "rf", n_jobs=1)
    threaded = run_search(configs, plan, dataset, "random", "rf", n_jobs=3)
    assert serial.to_frame().equals(threaded.to_frame())


def test_search_with_smote_records_synthetic_rows():
    d = make_dataset(n=200, prevalence=0.1, seed=12)
    plan = random_kfold(d, k=4, seed=0)
    result = run_search([rf_config()], plan, d, "random", "rf", smote=SmoteConfig(target_presence_ratio=0.3))
    assert all(s.n_synthetic > 0 for s in result.rows[0].fold_scores if not s.skipped)


def test_retrain_uses_every_in_time_record(dataset):
    plan = random_kfold(dataset, k=5, seed=0)
    bundle = finalize("retrain", rf_config(), plan, dataset)
    assert bundle.training_set_size == len(dataset)
    assert np.array_equal(bundle.model.training_ids, np.sort(dataset.ids))


def test_last_fold_under_random_kfold(dataset):
    plan = random_kfold(dataset, k=5, seed=0)
    bundle = finalize("last_fold", rf_config(), plan, dataset)
    assert abs(bundle.training_set_size - 4 * len(dataset) / 5) <= 1


def test_last_fold_under_tss_uses_first_three_intervals(dataset):
    intervals = TemporalIntervals(intervals=[(2003, 2006), (2007, 2010), (2011, 2014), (2015, 2018)])
    plan = tss_cv(dataset, intervals)
    bundle = finalize("last_fold", gbm_config(), plan, dataset)
    expected = dataset.ids[dataset.year <= 2014]
    assert set(bundle.training_ids.tolist()) == set(expected.tolist())


def test_last_fold_single_class_without_smote(dataset):
    pure = dataset.ids[dataset.label == 0]
    val = np.setdiff1d(dataset.ids, pure)
    plan = FoldPlan(folds=[Fold(train_ids=pure, val_ids=val)], scheme="random")
    with pytest.raises(TuningError):
        finalize("last_fold", rf_config(), plan, dataset)


def test_unknown_strategy(dataset):
    with pytest.raises(TuningError):
        finalize("ensemble", rf_config(), random_kfold(dataset, 5), dataset)


def test_evaluate_test_matches_brute_force():
    train = make_dataset(n=200, seed=1, signal=2.0)
    test = make_dataset(n=120, seed=2, signal=2.0)
    bundle = finalize("retrain", gbm_config(), random_kfold(train, 5), train)
    scores = learner_service.predict_proba(bundle.model, test.X)
    assert evaluate_test(bundle, test) == pytest.approx(roc_auc_bruteforce(test.label, scores))


def test_constant_model_scores_one_half(dataset):
    bundle = finalize("retrain", gbm_config(n_trees=0), random_kfold(dataset, 5), dataset)
    assert evaluate_test(bundle, make_dataset(n=50, seed=7)) == 0.5


def test_score_out_of_time_is_one_score_per_config(separable_dataset):
    d = separable_dataset
    configs = [rf_config(1), gbm_config(2)]
    scores = score_out_of_time(configs, "retrain", random_kfold(d, 5), d, d)
    assert scores == [1.0, 1.0]


def test_oracle_picks_the_maximum():
    oracle = oracle_best([1, 2, 3], [0.76, 0.79, 0.72])
    assert oracle.test_auc == 0.79
    assert oracle.config_id == 2
    assert "selection bias" in oracle.caveat
