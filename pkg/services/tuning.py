import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from config import INTEGER_PARAMS, SELECTION_BIAS_NOTE
from models.dataset import Dataset
from models.experiment import SmoteConfig
from models.folds import Fold, FoldPlan
from models.learners import HyperparamConfig, LearnerKind, LearnerSpec, ParamRange
from models.results import ConfigResult, FinalModelBundle, FoldScore, OracleResult, SearchResult
from services import learner_service
from services.metrics import roc_auc
from services.resampling import smote as apply_smote
from utils.errors import TuningError

logger = logging.getLogger(__name__)


def sample_configs(space: Dict[str, ParamRange], n: int, seed: int = 0, learner: str = "rf",
                   kind: LearnerKind = "rf") -> List[HyperparamConfig]:
    """n independent draws from the space; config ids start at 1 in draw order.

    Dimensions are drawn in sorted-name order so the result depends only on
    (space, n, seed). Integer parameters are drawn uniformly over the
    inclusive integer range, log-flagged ones log-uniformly.
    """
    if not space:
        raise TuningError("Hyperparameter space is empty")
    if n < 1:
        raise TuningError(f"n must be >= 1, got {n}")

    rng = np.random.default_rng(seed)
    configs = []
    for i in range(n):
        params = {}
        for name in sorted(space):
            r = space[name]
            if r.low == r.high:
                value = float(r.low)
            elif name in INTEGER_PARAMS:
                value = float(rng.integers(int(np.ceil(r.low)), int(np.floor(r.high)) + 1))
            elif r.log:
                value = float(np.exp(rng.uniform(np.log(r.low), np.log(r.high))))
            else:
                value = float(rng.uniform(r.low, r.high))
            params[name] = value
        configs.append(HyperparamConfig(
            config_id=i + 1, learner=learner, kind=kind, params=params, seed=int(rng.integers(2 ** 31 - 1)),
        ))
    return configs


def _fold_smote_config(smote: SmoteConfig, config: HyperparamConfig, fold_index: int) -> SmoteConfig:
    seed = np.random.SeedSequence([smote.seed, config.seed, fold_index]).generate_state(1)[0]
    return smote.model_copy(update={"seed": int(seed)})


def _training_table(d: Dataset, ids: np.ndarray, smote: Optional[SmoteConfig], seed_cfg: Optional[SmoteConfig]):
    train = d.select(ids)
    if smote is None:
        return train.X, train.label, train.ids, 0
    table = apply_smote(train.X, train.label, train.ids, seed_cfg)
    return table.X, table.y, table.ids, table.n_synthetic


def evaluate_fold(config: HyperparamConfig, fold: Fold, fold_index: int, d: Dataset,
                  smote: Optional[SmoteConfig] = None) -> FoldScore:
    if fold.single_class_val:
        return FoldScore(fold_index=fold_index, skipped=True, n_train=len(fold.train_ids))

    seed_cfg = _fold_smote_config(smote, config, fold_index) if smote is not None else None
    X, y, ids, n_syn = _training_table(d, fold.train_ids, smote, seed_cfg)
    leaked = np.intersect1d(ids[ids >= 0], fold.val_ids)
    if leaked.size:
        raise TuningError(f"Fold {fold_index}: {leaked.size} validation ids reached the training table")

    model = learner_service.fit(LearnerSpec.from_config(config), X, y, ids)
    val = d.select(fold.val_ids)
    auc = roc_auc(val.label, learner_service.predict_proba(model, val.X))
    return FoldScore(fold_index=fold_index, val_auc=auc, n_train=len(fold.train_ids), n_synthetic=n_syn)


def _collect(config: HyperparamConfig, scores: List[FoldScore]) -> ConfigResult:
    scored = [s.val_auc for s in scores if not s.skipped]
    if not scored:
        raise TuningError(f"Config {config.config_id}: every fold was skipped (single-class validation sets)")
    return ConfigResult(config=config, fold_scores=scores, mean_val_auc=float(np.mean(scored)))


def cv_evaluate(config: HyperparamConfig, plan: FoldPlan, d: Dataset,
                smote: Optional[SmoteConfig] = None) -> ConfigResult:
    """Score one config on every fold; single-class validation folds are skipped and flagged."""
    scores = [evaluate_fold(config, fold, j, d, smote) for j, fold in enumerate(plan.folds)]
    return _collect(config, scores)


def run_search(configs: Sequence[HyperparamConfig], plan: FoldPlan, d: Dataset, scheme: str, learner: str,
               smote: Optional[SmoteConfig] = None, n_jobs: int = 1) -> SearchResult:
    """Evaluate every config x fold pair; results are keyed by (config, fold) so order never matters."""
    tasks = [(c, j) for c in range(len(configs)) for j in range(len(plan.folds))]
    scores = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(evaluate_fold)(configs[c], plan.folds[j], j, d, smote) for c, j in tasks
    )
    by_config: Dict[int, List[FoldScore]] = {c: [] for c in range(len(configs))}
    for (c, _), score in zip(tasks, scores):
        by_config[c].append(score)

    rows = [_collect(configs[c], sorted(by_config[c], key=lambda s: s.fold_index)) for c in range(len(configs))]
    skipped = rows[0].n_skipped if rows else 0
    if skipped:
        logger.info(f"{scheme}/{learner}: {skipped} of {len(plan.folds)} folds skipped per config")
    return SearchResult(scheme=scheme, learner=learner, rows=rows)


def select_best(result: SearchResult) -> HyperparamConfig:
    """Highest mean validation AUC; the earliest sampled config wins ties."""
    if not result.rows:
        raise TuningError("Search result has no configs")
    return result.rows[int(np.argmax(result.mean_scores()))].config


def finalize(strategy: str, theta_star: HyperparamConfig, plan: FoldPlan, d_in_time: Dataset,
             smote: Optional[SmoteConfig] = None) -> FinalModelBundle:
    """Fit the deployment model: on all in-time records (retrain) or the last fold's training subset."""
    if strategy == "retrain":
        ids = np.sort(d_in_time.ids)
    elif strategy == "last_fold":
        ids = plan.last_fold_train_ids
    else:
        raise TuningError(f"Unknown strategy '{strategy}'")

    labels = d_in_time.select(ids).label
    if smote is None and len(np.unique(labels)) < 2:
        raise TuningError(f"{strategy} training set contains a single class")

    seed_cfg = _fold_smote_config(smote, theta_star, len(plan.folds)) if smote is not None else None
    X, y, train_ids, n_syn = _training_table(d_in_time, ids, smote, seed_cfg)
    model = learner_service.fit(LearnerSpec.from_config(theta_star), X, y, train_ids)
    return FinalModelBundle(strategy=strategy, theta_star=theta_star, model=model,
                            training_ids=ids, n_synthetic=n_syn)


def evaluate_test(bundle: FinalModelBundle, d_test: Dataset) -> float:
    """Out-of-time AUC of the bundled model; no refitting."""
    return roc_auc(d_test.label, learner_service.predict_proba(bundle.model, d_test.X))


def _finalize_and_score(config, strategy, plan, d_in_time, d_test, smote) -> float:
    return evaluate_test(finalize(strategy, config, plan, d_in_time, smote), d_test)


def score_out_of_time(configs: Sequence[HyperparamConfig], strategy: str, plan: FoldPlan, d_in_time: Dataset,
                      d_test: Dataset, smote: Optional[SmoteConfig] = None, n_jobs: int = 1) -> List[float]:
    """Finalize every config under one strategy and score it out of time."""
    return list(Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_finalize_and_score)(c, strategy, plan, d_in_time, d_test, smote)
        for c in configs
    ))


def oracle_best(config_ids: Sequence[int], test_aucs: Sequence[float]) -> OracleResult:
    """Maximum test AUC over all configs, reported with its selection-bias caveat."""
    if not len(test_aucs):
        raise TuningError("No test scores to take the oracle over")
    best = int(np.argmax(test_aucs))
    return OracleResult(test_auc=float(test_aucs[best]), config_id=int(config_ids[best]), caveat=SELECTION_BIAS_NOTE)
