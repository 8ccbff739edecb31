import os
import logging
from typing import Optional

import joblib
import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit

from config import MODEL_FORMAT_VERSION
from models.learners import LearnerSpec, TrainedModel, TreeArrays
from utils.errors import LearnerError
from utils.trees import build_tree

logger = logging.getLogger(__name__)

LOGIT_CLIP = 30.0


def _validate_training_data(X: np.ndarray, y: np.ndarray, ids: np.ndarray) -> None:
    if X.ndim != 2 or len(X) != len(y) or len(y) != len(ids):
        raise LearnerError(f"Shape mismatch: X {X.shape}, y {y.shape}, ids {ids.shape}")
    if len(y) < 2:
        raise LearnerError("At least 2 training records are required")
    if not np.all(np.isin(y, (0, 1))):
        raise LearnerError("Labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise LearnerError("Training labels contain a single class")
    if not np.all(np.isfinite(X)):
        raise LearnerError("Training features contain non-finite values")


def log_loss(y: np.ndarray, logits: np.ndarray) -> float:
    """Mean logistic loss computed on logits, stable for large |logit|."""
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def _fit_rf_tree(X, y, spec: LearnerSpec, seed_seq: np.random.SeedSequence) -> TreeArrays:
    rng = np.random.default_rng(seed_seq)
    n, p = X.shape
    n_boot = max(1, int(round(spec.params["bootstrap_fraction"] * n)))
    rows = np.sort(rng.integers(n, size=n_boot))
    mtry = max(1, int(round(spec.params["mtry_fraction"] * p)))
    return build_tree(X, rows, spec.int_param("max_depth"), spec.int_param("min_samples_leaf"), rng,
                      y=y, mtry=mtry)


def _fit_rf(spec: LearnerSpec, X, y, n_jobs: int):
    n_trees = spec.int_param("n_trees")
    if n_trees < 1:
        raise LearnerError("Random forest needs at least one tree")
    seeds = np.random.SeedSequence(spec.seed).spawn(n_trees)
    trees = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_fit_rf_tree)(X, y, spec, s) for s in seeds
    )
    return list(trees), 0.0, []


def _fit_gbm(spec: LearnerSpec, X, y):
    n, p = X.shape
    rng = np.random.default_rng(spec.seed)
    lr = spec.params["learning_rate"]
    l2 = spec.params["l2_leaf_penalty"]
    n_rows = max(1, int(round(spec.params["subsample_fraction"] * n)))
    n_cols = max(1, int(round(spec.params["colsample_fraction"] * p)))

    base_rate = float(np.mean(y))
    base_score = float(np.log(base_rate / (1.0 - base_rate)))
    logits = np.full(n, base_score)
    losses = [log_loss(y, logits)]
    trees = []
    for _ in range(spec.int_param("n_trees")):
        prob = expit(np.clip(logits, -LOGIT_CLIP, LOGIT_CLIP))
        grad = prob - y
        hess = prob * (1.0 - prob)
        rows = np.arange(n) if n_rows >= n else np.sort(rng.choice(n, size=n_rows, replace=False))
        cols = None if n_cols >= p else np.sort(rng.choice(p, size=n_cols, replace=False))
        tree = build_tree(X, rows, spec.int_param("max_depth"), spec.int_param("min_samples_leaf"), rng,
                          grad=grad, hess=hess, l2=l2, features=cols)
        # shrinkage is stored in the leaves so prediction is a plain sum
        tree = tree.scaled(lr)
        trees.append(tree)
        logits = logits + tree.predict(X)
        losses.append(log_loss(y, np.clip(logits, -LOGIT_CLIP, LOGIT_CLIP)))
    return trees, base_score, losses


def fit(spec: LearnerSpec, X, y, ids: Optional[np.ndarray] = None, n_jobs: int = 1) -> TrainedModel:
    """Fit a random forest or a logistic gradient-boosting ensemble.

    Rows are put in canonical id order first, so seeded row sampling does not
    depend on the order the caller passed them in. Synthetic rows (id -1) are
    used for fitting but left out of training_ids.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    ids = np.arange(len(y), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    _validate_training_data(X, y, ids)

    order = np.argsort(ids, kind="stable")
    X, y, ids = X[order], y[order], ids[order]

    try:
        if spec.kind == "rf":
            trees, base_score, losses = _fit_rf(spec, X, y, n_jobs)
        else:
            trees, base_score, losses = _fit_gbm(spec, X, y)
    except LearnerError:
        raise
    except Exception as e:
        logger.error(f"Error fitting {spec.kind} model: {e}")
        raise

    return TrainedModel(
        spec=spec,
        trees=trees,
        feature_count=X.shape[1],
        training_ids=ids[ids >= 0],
        base_score=base_score,
        train_loss=losses,
        format_version=MODEL_FORMAT_VERSION,
    )


def decision_function(model: TrainedModel, X) -> np.ndarray:
    """Summed gbm log-odds (before clipping)."""
    X = np.asarray(X, dtype=np.float64)
    logits = np.full(len(X), model.base_score)
    for tree in model.trees:
        logits = logits + tree.predict(X)
    return logits


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_count:
        raise LearnerError(f"Expected {model.feature_count} features, got shape {X.shape}")
    if model.spec.kind == "rf":
        total = np.zeros(len(X))
        for tree in model.trees:
            total = total + tree.predict(X)
        return np.clip(total / len(model.trees), 0.0, 1.0)
    return expit(np.clip(decision_function(model, X), -LOGIT_CLIP, LOGIT_CLIP))


def save_model(model: TrainedModel, path: str) -> str:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": model.spec.model_dump(),
        "trees": [
            {"feature": t.feature, "threshold": t.threshold, "left": t.left, "right": t.right, "value": t.value}
            for t in model.trees
        ],
        "feature_count": model.feature_count,
        "training_ids": model.training_ids,
        "base_score": model.base_score,
        "train_loss": model.train_loss,
    }
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    joblib.dump(payload, path)
    logger.info(f"Saved {model.spec.kind} model with {len(model.trees)} trees to {path}")
    return path


def load_model(path: str) -> TrainedModel:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Model file not found: {path}")
    payload = joblib.load(path)
    if not isinstance(payload, dict) or payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise LearnerError(f"Unsupported model format in {path}")
    return TrainedModel(
        spec=LearnerSpec(**payload["spec"]),
        trees=[TreeArrays(**t) for t in payload["trees"]],
        feature_count=payload["feature_count"],
        training_ids=payload["training_ids"],
        base_score=payload["base_score"],
        train_loss=payload["train_loss"],
        format_version=payload["format_version"],
    )
