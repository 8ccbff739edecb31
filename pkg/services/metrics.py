import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from config import SELECTION_BIAS_NOTE
from models.results import OracleResult, RobustnessReport, ScoreSeries
from utils.errors import MetricError

logger = logging.getLogger(__name__)


def _check_binary(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise MetricError(f"Label and score vectors differ in shape: {labels.shape} vs {scores.shape}")
    if not np.all(np.isin(labels, (0, 1))):
        raise MetricError("Labels must be 0/1")
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0 or n_pos == len(labels):
        raise MetricError("ROC AUC is undefined for a single class")
    return labels, scores, n_pos, len(labels) - n_pos


def roc_auc(labels, scores) -> float:
    """Mann-Whitney AUC via average-rank sums; tied pairs count one half."""
    labels, scores, n_pos, n_neg = _check_binary(labels, scores)
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc_bruteforce(labels, scores) -> float:
    """Pair enumeration over every (presence, absence) pair, used as an oracle."""
    labels, scores, n_pos, n_neg = _check_binary(labels, scores)
    pos = scores[labels == 1][:, np.newaxis]
    neg = scores[labels == 0][np.newaxis, :]
    wins = np.sum(pos > neg) + 0.5 * np.sum(pos == neg)
    return float(wins / (n_pos * n_neg))


def mae(series: ScoreSeries) -> float:
    return float(np.mean(np.abs(np.asarray(series.test) - np.asarray(series.validation))))


def _is_constant(a: np.ndarray) -> bool:
    return bool(np.ptp(a) <= 1e-12 * max(1.0, float(np.abs(a).max())))


def _pearson(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if _is_constant(a) or _is_constant(b):
        return None
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt(np.sum(da ** 2) * np.sum(db ** 2))
    if denom == 0.0:
        return None
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))


def pearson(series: ScoreSeries) -> Optional[float]:
    """Pearson r of validation vs. test scores; None when either vector is constant."""
    return _pearson(np.asarray(series.validation, dtype=np.float64), np.asarray(series.test, dtype=np.float64))


def spearman(series: ScoreSeries) -> Optional[float]:
    """Pearson r on average ranks, so ties are handled; None when a rank vector is constant."""
    return _pearson(rankdata(series.validation, method="average"), rankdata(series.test, method="average"))


def robustness_report(
    scheme: str,
    strategy: str,
    learner: str,
    config_ids: Sequence[int],
    val_scores: Sequence[float],
    test_scores: Sequence[float],
    oracle: Optional[OracleResult] = None,
) -> RobustnessReport:
    """Pair each config's mean validation AUC with its out-of-time test AUC.

    The oracle (best test AUC and the config reaching it) is taken from
    `oracle` when given, else from the first config with the highest test AUC.
    """
    if len(config_ids) < 2:
        raise MetricError(f"Robustness needs at least 2 scored configs, got {len(config_ids)}")
    series = ScoreSeries(validation=list(map(float, val_scores)), test=list(map(float, test_scores)))
    if oracle is None:
        best = int(np.argmax(series.test))
        oracle = OracleResult(test_auc=series.test[best], config_id=int(config_ids[best]), caveat=SELECTION_BIAS_NOTE)
    report = RobustnessReport(
        scheme=scheme,
        strategy=strategy,
        learner=learner,
        m=series.m,
        mae=mae(series),
        pearson=pearson(series),
        spearman=spearman(series),
        oracle_test_auc=oracle.test_auc,
        oracle_config_id=oracle.config_id,
        series=series,
        config_ids=[int(c) for c in config_ids],
    )
    if report.pearson is None or report.spearman is None:
        logger.warning(f"Correlation undefined for {scheme}/{strategy}/{learner}: a score vector is constant")
    return report


def iqr(values: List[float]) -> tuple:
    """25th and 75th percentiles."""
    q25, q75 = np.percentile(np.asarray(values, dtype=np.float64), [25, 75])
    return float(q25), float(q75)
