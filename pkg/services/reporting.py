import os
import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from config import SELECTION_BIAS_NOTE
from services.metrics import iqr
from services.tuning import oracle_best
from utils.file_processing import write_csv

logger = logging.getLogger(__name__)

STRATEGY_COLUMNS = {"retrain": "test_auc_retrain", "last_fold": "test_auc_lastfold"}
SCATTER_COLUMNS = ["scheme", "strategy", "learner", "config_id", "val_auc", "test_auc"]
ORACLE_COLUMNS = ["scheme", "learner", "oracle_test_auc", "oracle_config_id"]


def _read(out_dir: str, name: str) -> pd.DataFrame:
    path = os.path.join(out_dir, name)
    if not os.path.exists(path):
        raise FileNotFoundError(f"Bundle file missing: {path}")
    return pd.read_csv(path)


def _ordered(values) -> List[str]:
    """Distinct values in order of first appearance."""
    return list(dict.fromkeys(values))


def oracle_results(summary: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Per strategy, the best out-of-time AUC of every (scheme, learner) and the config reaching it."""
    results = {}
    for strategy, column in STRATEGY_COLUMNS.items():
        if column not in summary or summary[column].isna().all():
            continue
        rows = []
        for (scheme, learner), group in summary.groupby(["scheme", "learner"], sort=False):
            scored = group.dropna(subset=[column])
            if scored.empty:
                continue
            oracle = oracle_best(scored["config_id"].tolist(), scored[column].tolist())
            rows.append({"scheme": scheme, "learner": learner,
                         "oracle_test_auc": oracle.test_auc, "oracle_config_id": oracle.config_id})
        results[strategy] = pd.DataFrame(rows, columns=ORACLE_COLUMNS)
    return results


def _wide(oracle: pd.DataFrame, value: str, schemes: List[str], learners: List[str]) -> pd.DataFrame:
    table = oracle.pivot(index="scheme", columns="learner", values=value)
    return table.reindex(index=schemes, columns=learners)


def oracle_tables(summary: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Best out-of-time AUC over configs, scheme x learner, one table per strategy."""
    schemes, learners = _ordered(summary["scheme"]), _ordered(summary["learner"])
    return {strategy: _wide(frame, "oracle_test_auc", schemes, learners)
            for strategy, frame in oracle_results(summary).items()}


def scatter_data(summary: pd.DataFrame) -> pd.DataFrame:
    parts = []
    for strategy, column in STRATEGY_COLUMNS.items():
        if column not in summary or summary[column].isna().all():
            continue
        part = summary[["scheme", "learner", "config_id", "mean_val_auc", column]].rename(
            columns={"mean_val_auc": "val_auc", column: "test_auc"})
        parts.append(part.assign(strategy=strategy))
    if not parts:
        return pd.DataFrame(columns=SCATTER_COLUMNS)
    return pd.concat(parts, ignore_index=True)[SCATTER_COLUMNS]


def mae_summary(robustness: pd.DataFrame) -> pd.DataFrame:
    """Mean MAE across learners with the 25th-75th percentile spread, per (strategy, scheme)."""
    rows = []
    for (strategy, scheme), group in robustness.groupby(["strategy", "scheme"], sort=False):
        values = group["mae"].to_numpy(dtype=np.float64)
        q25, q75 = iqr(values)
        rows.append({"strategy": strategy, "scheme": scheme, "n_learners": len(values),
                     "mae_mean": float(values.mean()), "mae_q25": float(q25), "mae_q75": float(q75)})
    return pd.DataFrame(rows, columns=["strategy", "scheme", "n_learners", "mae_mean", "mae_q25", "mae_q75"])


def correlation_summary(robustness: pd.DataFrame) -> pd.DataFrame:
    """Correlations averaged across learners; undefined values are left out, never counted as 0."""
    rows = []
    for (strategy, scheme), group in robustness.groupby(["strategy", "scheme"], sort=False):
        rows.append({
            "strategy": strategy,
            "scheme": scheme,
            "pearson_mean": group["pearson"].mean(skipna=True),
            "spearman_mean": group["spearman"].mean(skipna=True),
            "n_defined": int(group["pearson"].notna().sum()),
        })
    return pd.DataFrame(rows, columns=["strategy", "scheme", "pearson_mean", "spearman_mean", "n_defined"])


def _text_report(oracles: Dict[str, pd.DataFrame], final: pd.DataFrame, robustness: pd.DataFrame) -> str:
    lines = ["Validation robustness report", ""]
    for strategy, table in oracles.items():
        lines += [f"Oracle test AUC ({strategy})", table.to_string(float_format=lambda v: f"{v:.3f}"), ""]
    lines += [f"Note: {SELECTION_BIAS_NOTE}", ""]
    if not final.empty:
        lines += ["Selected configurations", final.to_string(index=False, float_format=lambda v: f"{v:.3f}"), ""]
    if not robustness.empty:
        lines += ["Robustness (validation vs. out-of-time test)",
                  robustness.to_string(index=False, float_format=lambda v: f"{v:.3f}", na_rep="n/a"), ""]
    return "\n".join(lines)


def emit_report(out_dir: str) -> str:
    """Turn a run bundle into oracle tables, robustness tables and plot-ready CSV under <out_dir>/report."""
    summary = _read(out_dir, "summary.csv")
    final = _read(out_dir, "final.csv")
    robustness = _read(out_dir, "robustness.csv")
    if summary.empty and final.empty:
        raise ValueError(f"Bundle in {out_dir} holds no results")

    report_dir = os.path.join(out_dir, "report")
    schemes, learners = _ordered(summary["scheme"]), _ordered(summary["learner"])
    oracles = {}
    for strategy, frame in oracle_results(summary).items():
        oracles[strategy] = _wide(frame, "oracle_test_auc", schemes, learners)
        write_csv(oracles[strategy].reset_index(), os.path.join(report_dir, f"oracle_{strategy}.csv"))
        write_csv(frame, os.path.join(report_dir, f"oracle_{strategy}_configs.csv"))

    ordered = robustness.sort_values(["strategy", "scheme", "learner"], kind="stable")
    write_csv(ordered, os.path.join(report_dir, "robustness_table.csv"))
    write_csv(scatter_data(summary), os.path.join(report_dir, "scatter.csv"))
    write_csv(mae_summary(robustness), os.path.join(report_dir, "mae_summary.csv"))
    write_csv(correlation_summary(robustness), os.path.join(report_dir, "correlation_summary.csv"))

    with open(os.path.join(report_dir, "report.txt"), "w", encoding="utf-8") as f:
        f.write(_text_report(oracles, final, ordered))
    logger.info(f"Report written to {report_dir}")
    return report_dir
