import os
import logging
import platform
from datetime import datetime, timezone
from typing import Dict, List, Optional

import joblib
import numpy as np
import pandas as pd
import scipy
import sklearn

from config import APP_NAME, APP_VERSION, DEFAULT_JOBS, SELECTION_BIAS_NOTE
from models.dataset import Dataset
from models.experiment import ExperimentConfig, LearnerConfig, SchemeConfig
from models.folds import FoldPlan, TemporalIntervals
from services import learner_service, splitters, tuning
from services.data_service import load_csv, require_both_classes, temporal_split
from services.geospatial import thin
from services.metrics import robustness_report
from services.reporting import emit_report
from services.sac_service import sac_range
from services.simulation import simulate_virtual_species
from utils.errors import CellFailure
from utils.file_processing import config_hash, write_csv, write_json, write_plan

logger = logging.getLogger(__name__)

SEARCH_COLUMNS = ["config_id", "learner", "scheme", "fold", "val_auc", "skipped"]
SUMMARY_COLUMNS = ["scheme", "learner", "config_id", "mean_val_auc", "test_auc_retrain", "test_auc_lastfold"]
FINAL_COLUMNS = ["scheme", "learner", "strategy", "config_id", "mean_val_auc", "test_auc", "training_set_size"]
ROBUSTNESS_COLUMNS = [
    "scheme", "strategy", "learner", "m", "mae", "pearson", "spearman", "oracle_test_auc", "oracle_config_id",
]
ELBOW_K_MAX = 10


def learner_seed(seed: int, learner_index: int) -> int:
    """Config-sampling seed of one learner; the same configs are searched under every scheme."""
    return int(np.random.SeedSequence([seed, learner_index]).generate_state(1)[0])


def parse_only(only: Optional[str]) -> Dict[str, str]:
    """'scheme=sp200,learner=rf' -> {'scheme': 'sp200', 'learner': 'rf'}"""
    if not only:
        return {}
    filters = {}
    for part in only.split(","):
        key, sep, value = part.partition("=")
        if not sep or key.strip() not in ("scheme", "learner") or not value.strip():
            raise ValueError(f"Invalid --only filter '{part}' (expected scheme=... or learner=...)")
        filters[key.strip()] = value.strip()
    return filters


def select_cells(cfg: ExperimentConfig, only: Optional[Dict[str, str]] = None):
    """Schemes and (index, learner) pairs kept by an --only filter."""
    only = only or {}
    schemes = [s for s in cfg.schemes if only.get("scheme", s.name) == s.name]
    learners = [(i, l) for i, l in enumerate(cfg.learners) if only.get("learner", l.name) == l.name]
    if not schemes or not learners:
        raise ValueError(f"Filter {only} matches no (scheme, learner) cell")
    return schemes, learners


def load_source(cfg: ExperimentConfig, seed_override: Optional[int] = None):
    """Dataset named by the config (CSV or simulation) plus its ingest summary, if any."""
    if cfg.data is not None:
        d, summary = load_csv(cfg.data.path, cfg.data.schema_)
        return d, summary.model_dump()
    params = cfg.simulate if seed_override is None else cfg.simulate.model_copy(update={"seed": seed_override})
    return simulate_virtual_species(params), None


def prepare_data(cfg: ExperimentConfig, seed_override: Optional[int] = None):
    """Load or simulate, thin when configured, and split in time: (all, ingest, in_time, out_of_time)."""
    seed = cfg.seed if seed_override is None else seed_override
    d, ingest = load_source(cfg, seed_override)
    if cfg.thin_min_dist_m is not None:
        d = d.select(thin(d, cfg.thin_min_dist_m, seed))
    in_time, test = temporal_split(d, cfg.temporal_split)
    require_both_classes(in_time, "In-time data")
    require_both_classes(test, "Out-of-time test data")
    return d, ingest, in_time, test


def build_plan(scheme: SchemeConfig, d: Dataset, block_km: Optional[float], seed: int) -> FoldPlan:
    if scheme.kind == "random":
        return splitters.random_kfold(d, scheme.k, seed, repeats=scheme.repeats)
    if scheme.kind == "spatial":
        return splitters.spatial_blocks_cv(d, block_km, scheme.k, seed)
    if scheme.kind == "environmental":
        return splitters.env_blocks_cv(d, scheme.k, seed)
    intervals = TemporalIntervals(intervals=scheme.intervals)
    if scheme.kind == "spatio_temporal":
        return splitters.spatiotemporal_cv(d, block_km, scheme.k, intervals, seed)
    return splitters.tss_cv(d, intervals)


def run_cell(scheme: SchemeConfig, learner: LearnerConfig, learner_index: int, plan: FoldPlan,
             in_time: Dataset, test: Dataset, cfg: ExperimentConfig, seed: int, n_jobs: int,
             out_dir: str) -> dict:
    """Search, select, finalize and score one (scheme, learner) pair."""
    configs = tuning.sample_configs(learner.search_space(), cfg.n_configs, learner_seed(seed, learner_index),
                                    learner=learner.name, kind=learner.kind)
    search = tuning.run_search(configs, plan, in_time, scheme.name, learner.name, cfg.smote, n_jobs)
    theta_star = tuning.select_best(search)
    means = {row.config.config_id: row.mean_val_auc for row in search.rows}
    ids = [c.config_id for c in configs]

    test_by_strategy, finals, reports = {}, [], []
    for strategy in cfg.strategies:
        scores = tuning.score_out_of_time(configs, strategy, plan, in_time, test, cfg.smote, n_jobs)
        test_by_strategy[strategy] = dict(zip(ids, scores))

        bundle = tuning.finalize(strategy, theta_star, plan, in_time, cfg.smote)
        learner_service.save_model(
            bundle.model, os.path.join(out_dir, "models", f"{scheme.name}__{learner.name}__{strategy}.joblib"),
        )
        finals.append({
            "scheme": scheme.name,
            "learner": learner.name,
            "strategy": strategy,
            "config_id": theta_star.config_id,
            "mean_val_auc": means[theta_star.config_id],
            "test_auc": tuning.evaluate_test(bundle, test),
            "training_set_size": bundle.training_set_size,
        })
        if len(configs) >= 2:
            oracle = tuning.oracle_best(ids, scores)
            report = robustness_report(scheme.name, strategy, learner.name, ids, [means[i] for i in ids], scores,
                                       oracle=oracle)
            reports.append(report.to_row())
        else:
            logger.warning(f"{scheme.name}/{learner.name}: robustness needs >= 2 configs, skipped")

    summary = [{
        "scheme": scheme.name,
        "learner": learner.name,
        "config_id": i,
        "mean_val_auc": means[i],
        "test_auc_retrain": test_by_strategy.get("retrain", {}).get(i),
        "test_auc_lastfold": test_by_strategy.get("last_fold", {}).get(i),
    } for i in ids]
    return {"search": search.to_frame(), "summary": summary, "final": finals, "robustness": reports}


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None, seed_override: Optional[int] = None,
                   n_jobs: int = DEFAULT_JOBS, only: Optional[Dict[str, str]] = None) -> dict:
    """Run every (scheme x learner x strategy) cell and write the report bundle.

    Failures inside a cell are recorded in the manifest and the run carries on;
    the returned manifest has status "partial" when any cell failed. Errors
    before the cells (loading, splitting in time) propagate.
    """
    out_dir = out_dir or cfg.output_dir
    only = only or {}
    seed = cfg.seed if seed_override is None else seed_override
    started = datetime.now(timezone.utc).isoformat()
    os.makedirs(out_dir, exist_ok=True)

    d, ingest, in_time, test = prepare_data(cfg, seed_override)

    schemes, learners = select_cells(cfg, only)
    failures: List[dict] = []
    scheme_seeds = {s.name: (s.seed if seed_override is None else seed_override) for s in schemes}

    sac_km = None
    if any(s.block_km == "sac" for s in schemes):
        try:
            result = sac_range(in_time, cfg.sac_model, cfg.sac_aggregation, seed=seed, n_jobs=n_jobs)
            write_csv(result.to_frame(), os.path.join(out_dir, "sac_ranges.csv"))
            sac_km = result.range_km
        except Exception as e:
            logger.error(f"SAC range estimation failed -> {e}")
            failures.append(CellFailure("sac_range", "*", None, e).to_dict())

    search_frames, summary_rows, final_rows, robustness_rows = [], [], [], []
    for scheme in schemes:
        block_km = sac_km if scheme.block_km == "sac" else scheme.block_km
        try:
            if scheme.block_km == "sac" and sac_km is None:
                raise ValueError("block_km 'sac' requested but the SAC range could not be estimated")
            plan = build_plan(scheme, in_time, block_km, scheme_seeds[scheme.name])
            write_plan(plan, os.path.join(out_dir, "plans"), scheme.name)
            if scheme.kind == "environmental":
                k_values = range(2, min(ELBOW_K_MAX, len(in_time)) + 1)
                elbow = splitters.elbow_curve(in_time, k_values, scheme_seeds[scheme.name])
                write_csv(elbow, os.path.join(out_dir, f"elbow_{scheme.name}.csv"))
        except Exception as e:
            failure = CellFailure(scheme.name, "*", None, e)
            logger.error(str(failure))
            failures.append(failure.to_dict())
            continue

        for learner_index, learner in learners:
            try:
                cell = run_cell(scheme, learner, learner_index, plan, in_time, test, cfg, seed, n_jobs, out_dir)
            except Exception as e:
                failure = CellFailure(scheme.name, learner.name, None, e)
                logger.error(str(failure))
                failures.append(failure.to_dict())
                continue
            search_frames.append(cell["search"])
            summary_rows.extend(cell["summary"])
            final_rows.extend(cell["final"])
            robustness_rows.extend(cell["robustness"])

    search = pd.concat(search_frames, ignore_index=True) if search_frames else pd.DataFrame(columns=SEARCH_COLUMNS)
    write_csv(search, os.path.join(out_dir, "search.csv"))
    write_csv(pd.DataFrame(summary_rows, columns=SUMMARY_COLUMNS), os.path.join(out_dir, "summary.csv"))
    write_csv(pd.DataFrame(final_rows, columns=FINAL_COLUMNS), os.path.join(out_dir, "final.csv"))
    write_csv(pd.DataFrame(robustness_rows, columns=ROBUSTNESS_COLUMNS), os.path.join(out_dir, "robustness.csv"))

    manifest = {
        "app": APP_NAME,
        "app_version": APP_VERSION,
        "experiment": cfg.name,
        "config_hash": config_hash(cfg),
        "config": cfg.model_dump(mode="json", by_alias=True),
        "seeds": {
            "global": seed,
            "schemes": scheme_seeds,
            "learners": {l.name: learner_seed(seed, i) for i, l in learners},
            "smote": cfg.smote.seed if cfg.smote is not None else None,
        },
        "only": only,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
            "joblib": joblib.__version__,
        },
        "records": {"total": len(d), "in_time": len(in_time), "out_of_time": len(test)},
        "ingest": ingest,
        "sac_range_km": sac_km,
        "selection_bias_note": SELECTION_BIAS_NOTE,
        "failures": failures,
        "status": "partial" if failures else "ok",
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    write_json(manifest, os.path.join(out_dir, "manifest.json"))

    if final_rows:
        emit_report(out_dir)
    logger.info(f"Experiment '{cfg.name}' finished with status {manifest['status']} ({len(failures)} failures)")
    return manifest
