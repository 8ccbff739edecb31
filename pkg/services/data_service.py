import os
import logging
from typing import Tuple

import numpy as np
import pandas as pd

from models.dataset import ColumnSchema, Dataset, IngestSummary, TemporalSplitSpec
from utils.errors import DataValidationError

logger = logging.getLogger(__name__)


def load_csv(path: str, schema: ColumnSchema) -> Tuple[Dataset, IngestSummary]:
    """Read a comma-separated UTF-8 file into a Dataset, dropping rows with missing mapped cells."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Input not found: {path}")

    try:
        df = pd.read_csv(path, sep=",", encoding="utf-8", decimal=".", low_memory=False)
    except Exception as e:
        logger.error(f"Unable to read {path} -> {e}")
        raise DataValidationError(f"Could not parse CSV {path}: {e}")

    mapped = [schema.lon, schema.lat, schema.year, schema.label] + list(schema.features)
    if schema.id:
        mapped.append(schema.id)
    missing_cols = [c for c in mapped if c not in df.columns]
    if missing_cols:
        raise DataValidationError(f"Missing mapped columns {missing_cols}. Available: {list(df.columns)[:20]}")

    rows_read = len(df)
    if schema.id is None:
        df = df.assign(__row_id=np.arange(rows_read))
        id_col = "__row_id"
    else:
        id_col = schema.id
    table = df[[id_col] + mapped[:4 + len(schema.features)]].copy()

    drop_reasons = {}
    missing_mask = table.isna().any(axis=1)
    drop_reasons["missing_value"] = int(missing_mask.sum())

    numeric = table.apply(pd.to_numeric, errors="coerce")
    unparseable = numeric.isna().any(axis=1) & ~missing_mask
    drop_reasons["unparseable_value"] = int(unparseable.sum())

    keep = ~(missing_mask | unparseable)
    numeric = numeric[keep]

    lon = numeric[schema.lon].to_numpy(dtype=np.float64)
    lat = numeric[schema.lat].to_numpy(dtype=np.float64)
    out_of_bounds = (np.abs(lon) > 180.0) | (np.abs(lat) > 90.0)
    drop_reasons["coordinates_out_of_bounds"] = int(out_of_bounds.sum())
    numeric = numeric[~out_of_bounds]

    if numeric.empty:
        raise DataValidationError(f"No usable rows in {path} ({rows_read} read)")

    labels = numeric[schema.label].to_numpy()
    bad_labels = ~np.isin(labels, (0, 1))
    if np.any(bad_labels):
        raise DataValidationError(f"Non-binary label value(s) {np.unique(labels[bad_labels])[:5].tolist()} in column '{schema.label}'")

    ids = numeric[id_col].to_numpy()
    if np.any(ids != np.round(ids)):
        raise DataValidationError(f"Id column '{id_col}' must hold integers")
    if len(np.unique(ids)) != len(ids):
        raise DataValidationError(f"Duplicate ids in column '{id_col}'")
    years = numeric[schema.year].to_numpy()
    if np.any(years != np.round(years)):
        raise DataValidationError(f"Year column '{schema.year}' must hold integers")

    dataset = Dataset(
        ids=ids.astype(np.int64),
        lon=numeric[schema.lon].to_numpy(dtype=np.float64),
        lat=numeric[schema.lat].to_numpy(dtype=np.float64),
        year=years.astype(np.int64),
        label=labels.astype(np.int64),
        X=numeric[list(schema.features)].to_numpy(dtype=np.float64),
        feature_names=list(schema.features),
        continuous=schema.continuous,
    )
    summary = IngestSummary(
        rows_read=rows_read,
        rows_kept=len(dataset),
        rows_dropped=rows_read - len(dataset),
        drop_reasons={k: v for k, v in drop_reasons.items() if v},
    )
    logger.info(f"Ingest summary {summary.model_dump_json()}")
    return dataset, summary


def temporal_split(d: Dataset, spec: TemporalSplitSpec) -> Tuple[Dataset, Dataset]:
    """Partition by year into (in_time, out_of_time); records in neither range are dropped."""
    (train_lo, train_hi), (test_lo, test_hi) = spec.train_years, spec.test_years
    in_time = (d.year >= train_lo) & (d.year <= train_hi)
    out_of_time = (d.year >= test_lo) & (d.year <= test_hi)

    dropped = int(len(d) - in_time.sum() - out_of_time.sum())
    if dropped:
        logger.warning(f"Temporal split dropped {dropped} records outside {spec.train_years} and {spec.test_years}")
    if not in_time.any():
        raise DataValidationError(f"No records in training years {spec.train_years}")
    if not out_of_time.any():
        raise DataValidationError(f"No records in test years {spec.test_years}")

    return d.take(np.nonzero(in_time)[0]), d.take(np.nonzero(out_of_time)[0])


def class_counts(d: Dataset) -> Tuple[int, int]:
    n_presence = int(np.sum(d.label == 1))
    return n_presence, len(d) - n_presence


def require_both_classes(d: Dataset, what: str) -> None:
    n_presence, n_absence = class_counts(d)
    if n_presence == 0 or n_absence == 0:
        raise DataValidationError(f"{what} needs both classes (presence={n_presence}, absence={n_absence})")


def dataset_frame(d: Dataset) -> pd.DataFrame:
    """Dataset as a flat table: id, lon, lat, year, label, then one column per feature."""
    frame = pd.DataFrame({"id": d.ids, "lon": d.lon, "lat": d.lat, "year": d.year, "label": d.label})
    for j, name in enumerate(d.feature_names):
        frame[name] = d.X[:, j]
    return frame
