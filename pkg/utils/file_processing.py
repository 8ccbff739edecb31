import os
import json
import uuid
import hashlib
import logging
from typing import Any, Dict

import aiofiles
import pandas as pd

from config import UPLOAD_DIR, UPLOAD_MAX_BYTES
from models.experiment import ExperimentConfig
from models.folds import FoldPlan

logger = logging.getLogger(__name__)


def get_file_type(filename: str) -> str:
    """Determine file type from filename"""
    ext = filename.lower().split('.')[-1]
    if ext == 'csv':
        return 'csv'
    else:
        raise ValueError(f"Unsupported file type: {ext}")


def write_csv(frame: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(payload: Dict[str, Any], path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def read_json(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Unable to parse {path} -> {e}")
        raise ValueError(f"Invalid JSON in {path}: {e}")


def load_experiment_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment config; data paths resolve relative to the config file."""
    cfg = ExperimentConfig(**read_json(path))
    if cfg.data is not None and not os.path.isabs(cfg.data.path):
        resolved = os.path.join(os.path.dirname(os.path.abspath(path)), cfg.data.path)
        cfg = cfg.model_copy(update={"data": cfg.data.model_copy(update={"path": resolved})})
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_plan(plan: FoldPlan, directory: str, name: str) -> str:
    """Fold plan as <name>.csv (record_id, fold_index, role) plus a <name>.json header."""
    write_csv(plan.to_frame(), os.path.join(directory, f"{name}.csv"))
    write_json(plan.header(), os.path.join(directory, f"{name}.json"))
    return os.path.join(directory, f"{name}.csv")


def read_plan(csv_path: str) -> FoldPlan:
    header_path = os.path.splitext(csv_path)[0] + ".json"
    if not os.path.exists(csv_path):
        raise FileNotFoundError(f"Fold plan not found: {csv_path}")
    return FoldPlan.from_frame(pd.read_csv(csv_path), read_json(header_path))


async def save_upload(file, directory: str = UPLOAD_DIR) -> str:
    """Write an uploaded CSV to a uniquely named file; the caller removes it."""
    filename = os.path.basename(file.filename or "upload.csv")
    if get_file_type(filename) != "csv":
        raise ValueError("Only CSV uploads are supported")
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"temp_{uuid.uuid4().hex}_{filename}")
    content = await file.read()
    if len(content) > UPLOAD_MAX_BYTES:
        raise ValueError(f"File size exceeds {UPLOAD_MAX_BYTES // (1024 * 1024)}MB limit")
    async with aiofiles.open(path, "wb") as f:
        await f.write(content)
    return path
