import os
import json
import asyncio
import logging
from functools import partial

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from config import SAC_AGGREGATION, VARIOGRAM_MODEL
from models.dataset import ColumnSchema
from services.data_service import class_counts, load_csv
from services.sac_service import sac_range
from utils.file_processing import save_upload

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/datasets", tags=["Datasets"])
PREVIEW_ROWS = 5


def _parse_schema(schema: str) -> ColumnSchema:
    try:
        return ColumnSchema(**json.loads(schema))
    except json.JSONDecodeError as e:
        raise HTTPException(status_code=400, detail=f"Schema is not valid JSON: {e}")
    except ValueError as e:
        raise HTTPException(status_code=400, detail=f"Invalid schema: {e}")


def _remove(path: str):
    if path and os.path.exists(path):
        os.remove(path)


@router.post("/inspect")
async def inspect_dataset(file: UploadFile = File(...), schema: str = Form(...)):
    """Load an uploaded CSV and report what was kept, dropped and why."""
    column_schema = _parse_schema(schema)
    path = None
    try:
        path = await save_upload(file)
        loop = asyncio.get_event_loop()
        dataset, summary = await loop.run_in_executor(None, load_csv, path, column_schema)
        n_presence, n_absence = class_counts(dataset)
        return {
            "summary": summary.model_dump(),
            "presence": n_presence,
            "absence": n_absence,
            "features": dataset.feature_names,
            "continuous": [dataset.feature_names[j] for j in dataset.continuous_indices()],
            "years": [int(dataset.year.min()), int(dataset.year.max())],
            "crs": dataset.crs_note,
            "preview": [dataset.record(i).model_dump() for i in range(min(PREVIEW_ROWS, len(dataset)))],
        }
    except HTTPException:
        raise
    except (ValueError, FileNotFoundError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error inspecting dataset: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Error inspecting dataset: {str(e)}")
    finally:
        _remove(path)


@router.post("/sac-range")
async def estimate_sac_range(
    file: UploadFile = File(...),
    schema: str = Form(...),
    model: str = Form(VARIOGRAM_MODEL),
    aggregation: str = Form(SAC_AGGREGATION),
    seed: int = Form(0),
):
    """Fit per-feature variograms on an uploaded CSV and aggregate their effective ranges."""
    column_schema = _parse_schema(schema)
    path = None
    try:
        path = await save_upload(file)
        loop = asyncio.get_event_loop()
        dataset, _ = await loop.run_in_executor(None, load_csv, path, column_schema)
        result = await loop.run_in_executor(
            None, partial(sac_range, dataset, model, aggregation, seed=seed)
        )
        return {
            "range_km": result.range_km,
            "aggregation": result.aggregation,
            "model": result.model_kind,
            "skipped_features": result.skipped_features,
            "table": json.loads(result.to_frame().to_json(orient="records")),
        }
    except HTTPException:
        raise
    except (ValueError, KeyError, FileNotFoundError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error estimating SAC range: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Error estimating SAC range: {str(e)}")
    finally:
        _remove(path)
