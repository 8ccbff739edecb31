import asyncio
import logging
from functools import partial
from typing import Optional

from fastapi import APIRouter, HTTPException

from config import DEFAULT_JOBS
from models.experiment import ExperimentConfig, VirtualSpeciesParams
from services.data_service import class_counts
from services.pipeline import parse_only, run_experiment
from services.simulation import simulate_virtual_species

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/experiments", tags=["Experiments"])


@router.post("/simulate")
async def simulate(params: VirtualSpeciesParams):
    """Simulate a virtual species and summarize it (the records themselves are not returned)."""
    try:
        loop = asyncio.get_event_loop()
        dataset = await loop.run_in_executor(None, simulate_virtual_species, params)
        n_presence, n_absence = class_counts(dataset)
        return {
            "records": len(dataset),
            "presence": n_presence,
            "absence": n_absence,
            "prevalence": n_presence / len(dataset),
            "features": dataset.feature_names,
            "years": [int(dataset.year.min()), int(dataset.year.max())],
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error simulating virtual species: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Error simulating virtual species: {str(e)}")


@router.post("/run")
async def run(cfg: ExperimentConfig, seed: Optional[int] = None, jobs: int = DEFAULT_JOBS,
              only: Optional[str] = None):
    """Run an experiment in a worker thread and return its manifest."""
    try:
        filters = parse_only(only)
        loop = asyncio.get_event_loop()
        manifest = await loop.run_in_executor(
            None, partial(run_experiment, cfg, None, seed, jobs, filters)
        )
        return manifest
    except (ValueError, FileNotFoundError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error running experiment '{cfg.name}': {str(e)}")
        raise HTTPException(status_code=500, detail=f"Error running experiment: {str(e)}")
