import uvicorn
import logging
from datetime import datetime, timezone
from contextlib import asynccontextmanager

import numpy as np
import pandas as pd
import scipy
import sklearn
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware

from config import APP_NAME, APP_VERSION, DEFAULT_JOBS, LOG_LEVEL, OUTPUT_DIR
from routes.datasets import router as datasets_router
from routes.experiments import router as experiments_router

# Configure logging
logging.basicConfig(level=LOG_LEVEL)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"{APP_NAME} {APP_VERSION} starting (output dir '{OUTPUT_DIR}', {DEFAULT_JOBS} jobs)")
    yield
    logger.info(f"{APP_NAME} shutting down")


app = FastAPI(title=APP_NAME, version=APP_VERSION, lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(datasets_router)
app.include_router(experiments_router)


@app.get("/")
async def root():
    return f"Welcome to {APP_NAME}! Visit /docs for API Endpoints and docs."


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": APP_VERSION,
        "libraries": {
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
    }


@app.middleware("http")
async def log_requests(request: Request, call_next):
    logger.info(f"Incoming Request: {request.method} {request.url}")
    response = await call_next(request)
    return response


if __name__ == "__main__":
    uvicorn.run(app, host="0.0.0.0", port=8000)
