from typing import List, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from .base import FloatArray, FrozenModel, IdArray

VariogramKind = Literal["spherical", "exponential"]


class EmpiricalVariogram(FrozenModel):
    lag_centers: FloatArray
    semivariances: FloatArray
    pair_counts: IdArray
    max_lag_km: float

    @model_validator(mode="after")
    def validate_lags(self):
        n = len(self.lag_centers)
        if len(self.semivariances) != n or len(self.pair_counts) != n:
            raise ValueError("Lag, semivariance and pair-count vectors must have equal lengths")
        if n > 1 and np.any(np.diff(self.lag_centers) <= 0):
            raise ValueError("Lag centers must be strictly increasing")
        if not np.all(np.isfinite(self.semivariances)) or np.any(self.semivariances < 0):
            raise ValueError("Semivariances must be finite and non-negative")
        return self

    def __len__(self) -> int:
        return len(self.lag_centers)


class FittedVariogram(BaseModel):
    model_kind: VariogramKind
    nugget: float = Field(..., ge=0)
    partial_sill: float = Field(..., ge=0)
    range_km: float = Field(..., gt=0)
    rss: float
    degenerate: bool = False

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    @property
    def effective_range_km(self) -> float:
        # exponential models reach ~95% of the sill at three times the scale parameter
        if self.model_kind == "exponential":
            return 3.0 * self.range_km
        return self.range_km


class FeatureVariogram(BaseModel):
    feature: str
    fit: FittedVariogram


class SacRangeResult(BaseModel):
    range_km: float
    aggregation: str
    model_kind: VariogramKind
    table: List[FeatureVariogram]
    skipped_features: List[str] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = [{
            "feature": row.feature,
            "model": row.fit.model_kind,
            "nugget": row.fit.nugget,
            "partial_sill": row.fit.partial_sill,
            "range_km": row.fit.range_km,
            "effective_range_km": row.fit.effective_range_km,
            "rss": row.fit.rss,
            "degenerate": row.fit.degenerate,
        } for row in self.table]
        return pd.DataFrame(rows, columns=[
            "feature", "model", "nugget", "partial_sill", "range_km", "effective_range_km", "rss", "degenerate",
        ])
