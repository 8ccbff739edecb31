from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from config import (
    HYPERPARAM_SPACES, LEARNER_PRESETS, N_CONFIGS, OUTPUT_DIR, SAC_AGGREGATION,
    SMOTE_K_NEIGHBORS, SMOTE_TARGET_RATIO, STRATEGIES, VARIOGRAM_MODEL,
)
from .base import FloatArray, FrozenModel, IdArray
from .dataset import ColumnSchema, TemporalSplitSpec
from .folds import SchemeKind
from .learners import LearnerKind, ParamRange
from .variogram import VariogramKind

Strategy = Literal["retrain", "last_fold"]


class SmoteConfig(BaseModel):
    target_presence_ratio: float = Field(SMOTE_TARGET_RATIO, gt=0.0, lt=1.0)
    k_neighbors: int = Field(SMOTE_K_NEIGHBORS, ge=1)
    seed: int = 0


class SchemeConfig(BaseModel):
    name: str
    kind: SchemeKind
    k: Optional[int] = Field(None, ge=2)
    # a number in km, or "sac" to use the range estimated on the in-time data
    block_km: Optional[Union[float, Literal["sac"]]] = None
    intervals: Optional[List[Tuple[int, int]]] = None
    seed: int = 0
    repeats: int = Field(1, ge=1)

    @model_validator(mode="after")
    def validate_scheme(self):
        if self.kind in ("random", "spatial", "environmental", "spatio_temporal") and self.k is None:
            raise ValueError(f"Scheme '{self.name}' ({self.kind}) needs k")
        if self.kind in ("spatial", "spatio_temporal") and self.block_km is None:
            raise ValueError(f"Scheme '{self.name}' ({self.kind}) needs block_km")
        if isinstance(self.block_km, float) and self.block_km <= 0:
            raise ValueError(f"Scheme '{self.name}': block_km must be positive")
        if self.kind in ("spatio_temporal", "tss") and not self.intervals:
            raise ValueError(f"Scheme '{self.name}' ({self.kind}) needs temporal intervals")
        if self.kind == "tss" and len(self.intervals) < 2:
            raise ValueError(f"Scheme '{self.name}': TimeSeriesSplit needs at least 2 intervals")
        return self


class LearnerConfig(BaseModel):
    name: str
    kind: Optional[LearnerKind] = None
    space: Dict[str, ParamRange] = Field(default_factory=dict)

    @model_validator(mode="after")
    def resolve_preset(self):
        if self.kind is None:
            if self.name not in LEARNER_PRESETS:
                raise ValueError(f"Unknown learner '{self.name}'. Use one of {sorted(LEARNER_PRESETS)} or set kind")
            self.kind = LEARNER_PRESETS[self.name]
        return self

    def search_space(self) -> Dict[str, ParamRange]:
        """Preset ranges overlaid with the configured overrides."""
        base_name = self.name if self.name in HYPERPARAM_SPACES else self.kind
        space = {k: ParamRange(**v) for k, v in HYPERPARAM_SPACES[base_name].items()}
        space.update(self.space)
        return space


class VirtualSpeciesParams(BaseModel):
    n_points: int = Field(3000, ge=10)
    # lon_min, lat_min, lon_max, lat_max in degrees
    bbox: Tuple[float, float, float, float] = (10.0, 55.0, 16.0, 58.6)
    range_km: float = Field(100.0, gt=0)
    n_env_features: int = Field(3, ge=1)
    coefficients: Optional[List[float]] = None
    intercept: float = 0.0
    noise_rate: float = Field(0.0, ge=0.0, lt=0.5)
    # sd of an unobserved spatial field added to the logit, redrawn every latent_period_years
    latent_sd: float = Field(0.0, ge=0.0)
    latent_period_years: int = Field(4, ge=1)
    # expose projected km coordinates as two extra features (not used for the SAC range)
    coordinate_features: bool = False
    years: Tuple[int, int] = (2003, 2018)
    grid_cells: int = Field(128, ge=8, le=2048)
    seed: int = 0

    @model_validator(mode="after")
    def validate_params(self):
        lon_min, lat_min, lon_max, lat_max = self.bbox
        if not (-180 <= lon_min < lon_max <= 180 and -90 <= lat_min < lat_max <= 90):
            raise ValueError(f"Invalid bounding box {self.bbox}")
        if self.coefficients is not None and len(self.coefficients) != self.n_env_features:
            raise ValueError("One response coefficient per environmental feature is required")
        if self.years[0] > self.years[1]:
            raise ValueError("Empty year span")
        return self

    def response(self) -> List[float]:
        return self.coefficients if self.coefficients is not None else [1.0] * self.n_env_features


class DataSourceConfig(BaseModel):
    path: str
    schema_: ColumnSchema = Field(..., alias="schema")

    model_config = {"populate_by_name": True}


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    data: Optional[DataSourceConfig] = None
    simulate: Optional[VirtualSpeciesParams] = None
    thin_min_dist_m: Optional[float] = Field(None, gt=0)
    temporal_split: TemporalSplitSpec
    schemes: List[SchemeConfig]
    learners: List[LearnerConfig]
    n_configs: int = Field(N_CONFIGS, ge=1)
    smote: Optional[SmoteConfig] = None
    strategies: List[Strategy] = Field(default_factory=lambda: list(STRATEGIES))
    sac_model: VariogramKind = VARIOGRAM_MODEL
    sac_aggregation: Literal["median", "mean", "max"] = SAC_AGGREGATION
    output_dir: str = OUTPUT_DIR
    seed: int = 0

    @model_validator(mode="after")
    def validate_sources(self):
        if (self.data is None) == (self.simulate is None):
            raise ValueError("Exactly one of 'data' or 'simulate' must be given")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ValueError("Scheme names must be unique")
        learners = [l.name for l in self.learners]
        if len(set(learners)) != len(learners):
            raise ValueError("Learner names must be unique")
        if not self.schemes or not self.learners or not self.strategies:
            raise ValueError("At least one scheme, learner and strategy is required")
        return self

    @field_validator("strategies")
    def validate_strategies(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("Strategies must be unique")
        return v


class ResampledTable(FrozenModel):
    """Training table after SMOTE; synthetic rows carry id -1 and label 1."""
    X: FloatArray
    y: IdArray
    ids: IdArray
    n_synthetic: int = 0

    @property
    def presence_ratio(self) -> float:
        return float(np.mean(self.y == 1)) if len(self.y) else 0.0
