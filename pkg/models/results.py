from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from .base import FrozenModel, IdArray
from .experiment import Strategy
from .learners import HyperparamConfig, TrainedModel


class FoldScore(BaseModel):
    fold_index: int
    val_auc: Optional[float] = None
    skipped: bool = False
    n_train: int = 0
    n_synthetic: int = 0


class ConfigResult(BaseModel):
    config: HyperparamConfig
    fold_scores: List[FoldScore]
    mean_val_auc: float

    @property
    def n_skipped(self) -> int:
        return sum(1 for f in self.fold_scores if f.skipped)


class SearchResult(BaseModel):
    scheme: str
    learner: str
    rows: List[ConfigResult]

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            for fs in row.fold_scores:
                records.append({
                    "config_id": row.config.config_id,
                    "learner": self.learner,
                    "scheme": self.scheme,
                    "fold": fs.fold_index,
                    "val_auc": fs.val_auc,
                    "skipped": fs.skipped,
                })
        return pd.DataFrame(records, columns=["config_id", "learner", "scheme", "fold", "val_auc", "skipped"])

    def mean_scores(self) -> np.ndarray:
        return np.array([row.mean_val_auc for row in self.rows], dtype=np.float64)


class FinalModelBundle(FrozenModel):
    strategy: Strategy
    theta_star: HyperparamConfig
    model: TrainedModel
    training_ids: IdArray
    n_synthetic: int = 0

    @property
    def training_set_size(self) -> int:
        return len(self.training_ids)


class ScoreSeries(BaseModel):
    validation: List[float]
    test: List[float]

    @model_validator(mode="after")
    def validate_series(self):
        if len(self.validation) != len(self.test):
            raise ValueError("Validation and test score vectors must have equal lengths")
        if len(self.validation) < 2:
            raise ValueError("At least two paired scores are required")
        for v in self.validation + self.test:
            if not np.isfinite(v):
                raise ValueError("Scores must be finite")
        return self

    @property
    def m(self) -> int:
        return len(self.validation)


class OracleResult(BaseModel):
    test_auc: float
    config_id: int
    caveat: str


class RobustnessReport(BaseModel):
    scheme: str
    strategy: Strategy
    learner: str
    m: int
    mae: float
    # None when a score vector is constant and the correlation is undefined
    pearson: Optional[float] = None
    spearman: Optional[float] = None
    oracle_test_auc: float
    oracle_config_id: int
    series: ScoreSeries
    config_ids: List[int] = Field(default_factory=list)

    def to_row(self) -> dict:
        return {
            "scheme": self.scheme,
            "strategy": self.strategy,
            "learner": self.learner,
            "m": self.m,
            "mae": self.mae,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "oracle_test_auc": self.oracle_test_auc,
            "oracle_config_id": self.oracle_config_id,
        }
