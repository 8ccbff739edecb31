from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from config import GBM_PARAMS, RF_PARAMS
from .base import FloatArray, FrozenModel, IdArray

LearnerKind = Literal["rf", "gbm"]


class ParamRange(BaseModel):
    low: float
    high: float
    log: bool = False

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.low > self.high:
            raise ValueError(f"Invalid range: low {self.low} > high {self.high}")
        if self.log and self.low <= 0:
            raise ValueError("Log-uniform ranges need a positive lower bound")
        return self


class HyperparamConfig(BaseModel):
    config_id: int
    learner: str
    kind: LearnerKind
    params: Dict[str, float]
    seed: int


class LearnerSpec(BaseModel):
    kind: LearnerKind
    params: Dict[str, float]
    seed: int = 0

    @model_validator(mode="after")
    def validate_params(self):
        required = RF_PARAMS if self.kind == "rf" else GBM_PARAMS
        missing = [p for p in required if p not in self.params]
        if missing:
            raise ValueError(f"Missing {self.kind} hyperparameters: {missing}")
        p = self.params
        if p["n_trees"] < 0 or p["max_depth"] < 1 or p["min_samples_leaf"] < 1:
            raise ValueError("n_trees must be >= 0, max_depth and min_samples_leaf >= 1")
        fractions = ["mtry_fraction", "bootstrap_fraction"] if self.kind == "rf" \
            else ["subsample_fraction", "colsample_fraction"]
        for name in fractions:
            if not 0.0 < p[name] <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.kind == "gbm" and (p["learning_rate"] <= 0 or p["l2_leaf_penalty"] < 0):
            raise ValueError("learning_rate must be > 0 and l2_leaf_penalty >= 0")
        return self

    @classmethod
    def from_config(cls, config: HyperparamConfig) -> "LearnerSpec":
        return cls(kind=config.kind, params=config.params, seed=config.seed)

    def int_param(self, name: str) -> int:
        return int(round(self.params[name]))


class TreeArrays(FrozenModel):
    """Flat binary tree; feature == -1 marks a leaf. Rows go left when x < threshold."""
    feature: IdArray
    threshold: FloatArray
    left: IdArray
    right: IdArray
    value: FloatArray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            rows = np.nonzero(active)[0]
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] < self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scaled(self, factor: float) -> "TreeArrays":
        return TreeArrays(feature=self.feature, threshold=self.threshold, left=self.left, right=self.right,
                          value=factor * self.value)


class TrainedModel(FrozenModel):
    spec: LearnerSpec
    trees: List[TreeArrays]
    feature_count: int
    training_ids: IdArray
    # gbm only: prior log-odds and per-stage training log-loss.
    # The loss only descends stage by stage when every stage sees all rows (subsample_fraction == 1).
    base_score: float = 0.0
    train_loss: List[float] = Field(default_factory=list)
    format_version: Optional[int] = None
