from typing import Any, Dict, List, Literal, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from .base import FrozenModel, IdArray

SchemeKind = Literal["random", "spatial", "environmental", "spatio_temporal", "tss"]


class BlockAssignment(FrozenModel):
    ids: IdArray
    block_ids: IdArray
    # grid cell (column, row) of every block, indexed by block id
    cells: List[Tuple[int, int]]
    block_size_km: float = Field(..., gt=0)
    origin: Tuple[float, float]

    @model_validator(mode="after")
    def validate_blocks(self):
        if len(self.ids) != len(self.block_ids):
            raise ValueError("Every record needs exactly one block id")
        if len(self.block_ids):
            present = np.unique(self.block_ids)
            if present[0] != 0 or present[-1] != len(present) - 1 or len(present) != len(self.cells):
                raise ValueError("Block ids must be contiguous from 0")
        return self

    @property
    def n_blocks(self) -> int:
        return len(self.cells)

    def adjacent(self, a: int, b: int) -> bool:
        """True when blocks a and b share an edge or a corner (or are the same block)."""
        (ca, ra), (cb, rb) = self.cells[a], self.cells[b]
        return abs(ca - cb) <= 1 and abs(ra - rb) <= 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"id": self.ids, "block_id": self.block_ids})


class TemporalIntervals(BaseModel):
    intervals: List[Tuple[int, int]]

    @field_validator("intervals")
    def validate_intervals(cls, v):
        if not v:
            raise ValueError("At least one temporal interval is required")
        for start, end in v:
            if start > end:
                raise ValueError(f"Empty interval {start}-{end}")
        for (s0, e0), (s1, e1) in zip(v, v[1:]):
            if s1 <= e0:
                raise ValueError(f"Intervals must be strictly increasing and disjoint: {s0}-{e0}, {s1}-{e1}")
        return v

    def __len__(self) -> int:
        return len(self.intervals)

    def index_of(self, years) -> np.ndarray:
        """Interval index per year, -1 where no interval covers it."""
        years = np.asarray(years)
        out = np.full(len(years), -1, dtype=np.int64)
        for t, (start, end) in enumerate(self.intervals):
            out[(years >= start) & (years <= end)] = t
        return out

    def label(self, t: int) -> str:
        start, end = self.intervals[t]
        return f"{start}-{end}"


class Fold(FrozenModel):
    train_ids: IdArray
    val_ids: IdArray
    interval: int = -1
    single_class_val: bool = False

    @model_validator(mode="after")
    def validate_fold(self):
        if len(self.train_ids) == 0 or len(self.val_ids) == 0:
            raise ValueError("Train and validation sets must be non-empty")
        if np.intersect1d(self.train_ids, self.val_ids).size:
            raise ValueError("Train and validation ids overlap")
        return self


class FoldPlan(FrozenModel):
    folds: List[Fold]
    scheme: SchemeKind
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_plan(self):
        if not self.folds:
            raise ValueError("A fold plan needs at least one fold")
        return self

    def __len__(self) -> int:
        return len(self.folds)

    @property
    def last_fold_train_ids(self) -> np.ndarray:
        """Training subset of the last fold: the LAST FOLD deployment set."""
        return self.folds[-1].train_ids

    @property
    def n_flagged(self) -> int:
        return sum(1 for f in self.folds if f.single_class_val)

    def header(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "params": self.params,
            "seed": self.params.get("seed"),
            "n_folds": len(self.folds),
            "flagged_folds": [j for j, f in enumerate(self.folds) if f.single_class_val],
            "fold_intervals": [f.interval for f in self.folds],
        }

    def to_frame(self) -> pd.DataFrame:
        parts = []
        for j, fold in enumerate(self.folds):
            parts.append(pd.DataFrame({"record_id": fold.train_ids, "fold_index": j, "role": "train"}))
            parts.append(pd.DataFrame({"record_id": fold.val_ids, "fold_index": j, "role": "val"}))
        return pd.concat(parts, ignore_index=True)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, header: Dict[str, Any]) -> "FoldPlan":
        folds = []
        flagged = set(header.get("flagged_folds", []))
        intervals = header.get("fold_intervals") or [-1] * int(header["n_folds"])
        for j in range(int(header["n_folds"])):
            part = frame[frame["fold_index"] == j]
            folds.append(Fold(
                train_ids=part.loc[part["role"] == "train", "record_id"].to_numpy(),
                val_ids=part.loc[part["role"] == "val", "record_id"].to_numpy(),
                interval=int(intervals[j]),
                single_class_val=j in flagged,
            ))
        return cls(folds=folds, scheme=header["scheme"], params=header.get("params", {}))
