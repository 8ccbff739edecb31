from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .base import FloatArray, FrozenModel, IdArray

CRS_NOTE = "WGS84 geographic coordinates (EPSG:4326)"


class Record(BaseModel):
    id: int
    lon: float = Field(..., ge=-180.0, le=180.0)
    lat: float = Field(..., ge=-90.0, le=90.0)
    year: int
    label: int
    features: List[float]

    @field_validator("label")
    def validate_label(cls, v):
        if v not in (0, 1):
            raise ValueError("Label must be 0 (absence) or 1 (presence)")
        return v


class ColumnSchema(BaseModel):
    """Maps CSV column names onto the record fields."""
    lon: str
    lat: str
    year: str
    label: str
    features: List[str]
    id: Optional[str] = None
    continuous: Optional[List[str]] = None

    @field_validator("features")
    def validate_features(cls, v):
        if not v:
            raise ValueError("At least one feature column is required")
        if len(set(v)) != len(v):
            raise ValueError("Feature columns must be unique")
        return v

    @model_validator(mode="after")
    def validate_continuous(self):
        if self.continuous is not None:
            unknown = [c for c in self.continuous if c not in self.features]
            if unknown:
                raise ValueError(f"Continuous columns not among features: {unknown}")
        for col in (self.lon, self.lat, self.year, self.label):
            if col in self.features:
                raise ValueError(f"Column '{col}' cannot be both a coordinate/year/label and a feature")
        return self


class IngestSummary(BaseModel):
    rows_read: int
    rows_kept: int
    rows_dropped: int
    drop_reasons: Dict[str, int] = Field(default_factory=dict)


class TemporalSplitSpec(BaseModel):
    train_years: Tuple[int, int]
    test_years: Tuple[int, int]

    @field_validator("train_years", "test_years")
    def validate_range(cls, v):
        if v[0] > v[1]:
            raise ValueError(f"Empty year range: {v[0]}-{v[1]}")
        return v

    @model_validator(mode="after")
    def validate_disjoint(self):
        a, b = self.train_years, self.test_years
        if a[0] <= b[1] and b[0] <= a[1]:
            raise ValueError(f"Train years {a} and test years {b} overlap")
        return self


class Dataset(FrozenModel):
    """Immutable column store of records; arrays are read-only and row-aligned."""
    ids: IdArray
    lon: FloatArray
    lat: FloatArray
    year: IdArray
    label: IdArray
    X: FloatArray
    feature_names: List[str]
    continuous: Optional[List[str]] = None
    crs_note: str = CRS_NOTE

    @model_validator(mode="after")
    def validate_columns(self):
        n = len(self.ids)
        for name in ("lon", "lat", "year", "label"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Column '{name}' has {len(getattr(self, name))} rows, expected {n}")
        if self.X.ndim != 2 or self.X.shape != (n, len(self.feature_names)):
            raise ValueError(
                f"Feature matrix shape {self.X.shape} does not match {n} records x {len(self.feature_names)} features"
            )
        if len(np.unique(self.ids)) != n:
            raise ValueError("Record ids must be unique")
        if n and (np.any(np.abs(self.lon) > 180.0) or np.any(np.abs(self.lat) > 90.0)):
            raise ValueError("Coordinates out of bounds")
        if n and not np.all(np.isin(self.label, (0, 1))):
            raise ValueError("Labels must be binary")
        if self.crs_note != CRS_NOTE:
            raise ValueError("Only WGS84 geographic coordinates are supported")
        return self

    @classmethod
    def from_records(cls, records: Iterable[Record], feature_names: List[str], **kwargs) -> "Dataset":
        records = list(records)
        width = len(feature_names)
        for r in records:
            if len(r.features) != width:
                raise ValueError(f"Record {r.id} has {len(r.features)} features, expected {width}")
        return cls(
            ids=[r.id for r in records],
            lon=[r.lon for r in records],
            lat=[r.lat for r in records],
            year=[r.year for r in records],
            label=[r.label for r in records],
            X=np.array([r.features for r in records], dtype=np.float64).reshape(len(records), width),
            feature_names=feature_names,
            **kwargs,
        )

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def record(self, position: int) -> Record:
        return Record(
            id=int(self.ids[position]),
            lon=float(self.lon[position]),
            lat=float(self.lat[position]),
            year=int(self.year[position]),
            label=int(self.label[position]),
            features=self.X[position].tolist(),
        )

    def take(self, positions) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            ids=self.ids[positions],
            lon=self.lon[positions],
            lat=self.lat[positions],
            year=self.year[positions],
            label=self.label[positions],
            X=self.X[positions].reshape(len(positions), self.n_features),
            feature_names=self.feature_names,
            continuous=self.continuous,
        )

    def positions_of(self, ids) -> np.ndarray:
        """Row positions of the given ids, in the order given."""
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) == 0:
            return np.empty(0, dtype=np.int64)
        if len(self) == 0:
            raise KeyError(f"Unknown record ids: {ids[:5].tolist()}")
        order = np.argsort(self.ids, kind="stable")
        sorted_ids = self.ids[order]
        idx = np.clip(np.searchsorted(sorted_ids, ids), 0, len(sorted_ids) - 1)
        unknown = sorted_ids[idx] != ids
        if np.any(unknown):
            raise KeyError(f"Unknown record ids: {ids[unknown][:5].tolist()}")
        return order[idx]

    def select(self, ids) -> "Dataset":
        """Subset by id, rows in ascending id order."""
        return self.take(self.positions_of(np.sort(np.asarray(ids, dtype=np.int64))))

    def continuous_indices(self) -> List[int]:
        if self.continuous is not None:
            return [self.feature_names.index(c) for c in self.continuous]
        # binary indicator features carry no variogram information
        return [j for j in range(self.n_features) if len(np.unique(self.X[:, j])) != 2]
