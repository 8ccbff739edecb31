import numpy as np
from pydantic import BaseModel, ConfigDict
from pydantic_core import core_schema


class IdArray(np.ndarray):
    """int64 record-id vector; accepts any integer sequence and serializes to a list."""

    @classmethod
    def validate(cls, v):
        arr = np.asarray(v)
        if arr.size == 0:
            arr = arr.astype(np.int64)
        if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("Invalid id vector: expected a 1-D integer sequence")
        arr = arr.astype(np.int64, copy=True)
        arr.setflags(write=False)
        return arr

    @classmethod
    def __get_pydantic_core_schema__(cls, _source_type, _handler):
        return core_schema.no_info_after_validator_function(
            cls.validate,
            core_schema.any_schema(),
            serialization=core_schema.plain_serializer_function_ser_schema(lambda a: [int(x) for x in a]),
        )


class FloatArray(np.ndarray):
    """float64 array (any shape), frozen after validation."""

    @classmethod
    def validate(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        return arr

    @classmethod
    def __get_pydantic_core_schema__(cls, _source_type, _handler):
        return core_schema.no_info_after_validator_function(
            cls.validate,
            core_schema.any_schema(),
            serialization=core_schema.plain_serializer_function_ser_schema(lambda a: a.tolist()),
        )


class FrozenModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, populate_by_name=True, frozen=True)
