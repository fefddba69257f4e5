"""Annotated numpy array types usable as pydantic fields.

Arrays are copied and frozen on validation so model instances behave as
immutable values, and serialize to nested lists for JSON output.
"""

from __future__ import annotations

from typing import Annotated, Any

import numpy as np

from pydantic import PlainSerializer, PlainValidator


def _frozen(value: Any, dtype: type) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _as_float_array(value: Any) -> np.ndarray:
    return _frozen(value, np.float64)


def _as_int_array(value: Any) -> np.ndarray:
    if isinstance(value, np.ndarray) and value.dtype.kind == 'f':
        if not np.all(np.equal(np.mod(value, 1), 0)):
            raise ValueError('integer array expected, got fractional values')
    return _frozen(value, np.int64)


def _to_list(array: np.ndarray) -> list:
    return array.tolist()


FloatArray = Annotated[
    np.ndarray,
    PlainValidator(_as_float_array),
    PlainSerializer(_to_list, return_type=list),
]

IntArray = Annotated[
    np.ndarray,
    PlainValidator(_as_int_array),
    PlainSerializer(_to_list, return_type=list),
]
