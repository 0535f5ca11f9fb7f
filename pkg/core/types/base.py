from typing import Annotated, Any

import numpy as np
from pydantic import GetCoreSchemaHandler
from pydantic_core import core_schema


class _Float64ArrayType:
    """Pydantic-совместимый numpy массив float64 (только для чтения)"""

    @classmethod
    def validate(cls, v: Any) -> np.ndarray:
        try:
            array = np.array(v, dtype=np.float64, copy=True)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Value is not convertible to a float array: {e}") from e

        if not np.all(np.isfinite(array)):
            raise ValueError("Array contains non-finite values")

        # Массивы внутри моделей неизменяемы
        array.setflags(write=False)
        return array

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source_type: Any, handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls.validate,
            serialization=core_schema.plain_serializer_function_ser_schema(
                lambda x: x.tolist(),
                when_used="json",
            ),
        )

    @classmethod
    def __get_pydantic_json_schema__(cls, core_schema_obj, handler):
        return {
            "type": "array",
            "description": "Numeric array (float64)",
        }


Float64Array = Annotated[np.ndarray, _Float64ArrayType]


def frozen_array(values: Any) -> np.ndarray:
    """Копия в float64 без права записи"""
    return _Float64ArrayType.validate(values)


class _Int64ArrayType:
    """Массив индексов int64 (только для чтения)"""

    @classmethod
    def validate(cls, v: Any) -> np.ndarray:
        try:
            array = np.array(v, dtype=np.int64, copy=True).reshape(-1)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Value is not convertible to an index array: {e}") from e
        array.setflags(write=False)
        return array

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source_type: Any, handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls.validate,
            serialization=core_schema.plain_serializer_function_ser_schema(
                lambda x: x.tolist(),
                when_used="json",
            ),
        )


Int64Array = Annotated[np.ndarray, _Int64ArrayType]
