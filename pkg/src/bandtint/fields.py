import math
import re
from typing import Annotated, Any

import numpy as np
from pydantic import AfterValidator, BeforeValidator, Field, GetCoreSchemaHandler
from pydantic_core import PydanticCustomError, core_schema
from pydantic_extra_types.color import Color

_SCHEME_PATTERN = re.compile(r'^grid(\d+)$')
MAX_GRID_EXPONENT = 4


class _PlanesAnnotation:
    """
    Channel-planar (C, H, W) float array; JSON form is nested lists.
    """

    @classmethod
    def __get_pydantic_core_schema__(
        cls,
        source_type: type[Any],
        handler: GetCoreSchemaHandler,
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls._validate,
            serialization=core_schema.plain_serializer_function_ser_schema(
                cls._serialize,
                when_used='json',
            ),
        )

    @classmethod
    def _validate(cls, value: Any) -> np.ndarray:
        planes = np.asarray(value)
        if not np.issubdtype(planes.dtype, np.floating):
            planes = planes.astype(np.float32)
        if planes.ndim != 3 or 0 in planes.shape:
            raise PydanticCustomError(
                'planes_shape',
                'planes must be a non-empty (channels, height, width) array, got shape {shape}',
                {'shape': tuple(planes.shape)},
            )
        if not np.all(np.isfinite(planes)):
            raise PydanticCustomError(
                'planes_finite',
                'planes contain NaN or infinite samples',
            )
        return planes

    @classmethod
    def _serialize(cls, value: np.ndarray) -> list:
        return value.tolist()


class _DecibelAnnotation:
    """
    PSNR in dB. +inf (identical signals) travels as the string "inf".
    """

    @classmethod
    def __get_pydantic_core_schema__(
        cls,
        source_type: type[Any],
        handler: GetCoreSchemaHandler,
    ) -> core_schema.CoreSchema:
        return core_schema.union_schema(
            [
                core_schema.chain_schema(
                    [
                        core_schema.literal_schema(['inf']),
                        core_schema.no_info_plain_validator_function(
                            cls._parse_inf,
                        ),
                    ],
                ),
                core_schema.float_schema(
                    allow_inf_nan=True,
                ),
            ],
            serialization=core_schema.plain_serializer_function_ser_schema(
                cls._serialize,
                when_used='json',
            ),
        )

    @classmethod
    def _parse_inf(cls, value: str) -> float:
        return math.inf

    @classmethod
    def _serialize(cls, value: float) -> float | str:
        if math.isinf(value) and value > 0:
            return 'inf'
        return value


def _validate_scheme_name(value: str) -> str:
    """
    `five`, or `grid<k>` with 0 <= k <= 4.
    """
    if value == 'five':
        return value
    match = _SCHEME_PATTERN.match(value)
    if not match:
        raise PydanticCustomError(
            'scheme_name',
            "unknown partition scheme '{value}', expected grid0..grid4 or five",
            {'value': value},
        )
    exponent = int(match[1])
    if exponent > MAX_GRID_EXPONENT:
        raise PydanticCustomError(
            'grid_exponent',
            'grid exponent {exponent} out of range 0..4',
            {'exponent': exponent},
        )
    return value


def _parse_region_color(value: Any) -> Any:
    # '#ff8800', 'teal', 'rgb(255, 136, 0)' -> unit-range triple
    if isinstance(value, str):
        r, g, b = Color(value).as_rgb_tuple(alpha=False)
        return (r / 255, g / 255, b / 255)
    return value


type UnitFloat = Annotated[
    float,
    Field(
        ge=0,
        le=1,
    ),
]

type Planes = Annotated[
    np.ndarray,
    _PlanesAnnotation,
]

type Decibel = Annotated[
    float,
    _DecibelAnnotation,
]

type SchemeName = Annotated[
    str,
    AfterValidator(
        _validate_scheme_name,
    ),
]

type RegionColor = Annotated[
    tuple[UnitFloat, UnitFloat, UnitFloat],
    BeforeValidator(
        _parse_region_color,
    ),
]


def grid_exponent(scheme: str) -> int | None:
    """
    Exponent k of a `grid<k>` scheme name, None for `five`.
    """
    match = _SCHEME_PATTERN.match(scheme)
    return int(match[1]) if match else None


def region_count(scheme: str) -> int:
    exponent = grid_exponent(scheme)
    return 5 if exponent is None else 4**exponent
