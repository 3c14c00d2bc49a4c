from typing import Self

import numpy as np
from pydantic import NonNegativeInt, PositiveInt, model_validator
from pydantic_core import PydanticCustomError

from bandtint import fields
from bandtint.models.base import FrozenModel


class Region(FrozenModel):
    x0: NonNegativeInt
    """
    Left column, inclusive.
    """

    y0: NonNegativeInt
    """
    Top row, inclusive.
    """

    w: PositiveInt
    h: PositiveInt

    @property
    def area(self) -> int:
        return self.w * self.h

    def window(self) -> tuple[slice, slice]:
        """
        (rows, columns) slices selecting the region from a (C, H, W) array.
        """
        return slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w)


class PartitionScheme(FrozenModel):
    name: fields.SchemeName
    height: PositiveInt
    width: PositiveInt
    regions: tuple[Region, ...]

    @model_validator(mode='after')
    def validate_regions(self) -> Self:
        expected = fields.region_count(self.name)
        if len(self.regions) != expected:
            raise PydanticCustomError(
                'region_count',
                '{name} holds {expected} regions, got {actual}',
                {'name': self.name, 'expected': expected, 'actual': len(self.regions)},
            )
        for region in self.regions:
            if region.x0 + region.w > self.width or region.y0 + region.h > self.height:
                raise PydanticCustomError(
                    'region_bounds',
                    'region {region} leaves the {height}x{width} image',
                    {'region': repr(region), 'height': self.height, 'width': self.width},
                )
        return self

    @property
    def exponent(self) -> int | None:
        return fields.grid_exponent(self.name)


class MeanVector(FrozenModel):
    """
    Per-region mean colors, region-major then R, G, B.
    """

    values: tuple[fields.UnitFloat, ...]
    scheme: PartitionScheme

    @model_validator(mode='after')
    def validate_length(self) -> Self:
        expected = 3 * len(self.scheme.regions)
        if len(self.values) != expected:
            raise PydanticCustomError(
                'mean_length',
                'expected {expected} mean values for {name}, got {actual}',
                {'expected': expected, 'name': self.scheme.name, 'actual': len(self.values)},
            )
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def colors(self) -> list[tuple[float, float, float]]:
        return [tuple(self.values[i : i + 3]) for i in range(0, len(self.values), 3)]


class MeanVectorFile(FrozenModel):
    """
    External JSON form: `{"scheme": "grid2" | "five", "means": [[r, g, b], "#rrggbb", ...]}`.
    """

    scheme: fields.SchemeName
    means: list[fields.RegionColor]

    @model_validator(mode='after')
    def validate_count(self) -> Self:
        expected = fields.region_count(self.scheme)
        if len(self.means) != expected:
            raise PydanticCustomError(
                'mean_length',
                'expected {expected} region colors for {name}, got {actual}',
                {'expected': expected, 'name': self.scheme, 'actual': len(self.means)},
            )
        return self
