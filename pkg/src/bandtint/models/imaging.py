from typing import Self

import numpy as np
from pydantic import Field, NonNegativeInt, PositiveInt, model_validator
from pydantic_core import PydanticCustomError

from bandtint import fields
from bandtint.models.base import FrozenModel


class PlanarImage(FrozenModel):
    """
    Channel-planar floating-point image (C x H x W).
    """

    planes: fields.Planes
    """
    Samples, channel-major then row-major.
    """

    band_domain: bool = False
    """
    True for spectral band images and other signed results that may leave [0, 1].
    """

    @model_validator(mode='after')
    def validate_planes(self) -> Self:
        channels = self.planes.shape[0]
        if channels not in (1, 3):
            raise PydanticCustomError(
                'channels',
                'images carry 1 or 3 channels, got {channels}',
                {'channels': channels},
            )
        if not self.band_domain:
            low, high = float(self.planes.min()), float(self.planes.max())
            if low < 0 or high > 1:
                raise PydanticCustomError(
                    'natural_range',
                    'natural images lie in [0, 1], got samples in [{low}, {high}]',
                    {'low': low, 'high': high},
                )
        return self

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @classmethod
    def unbounded(cls, planes: np.ndarray) -> Self:
        """
        Wrap a computed result, flagging it band_domain only when it left [0, 1].
        """
        inside = bool(planes.min() >= 0 and planes.max() <= 1)
        return cls(planes=planes, band_domain=not inside)

    def clamped(self) -> Self:
        return type(self)(planes=np.clip(self.planes, 0, 1))


class CorpusSpec(FrozenModel):
    count: PositiveInt = 32
    """
    Number of (target, cast) pairs.
    """

    size: int = Field(
        default=64,
        ge=8,
    )
    """
    Side length of the square images in pixels.
    """

    seed: int = Field(
        default=42,
        ge=0,
        lt=2**64,
    )

    cast_strength: float = Field(
        default=0.2,
        ge=0,
        le=0.5,
    )
    """
    Per-channel offsets of the cast variants are drawn from [-cast_strength, +cast_strength].
    """


class CorpusPair(FrozenModel):
    index: NonNegativeInt

    target: PlanarImage
    """
    Ground-truth RGB image.
    """

    cast: PlanarImage
    """
    Target shifted by `offset` and clamped to [0, 1].
    """

    offset: tuple[float, float, float]
    """
    Drawn RGB offset.
    """
