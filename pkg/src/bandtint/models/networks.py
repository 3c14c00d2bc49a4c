from typing import Annotated, Literal, Self

from pydantic import Field, PositiveInt, model_validator
from pydantic_core import PydanticCustomError

from bandtint import fields
from bandtint.models.base import FrozenModel
from bandtint.models.spectral import BandSpec

type NetworkArch = Annotated[
    StubArch | UNetArch | CastArch,
    Field(
        discriminator='kind',
    ),
]


class StubArch(FrozenModel):
    """
    Small gray-in, RGB-out encoder-decoder standing in for a full colorizer.
    """

    kind: Literal['stub'] = 'stub'

    widths: tuple[PositiveInt, PositiveInt, PositiveInt] = (8, 16, 32)
    """
    Channels of the three encoder levels.
    """

    signed: bool = False
    """
    Omit the output sigmoid; mid and high band targets are signed.
    """

    band_spec: BandSpec | None = None
    """
    Radii of the band decomposition a band stub was trained on; unset for whole-image stubs.
    """


class UNetArch(FrozenModel):
    """
    4-level U-Net artifact remover with gated skip connections.
    """

    kind: Literal['unet'] = 'unet'

    widths: tuple[PositiveInt, PositiveInt, PositiveInt, PositiveInt] = (16, 32, 64, 128)

    reduction: PositiveInt = 4
    """
    Channel reduction ratio of the skip gates.
    """

    identity_init: bool = True
    """
    Zero the output head so that the untrained network is an exact identity.
    """

    @model_validator(mode='after')
    def validate_reduction(self) -> Self:
        for width in self.widths:
            if width % self.reduction:
                raise PydanticCustomError(
                    'reduction_ratio',
                    'reduction ratio {reduction} does not divide width {width}',
                    {'reduction': self.reduction, 'width': width},
                )
        return self


class CastArch(FrozenModel):
    """
    Encoder-decoder whose bottleneck receives the per-region mean colors.
    """

    kind: Literal['cast'] = 'cast'

    widths: tuple[PositiveInt, PositiveInt, PositiveInt] = (8, 16, 32)

    scheme: fields.SchemeName = 'five'
    """
    Partition whose region means condition the network.
    """

    identity_init: bool = True

    @property
    def mean_length(self) -> int:
        return 3 * fields.region_count(self.scheme)


class PipelineFile(FrozenModel):
    """
    `pipeline.json` of a saved frequency pipeline; the networks sit in sibling directories.
    """

    band_spec: BandSpec
