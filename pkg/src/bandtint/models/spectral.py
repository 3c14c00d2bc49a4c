from typing import Self

from pydantic import PositiveInt, model_validator
from pydantic_core import PydanticCustomError

from bandtint.models.base import FrozenModel

REFERENCE_SIZE = 256
DEFAULT_R_LOW = 30
DEFAULT_R_MID = 90


class BandSpec(FrozenModel):
    """
    Radii, in frequency bins from the centered DC, of the three complementary circular masks.
    """

    r_low: PositiveInt = DEFAULT_R_LOW
    """
    Low band: r < r_low.
    """

    r_mid: PositiveInt = DEFAULT_R_MID
    """
    Mid band: r_low <= r < r_mid. High band: r >= r_mid.
    """

    @model_validator(mode='after')
    def validate_radii(self) -> Self:
        if self.r_mid <= self.r_low:
            raise PydanticCustomError(
                'band_radii',
                'r_mid ({r_mid}) must exceed r_low ({r_low})',
                {'r_low': self.r_low, 'r_mid': self.r_mid},
            )
        return self

    @classmethod
    def scaled(cls, size: int) -> Self:
        """
        Default radii rescaled from 256-pixel images to `size`, rounded, at least 2.
        """
        r_low = max(2, round(DEFAULT_R_LOW * size / REFERENCE_SIZE))
        r_mid = max(2, round(DEFAULT_R_MID * size / REFERENCE_SIZE))
        return cls(r_low=r_low, r_mid=max(r_mid, r_low + 1))
