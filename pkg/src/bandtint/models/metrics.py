from pydantic import Field, PositiveFloat, PositiveInt, field_validator
from pydantic_core import PydanticCustomError

from bandtint import fields
from bandtint.models.base import BaseModel, FrozenModel

BAND_DISPLAY_MAP = 'v * 0.5 + 0.5'


class LossConfig(FrozenModel):
    alpha: fields.UnitFloat = 0.5
    """
    Weight of the L1 term in the hybrid loss.
    """

    window: PositiveInt = 11
    """
    Side of the Gaussian SSIM window.
    """

    sigma: PositiveFloat = 1.5

    k1: PositiveFloat = 0.01
    k2: PositiveFloat = 0.03

    @field_validator('window')
    @classmethod
    def validate_window(
        cls,
        window: int,
    ) -> int:
        """
        window must be odd
        """
        if window % 2 == 0:
            raise PydanticCustomError(
                'window',
                'SSIM window must be odd, got {window}',
                {'window': window},
            )
        return window

    @property
    def c1(self) -> float:
        return self.k1**2

    @property
    def c2(self) -> float:
        return self.k2**2


class BandPsnr(FrozenModel):
    low: fields.Decibel
    mid: fields.Decibel
    high: fields.Decibel


class MetricsReport(BaseModel):
    psnr_r: fields.Decibel
    psnr_g: fields.Decibel
    psnr_b: fields.Decibel

    psnr_avg: fields.Decibel
    """
    PSNR of all three channels under a single joint MSE.
    """

    ssim: float = Field(
        ge=-1,
        le=1,
    )

    ssim_r: float | None = Field(
        default=None,
        ge=-1,
        le=1,
    )
    """
    SSIM of the red channel alone.
    """

    ssim_b: float | None = Field(
        default=None,
        ge=-1,
        le=1,
    )

    bands: BandPsnr | None = None
    """
    Per-band PSNR, computed on band images after `band_display`.
    """

    band_display: str | None = None


class BandDelta(FrozenModel):
    """
    Ours minus baseline, per column.
    """

    avg: float
    low: float
    mid: float
    high: float


class Evaluation(BaseModel):
    per_image: list[MetricsReport]

    mean: MetricsReport
    """
    Field-wise mean of `per_image`.
    """

    baseline: MetricsReport | None = None
    """
    Mean report of the reference system on the same images.
    """

    delta: BandDelta | None = None
