from pydantic import ValidationError
from pytest import mark, raises

from bandtint import models


@mark.parametrize(
    ('size', 'radii'),
    [
        (256, (30, 90)),
        (64, (8, 22)),
        (16, (2, 6)),
        (8, (2, 3)),
    ],
)
def test_scaled_band_spec(size, radii):
    spec = models.BandSpec.scaled(size)

    assert (spec.r_low, spec.r_mid) == radii


def test_band_spec_radii():
    assert models.BandSpec() == models.BandSpec(r_low=30, r_mid=90)

    with raises(ValidationError, match='must exceed'):
        models.BandSpec(r_low=10, r_mid=10)

    with raises(ValidationError):
        models.BandSpec(r_low=0, r_mid=4)
