from enum import StrEnum


class Band(StrEnum):
    """
    Radial frequency band of a centered 2-D spectrum.
    """

    LOW = 'low'
    """
    Bins closer to DC than `r_low`.
    """

    MID = 'mid'
    """
    Bins in the annulus `r_low <= r < r_mid`.
    """

    HIGH = 'high'
    """
    Bins at or beyond `r_mid`.
    """
