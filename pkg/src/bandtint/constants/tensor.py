from enum import StrEnum


class Activation(StrEnum):
    RELU = 'relu'
    """
    max(0, x); subgradient 0 at the kink.
    """

    SIGMOID = 'sigmoid'
    """
    1 / (1 + e^-x), kept strictly inside (0, 1).
    """


class Resample(StrEnum):
    DOWN2_MEAN = 'down2_mean'
    """
    Halve both spatial extents by averaging 2x2 blocks.
    """

    UP2_NEAREST = 'up2_nearest'
    """
    Double both spatial extents by replicating every sample into a 2x2 block.
    """
