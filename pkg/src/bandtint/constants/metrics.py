from enum import StrEnum


class Channel(StrEnum):
    """
    Channel selection for PSNR and SSIM.
    """

    R = 'r'
    G = 'g'
    B = 'b'

    ALL = 'all'
    """
    Every channel jointly, with a single MSE.
    """


class LossKind(StrEnum):
    L1 = 'l1'
    """
    Mean absolute error.
    """

    HYBRID = 'hybrid'
    """
    alpha * L1 + (1 - alpha) * (1 - SSIM).
    """
