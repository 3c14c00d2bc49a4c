from enum import IntEnum, StrEnum


class ModelKind(StrEnum):
    """
    Trainable unit selected by `bandtint train --model`.
    """

    BASELINE = 'baseline'
    """
    Whole-image colorizer stub (gray -> RGB), the reference every table compares against.
    """

    LOW = 'low'
    """
    Low-band colorizer stub.
    """

    MID = 'mid'
    """
    Mid-band colorizer stub.
    """

    HIGH = 'high'
    """
    High-band colorizer stub.
    """

    UNET = 'unet'
    """
    Artifact remover applied to the recombined band predictions.
    """

    CAST = 'cast'
    """
    Mean-conditioned color-cast corrector.
    """


class ValidationProtocol(StrEnum):
    NONE = 'none'
    """
    Train on the whole corpus.
    """

    HOLDOUT20 = 'holdout20'
    """
    Seeded random 80/20 split; the 20 % scores the trained model.
    """

    KFOLD5 = 'kfold5'
    """
    Five disjoint folds; one model per fold, the lowest validation loss wins.
    """


class Strategy(IntEnum):
    """
    How the frequency pipeline and the cast corrector are chained.
    """

    REUSE = 1
    """
    Apply cast weights learned on baseline outputs, no retraining.
    """

    RETRAIN = 2
    """
    Retrain the cast corrector on frequency-pipeline outputs, pipeline frozen.
    """

    JOINT = 3
    """
    Train remover and corrector end to end (band stubs optionally included).
    """


class System(StrEnum):
    """
    Image-producing system scored by `bandtint eval`.
    """

    IDENTITY = 'identity'
    BASELINE = 'baseline'
    FREQ = 'freq'
    CAST = 'cast'
