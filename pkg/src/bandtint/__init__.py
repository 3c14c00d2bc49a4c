from . import (
    constants,
    errors,
    fields,
    models,
)
from .core.pipeline import (
    CastStage,
    FreqPipeline,
    combine,
    evaluate,
    freq_colorize,
    train,
)
