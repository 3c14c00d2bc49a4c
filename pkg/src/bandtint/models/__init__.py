from .base import (
    BaseModel,
    FrozenModel,
)
from .commands import (
    RUNS_DIR,
    ColorizeCommand,
    Command,
    CompareStrategiesCommand,
    CorrectCommand,
    EvalCommand,
    GenCorpusCommand,
    SplitCommand,
    SweepPartitionsCommand,
    TrainCommand,
)
from .imaging import (
    CorpusPair,
    CorpusSpec,
    PlanarImage,
)
from .metrics import (
    BAND_DISPLAY_MAP,
    BandDelta,
    BandPsnr,
    Evaluation,
    LossConfig,
    MetricsReport,
)
from .networks import (
    CastArch,
    NetworkArch,
    PipelineFile,
    StubArch,
    UNetArch,
)
from .regions import (
    MeanVector,
    MeanVectorFile,
    PartitionScheme,
    Region,
)
from .spectral import (
    BandSpec,
)
from .training import (
    LossCurve,
    RunManifest,
    Split,
    TrainConfig,
    ValidationSummary,
)
