from .metrics import (
    Channel,
    LossKind,
)
from .spectral import (
    Band,
)
from .tensor import (
    Activation,
    Resample,
)
from .training import (
    ModelKind,
    Strategy,
    System,
    ValidationProtocol,
)
from .verbosity import (
    LogLevel,
)
