from pathlib import Path


class BandtintError(Exception):
    pass


class ShapeError(BandtintError, ValueError):
    pass


class NonFiniteError(BandtintError, ArithmeticError):
    pass


class GraphError(BandtintError):
    pass


class PrecisionError(BandtintError):
    pass


class GradCheckError(BandtintError):
    pass


class OptimizerError(BandtintError):
    pass


class SnapshotError(BandtintError):
    pass


class PipelineError(BandtintError):
    pass


class ImageIOError(BandtintError, OSError):
    def __init__(self, path: str | Path, reason: str) -> None:
        super().__init__(f'{path}: {reason}')
        self.path = Path(path)


class TrainingError(BandtintError):
    def __init__(self, step: int, norms: dict[str, float], reason: str) -> None:
        worst = sorted(norms.items(), key=lambda item: item[1], reverse=True)[:3]
        summary = ', '.join(f'{name}={norm:.3g}' for name, norm in worst)
        super().__init__(f'step {step}: {reason} (largest parameter norms: {summary})')
        self.step = step
        self.norms = norms
