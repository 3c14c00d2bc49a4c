from pathlib import Path
from typing import Annotated, Literal, Self

from pydantic import Field, NonNegativeInt, PositiveInt, model_validator
from pydantic_core import PydanticCustomError

from bandtint import constants, fields
from bandtint.models.base import FrozenModel
from bandtint.models.imaging import CorpusSpec
from bandtint.models.spectral import BandSpec
from bandtint.models.training import TrainConfig

RUNS_DIR = Path('runs')

type Command = Annotated[
    GenCorpusCommand
    | SplitCommand
    | TrainCommand
    | ColorizeCommand
    | CorrectCommand
    | EvalCommand
    | SweepPartitionsCommand
    | CompareStrategiesCommand,
    Field(
        discriminator='command',
    ),
]


def _missing(flag: str, reason: str) -> PydanticCustomError:
    return PydanticCustomError(
        'missing_flag',
        '--{flag} is required {reason}',
        {'flag': flag, 'reason': reason},
    )


class _CommandBase(FrozenModel):
    command: str

    out_dir: Path | None = None
    """
    Where artifacts and the run manifest go; `runs/<command>` when omitted.
    """

    seed: int = Field(
        default=42,
        ge=0,
        lt=2**64,
    )

    def run_dir(self) -> Path:
        return self.out_dir or RUNS_DIR / self.command


class _RadiiFlags(FrozenModel):
    r_low: PositiveInt | None = None
    r_mid: PositiveInt | None = None

    @model_validator(mode='after')
    def validate_radii(self) -> Self:
        if (self.r_low is None) != (self.r_mid is None):
            raise PydanticCustomError(
                'band_radii',
                '--r-low and --r-mid go together; omit both for the defaults scaled to the image size',
            )
        if self.r_low is not None and self.r_mid is not None and self.r_low >= self.r_mid:
            raise PydanticCustomError(
                'band_radii',
                'r_mid ({r_mid}) must exceed r_low ({r_low})',
                {'r_low': self.r_low, 'r_mid': self.r_mid},
            )
        return self

    def band_spec(self, size: int) -> BandSpec:
        """
        Explicit radii, or the defaults scaled to `size`.
        """
        if self.r_low is None or self.r_mid is None:
            return BandSpec.scaled(size)
        return BandSpec(r_low=self.r_low, r_mid=self.r_mid)


class _TrainingFlags(_CommandBase, _RadiiFlags):
    steps: NonNegativeInt = 500
    batch: PositiveInt = 4
    lr: float = Field(
        default=1e-3,
        ge=0,
    )
    loss: constants.LossKind = constants.LossKind.L1
    alpha: fields.UnitFloat = 0.5
    scheme: fields.SchemeName = 'five'
    validation: constants.ValidationProtocol = constants.ValidationProtocol.NONE
    jobs: PositiveInt = 1

    def train_config(self, *, joint_stubs: bool = False) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch=self.batch,
            lr=self.lr,
            seed=self.seed,
            loss=self.loss,
            alpha=self.alpha,
            validation=self.validation,
            joint_stubs=joint_stubs,
        )


class GenCorpusCommand(_CommandBase):
    command: Literal['gen-corpus'] = 'gen-corpus'

    count: PositiveInt = 32
    size: int = Field(
        default=64,
        ge=8,
    )
    cast_strength: float = Field(
        default=0.2,
        ge=0,
        le=0.5,
    )

    def corpus_spec(self) -> CorpusSpec:
        return CorpusSpec(count=self.count, size=self.size, seed=self.seed, cast_strength=self.cast_strength)


class SplitCommand(_CommandBase, _RadiiFlags):
    command: Literal['split'] = 'split'

    input: Path


class TrainCommand(_TrainingFlags):
    command: Literal['train'] = 'train'

    corpus: Path
    model: constants.ModelKind

    params: Path | None = None
    """
    unet: directory holding the trained low/mid/high stubs. cast: optional baseline
    stub whose outputs replace the cast images as training inputs.
    """

    test_corpus: Path | None = None
    """
    With a validation protocol, score the no-validation and protocol models on it.
    """

    @model_validator(mode='after')
    def validate_params(self) -> Self:
        if self.model == constants.ModelKind.UNET and self.params is None:
            raise _missing('params', 'to train the artifact remover (directory of trained band stubs)')
        if self.params is not None and self.model not in (constants.ModelKind.UNET, constants.ModelKind.CAST):
            raise PydanticCustomError(
                'contradictory_flags',
                '--params has no meaning for --model {model}',
                {'model': self.model},
            )
        return self


class ColorizeCommand(_CommandBase):
    command: Literal['colorize'] = 'colorize'

    input: Path
    params: Path
    """
    Saved frequency pipeline.
    """


class CorrectCommand(_CommandBase):
    command: Literal['correct'] = 'correct'

    input: Path
    params: Path
    """
    Saved cast corrector.
    """

    means: Path
    """
    JSON hint file: partition scheme plus one color per region.
    """


class EvalCommand(_CommandBase, _RadiiFlags):
    command: Literal['eval'] = 'eval'

    corpus: Path
    system: constants.System = constants.System.IDENTITY
    params: Path | None = None
    baseline: Path | None = None
    """
    Saved baseline stub; adds its report and the per-band delta.
    """

    jobs: PositiveInt = 1

    @model_validator(mode='after')
    def validate_params(self) -> Self:
        if self.system == constants.System.IDENTITY:
            if self.params is not None:
                raise PydanticCustomError(
                    'contradictory_flags',
                    '--params has no meaning for the identity system',
                )
        elif self.params is None:
            raise _missing('params', f'to evaluate the {self.system} system')
        return self


class SweepPartitionsCommand(_TrainingFlags):
    command: Literal['sweep-partitions'] = 'sweep-partitions'

    corpus: Path
    test_corpus: Path | None = None
    """
    Held-out corpus; generated from the training corpus spec with the next seed when omitted.
    """


class CompareStrategiesCommand(_TrainingFlags):
    command: Literal['compare-strategies'] = 'compare-strategies'

    corpus: Path
    test_corpus: Path | None = None

    strategy: constants.Strategy | None = None
    """
    Run a single strategy; all three when omitted.
    """

    joint_stubs: bool = False

    @model_validator(mode='after')
    def validate_joint_stubs(self) -> Self:
        if self.joint_stubs and self.strategy not in (None, constants.Strategy.JOINT):
            raise PydanticCustomError(
                'contradictory_flags',
                '--joint-stubs only applies to strategy 3, got --strategy {strategy}',
                {'strategy': int(self.strategy)},
            )
        return self

    def strategies(self) -> tuple[constants.Strategy, ...]:
        if self.strategy is None:
            return tuple(constants.Strategy)
        return (constants.Strategy(self.strategy),)

