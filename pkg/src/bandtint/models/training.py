import csv
from pathlib import Path
from typing import Any

from pydantic import Field, NonNegativeFloat, NonNegativeInt, PositiveInt

from bandtint import constants, fields
from bandtint.models.base import BaseModel, FrozenModel
from bandtint.models.imaging import CorpusSpec
from bandtint.models.metrics import LossConfig
from bandtint.models.spectral import BandSpec


class TrainConfig(FrozenModel):
    steps: NonNegativeInt = 500
    """
    Optimizer steps; zero leaves the initial parameters untouched.
    """

    batch: PositiveInt = 4

    lr: NonNegativeFloat = 1e-3

    seed: int = Field(
        default=42,
        ge=0,
        lt=2**64,
    )

    loss: constants.LossKind = constants.LossKind.L1

    alpha: fields.UnitFloat = 0.5
    """
    Hybrid loss weight; the artifact remover always trains with the hybrid loss.
    """

    validation: constants.ValidationProtocol = constants.ValidationProtocol.NONE

    joint_stubs: bool = False
    """
    Strategy 3 only: let gradients reach the band stubs as well.
    """

    @property
    def loss_config(self) -> LossConfig:
        return LossConfig(alpha=self.alpha)


class Split(FrozenModel):
    train: tuple[NonNegativeInt, ...]
    val: tuple[NonNegativeInt, ...] = ()


class LossCurve(BaseModel):
    label: str
    losses: list[float] = Field(
        default_factory=list,
    )

    def head_mean(self, count: int = 10) -> float:
        window = self.losses[:count]
        return sum(window) / len(window)

    def tail_mean(self, count: int = 10) -> float:
        window = self.losses[-count:]
        return sum(window) / len(window)

    def write_csv(self, path: Path) -> None:
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['step', 'loss'])
            writer.writerows(enumerate(self.losses))


class ValidationSummary(FrozenModel):
    protocol: constants.ValidationProtocol
    val_losses: tuple[float, ...]
    """
    Validation loss of each trained model (one per fold).
    """

    chosen: NonNegativeInt
    """
    Index of the model kept.
    """


class RunManifest(BaseModel):
    """
    Everything needed to re-run a command bit-identically.
    """

    name: str
    command: str
    config: dict[str, Any] = Field(
        default_factory=dict,
    )
    corpus: CorpusSpec | None = None
    band_spec: BandSpec | None = None
    scheme: fields.SchemeName | None = None
    final_losses: dict[str, float] = Field(
        default_factory=dict,
    )
    reports: dict[str, Any] = Field(
        default_factory=dict,
    )
    artifacts: list[str] = Field(
        default_factory=list,
    )
    notes: dict[str, str] = Field(
        default_factory=dict,
    )
    wall_time: float = 0.0
    """
    Seconds; the only field allowed to differ between identical runs.
    """

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / 'manifest.json'
        path.write_text(self.model_dump_json(indent=2) + '\n')
        return path
