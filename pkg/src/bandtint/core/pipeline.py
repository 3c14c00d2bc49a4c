import contextvars
import logging
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

from pydantic import ValidationError

from bandtint import constants, models
from bandtint.core import objectives, regions, reports, spectral
from bandtint.core.base import Network, load_network
from bandtint.core.imaging import image_tensor, tensor_image, to_gray
from bandtint.core.networks import ArtifactRemover, CastCorrector, StubColorizer, cast_forward, stub_forward
from bandtint.core.tensor import Tensor
from bandtint.core.training import LossFn, Sample, evaluate_loss, fit, validate
from bandtint.errors import PipelineError, ShapeError

logger = logging.getLogger(__name__)

PIPELINE_FILE = 'pipeline.json'
SWEEP_SCHEMES = ('grid0', 'grid1', 'grid2', 'grid3', 'grid4', 'five')

BAND_KINDS = {
    constants.ModelKind.LOW: constants.Band.LOW,
    constants.ModelKind.MID: constants.Band.MID,
    constants.ModelKind.HIGH: constants.Band.HIGH,
}

# init streams per unit, so the three band stubs never start from the same weights
_SEED_STREAM = {kind: index for index, kind in enumerate(constants.ModelKind)}


class BandColorizer(Protocol):
    def __call__(self, gray_band: Tensor, /) -> Tensor: ...


class ImageSystem(Protocol):
    """
    Anything that turns a corpus pair into a prediction of its target.
    """

    def __call__(self, pair: models.CorpusPair, /) -> models.PlanarImage: ...


def band_sum(
    stubs: Mapping[constants.Band, BandColorizer],
    gray_bands: Mapping[constants.Band, Tensor],
) -> Tensor:
    """
    Sum of the three color-band predictions, before the artifact remover.
    """
    low, mid, high = (stubs[band](gray_bands[band]) for band in constants.Band)
    return low + mid + high


def _stub_arch(arch: models.StubArch, band: constants.Band, band_spec: models.BandSpec) -> models.StubArch:
    return arch.model_copy(update={'signed': band is not constants.Band.LOW, 'band_spec': band_spec})


def check_band_spec(stubs: Mapping[constants.Band, BandColorizer], band_spec: models.BandSpec) -> None:
    """
    Band stubs only fit the decomposition they were trained on.
    """
    for band, stub in stubs.items():
        if not isinstance(stub, StubColorizer) or stub.arch.band_spec is None:
            continue
        trained = stub.arch.band_spec
        if trained != band_spec:
            raise PipelineError(
                f'{band} stub was trained on radii ({trained.r_low}, {trained.r_mid}), '
                f'not ({band_spec.r_low}, {band_spec.r_mid})'
            )


@dataclass
class FreqPipeline:
    band_spec: models.BandSpec
    stubs: dict[constants.Band, BandColorizer]
    unet: ArtifactRemover

    def __post_init__(self) -> None:
        missing = set(constants.Band) - self.stubs.keys()
        if missing:
            raise PipelineError(f'frequency pipeline is missing stubs for {sorted(missing)}')
        for band, stub in self.stubs.items():
            if isinstance(stub, StubColorizer) and stub.arch.signed != (band is not constants.Band.LOW):
                raise PipelineError(
                    f'{band} stub is {"signed" if stub.arch.signed else "unsigned"}; '
                    'the low stub must emit natural values and mid/high stubs signed residuals'
                )
        check_band_spec(self.stubs, self.band_spec)

    def gray_bands(self, gray: models.PlanarImage) -> dict[constants.Band, Tensor]:
        if gray.channels != 1:
            raise ShapeError(f'frequency pipeline needs a 1-channel image, got {gray.channels} channel(s)')
        return {band: image_tensor(image) for band, image in spectral.split_bands(gray, self.band_spec).items()}

    def recombined(self, gray_bands: Mapping[constants.Band, Tensor]) -> Tensor:
        return band_sum(self.stubs, gray_bands)

    def forward(self, gray_bands: Mapping[constants.Band, Tensor]) -> Tensor:
        return self.unet(self.recombined(gray_bands))

    def networks(self) -> dict[str, Network]:
        found: dict[str, Network] = {
            band.value: stub for band, stub in self.stubs.items() if isinstance(stub, Network)
        }
        found[constants.ModelKind.UNET.value] = self.unet
        return found

    def parameters(self, *, include_stubs: bool = False) -> list[Tensor]:
        params = self.unet.parameters()
        if include_stubs:
            for band in constants.Band:
                stub = self.stubs[band]
                if isinstance(stub, Network):
                    params.extend(stub.parameters())
        return params

    def clone(self, *, stubs: bool = False) -> 'FreqPipeline':
        """
        Copy whose remover trains independently; `stubs` copies the trainable stubs too.
        """
        copied = {
            band: stub.clone() if stubs and isinstance(stub, Network) else stub
            for band, stub in self.stubs.items()
        }
        return FreqPipeline(band_spec=self.band_spec, stubs=copied, unet=self.unet.clone())

    def save(self, directory: Path) -> None:
        for name, network in self.networks().items():
            network.save(directory / name)
        saved = models.PipelineFile(band_spec=self.band_spec)
        (directory / PIPELINE_FILE).write_text(saved.model_dump_json(indent=2) + '\n')

    @classmethod
    def load(cls, directory: Path) -> 'FreqPipeline':
        path = directory / PIPELINE_FILE
        try:
            saved = models.PipelineFile.model_validate_json(path.read_bytes())
        except OSError as e:
            raise PipelineError(f'{path}: {e.strerror}') from e
        except ValidationError as e:
            first = e.errors()[0]
            location = '.'.join(str(part) for part in first['loc']) or 'file'
            raise PipelineError(f'{path}: {location}: {first["msg"]}') from e
        band_spec = saved.band_spec
        stubs: dict[constants.Band, BandColorizer] = {}
        for band in constants.Band:
            stub = load_network(directory / band.value)
            if not isinstance(stub, StubColorizer):
                raise PipelineError(f'{directory / band.value} holds a {stub.kind} network, not a stub')
            stubs[band] = stub
        unet = load_network(directory / constants.ModelKind.UNET.value)
        if not isinstance(unet, ArtifactRemover):
            raise PipelineError(f'{directory / "unet"} holds a {unet.kind} network, not an artifact remover')
        return cls(band_spec=band_spec, stubs=stubs, unet=unet)


def freq_colorize(gray: models.PlanarImage, fp: FreqPipeline) -> models.PlanarImage:
    """
    Split the gray image into bands, color each band, sum the predictions and let
    the artifact remover clean the result.
    """
    return tensor_image(fp.forward(fp.gray_bands(gray))).clamped()


@dataclass
class CastStage:
    net: CastCorrector
    trained: bool = False
    """
    False until the corrector has been fit to some colorizer's outputs.
    """

    @property
    def scheme(self) -> str:
        return self.net.arch.scheme

    def means(self, target: models.PlanarImage) -> models.MeanVector:
        return regions.extract_means(target, regions.build_partition(self.scheme, target.height, target.width))

    def correct(self, img: models.PlanarImage, means: models.MeanVector) -> models.PlanarImage:
        if means.scheme.name != self.scheme:
            raise PipelineError(f'cast stage conditions on {self.scheme}, means were taken over {means.scheme.name}')
        return cast_forward(img, means, self.net).clamped()


@dataclass(frozen=True)
class IdentitySystem:
    def __call__(self, pair: models.CorpusPair) -> models.PlanarImage:
        return pair.cast


@dataclass(frozen=True)
class BaselineSystem:
    stub: StubColorizer

    def __call__(self, pair: models.CorpusPair) -> models.PlanarImage:
        return stub_forward(to_gray(pair.target), self.stub).clamped()


@dataclass(frozen=True)
class FreqSystem:
    fp: FreqPipeline

    def __call__(self, pair: models.CorpusPair) -> models.PlanarImage:
        return freq_colorize(to_gray(pair.target), self.fp)


@dataclass(frozen=True)
class CastSystem:
    """
    Correct `source`'s output (the cast image when absent) using the target's region means.
    """

    stage: CastStage
    source: ImageSystem | None = None

    def __call__(self, pair: models.CorpusPair) -> models.PlanarImage:
        img = self.source(pair) if self.source is not None else pair.cast
        return self.stage.correct(img, self.stage.means(pair.target))


@dataclass
class TrainingSetup:
    """
    Architectures and upstream artifacts a trainable unit needs besides corpus and schedule.
    """

    band_spec: models.BandSpec = field(default_factory=models.BandSpec)
    scheme: str = 'five'
    stub_arch: models.StubArch = field(default_factory=models.StubArch)
    unet_arch: models.UNetArch = field(default_factory=models.UNetArch)
    cast_arch: models.CastArch = field(default_factory=models.CastArch)

    stubs: dict[constants.Band, BandColorizer] | None = None
    """
    Trained band stubs; required by the artifact remover.
    """

    cast_inputs: Sequence[models.PlanarImage] | None = None
    """
    Images the cast corrector learns to correct, aligned with the corpus; the cast
    variants when absent.
    """


@dataclass
class TrainedUnit:
    kind: constants.ModelKind
    network: Network
    curve: models.LossCurve
    validation: models.ValidationSummary | None = None


def build_network(kind: constants.ModelKind, setup: TrainingSetup, seed: int) -> Network:
    kind = constants.ModelKind(kind)
    stream = [seed, _SEED_STREAM[kind]]
    match kind:
        case constants.ModelKind.BASELINE:
            return StubColorizer(arch=setup.stub_arch.model_copy(update={'signed': False}), seed=stream)
        case constants.ModelKind.LOW | constants.ModelKind.MID | constants.ModelKind.HIGH:
            return StubColorizer(arch=_stub_arch(setup.stub_arch, BAND_KINDS[kind], setup.band_spec), seed=stream)
        case constants.ModelKind.UNET:
            return ArtifactRemover(arch=setup.unet_arch, seed=stream)
        case constants.ModelKind.CAST:
            return CastCorrector(arch=setup.cast_arch.model_copy(update={'scheme': setup.scheme}), seed=stream)


def build_samples(
    kind: constants.ModelKind,
    pairs: Sequence[models.CorpusPair],
    setup: TrainingSetup,
) -> list[Sample]:
    kind = constants.ModelKind(kind)
    if kind is constants.ModelKind.BASELINE:
        return [Sample((image_tensor(to_gray(pair.target)),), image_tensor(pair.target)) for pair in pairs]

    if kind in BAND_KINDS:
        band = BAND_KINDS[kind]
        samples = []
        for pair in pairs:
            gray_band = spectral.split_bands(to_gray(pair.target), setup.band_spec)[band]
            color_band = spectral.split_bands(pair.target, setup.band_spec)[band]
            samples.append(Sample((image_tensor(gray_band),), image_tensor(color_band)))
        return samples

    if kind is constants.ModelKind.UNET:
        if setup.stubs is None:
            raise PipelineError('the artifact remover trains on band-stub outputs; train the stubs first')
        check_band_spec(setup.stubs, setup.band_spec)
        samples = []
        for pair in pairs:
            bands = spectral.split_bands(to_gray(pair.target), setup.band_spec)
            combined = band_sum(setup.stubs, {band: image_tensor(image) for band, image in bands.items()})
            samples.append(Sample((combined.detach(),), image_tensor(pair.target)))
        return samples

    inputs = setup.cast_inputs if setup.cast_inputs is not None else [pair.cast for pair in pairs]
    if len(inputs) != len(pairs):
        raise PipelineError(f'{len(inputs)} cast inputs for {len(pairs)} corpus images')
    samples = []
    for img, pair in zip(inputs, pairs, strict=True):
        scheme = regions.build_partition(setup.scheme, pair.target.height, pair.target.width)
        means = regions.extract_means(pair.target, scheme)
        samples.append(
            Sample((image_tensor(img), Tensor.constant(means.as_array())), image_tensor(pair.target))
        )
    return samples


def loss_for(kind: constants.ModelKind, cfg: models.TrainConfig) -> LossFn:
    """
    Remover: hybrid. Cast corrector: L1. Stubs: whatever `cfg.loss` selects.
    """
    kind = constants.ModelKind(kind)
    if kind is constants.ModelKind.CAST:
        return objectives.l1_loss
    if kind is constants.ModelKind.UNET or cfg.loss == constants.LossKind.HYBRID:
        loss_cfg = cfg.loss_config
        return lambda pred, target: objectives.hybrid_loss(pred, target, loss_cfg)
    return objectives.l1_loss


def _fit_unit(
    kind: constants.ModelKind,
    samples: Sequence[Sample],
    cfg: models.TrainConfig,
    setup: TrainingSetup,
    label: str,
) -> tuple[Network, models.LossCurve]:
    network = build_network(kind, setup, cfg.seed)
    curve = fit(network.parameters(), network, samples, loss_for(kind, cfg), cfg, label=label)
    return network, curve


def train(
    kind: constants.ModelKind,
    pairs: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    setup: TrainingSetup | None = None,
) -> TrainedUnit:
    """
    Train one unit under `cfg.validation`.

    holdout20 keeps the model fit on the 80 % split; kfold5 fits one model per fold and
    keeps the one with the lowest validation loss.
    """
    kind = constants.ModelKind(kind)
    setup = setup or TrainingSetup()
    if not pairs:
        raise PipelineError(f'cannot train {kind} on an empty corpus')
    samples = build_samples(kind, pairs, setup)
    splits = validate(len(samples), cfg.validation, cfg.seed)

    if cfg.validation == constants.ValidationProtocol.NONE:
        network, curve = _fit_unit(kind, samples, cfg, setup, kind.value)
        return TrainedUnit(kind=kind, network=network, curve=curve)

    loss_fn = loss_for(kind, cfg)
    candidates = []
    for index, split in enumerate(splits):
        subset = [samples[i] for i in split.train]
        network, curve = _fit_unit(kind, subset, cfg, setup, f'{kind}.{cfg.validation}.{index}')
        score = evaluate_loss(network, [samples[i] for i in split.val], loss_fn)
        logger.info('validated', extra={'label': kind.value, 'split': index, 'val_loss': score})
        candidates.append((network, curve, score))

    chosen = min(range(len(candidates)), key=lambda i: candidates[i][2])
    network, curve, _ = candidates[chosen]
    summary = models.ValidationSummary(
        protocol=cfg.validation,
        val_losses=tuple(score for _, _, score in candidates),
        chosen=chosen,
    )
    return TrainedUnit(kind=kind, network=network, curve=curve, validation=summary)


def train_freq_pipeline(
    pairs: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    setup: TrainingSetup,
) -> tuple[FreqPipeline, dict[str, models.LossCurve]]:
    """
    Band stubs first, then the remover on their recombined outputs.
    """
    stubs: dict[constants.Band, BandColorizer] = {}
    curves = {}
    for kind, band in BAND_KINDS.items():
        unit = train(kind, pairs, cfg, setup)
        stubs[band] = unit.network
        curves[kind.value] = unit.curve
    unit = train(constants.ModelKind.UNET, pairs, cfg, replace(setup, stubs=stubs))
    curves[constants.ModelKind.UNET.value] = unit.curve
    assert isinstance(unit.network, ArtifactRemover)
    return FreqPipeline(band_spec=setup.band_spec, stubs=stubs, unet=unit.network), curves


@dataclass
class CombinationResult:
    strategy: constants.Strategy
    stage: CastStage
    system: CastSystem
    wall_time: float
    curve: models.LossCurve | None = None
    fp: FreqPipeline | None = None
    """
    The pipeline the stage sits behind; a trained copy under strategy 3.
    """

    report: models.MetricsReport | None = None


def _fresh_stage(cast: CastStage, seed: int) -> CastStage:
    net = CastCorrector(arch=cast.net.arch, seed=[seed, _SEED_STREAM[constants.ModelKind.CAST]])
    return CastStage(net=net)


def _cast_samples(
    inputs: Iterable[tuple[Tensor, ...]],
    pairs: Sequence[models.CorpusPair],
    stage: CastStage,
) -> list[Sample]:
    return [
        Sample((*prefix, Tensor.constant(stage.means(pair.target).as_array())), image_tensor(pair.target))
        for prefix, pair in zip(inputs, pairs, strict=True)
    ]


def combine(
    strategy: constants.Strategy,
    fp: FreqPipeline,
    cast: CastStage,
    pairs: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    *,
    test: Sequence[models.CorpusPair] = (),
) -> CombinationResult:
    """
    Chain the frequency pipeline and the cast corrector.

    1 reuses `cast` untouched, 2 retrains a fresh corrector on frozen pipeline outputs,
    3 trains a copied remover and a fresh corrector end to end. `fp` and `cast` are never
    modified. When `test` is given the chained system is scored on it.
    """
    strategy = constants.Strategy(strategy)
    if cfg.joint_stubs and strategy is not constants.Strategy.JOINT:
        raise PipelineError('joint_stubs only applies to strategy 3')
    started = time.perf_counter()
    logger.info('combining', extra={'strategy': int(strategy)})
    curve = None
    chained = fp

    match strategy:
        case constants.Strategy.REUSE:
            if not cast.trained:
                raise PipelineError('strategy 1 reuses cast weights, but the cast stage was never trained')
            stage = cast

        case constants.Strategy.RETRAIN:
            stage = _fresh_stage(cast, cfg.seed)
            outputs = [(image_tensor(freq_colorize(to_gray(pair.target), fp)),) for pair in pairs]
            samples = _cast_samples(outputs, pairs, stage)
            curve = fit(stage.net.parameters(), stage.net, samples, objectives.l1_loss, cfg, label='strategy2')
            stage.trained = True

        case constants.Strategy.JOINT:
            stage = _fresh_stage(cast, cfg.seed)
            chained = fp.clone(stubs=cfg.joint_stubs)
            gray = [chained.gray_bands(to_gray(pair.target)) for pair in pairs]
            forward: Callable[..., Tensor]
            if cfg.joint_stubs:
                inputs = [tuple(bands[band] for band in constants.Band) for bands in gray]

                def through_stubs(low: Tensor, mid: Tensor, high: Tensor, means: Tensor) -> Tensor:
                    bands = dict(zip(constants.Band, (low, mid, high), strict=True))
                    return stage.net(chained.forward(bands), means)

                forward = through_stubs
            else:
                inputs = [(chained.recombined(bands).detach(),) for bands in gray]

                def through_remover(combined: Tensor, means: Tensor) -> Tensor:
                    return stage.net(chained.unet(combined), means)

                forward = through_remover

            params = chained.parameters(include_stubs=cfg.joint_stubs) + stage.net.parameters()
            samples = _cast_samples(inputs, pairs, stage)
            curve = fit(params, forward, samples, objectives.l1_loss, cfg, label='strategy3')
            stage.trained = True

    wall_time = time.perf_counter() - started
    system = CastSystem(stage=stage, source=FreqSystem(chained))
    result = CombinationResult(
        strategy=strategy,
        stage=stage,
        system=system,
        wall_time=wall_time,
        curve=curve,
        fp=chained,
    )
    if test:
        result.report = evaluate(system, test).mean
    logger.info('combined', extra={'strategy': int(strategy), 'seconds': round(wall_time, 3)})
    return result


def evaluate(
    system: ImageSystem,
    pairs: Sequence[models.CorpusPair],
    *,
    baseline: ImageSystem | None = None,
    band_spec: models.BandSpec | None = None,
    loss_cfg: models.LossConfig | None = None,
    jobs: int = 1,
) -> models.Evaluation:
    """
    Score `system` against each pair's target; with `band_spec` every report carries
    per-band PSNR, and with `baseline` the mean delta against it.
    """
    if not pairs:
        raise PipelineError('cannot evaluate on an empty test set')

    def score(candidate: ImageSystem) -> Callable[[models.CorpusPair], models.MetricsReport]:
        def one(pair: models.CorpusPair) -> models.MetricsReport:
            pred = candidate(pair)
            if band_spec is None:
                return objectives.metrics_report(pred, pair.target, loss_cfg)
            return objectives.band_report(pred, pair.target, band_spec, loss_cfg)

        return one

    per_image = run_jobs(score(system), pairs, jobs=jobs)
    evaluation = models.Evaluation(per_image=per_image, mean=objectives.mean_report(per_image))
    if baseline is not None:
        evaluation.baseline = objectives.mean_report(run_jobs(score(baseline), pairs, jobs=jobs))
        if band_spec is not None:
            evaluation.delta = reports.band_delta(evaluation.mean, evaluation.baseline)
    return evaluation


def run_jobs[T, R](fn: Callable[[T], R], items: Sequence[T], *, jobs: int = 1) -> list[R]:
    """
    Map `fn` over `items` on up to `jobs` threads; results keep input order.
    """
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [executor.submit(contextvars.copy_context().run, fn, item) for item in items]
        return [future.result() for future in futures]


@dataclass
class StrategyComparison:
    rows: list[reports.Row]
    table: str
    results: list[CombinationResult]
    baseline: StubColorizer
    fp: FreqPipeline
    cast: CastStage
    curves: dict[str, models.LossCurve]


def compare_strategies(
    pairs: Sequence[models.CorpusPair],
    test: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    setup: TrainingSetup,
    *,
    strategies: Sequence[constants.Strategy] = tuple(constants.Strategy),
    jobs: int = 1,
) -> StrategyComparison:
    """
    Baseline stub, frequency pipeline and a cast stage fit to baseline outputs, then one
    row per combination strategy.
    """
    unit = train(constants.ModelKind.BASELINE, pairs, cfg, setup)
    assert isinstance(unit.network, StubColorizer)
    baseline = unit.network
    curves = {'baseline': unit.curve}

    fp, fp_curves = train_freq_pipeline(pairs, cfg, setup)
    curves.update(fp_curves)

    baseline_outputs = [stub_forward(to_gray(pair.target), baseline).clamped() for pair in pairs]
    cast_unit = train(constants.ModelKind.CAST, pairs, cfg, replace(setup, cast_inputs=baseline_outputs))
    assert isinstance(cast_unit.network, CastCorrector)
    cast = CastStage(net=cast_unit.network, trained=True)
    curves['cast'] = cast_unit.curve

    single_cfg = cfg.model_copy(update={'joint_stubs': False})

    def run_strategy(strategy: constants.Strategy) -> CombinationResult:
        use = cfg if strategy is constants.Strategy.JOINT else single_cfg
        return combine(strategy, fp, cast, pairs, use, test=test)

    results = run_jobs(run_strategy, list(strategies), jobs=jobs)
    rows: list[reports.Row] = [('baseline', evaluate(BaselineSystem(baseline), test).mean)]
    for result in results:
        assert result.report is not None
        rows.append((f'combination{int(result.strategy)}', result.report))
        if result.curve is not None:
            curves[f'strategy{int(result.strategy)}'] = result.curve
    return StrategyComparison(
        rows=rows,
        table=reports.channel_table(rows),
        results=results,
        baseline=baseline,
        fp=fp,
        cast=cast,
        curves=curves,
    )


@dataclass
class PartitionSweep:
    rows: list[reports.Row]
    table: str
    unconditioned: models.MetricsReport
    """
    The cast images scored as they are.
    """

    curves: dict[str, models.LossCurve]


def sweep_partitions(
    pairs: Sequence[models.CorpusPair],
    test: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    setup: TrainingSetup,
    *,
    schemes: Sequence[str] = SWEEP_SCHEMES,
    jobs: int = 1,
) -> PartitionSweep:
    """
    One cast corrector per partition scheme, each trained on the corpus cast images and
    scored on `test`.
    """

    def run_scheme(scheme: str) -> tuple[models.MetricsReport, models.LossCurve]:
        unit = train(constants.ModelKind.CAST, pairs, cfg, replace(setup, scheme=scheme, cast_inputs=None))
        assert isinstance(unit.network, CastCorrector)
        stage = CastStage(net=unit.network, trained=True)
        return evaluate(CastSystem(stage), test).mean, unit.curve

    outcomes = run_jobs(run_scheme, list(schemes), jobs=jobs)
    rows: list[reports.Row] = []
    curves = {}
    for scheme, (report, curve) in zip(schemes, outcomes, strict=True):
        label = f'cast+{scheme}'
        rows.append((label, report))
        curves[label] = curve
    return PartitionSweep(
        rows=rows,
        table=reports.channel_table(rows),
        unconditioned=evaluate(IdentitySystem(), test).mean,
        curves=curves,
    )


@dataclass
class ValidationStudy:
    rows: list[reports.Row]
    table: str
    summaries: dict[str, models.ValidationSummary]
    units: dict[str, TrainedUnit]


def validation_study(
    pairs: Sequence[models.CorpusPair],
    test: Sequence[models.CorpusPair],
    cfg: models.TrainConfig,
    setup: TrainingSetup,
    *,
    protocols: Sequence[constants.ValidationProtocol],
) -> ValidationStudy:
    """
    Cast corrector trained once per protocol, each scored on `test`.
    """
    rows: list[reports.Row] = []
    summaries = {}
    units = {}
    for protocol in protocols:
        protocol = constants.ValidationProtocol(protocol)
        unit = train(constants.ModelKind.CAST, pairs, cfg.model_copy(update={'validation': protocol}), setup)
        assert isinstance(unit.network, CastCorrector)
        label = f'cast+{setup.scheme}' if protocol is constants.ValidationProtocol.NONE else protocol.value
        rows.append((label, evaluate(CastSystem(CastStage(net=unit.network, trained=True)), test).mean))
        units[label] = unit
        if unit.validation is not None:
            summaries[label] = unit.validation
    return ValidationStudy(rows=rows, table=reports.channel_table(rows), summaries=summaries, units=units)
