import math
from functools import cache

import numpy as np
from pytest import mark, raises

from bandtint import constants, models
from bandtint.core import imaging, objectives, pipeline, regions, spectral
from bandtint.core.imaging import image_tensor, to_gray
from bandtint.core.networks import ArtifactRemover, CastCorrector, StubColorizer
from bandtint.core.pipeline import CastStage, FreqPipeline, TrainingSetup
from bandtint.errors import PipelineError, ShapeError, SnapshotError

SIZE = 16
BAND_SPEC = models.BandSpec.scaled(SIZE)
STUB = models.StubArch(widths=(4, 4, 4))
UNET = models.UNetArch(widths=(4, 4, 4, 4), reduction=2)
CAST = models.CastArch(widths=(4, 4, 4))
SHORT = models.TrainConfig(steps=2, batch=2, lr=1e-2, seed=0)

Band = constants.Band
Kind = constants.ModelKind
Strategy = constants.Strategy


def _setup(**kw: object) -> TrainingSetup:
    return TrainingSetup(band_spec=BAND_SPEC, stub_arch=STUB, unet_arch=UNET, cast_arch=CAST, **kw)


@cache
def _corpus(seed: int = 3, count: int = 6, cast_strength: float = 0.2) -> tuple[models.CorpusPair, ...]:
    return tuple(imaging.gen_corpus(models.CorpusSpec(count=count, size=SIZE, seed=seed, cast_strength=cast_strength)))


def _random_pipeline(seed: int = 0) -> FreqPipeline:
    setup = _setup()
    stubs = {band: pipeline.build_network(kind, setup, seed) for kind, band in pipeline.BAND_KINDS.items()}
    return FreqPipeline(band_spec=BAND_SPEC, stubs=stubs, unet=ArtifactRemover(arch=UNET, seed=seed))


def _cast_stage(*, trained: bool = False, seed: int = 0) -> CastStage:
    return CastStage(net=CastCorrector(arch=CAST, seed=seed), trained=trained)


def _states(fp: FreqPipeline) -> dict[str, dict[str, np.ndarray]]:
    return {name: network.state() for name, network in fp.networks().items()}


def _same_states(a: dict[str, dict[str, np.ndarray]], b: dict[str, dict[str, np.ndarray]]) -> bool:
    return a.keys() == b.keys() and all(
        a[net].keys() == b[net].keys() and all(np.array_equal(a[net][p], b[net][p]) for p in a[net]) for net in a
    )


def test_oracle_stubs_reproduce_the_target():
    pair = _corpus()[0]
    color = spectral.split_bands(pair.target, BAND_SPEC)
    stubs = {band: (lambda _, b=band: image_tensor(color[b])) for band in Band}
    fp = FreqPipeline(band_spec=BAND_SPEC, stubs=stubs, unet=ArtifactRemover(arch=UNET, seed=0))

    out = pipeline.freq_colorize(to_gray(pair.target), fp)

    assert np.abs(out.planes - pair.target.planes).max() < 1e-4


def test_pipeline_rejects_bad_stubs():
    fp = _random_pipeline()

    with raises(PipelineError, match='missing'):
        FreqPipeline(band_spec=BAND_SPEC, stubs={Band.LOW: fp.stubs[Band.LOW]}, unet=fp.unet)

    swapped = {**fp.stubs, Band.LOW: fp.stubs[Band.MID]}
    with raises(PipelineError, match='low stub is signed'):
        FreqPipeline(band_spec=BAND_SPEC, stubs=swapped, unet=fp.unet)

    with raises(PipelineError, match=r'low stub was trained on radii \(2, 6\), not \(3, 7\)'):
        FreqPipeline(band_spec=models.BandSpec(r_low=3, r_mid=7), stubs=fp.stubs, unet=fp.unet)


def test_freq_colorize_output():
    fp = _random_pipeline()
    gray = to_gray(_corpus()[1].target)

    out = pipeline.freq_colorize(gray, fp)

    assert out.planes.shape == (3, SIZE, SIZE)
    assert not out.band_domain
    assert out.planes.min() >= 0 and out.planes.max() <= 1

    with raises(ShapeError):
        pipeline.freq_colorize(_corpus()[1].target, fp)


def test_band_stubs_start_from_different_weights():
    fp = _random_pipeline()

    assert not np.array_equal(fp.stubs[Band.MID]['enc1.weight'].numpy(), fp.stubs[Band.HIGH]['enc1.weight'].numpy())


def test_zero_learning_rate_keeps_initial_parameters():
    setup = _setup()
    cfg = SHORT.model_copy(update={'lr': 0.0})

    unit = pipeline.train(Kind.BASELINE, _corpus(), cfg, setup)
    fresh = pipeline.build_network(Kind.BASELINE, setup, cfg.seed)

    assert all(np.array_equal(unit.network[name].numpy(), value) for name, value in fresh.state().items())
    assert len(unit.curve.losses) == 2


def test_training_is_reproducible():
    first = pipeline.train(Kind.MID, _corpus(), SHORT, _setup())
    second = pipeline.train(Kind.MID, _corpus(), SHORT, _setup())

    assert first.curve.losses == second.curve.losses
    assert all(np.array_equal(first.network[name].numpy(), value) for name, value in second.network.state().items())
    assert isinstance(first.network, StubColorizer)
    assert first.network.arch.signed


def test_remover_needs_trained_stubs():
    with raises(PipelineError, match='train the stubs first'):
        pipeline.train(Kind.UNET, _corpus(), SHORT, _setup())
    with raises(PipelineError, match='empty corpus'):
        pipeline.train(Kind.BASELINE, [], SHORT, _setup())


def test_remover_trains_on_recombined_stub_outputs():
    fp = _random_pipeline()

    samples = pipeline.build_samples(Kind.UNET, _corpus()[:2], _setup(stubs=fp.stubs))

    pair = _corpus()[0]
    expected = fp.recombined(fp.gray_bands(to_gray(pair.target))).numpy()
    assert np.array_equal(samples[0].inputs[0].numpy(), expected)
    assert not samples[0].inputs[0].requires_grad


def test_cast_samples_carry_region_means():
    samples = pipeline.build_samples(Kind.CAST, _corpus()[:2], _setup(scheme='grid1'))

    img, means = samples[0].inputs
    pair = _corpus()[0]
    assert np.array_equal(img.numpy(), image_tensor(pair.cast).numpy())
    expected = regions.extract_means(pair.target, regions.build_partition('grid1', SIZE, SIZE))
    assert means.shape == (12,)
    assert np.allclose(means.numpy(), expected.as_array())

    with raises(PipelineError, match='1 cast inputs for 2'):
        pipeline.build_samples(Kind.CAST, _corpus()[:2], _setup(cast_inputs=[_corpus()[0].cast]))


def test_loss_selection():
    l1 = pipeline.loss_for(Kind.CAST, SHORT.model_copy(update={'loss': 'hybrid'}))
    hybrid = pipeline.loss_for(Kind.UNET, SHORT)

    pred = image_tensor(_corpus()[0].cast)
    target = image_tensor(_corpus()[0].target)
    assert l1(pred, target).item() == objectives.l1_loss(pred, target).item()
    assert hybrid(pred, target).item() != l1(pred, target).item()


@mark.parametrize(('protocol', 'folds'), [('kfold5', 5), ('holdout20', 1)])
def test_validated_training(protocol, folds):
    cfg = SHORT.model_copy(update={'validation': protocol})

    unit = pipeline.train(Kind.CAST, _corpus(), cfg, _setup())

    assert unit.validation is not None
    assert len(unit.validation.val_losses) == folds
    assert unit.validation.val_losses[unit.validation.chosen] == min(unit.validation.val_losses)


def test_reuse_needs_a_trained_cast_stage():
    with raises(PipelineError, match='never trained'):
        pipeline.combine(Strategy.REUSE, _random_pipeline(), _cast_stage(), _corpus(), SHORT)


def test_reuse_applies_the_cast_weights_untouched():
    fp = _random_pipeline()
    cast = _cast_stage(trained=True)
    before = cast.net.state()

    result = pipeline.combine(Strategy.REUSE, fp, cast, _corpus(), SHORT)

    pair = _corpus()[2]
    expected = cast.correct(pipeline.freq_colorize(to_gray(pair.target), fp), cast.means(pair.target))
    assert result.stage is cast
    assert result.curve is None
    assert np.array_equal(result.system(pair).planes, expected.planes)
    assert all(np.array_equal(cast.net[name].numpy(), value) for name, value in before.items())


def test_retrain_keeps_the_pipeline_frozen():
    fp = _random_pipeline()
    cast = _cast_stage(trained=True)
    before = _states(fp)

    result = pipeline.combine(Strategy.RETRAIN, fp, cast, _corpus(), SHORT)

    assert result.fp is fp
    assert _same_states(before, _states(fp))
    assert result.stage is not cast
    assert result.stage.trained
    assert len(result.curve.losses) == 2


def test_retrain_without_steps_is_the_bare_pipeline():
    fp = _random_pipeline()
    cfg = SHORT.model_copy(update={'steps': 0})

    result = pipeline.combine(Strategy.RETRAIN, fp, _cast_stage(trained=True), _corpus(), cfg)

    for pair in _corpus()[:3]:
        assert np.array_equal(result.system(pair).planes, pipeline.FreqSystem(fp)(pair).planes)


@mark.parametrize('joint_stubs', [False, True])
def test_joint_training_works_on_a_copy(joint_stubs):
    fp = _random_pipeline()
    before = _states(fp)
    cfg = SHORT.model_copy(update={'joint_stubs': joint_stubs})

    result = pipeline.combine(Strategy.JOINT, fp, _cast_stage(trained=True), _corpus(), cfg)

    assert _same_states(before, _states(fp))
    assert result.fp is not fp
    assert not np.array_equal(result.fp.unet['head.weight'].numpy(), fp.unet['head.weight'].numpy())
    copied_stub = result.fp.stubs[Band.MID]
    if joint_stubs:
        assert copied_stub is not fp.stubs[Band.MID]
        assert not np.array_equal(copied_stub['head.weight'].numpy(), fp.stubs[Band.MID]['head.weight'].numpy())
    else:
        assert copied_stub is fp.stubs[Band.MID]


def test_joint_stubs_only_with_strategy_three():
    cfg = SHORT.model_copy(update={'joint_stubs': True})

    with raises(PipelineError, match='strategy 3'):
        pipeline.combine(Strategy.RETRAIN, _random_pipeline(), _cast_stage(trained=True), _corpus(), cfg)


def test_combine_scores_on_a_test_set():
    result = pipeline.combine(
        Strategy.REUSE, _random_pipeline(), _cast_stage(trained=True), _corpus(), SHORT, test=_corpus(4, 3)
    )

    assert result.report is not None
    assert result.wall_time >= 0


def test_cast_stage_checks_the_scheme():
    stage = _cast_stage()
    pair = _corpus()[0]
    means = regions.extract_means(pair.target, regions.build_partition('grid1', SIZE, SIZE))

    with raises(PipelineError, match='grid1'):
        stage.correct(pair.cast, means)


def test_identity_on_a_clean_corpus_is_perfect():
    clean = _corpus(5, 3, 0.0)

    evaluation = pipeline.evaluate(pipeline.IdentitySystem(), clean)

    assert evaluation.mean.psnr_avg == math.inf
    assert len(evaluation.per_image) == 3


def test_mean_is_the_average_of_the_images():
    stub = pipeline.build_network(Kind.BASELINE, _setup(), 0)

    evaluation = pipeline.evaluate(pipeline.BaselineSystem(stub), _corpus())

    values = [report.psnr_avg for report in evaluation.per_image]
    assert evaluation.mean.psnr_avg == math.fsum(values) / len(values)
    assert evaluation.baseline is None
    assert evaluation.delta is None


def test_evaluation_against_a_baseline():
    stub = pipeline.build_network(Kind.BASELINE, _setup(), 0)
    fp = _random_pipeline()

    evaluation = pipeline.evaluate(
        pipeline.FreqSystem(fp), _corpus(), baseline=pipeline.BaselineSystem(stub), band_spec=BAND_SPEC
    )

    assert evaluation.mean.bands is not None
    assert evaluation.delta.avg == evaluation.mean.psnr_avg - evaluation.baseline.psnr_avg
    assert evaluation.delta.mid == evaluation.mean.bands.mid - evaluation.baseline.bands.mid


def test_evaluation_threads_keep_order():
    system = pipeline.FreqSystem(_random_pipeline())

    serial = pipeline.evaluate(system, _corpus(), jobs=1)
    threaded = pipeline.evaluate(system, _corpus(), jobs=3)

    assert serial == threaded


def test_evaluation_needs_images():
    with raises(PipelineError, match='empty test set'):
        pipeline.evaluate(pipeline.IdentitySystem(), [])


def test_compare_strategies():
    serial = pipeline.compare_strategies(_corpus(), _corpus(4, 3), SHORT, _setup(), jobs=1)
    threaded = pipeline.compare_strategies(_corpus(), _corpus(4, 3), SHORT, _setup(), jobs=3)

    assert [label for label, _ in serial.rows] == ['baseline', 'combination1', 'combination2', 'combination3']
    assert serial.table == threaded.table
    assert {'baseline', 'low', 'mid', 'high', 'unet', 'cast', 'strategy2', 'strategy3'} <= serial.curves.keys()
    assert serial.cast.trained


def test_compare_a_single_strategy():
    comparison = pipeline.compare_strategies(
        _corpus(), _corpus(4, 3), SHORT, _setup(), strategies=[Strategy.RETRAIN]
    )

    assert [label for label, _ in comparison.rows] == ['baseline', 'combination2']


def test_sweep_partitions():
    sweep = pipeline.sweep_partitions(_corpus(), _corpus(4, 3), SHORT, _setup(), jobs=2)

    assert [label for label, _ in sweep.rows] == [f'cast+{scheme}' for scheme in pipeline.SWEEP_SCHEMES]
    assert len(sweep.table.splitlines()) == 8
    assert sweep.unconditioned.psnr_avg < math.inf


def test_validation_study():
    study = pipeline.validation_study(
        _corpus(),
        _corpus(4, 3),
        SHORT,
        _setup(),
        protocols=[constants.ValidationProtocol.NONE, constants.ValidationProtocol.HOLDOUT20],
    )

    assert [label for label, _ in study.rows] == ['cast+five', 'holdout20']
    assert list(study.summaries) == ['holdout20']


def test_pipeline_save_and_load(tmp_path):
    fp = _random_pipeline(seed=7)

    fp.save(tmp_path / 'freq')
    loaded = FreqPipeline.load(tmp_path / 'freq')

    gray = to_gray(_corpus()[0].target)
    assert loaded.band_spec == fp.band_spec
    assert np.array_equal(pipeline.freq_colorize(gray, loaded).planes, pipeline.freq_colorize(gray, fp).planes)

    with raises(PipelineError):
        FreqPipeline.load(tmp_path / 'nothing')


def test_pipeline_load_rejects_malformed_files(tmp_path):
    directory = tmp_path / 'freq'
    _random_pipeline(seed=7).save(directory)
    saved = directory / pipeline.PIPELINE_FILE

    saved.write_text('{')
    with raises(PipelineError, match='pipeline.json: file: '):
        FreqPipeline.load(directory)
    saved.write_text('{}')
    with raises(PipelineError, match='band_spec: Field required'):
        FreqPipeline.load(directory)
    saved.write_text('{"band_spec": {"r_low": 2, "r_mid": 6}, "steps": 3}')
    with raises(PipelineError, match='steps: Extra inputs are not permitted'):
        FreqPipeline.load(directory)

    saved.write_text('{"band_spec": {"r_low": 2, "r_mid": 6}}')
    (directory / 'low' / 'arch.json').write_bytes(b'{"kind": "stub", "widths": [4, \xff]}')
    with raises(SnapshotError, match='arch.json'):
        FreqPipeline.load(directory)


@mark.slow
@mark.parametrize('kind', [Kind.LOW, Kind.MID, Kind.HIGH, Kind.UNET, Kind.CAST])
def test_every_unit_descends(kind):
    pairs = imaging.gen_corpus(models.CorpusSpec(count=32, size=64, seed=0))
    setup = TrainingSetup(band_spec=models.BandSpec.scaled(64))
    cfg = models.TrainConfig(steps=300, batch=4, lr=1e-3, seed=0)
    if kind is Kind.UNET:
        stubs = {band: pipeline.train(k, pairs, cfg, setup).network for k, band in pipeline.BAND_KINDS.items()}
        setup.stubs = stubs

    unit = pipeline.train(kind, pairs, cfg, setup)

    assert unit.curve.tail_mean() < unit.curve.head_mean()


@mark.slow
def test_region_means_correct_the_cast():
    spec = models.CorpusSpec(count=32, size=64, seed=0, cast_strength=0.2)
    pairs = imaging.gen_corpus(spec)
    test = imaging.gen_corpus(spec.model_copy(update={'seed': 1, 'count': 8}))
    cfg = models.TrainConfig(steps=600, batch=4, lr=3e-3, seed=0)

    unit = pipeline.train(Kind.CAST, pairs, cfg, TrainingSetup(scheme='grid1'))
    corrected = pipeline.evaluate(pipeline.CastSystem(CastStage(net=unit.network, trained=True)), test)
    unconditioned = pipeline.evaluate(pipeline.IdentitySystem(), test)

    assert corrected.mean.psnr_avg >= unconditioned.mean.psnr_avg + 0.5
