import argparse
import logging
import sys
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import TypeAdapter, ValidationError

from bandtint import constants, models
from bandtint.core import imaging, pipeline, regions, reports, spectral
from bandtint.core.base import Network, load_network
from bandtint.core.networks import ArtifactRemover, CastCorrector, StubColorizer
from bandtint.errors import BandtintError, PipelineError
from bandtint.logs import configure_logging
from bandtint.settings import Settings

logger = logging.getLogger(__name__)

PROG = 'bandtint'
HELD_OUT_FRACTION = 0.25
HELD_OUT_MINIMUM = 8

_command_adapter: TypeAdapter[models.Command] = TypeAdapter(models.Command)


def _flag(parser: argparse.ArgumentParser, name: str, **kwargs: Any) -> None:
    parser.add_argument(f'--{name}', default=None, **kwargs)


def _output_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, 'out-dir', type=Path, metavar='DIR', help='artifact directory (default: runs/<command>)')
    _flag(parser, 'seed', type=int, help='seed for every random draw (default: 42)')


def _radii_flags(parser: argparse.ArgumentParser) -> None:
    _flag(
        parser,
        'r-low',
        type=int,
        metavar='R',
        help='low/mid boundary radius, given with --r-mid (default: 30 scaled to the image size)',
    )
    _flag(
        parser,
        'r-mid',
        type=int,
        metavar='R',
        help='mid/high boundary radius, given with --r-low (default: 90 scaled to the image size)',
    )


def _training_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, 'corpus', type=Path, required=True, metavar='DIR', help='training corpus directory')
    _flag(parser, 'steps', type=int, help='optimizer steps per trained unit (default: 500)')
    _flag(parser, 'lr', type=float, help='Adam learning rate (default: 1e-3)')
    _flag(parser, 'batch', type=int, help='images per step (default: 4)')
    _flag(parser, 'loss', choices=list(constants.LossKind), help='band stub loss (default: l1)')
    _flag(parser, 'alpha', type=float, help='L1 weight of the hybrid loss (default: 0.5)')
    _flag(parser, 'scheme', metavar='SCHEME', help='mean partition: grid0..grid4 or five (default: five)')
    _flag(parser, 'validation', choices=list(constants.ValidationProtocol), help='validation protocol (default: none)')
    _flag(parser, 'jobs', type=int, help='concurrent independent training jobs (default: 1)')
    _radii_flags(parser)
    _output_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description='Frequency-band colorization and region-mean cast correction.',
    )
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    gen = commands.add_parser('gen-corpus', help='generate a synthetic (target, cast) corpus')
    _flag(gen, 'count', type=int, help='number of image pairs (default: 32)')
    _flag(gen, 'size', type=int, help='image side in pixels (default: 64)')
    _flag(gen, 'cast-strength', type=float, help='largest per-channel cast offset (default: 0.2)')
    _output_flags(gen)

    split = commands.add_parser('split', help='split an image into low/mid/high band images')
    _flag(split, 'in', dest='input', type=Path, required=True, metavar='PNG', help='image to split')
    _radii_flags(split)
    _output_flags(split)

    train = commands.add_parser('train', help='train one unit')
    _flag(train, 'model', required=True, choices=list(constants.ModelKind), help='unit to train')
    _flag(train, 'params', type=Path, metavar='DIR', help='unet: trained band stubs; cast: optional baseline stub')
    _flag(train, 'test-corpus', type=Path, metavar='DIR', help='score validation protocols on this corpus')
    _training_flags(train)

    colorize = commands.add_parser('colorize', help='colorize an image with a saved frequency pipeline')
    _flag(colorize, 'in', dest='input', type=Path, required=True, metavar='PNG', help='gray or RGB image')
    _flag(colorize, 'params', type=Path, required=True, metavar='DIR', help='saved frequency pipeline')
    _output_flags(colorize)

    correct = commands.add_parser('correct', help='correct a color cast with region-mean hints')
    _flag(correct, 'in', dest='input', type=Path, required=True, metavar='PNG', help='RGB image')
    _flag(correct, 'params', type=Path, required=True, metavar='DIR', help='saved cast corrector')
    _flag(correct, 'means', type=Path, required=True, metavar='JSON', help='region hint colors')
    _output_flags(correct)

    evaluate = commands.add_parser('eval', help='score a system on a corpus')
    _flag(evaluate, 'corpus', type=Path, required=True, metavar='DIR', help='test corpus directory')
    _flag(evaluate, 'system', choices=list(constants.System), help='system to score (default: identity)')
    _flag(evaluate, 'params', type=Path, metavar='DIR', help='saved network or pipeline of the system')
    _flag(evaluate, 'baseline', type=Path, metavar='DIR', help='saved baseline stub for the delta column')
    _flag(evaluate, 'jobs', type=int, help='images scored concurrently (default: 1)')
    _radii_flags(evaluate)
    _output_flags(evaluate)

    sweep = commands.add_parser('sweep-partitions', help='train one cast corrector per partition scheme')
    _flag(sweep, 'test-corpus', type=Path, metavar='DIR', help='held-out corpus (default: generated, next seed)')
    _training_flags(sweep)

    compare = commands.add_parser('compare-strategies', help='compare the three combination strategies')
    _flag(compare, 'test-corpus', type=Path, metavar='DIR', help='held-out corpus (default: generated, next seed)')
    _flag(compare, 'strategy', type=int, choices=[int(s) for s in constants.Strategy], help='run one strategy only')
    compare.add_argument('--joint-stubs', action='store_true', default=None, help='strategy 3 also trains the stubs')
    _training_flags(compare)

    return parser


def _describe(error: ValidationError, *, skip: int = 0) -> str:
    first = error.errors()[0]
    location = '.'.join(str(part) for part in first['loc'][skip:]) or 'arguments'
    return f'{location.replace("_", "-")}: {first["msg"]}'


def parse_args(argv: Sequence[str] | None = None) -> models.Command:
    """
    Parse and validate; usage errors exit with status 2 before any file is touched.
    """
    parser = build_parser()
    namespace = parser.parse_args(argv)
    values = {key: value for key, value in vars(namespace).items() if value is not None}
    try:
        return _command_adapter.validate_python(values)
    except ValidationError as e:
        parser.error(f'{namespace.command}: {_describe(e, skip=1)}')


def _held_out(spec: models.CorpusSpec, directory: Path | None) -> list[models.CorpusPair]:
    if directory is not None:
        return imaging.read_corpus(directory)[1]
    held = spec.model_copy(
        update={
            'count': max(HELD_OUT_MINIMUM, round(spec.count * HELD_OUT_FRACTION)),
            'seed': spec.seed + 1,
        }
    )
    return imaging.gen_corpus(held)


def _load[N: Network](directory: Path, kind: type[N]) -> N:
    network = load_network(directory)
    if not isinstance(network, kind):
        raise PipelineError(f'{directory} holds a {network.kind} network, expected {kind.kind}')
    return network


def _manifest(cmd: models.Command, **fields: Any) -> models.RunManifest:
    return models.RunManifest(
        name=cmd.run_dir().name,
        command=cmd.command,
        config=cmd.model_dump(mode='json'),
        **fields,
    )


def _curves(manifest: models.RunManifest, curves: dict[str, models.LossCurve], directory: Path) -> None:
    for label, curve in curves.items():
        path = directory / f'{label}.loss.csv'
        curve.write_csv(path)
        manifest.artifacts.append(path.name)
        if curve.losses:
            manifest.final_losses[label] = curve.losses[-1]


def _emit(table: str, directory: Path, manifest: models.RunManifest) -> None:
    (directory / 'table.txt').write_text(table)
    manifest.artifacts.append('table.txt')
    sys.stdout.write(table)


def _reports(rows: list[reports.Row]) -> dict[str, Any]:
    return {label: report.model_dump(mode='json') for label, report in rows}


def gen_corpus(cmd: models.GenCorpusCommand) -> models.RunManifest:
    spec = cmd.corpus_spec()
    directory = cmd.run_dir()
    pairs = imaging.gen_corpus(spec)
    imaging.write_corpus(pairs, spec, directory)
    print(f'{len(pairs)} pairs written to {directory}')
    return _manifest(cmd, corpus=spec, artifacts=[imaging.MANIFEST_FILE])


def split(cmd: models.SplitCommand) -> models.RunManifest:
    img = imaging.load_image(cmd.input)
    band_spec = cmd.band_spec(min(img.height, img.width))
    bands = spectral.split_bands(img, band_spec)
    directory = cmd.run_dir()
    artifacts = []
    for band, image in bands.items():
        name = f'{band}.png'
        imaging.save_image(spectral.to_display(image), directory / name)
        artifacts.append(name)
    energies = spectral.band_energies(img, band_spec)
    return _manifest(
        cmd,
        band_spec=band_spec,
        artifacts=artifacts,
        reports={'band_energy': {band.value: energy for band, energy in energies.items()}},
        notes={'band_display': models.BAND_DISPLAY_MAP},
    )


def train(cmd: models.TrainCommand) -> models.RunManifest:
    spec, pairs = imaging.read_corpus(cmd.corpus)
    cfg = cmd.train_config()
    directory = cmd.run_dir()
    kind = constants.ModelKind(cmd.model)
    setup = pipeline.TrainingSetup(band_spec=cmd.band_spec(spec.size), scheme=cmd.scheme)
    manifest = _manifest(cmd, corpus=spec, band_spec=setup.band_spec, scheme=cmd.scheme)

    if kind is constants.ModelKind.UNET:
        assert cmd.params is not None
        setup.stubs = {
            band: _load(cmd.params / band.value, StubColorizer) for band in constants.Band
        }
    elif kind is constants.ModelKind.CAST and cmd.params is not None:
        baseline = _load(cmd.params, StubColorizer)
        setup.cast_inputs = [pipeline.BaselineSystem(baseline)(pair) for pair in pairs]
        manifest.notes['cast_inputs'] = f'outputs of {cmd.params}'

    if cmd.test_corpus is not None and cfg.validation != constants.ValidationProtocol.NONE:
        if kind is not constants.ModelKind.CAST:
            raise PipelineError('validation reports score the cast corrector; use --model cast')
        study = pipeline.validation_study(
            pairs,
            _held_out(spec, cmd.test_corpus),
            cfg,
            setup,
            protocols=(constants.ValidationProtocol.NONE, cfg.validation),
        )
        unit = study.units[cfg.validation]
        manifest.reports = _reports(study.rows)
        directory.mkdir(parents=True, exist_ok=True)
        _emit(study.table, directory, manifest)
    else:
        unit = pipeline.train(kind, pairs, cfg, setup)

    if unit.validation is not None:
        manifest.reports['validation'] = unit.validation.model_dump(mode='json')
    if kind is constants.ModelKind.UNET:
        assert isinstance(unit.network, ArtifactRemover)
        fp = pipeline.FreqPipeline(band_spec=setup.band_spec, stubs=dict(setup.stubs or {}), unet=unit.network)
        fp.save(directory)
        manifest.artifacts.append(pipeline.PIPELINE_FILE)
    else:
        unit.network.save(directory / kind.value)
    manifest.artifacts.append(kind.value)
    _curves(manifest, {kind.value: unit.curve}, directory)
    return manifest


def colorize(cmd: models.ColorizeCommand) -> models.RunManifest:
    fp = pipeline.FreqPipeline.load(cmd.params)
    img = imaging.load_image(cmd.input)
    gray = img if img.channels == 1 else imaging.to_gray(img)
    out = pipeline.freq_colorize(gray, fp)
    name = f'{cmd.input.stem}_color.png'
    imaging.save_image(out, cmd.run_dir() / name)
    return _manifest(cmd, band_spec=fp.band_spec, artifacts=[name])


def correct(cmd: models.CorrectCommand) -> models.RunManifest:
    stage = pipeline.CastStage(net=_load(cmd.params, CastCorrector), trained=True)
    img = imaging.load_image(cmd.input)
    try:
        hints = models.MeanVectorFile.model_validate_json(cmd.means.read_text())
    except OSError as e:
        raise PipelineError(f'{cmd.means}: {e.strerror}') from e
    means = regions.means_from_file(hints, img.height, img.width)
    out = stage.correct(img, means)
    name = f'{cmd.input.stem}_corrected.png'
    imaging.save_image(out, cmd.run_dir() / name)
    return _manifest(cmd, scheme=stage.scheme, artifacts=[name])


def _system(cmd: models.EvalCommand) -> tuple[pipeline.ImageSystem, models.BandSpec | None]:
    """
    The system to score and, for a frequency pipeline, its own band radii.
    """
    match constants.System(cmd.system):
        case constants.System.IDENTITY:
            return pipeline.IdentitySystem(), None
        case constants.System.BASELINE:
            assert cmd.params is not None
            return pipeline.BaselineSystem(_load(cmd.params, StubColorizer)), None
        case constants.System.FREQ:
            assert cmd.params is not None
            fp = pipeline.FreqPipeline.load(cmd.params)
            return pipeline.FreqSystem(fp), fp.band_spec
        case constants.System.CAST:
            assert cmd.params is not None
            stage = pipeline.CastStage(net=_load(cmd.params, CastCorrector), trained=True)
            return pipeline.CastSystem(stage), None


def evaluate(cmd: models.EvalCommand) -> models.RunManifest:
    spec, pairs = imaging.read_corpus(cmd.corpus)
    system, pipeline_spec = _system(cmd)
    band_spec = pipeline_spec
    if band_spec is None or cmd.r_low or cmd.r_mid:
        band_spec = cmd.band_spec(spec.size)
    baseline = None
    if cmd.baseline is not None:
        baseline = pipeline.BaselineSystem(_load(cmd.baseline, StubColorizer))

    evaluation = pipeline.evaluate(system, pairs, baseline=baseline, band_spec=band_spec, jobs=cmd.jobs)
    directory = cmd.run_dir()
    directory.mkdir(parents=True, exist_ok=True)
    (directory / 'report.json').write_text(evaluation.model_dump_json(indent=2) + '\n')

    rows: list[reports.Row] = []
    if evaluation.baseline is not None:
        rows.append(('baseline', evaluation.baseline))
    rows.append((str(cmd.system), evaluation.mean))
    manifest = _manifest(cmd, corpus=spec, band_spec=band_spec, artifacts=['report.json'], reports=_reports(rows))
    if evaluation.delta is not None:
        manifest.reports['delta'] = evaluation.delta.model_dump(mode='json')
    _emit(reports.band_table(rows), directory, manifest)
    return manifest


def sweep_partitions(cmd: models.SweepPartitionsCommand) -> models.RunManifest:
    spec, pairs = imaging.read_corpus(cmd.corpus)
    setup = pipeline.TrainingSetup(band_spec=cmd.band_spec(spec.size), scheme=cmd.scheme)
    sweep = pipeline.sweep_partitions(
        pairs,
        _held_out(spec, cmd.test_corpus),
        cmd.train_config(),
        setup,
        jobs=cmd.jobs,
    )
    directory = cmd.run_dir()
    directory.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(cmd, corpus=spec, reports=_reports(sweep.rows))
    manifest.reports['unconditioned'] = sweep.unconditioned.model_dump(mode='json')
    _curves(manifest, sweep.curves, directory)
    _emit(sweep.table, directory, manifest)
    return manifest


def compare_strategies(cmd: models.CompareStrategiesCommand) -> models.RunManifest:
    spec, pairs = imaging.read_corpus(cmd.corpus)
    setup = pipeline.TrainingSetup(band_spec=cmd.band_spec(spec.size), scheme=cmd.scheme)
    comparison = pipeline.compare_strategies(
        pairs,
        _held_out(spec, cmd.test_corpus),
        cmd.train_config(joint_stubs=cmd.joint_stubs),
        setup,
        strategies=cmd.strategies(),
        jobs=cmd.jobs,
    )
    directory = cmd.run_dir()
    comparison.baseline.save(directory / 'baseline')
    comparison.fp.save(directory / 'freq')
    comparison.cast.net.save(directory / 'cast')
    for result in comparison.results:
        result.stage.net.save(directory / f'strategy{int(result.strategy)}')

    manifest = _manifest(
        cmd,
        corpus=spec,
        band_spec=setup.band_spec,
        scheme=cmd.scheme,
        reports=_reports(comparison.rows),
        artifacts=['baseline', 'freq', 'cast', *(f'strategy{int(r.strategy)}' for r in comparison.results)],
    )
    manifest.reports['wall_time'] = {f'strategy{int(r.strategy)}': r.wall_time for r in comparison.results}
    _curves(manifest, comparison.curves, directory)
    _emit(comparison.table, directory, manifest)
    return manifest


_HANDLERS = {
    'gen-corpus': gen_corpus,
    'split': split,
    'train': train,
    'colorize': colorize,
    'correct': correct,
    'eval': evaluate,
    'sweep-partitions': sweep_partitions,
    'compare-strategies': compare_strategies,
}


def _manifest_dir(cmd: models.Command) -> Path:
    # the corpus directory already holds the corpus manifest
    if isinstance(cmd, models.GenCorpusCommand):
        return cmd.run_dir() / 'run'
    return cmd.run_dir()


def run(cmd: models.Command) -> int:
    """
    Execute `cmd`; 0 once every artifact and the run manifest are written, 1 with a
    one-line diagnostic otherwise.
    """
    started = time.perf_counter()
    try:
        manifest = _HANDLERS[cmd.command](cmd)
        manifest.wall_time = round(time.perf_counter() - started, 3)
        manifest.write(_manifest_dir(cmd))
    except (BandtintError, ValidationError, OSError) as e:
        message = _describe(e) if isinstance(e, ValidationError) else str(e)
        logger.debug('command failed', exc_info=True)
        print(f'{PROG} {cmd.command}: error: {message}', file=sys.stderr)
        return 1
    logger.info('command finished', extra={'command': cmd.command, 'seconds': manifest.wall_time})
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        settings = Settings()
    except ValidationError as e:
        first = e.errors()[0]
        variable = f'{Settings.model_config["env_prefix"]}{str(first["loc"][0]).upper()}'
        build_parser().error(f'{variable}: {first["msg"]}')
    configure_logging(constants.LogLevel(settings.log))
    return run(parse_args(argv))
