import json
import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from bandtint import models
from bandtint.core.tensor import Tensor, default_dtype
from bandtint.errors import ImageIOError, ShapeError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
MANIFEST_FILE = 'manifest.json'

# 8-bit modes Pillow can hand over as gray or RGB without losing samples
_GRAY_MODES = {'L', 'LA'}
_COLOR_MODES = {'RGB', 'RGBA', 'P', 'PA'}


def image_tensor(img: models.PlanarImage) -> Tensor:
    return Tensor.constant(img.planes)


def tensor_image(tensor: Tensor) -> models.PlanarImage:
    return models.PlanarImage.unbounded(tensor.data)


def to_gray(img: models.PlanarImage) -> models.PlanarImage:
    if img.channels != 3:
        raise ShapeError(f'to_gray needs a 3-channel image, got {img.channels} channel(s)')
    if img.band_domain:
        raise ShapeError('to_gray needs a natural-domain image, got a band image')
    r, g, b = img.planes
    luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return models.PlanarImage(planes=np.clip(luma, 0, 1)[None])


def load_image(path: Path) -> models.PlanarImage:
    """
    Read an 8-bit gray or RGB image with samples mapped to [0, 1] by v / 255.
    """
    try:
        with Image.open(path) as image:
            mode = image.mode
            if mode in _GRAY_MODES:
                pixels = np.asarray(image.convert('L'))[None]
            elif mode in _COLOR_MODES:
                pixels = np.asarray(image.convert('RGB')).transpose(2, 0, 1)
            else:
                raise ImageIOError(path, f'unsupported image mode {mode} (8-bit gray or RGB expected)')
    except FileNotFoundError as e:
        raise ImageIOError(path, 'no such file') from e
    except UnidentifiedImageError as e:
        raise ImageIOError(path, 'not a readable image') from e
    except OSError as e:
        if isinstance(e, ImageIOError):
            raise
        raise ImageIOError(path, str(e)) from e
    return models.PlanarImage(planes=pixels.astype(default_dtype()) / 255)


def quantize(img: models.PlanarImage) -> np.ndarray:
    """
    (H, W) or (H, W, 3) uint8 pixels; band images are clamped to [0, 1] first.
    """
    pixels = np.rint(np.clip(img.planes, 0, 1) * 255).astype(np.uint8)
    if img.channels == 1:
        return pixels[0]
    return pixels.transpose(1, 2, 0)


def save_image(img: models.PlanarImage, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(quantize(img)).save(path, format='PNG')
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def _texture_frequencies(size: int, low: float, high: float) -> list[tuple[int, int]]:
    """
    Integer (fy, fx) bins with low <= radius < high, one per conjugate pair, Nyquist excluded.
    """
    half = size // 2
    return [
        (fy, fx)
        for fy in range(0, half)
        for fx in range(-half + 1, half)
        if (fy, fx) > (0, 0) and low <= math.hypot(fy, fx) < high
    ]


def _render_target(rng: np.random.Generator, size: int, spec: models.BandSpec) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size] / size

    # smooth gradients
    base = rng.uniform(0.25, 0.75, size=3)
    slopes = rng.uniform(-0.25, 0.25, size=(3, 2))
    planes = base[:, None, None] + slopes[:, 0, None, None] * y + slopes[:, 1, None, None] * x

    # filled rectangles and ellipses
    for _ in range(rng.integers(1, 4)):
        color = rng.uniform(0.1, 0.9, size=3)
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        ry, rx = rng.uniform(0.08, 0.3, size=2)
        if rng.random() < 0.5:
            inside = (np.abs(y - cy) <= ry) & (np.abs(x - cx) <= rx)
        else:
            inside = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1
        planes[:, inside] = color[:, None]

    # one sinusoid inside the mid annulus and one beyond it
    mid_bins = _texture_frequencies(size, spec.r_low, spec.r_mid)
    high_bins = _texture_frequencies(size, spec.r_mid, math.inf)
    for bins in (mid_bins, high_bins):
        if not bins:
            continue
        fy, fx = bins[rng.integers(len(bins))]
        phase = rng.uniform(0, 2 * math.pi)
        amplitude = 0.06 * rng.uniform(0.5, 1.0, size=3)
        wave = np.sin(2 * math.pi * (fy * y + fx * x) + phase)
        planes = planes + amplitude[:, None, None] * wave

    return np.clip(planes, 0, 1)


def cast_offset(spec: models.CorpusSpec, index: int) -> np.ndarray:
    """
    RGB offset of image `index`, drawn from its own stream so it can be regenerated alone.
    """
    rng = np.random.default_rng([spec.seed, index, 1])
    return rng.uniform(-spec.cast_strength, spec.cast_strength, size=3)


def gen_corpus(spec: models.CorpusSpec) -> list[models.CorpusPair]:
    band_spec = models.BandSpec.scaled(spec.size)
    dtype = default_dtype()
    pairs = []
    for index in range(spec.count):
        rng = np.random.default_rng([spec.seed, index])
        target = _render_target(rng, spec.size, band_spec).astype(dtype)
        offset = cast_offset(spec, index)
        cast = np.clip(target + offset.astype(dtype)[:, None, None], 0, 1)
        pairs.append(
            models.CorpusPair(
                index=index,
                target=models.PlanarImage(planes=target),
                cast=models.PlanarImage(planes=cast),
                offset=tuple(float(v) for v in offset),
            )
        )
    logger.info('generated corpus', extra={'count': spec.count, 'size': spec.size, 'seed': spec.seed})
    return pairs


def write_corpus(pairs: list[models.CorpusPair], spec: models.CorpusSpec, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    images = []
    for pair in pairs:
        target_name = f'{pair.index:04d}_target.png'
        cast_name = f'{pair.index:04d}_cast.png'
        save_image(pair.target, directory / target_name)
        save_image(pair.cast, directory / cast_name)
        images.append({'index': pair.index, 'target': target_name, 'cast': cast_name, 'offset': list(pair.offset)})
    manifest = {'spec': spec.model_dump(mode='json'), 'images': images}
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + '\n')


def read_corpus(directory: Path) -> tuple[models.CorpusSpec, list[models.CorpusPair]]:
    path = directory / MANIFEST_FILE
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ImageIOError(path, 'corpus manifest not found') from e
    except json.JSONDecodeError as e:
        raise ImageIOError(path, f'corpus manifest is not JSON ({e.msg})') from e
    spec = models.CorpusSpec.model_validate(manifest['spec'])
    pairs = [
        models.CorpusPair(
            index=entry['index'],
            target=load_image(directory / entry['target']),
            cast=load_image(directory / entry['cast']),
            offset=tuple(entry['offset']),
        )
        for entry in manifest['images']
    ]
    return spec, pairs
