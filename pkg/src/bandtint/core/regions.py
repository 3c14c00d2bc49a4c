import numpy as np
from pydantic import TypeAdapter

from bandtint import fields, models
from bandtint.errors import ShapeError

_scheme_adapter: TypeAdapter[str] = TypeAdapter(fields.SchemeName)


def _cuts(length: int, parts: int) -> list[tuple[int, int]]:
    """
    (start, extent) of `parts` spans; the trailing spans absorb the remainder pixels.
    """
    base, remainder = divmod(length, parts)
    extents = [base] * (parts - remainder) + [base + 1] * remainder
    starts = np.cumsum([0, *extents[:-1]])
    return [(int(start), extent) for start, extent in zip(starts, extents, strict=True)]


def build_partition(kind: str, h: int, w: int) -> models.PartitionScheme:
    """
    `grid<k>`: a row-major 2^k x 2^k tiling. `five`: four corner patches then a centered
    patch, each floor(h/2) x floor(w/2).
    """
    kind = _scheme_adapter.validate_python(kind)
    exponent = fields.grid_exponent(kind)
    if exponent is None:
        if h < 2 or w < 2:
            raise ShapeError(f'five-region partition needs at least 2x2 pixels, got {h}x{w}')
        ph, pw = h // 2, w // 2
        anchors = [(0, 0), (w - pw, 0), (0, h - ph), (w - pw, h - ph), ((w - pw) // 2, (h - ph) // 2)]
        regions = tuple(models.Region(x0=x0, y0=y0, w=pw, h=ph) for x0, y0 in anchors)
    else:
        parts = 2**exponent
        if h < parts or w < parts:
            raise ShapeError(f'{kind} needs at least {parts}x{parts} pixels, got {h}x{w}')
        regions = tuple(
            models.Region(x0=x0, y0=y0, w=rw, h=rh)
            for y0, rh in _cuts(h, parts)
            for x0, rw in _cuts(w, parts)
        )
    return models.PartitionScheme(name=kind, height=h, width=w, regions=regions)


def extract_means(img: models.PlanarImage, scheme: models.PartitionScheme) -> models.MeanVector:
    if img.band_domain:
        raise ShapeError('extract_means needs a natural-domain image, got a band image')
    if img.channels != 3:
        raise ShapeError(f'extract_means needs a 3-channel image, got {img.channels} channel(s)')
    if (img.height, img.width) != (scheme.height, scheme.width):
        raise ShapeError(
            f'{scheme.name} was built for {scheme.height}x{scheme.width}, image is {img.height}x{img.width}'
        )
    planes = img.planes.astype(np.float64)
    values = []
    for region in scheme.regions:
        rows, columns = region.window()
        values.extend(planes[:, rows, columns].mean(axis=(1, 2)))
    return models.MeanVector(values=tuple(float(v) for v in np.clip(values, 0, 1)), scheme=scheme)


def means_from_file(hints: models.MeanVectorFile, h: int, w: int) -> models.MeanVector:
    scheme = build_partition(hints.scheme, h, w)
    values = tuple(channel for color in hints.means for channel in color)
    return models.MeanVector(values=values, scheme=scheme)
