from dataclasses import dataclass

import numpy as np

from bandtint import constants, models
from bandtint.errors import ShapeError

IMAGINARY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    """
    (H, W) complex128, DC at (H // 2, W // 2).
    """

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BandSet:
    low: models.PlanarImage
    mid: models.PlanarImage
    high: models.PlanarImage
    spec: models.BandSpec

    def __getitem__(self, band: constants.Band) -> models.PlanarImage:
        return getattr(self, constants.Band(band).value)

    def items(self) -> list[tuple[constants.Band, models.PlanarImage]]:
        return [(band, self[band]) for band in constants.Band]


# spectra are DC-centered; forward is unscaled, inverse carries 1/(H*W)
def _forward(planes: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft2(planes, axes=(-2, -1)), axes=(-2, -1))


def _inverse(values: np.ndarray) -> np.ndarray:
    spatial = np.fft.ifft2(np.fft.ifftshift(values, axes=(-2, -1)), axes=(-2, -1))
    residue = float(np.abs(spatial.imag).max(initial=0.0))
    if residue > IMAGINARY_TOLERANCE:
        raise ShapeError(f'inverse transform left an imaginary residue of {residue:.3g}; spectrum is not Hermitian')
    return spatial.real


def fft2(img: models.PlanarImage) -> Spectrum:
    if img.channels != 1:
        raise ShapeError(f'fft2 takes single-channel images, got {img.channels} channels')
    if img.height < 2 or img.width < 2:
        raise ShapeError(f'fft2 needs extents >= 2, got {img.height}x{img.width}')
    return Spectrum(values=_forward(img.planes[0].astype(np.float64)))


def ifft2(spectrum: Spectrum, *, band_domain: bool = True) -> models.PlanarImage:
    planes = _inverse(spectrum.values)[None]
    if not band_domain:
        planes = np.clip(planes, 0, 1)
    return models.PlanarImage(planes=planes, band_domain=band_domain)


def radius_grid(h: int, w: int) -> np.ndarray:
    """
    Euclidean distance, in bins, of every centered frequency bin from DC.
    """
    v, u = np.ogrid[0:h, 0:w]
    return np.hypot(v - h // 2, u - w // 2)


def make_masks(h: int, w: int, spec: models.BandSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if spec.r_low >= spec.r_mid:
        raise ShapeError(f'r_low ({spec.r_low}) must be below r_mid ({spec.r_mid})')
    r = radius_grid(h, w)
    low = (r < spec.r_low).astype(np.float64)
    high = (r >= spec.r_mid).astype(np.float64)
    mid = 1.0 - low - high
    return low, mid, high


def split_bands(img: models.PlanarImage, spec: models.BandSpec) -> BandSet:
    """
    Split every channel into low/mid/high spatial-domain bands that sum back to `img`.
    """
    spectrum = _forward(img.planes.astype(np.float64))
    masks = make_masks(img.height, img.width, spec)
    low, mid, high = (
        models.PlanarImage(planes=_inverse(spectrum * mask), band_domain=True) for mask in masks
    )
    return BandSet(low=low, mid=mid, high=high, spec=spec)


def recombine(bands: BandSet, *, display: bool = False) -> models.PlanarImage:
    """
    Pointwise sum of the three bands; `display` clamps the result to [0, 1].
    """
    shapes = {image.planes.shape for _, image in bands.items()}
    if len(shapes) != 1:
        raise ShapeError(f'band extents differ: {sorted(shapes)}')
    planes = bands.low.planes + bands.mid.planes + bands.high.planes
    if display:
        return models.PlanarImage(planes=np.clip(planes, 0, 1))
    return models.PlanarImage(planes=planes, band_domain=True)


def spectral_energy(img: models.PlanarImage) -> float:
    """
    Sum of |F|^2 over every channel; equals H * W times the spatial energy.
    """
    return float(np.sum(np.abs(_forward(img.planes.astype(np.float64))) ** 2))


def band_energies(img: models.PlanarImage, spec: models.BandSpec) -> dict[constants.Band, float]:
    power = np.abs(_forward(img.planes.astype(np.float64))) ** 2
    masks = make_masks(img.height, img.width, spec)
    return {band: float(np.sum(power * mask)) for band, mask in zip(constants.Band, masks, strict=True)}


def to_display(img: models.PlanarImage) -> models.PlanarImage:
    """
    Affine map v -> v * 0.5 + 0.5 that brings signed band samples into [0, 1] for display.
    """
    return models.PlanarImage(planes=np.clip(img.planes * 0.5 + 0.5, 0, 1))


def from_display(img: models.PlanarImage) -> models.PlanarImage:
    return models.PlanarImage(planes=(img.planes - 0.5) * 2, band_domain=True)
