import math

import numpy as np

from bandtint import constants, models
from bandtint.core import spectral
from bandtint.core.tensor import Tensor, absolute, filter2d, mean
from bandtint.errors import ShapeError

# below this MSE two signals agree to float64 round-off and PSNR reports +inf
PSNR_MSE_FLOOR = 1e-20

_CHANNEL_INDEX = {
    constants.Channel.R: 0,
    constants.Channel.G: 1,
    constants.Channel.B: 2,
}


def _select(
    pred: models.PlanarImage,
    target: models.PlanarImage,
    channels: constants.Channel,
    what: str,
) -> tuple[np.ndarray, np.ndarray]:
    """
    float64 (C, H, W) planes of the selected channel(s).
    """
    a = pred.planes.astype(np.float64)
    b = target.planes.astype(np.float64)
    channels = constants.Channel(channels)
    if channels is constants.Channel.ALL:
        return a, b
    if pred.channels != 3 or target.channels != 3:
        raise ShapeError(f'{what} channel {channels} needs RGB images')
    index = _CHANNEL_INDEX[channels]
    return a[index : index + 1], b[index : index + 1]


def _same_shape(pred: Tensor, target: Tensor, what: str) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f'{what}: prediction shape {pred.shape} does not match target shape {target.shape}')


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2
    profile = np.exp(-(offsets**2) / (2 * sigma**2))
    window = np.outer(profile, profile)
    return window / window.sum()


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    _same_shape(pred, target, 'l1_loss')
    return mean(absolute(pred - target))


def ssim_loss_term(pred: Tensor, target: Tensor, cfg: models.LossConfig) -> Tensor:
    """
    Mean SSIM over channels and valid window positions, as a differentiable scalar.
    """
    _same_shape(pred, target, 'ssim')
    _, h, w = pred.shape
    if h < cfg.window or w < cfg.window:
        raise ShapeError(f'ssim: image {h}x{w} is smaller than the {cfg.window}x{cfg.window} window')
    window = gaussian_window(cfg.window, cfg.sigma)

    mu_p = filter2d(pred, window)
    mu_t = filter2d(target, window)
    mu_pp = mu_p * mu_p
    mu_tt = mu_t * mu_t
    mu_pt = mu_p * mu_t
    var_p = filter2d(pred * pred, window) - mu_pp
    var_t = filter2d(target * target, window) - mu_tt
    cov = filter2d(pred * target, window) - mu_pt

    numerator = (2 * mu_pt + cfg.c1) * (2 * cov + cfg.c2)
    denominator = (mu_pp + mu_tt + cfg.c1) * (var_p + var_t + cfg.c2)
    return mean(numerator / denominator)


def ssim(
    pred: models.PlanarImage,
    target: models.PlanarImage,
    cfg: models.LossConfig | None = None,
    channels: constants.Channel = constants.Channel.ALL,
) -> float:
    cfg = cfg or models.LossConfig()
    if pred.planes.shape != target.planes.shape:
        raise ShapeError(f'ssim: shapes {pred.planes.shape} and {target.planes.shape} differ')
    a, b = _select(pred, target, channels, 'ssim')
    value = ssim_loss_term(Tensor(a), Tensor(b), cfg)
    return float(np.clip(value.item(), -1, 1))


def hybrid_loss(pred: Tensor, target: Tensor, cfg: models.LossConfig) -> Tensor:
    """
    alpha * L1 + (1 - alpha) * (1 - SSIM).
    """
    if cfg.alpha == 1:
        return l1_loss(pred, target)
    structural = 1.0 - ssim_loss_term(pred, target, cfg)
    if cfg.alpha == 0:
        return structural
    return cfg.alpha * l1_loss(pred, target) + (1 - cfg.alpha) * structural


def psnr(
    pred: models.PlanarImage,
    target: models.PlanarImage,
    channels: constants.Channel = constants.Channel.ALL,
) -> float:
    """
    10 * log10(1 / MSE) over the selected channel(s) after clamping both images to [0, 1].
    """
    if pred.planes.shape != target.planes.shape:
        raise ShapeError(f'psnr: shapes {pred.planes.shape} and {target.planes.shape} differ')
    a, b = _select(pred, target, channels, 'psnr')
    mse = float(np.mean((np.clip(a, 0, 1) - np.clip(b, 0, 1)) ** 2))
    if mse < PSNR_MSE_FLOOR:
        return math.inf
    return 10 * math.log10(1 / mse)


def metrics_report(
    pred: models.PlanarImage,
    target: models.PlanarImage,
    cfg: models.LossConfig | None = None,
) -> models.MetricsReport:
    pred, target = pred.clamped(), target.clamped()
    return models.MetricsReport(
        psnr_r=psnr(pred, target, constants.Channel.R),
        psnr_g=psnr(pred, target, constants.Channel.G),
        psnr_b=psnr(pred, target, constants.Channel.B),
        psnr_avg=psnr(pred, target),
        ssim=ssim(pred, target, cfg),
        ssim_r=ssim(pred, target, cfg, constants.Channel.R),
        ssim_b=ssim(pred, target, cfg, constants.Channel.B),
    )


def band_psnr(pred: models.PlanarImage, target: models.PlanarImage, spec: models.BandSpec) -> models.BandPsnr:
    """
    PSNR of each band pair after the display map v -> v * 0.5 + 0.5.
    """
    pred_bands = spectral.split_bands(pred, spec)
    target_bands = spectral.split_bands(target, spec)
    return models.BandPsnr(
        **{
            band.value: psnr(spectral.to_display(pred_bands[band]), spectral.to_display(target_bands[band]))
            for band in constants.Band
        }
    )


def band_report(
    pred: models.PlanarImage,
    target: models.PlanarImage,
    spec: models.BandSpec,
    cfg: models.LossConfig | None = None,
) -> models.MetricsReport:
    report = metrics_report(pred, target, cfg)
    report.bands = band_psnr(pred, target, spec)
    report.band_display = models.BAND_DISPLAY_MAP
    return report


def mean_report(reports: list[models.MetricsReport]) -> models.MetricsReport:
    """
    Field-wise arithmetic mean; any +inf member keeps the mean at +inf.
    """
    if not reports:
        raise ShapeError('cannot aggregate an empty list of reports')

    def average(values: list[float]) -> float:
        return math.fsum(values) / len(values) if all(map(math.isfinite, values)) else math.inf

    def channel_ssim(name: str) -> float | None:
        values = [getattr(report, name) for report in reports]
        return None if None in values else math.fsum(values) / len(values)

    bands = None
    if all(report.bands is not None for report in reports):
        bands = models.BandPsnr(
            **{
                band.value: average([getattr(report.bands, band.value) for report in reports])
                for band in constants.Band
            }
        )
    return models.MetricsReport(
        psnr_r=average([report.psnr_r for report in reports]),
        psnr_g=average([report.psnr_g for report in reports]),
        psnr_b=average([report.psnr_b for report in reports]),
        psnr_avg=average([report.psnr_avg for report in reports]),
        ssim=math.fsum(report.ssim for report in reports) / len(reports),
        ssim_r=channel_ssim('ssim_r'),
        ssim_b=channel_ssim('ssim_b'),
        bands=bands,
        band_display=reports[0].band_display,
    )
