import math
from collections.abc import Sequence

from bandtint import models

type Row = tuple[str, models.MetricsReport]


def _db(value: float) -> str:
    if math.isinf(value):
        return 'inf'
    return f'{value:.2f}'


def _delta(value: float) -> str:
    if math.isnan(value):
        return 'n/a'
    if math.isinf(value):
        return '+inf' if value > 0 else '-inf'
    return f'{value:+.2f}'


def _difference(ours: float, baseline: float) -> float:
    if math.isinf(ours) and math.isinf(baseline):
        return math.nan
    return ours - baseline


def band_delta(ours: models.MetricsReport, baseline: models.MetricsReport) -> models.BandDelta:
    if ours.bands is None or baseline.bands is None:
        raise ValueError('band deltas need per-band PSNR on both reports')
    return models.BandDelta(
        avg=_difference(ours.psnr_avg, baseline.psnr_avg),
        low=_difference(ours.bands.low, baseline.bands.low),
        mid=_difference(ours.bands.mid, baseline.bands.mid),
        high=_difference(ours.bands.high, baseline.bands.high),
    )


def _render(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(line[i]) for line in [header, *rows]) for i in range(len(header))]
    lines = [
        '  '.join(
            cell.ljust(width) if i == 0 else cell.rjust(width) for i, (cell, width) in enumerate(zip(line, widths))
        )
        for line in [header, *rows]
    ]
    lines.insert(1, '  '.join('-' * width for width in widths))
    return '\n'.join(line.rstrip() for line in lines) + '\n'


def band_table(rows: Sequence[Row]) -> str:
    """
    First row is the baseline; the delta column is each row's Avg PSNR minus the baseline's.
    """
    header = ['Model', 'Avg PSNR', 'Low-Freq', 'Mid-Freq', 'High-Freq', 'Δ']
    baseline = rows[0][1] if rows else None
    cells = []
    for index, (label, report) in enumerate(rows):
        bands = report.bands or models.BandPsnr(low=math.nan, mid=math.nan, high=math.nan)
        delta = '-' if index == 0 else _delta(_difference(report.psnr_avg, baseline.psnr_avg))
        cells.append([label, _db(report.psnr_avg), _db(bands.low), _db(bands.mid), _db(bands.high), delta])
    return _render(header, cells)


def _ssim(value: float | None) -> str:
    return '-' if value is None else f'{value:.4f}'


def channel_table(rows: Sequence[Row]) -> str:
    header = ['', 'PSNR_R', 'PSNR_G', 'PSNR_B', 'SSIM_R', 'SSIM_B']
    cells = [
        [
            label,
            _db(report.psnr_r),
            _db(report.psnr_g),
            _db(report.psnr_b),
            _ssim(report.ssim_r),
            _ssim(report.ssim_b),
        ]
        for label, report in rows
    ]
    return _render(header, cells)


def data_rows(table: str) -> list[str]:
    """
    Body lines of a rendered table (header and rule removed).
    """
    return [line for line in table.splitlines()[2:] if line.strip()]
