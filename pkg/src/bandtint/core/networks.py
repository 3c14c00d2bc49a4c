from collections.abc import Iterator
from typing import NamedTuple

from bandtint import constants, models
from bandtint.core.base import HEAD_PREFIX, Network, ParamSpec, conv_spec
from bandtint.core.imaging import image_tensor, tensor_image
from bandtint.core.tensor import (
    Tensor,
    activation,
    channel_broadcast,
    concat,
    conv2d,
    linear,
    mul,
    resample,
)
from bandtint.errors import ShapeError

RELU = constants.Activation.RELU
SIGMOID = constants.Activation.SIGMOID
DOWN = constants.Resample.DOWN2_MEAN
UP = constants.Resample.UP2_NEAREST
HEAD = HEAD_PREFIX.rstrip('.')


class SebParams(NamedTuple):
    w1: Tensor
    """
    (C / r, C, 1, 1) squeeze weights.
    """

    w2: Tensor
    """
    (C, C / r, 1, 1) excitation weights.
    """


def seb_gate(x: Tensor, p: SebParams) -> Tensor:
    """
    sigmoid(W2 * relu(W1 * X)) with bias-free 1x1 convolutions; every output lies in (0, 1).
    """
    channels = x.shape[0]
    if p.w1.shape[1] != channels or p.w2.shape[0] != channels:
        raise ShapeError(
            f'gate channel mismatch: input has {channels}, weights expect {p.w1.shape[1]} -> {p.w2.shape[0]}'
        )
    squeezed = activation(conv2d(x, p.w1), RELU)
    return activation(conv2d(squeezed, p.w2), SIGMOID)


def seb_block(x: Tensor, p: SebParams) -> Tensor:
    return mul(x, seb_gate(x, p))


def _conv(x: Tensor, net: Network, name: str, *, relu: bool = True) -> Tensor:
    kernel = net[f'{name}.weight']
    out = conv2d(x, kernel, net[f'{name}.bias'], padding=kernel.shape[-1] // 2)
    return activation(out, RELU) if relu else out


def _require_multiple(x: Tensor, multiple: int, what: str) -> None:
    _, h, w = x.shape
    if h % multiple or w % multiple:
        raise ShapeError(f'{what} needs extents divisible by {multiple}, got {h}x{w}')


class StubColorizer(Network):
    """
    Three-level encoder-decoder with skip concatenation, gray in, RGB out.
    """

    kind = 'stub'
    arch: models.StubArch

    def layout(self) -> Iterator[ParamSpec]:
        w1, w2, w3 = self.arch.widths
        yield from conv_spec('enc1', w1, 1)
        yield from conv_spec('enc2', w2, w1)
        yield from conv_spec('enc3', w3, w2)
        yield from conv_spec('mid', w3, w3)
        yield from conv_spec('dec3', w2, w3 + w3)
        yield from conv_spec('dec2', w1, w2 + w2)
        yield from conv_spec('dec1', w1, w1 + w1)
        yield from conv_spec(HEAD, 3, w1)

    def forward(self, gray: Tensor) -> Tensor:
        if gray.shape[0] != 1:
            raise ShapeError(f'stub input must have 1 channel, got {gray.shape[0]}')
        _require_multiple(gray, 8, 'colorizer stub')
        e1 = _conv(gray, self, 'enc1')
        e2 = _conv(resample(e1, DOWN), self, 'enc2')
        e3 = _conv(resample(e2, DOWN), self, 'enc3')
        x = _conv(resample(e3, DOWN), self, 'mid')
        x = _conv(concat([resample(x, UP), e3]), self, 'dec3')
        x = _conv(concat([resample(x, UP), e2]), self, 'dec2')
        x = _conv(concat([resample(x, UP), e1]), self, 'dec1')
        out = _conv(x, self, HEAD, relu=False)
        return out if self.arch.signed else activation(out, SIGMOID)


class ArtifactRemover(Network):
    """
    Residual 4-level U-Net; every skip connection is gated before concatenation.
    """

    kind = 'unet'
    arch: models.UNetArch

    def layout(self) -> Iterator[ParamSpec]:
        widths = self.arch.widths
        c_in = 3
        for level, width in enumerate(widths, 1):
            yield from conv_spec(f'enc{level}.conv1', width, c_in)
            yield from conv_spec(f'enc{level}.conv2', width, width)
            reduced = width // self.arch.reduction
            yield ParamSpec(f'seb{level}.w1', (reduced, width, 1, 1), width)
            yield ParamSpec(f'seb{level}.w2', (width, reduced, 1, 1), reduced)
            c_in = width
        yield from conv_spec('mid.conv1', widths[-1], widths[-1])
        yield from conv_spec('mid.conv2', widths[-1], widths[-1])
        previous = widths[-1]
        for level in reversed(range(1, len(widths) + 1)):
            width = widths[level - 1]
            yield from conv_spec(f'dec{level}.up', width, previous)
            yield from conv_spec(f'dec{level}.conv1', width, width + width)
            yield from conv_spec(f'dec{level}.conv2', width, width)
            previous = width
        yield from conv_spec(HEAD, 3, widths[0])

    def gate(self, level: int) -> SebParams:
        return SebParams(self[f'seb{level}.w1'], self[f'seb{level}.w2'])

    def forward(self, img: Tensor) -> Tensor:
        if img.shape[0] != 3:
            raise ShapeError(f'artifact remover input must have 3 channels, got {img.shape[0]}')
        _require_multiple(img, 16, 'artifact remover')
        levels = len(self.arch.widths)
        skips = []
        x = img
        for level in range(1, levels + 1):
            x = _conv(_conv(x, self, f'enc{level}.conv1'), self, f'enc{level}.conv2')
            skips.append(x)
            x = resample(x, DOWN)
        x = _conv(_conv(x, self, 'mid.conv1'), self, 'mid.conv2')
        for level in reversed(range(1, levels + 1)):
            x = _conv(resample(x, UP), self, f'dec{level}.up')
            x = concat([x, seb_block(skips[level - 1], self.gate(level))])
            x = _conv(_conv(x, self, f'dec{level}.conv1'), self, f'dec{level}.conv2')
        return img + _conv(x, self, HEAD, relu=False)


class CastCorrector(Network):
    """
    Residual three-level encoder-decoder; region means enter through a fully connected
    layer added to every bottleneck position.
    """

    kind = 'cast'
    arch: models.CastArch

    def layout(self) -> Iterator[ParamSpec]:
        w1, w2, w3 = self.arch.widths
        yield from conv_spec('enc1', w1, 3)
        yield from conv_spec('enc2', w2, w1)
        yield from conv_spec('enc3', w3, w2)
        yield ParamSpec('inject.weight', (w3, self.arch.mean_length), self.arch.mean_length)
        yield ParamSpec('inject.bias', (w3,), 0)
        yield from conv_spec('mid', w3, w3)
        yield from conv_spec('dec3', w2, w3 + w3)
        yield from conv_spec('dec2', w1, w2 + w2)
        yield from conv_spec('dec1', w1, w1 + w1)
        yield from conv_spec(HEAD, 3, w1)

    def forward(self, img: Tensor, means: Tensor) -> Tensor:
        if img.shape[0] != 3:
            raise ShapeError(f'cast corrector input must have 3 channels, got {img.shape[0]}')
        if means.shape != (self.arch.mean_length,):
            raise ShapeError(
                f'cast corrector for {self.arch.scheme} expects {self.arch.mean_length} mean values, '
                f'got {means.size}'
            )
        _require_multiple(img, 8, 'cast corrector')
        e1 = _conv(img, self, 'enc1')
        e2 = _conv(resample(e1, DOWN), self, 'enc2')
        e3 = _conv(resample(e2, DOWN), self, 'enc3')
        x = resample(e3, DOWN)
        injected = linear(means, self['inject.weight'], self['inject.bias'])
        x = x + channel_broadcast(injected, x.shape[1], x.shape[2])
        x = _conv(x, self, 'mid')
        x = _conv(concat([resample(x, UP), e3]), self, 'dec3')
        x = _conv(concat([resample(x, UP), e2]), self, 'dec2')
        x = _conv(concat([resample(x, UP), e1]), self, 'dec1')
        return img + _conv(x, self, HEAD, relu=False)


def unet_forward(img: models.PlanarImage, net: ArtifactRemover) -> models.PlanarImage:
    return tensor_image(net(image_tensor(img)))


def stub_forward(gray: models.PlanarImage, net: StubColorizer) -> models.PlanarImage:
    out = net(image_tensor(gray)).data
    return models.PlanarImage(planes=out, band_domain=net.arch.signed)


def cast_forward(
    img: models.PlanarImage,
    means: models.MeanVector,
    net: CastCorrector,
) -> models.PlanarImage:
    vector = Tensor.constant(means.as_array())
    return tensor_image(net(image_tensor(img), vector))
