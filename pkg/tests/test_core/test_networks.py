import numpy as np
from pytest import mark, raises

from bandtint import models
from bandtint.core import networks, regions, tensor
from bandtint.core.base import load_network
from bandtint.core.tensor import Tensor, double_precision, grad_check
from bandtint.errors import ShapeError, SnapshotError

STUB = models.StubArch(widths=(4, 4, 4))
UNET = models.UNetArch(widths=(4, 4, 4, 4), reduction=2)
CAST = models.CastArch(widths=(4, 4, 4))


def _image(size: int, seed: int = 0) -> models.PlanarImage:
    rng = np.random.default_rng(seed)
    return models.PlanarImage(planes=rng.uniform(0, 1, size=(3, size, size)))


def test_gate_at_zero_weights_is_one_half():
    x = Tensor.constant(np.random.default_rng(0).normal(size=(4, 3, 3)))
    p = networks.SebParams(Tensor.constant(np.zeros((2, 4, 1, 1))), Tensor.constant(np.zeros((4, 2, 1, 1))))

    gate = networks.seb_gate(x, p)

    assert np.all(gate.numpy() == 0.5)
    assert np.allclose(networks.seb_block(x, p).numpy(), x.numpy() * 0.5)


def test_gate_lies_in_the_unit_interval():
    rng = np.random.default_rng(1)
    x = Tensor.constant(rng.normal(size=(4, 5, 5)))
    p = networks.SebParams(
        Tensor.constant(rng.normal(size=(2, 4, 1, 1))),
        Tensor.constant(rng.normal(size=(4, 2, 1, 1))),
    )

    gate = networks.seb_gate(x, p).numpy()

    assert np.all((gate > 0) & (gate < 1))

    with raises(ShapeError, match='gate channel mismatch'):
        networks.seb_gate(Tensor.constant(np.ones((3, 2, 2))), p)


def test_untrained_residual_networks_are_identities():
    img = _image(16)
    unet = networks.ArtifactRemover(arch=UNET, seed=0)
    cast = networks.CastCorrector(arch=CAST, seed=0)
    means = regions.extract_means(img, regions.build_partition('five', 16, 16))

    assert np.array_equal(networks.unet_forward(img, unet).planes, img.planes.astype(np.float32))
    assert np.array_equal(networks.cast_forward(img, means, cast).planes, img.planes.astype(np.float32))


def test_identity_init_can_be_switched_off():
    unet = networks.ArtifactRemover(arch=UNET.model_copy(update={'identity_init': False}), seed=0)

    assert np.any(unet['head.weight'].numpy() != 0)


def test_cast_corrector_checks_mean_length():
    img = _image(16)
    cast = networks.CastCorrector(arch=CAST, seed=0)

    with raises(ShapeError, match='expects 15 mean values, got 12'):
        cast(Tensor.constant(img.planes), Tensor.constant(np.zeros(12)))


def test_cast_corrector_without_mean_weights_ignores_the_means():
    img = Tensor.constant(_image(16).planes)
    cast = networks.CastCorrector(arch=CAST.model_copy(update={'identity_init': False}), seed=0)
    cast['inject.weight'].data[...] = 0
    rng = np.random.default_rng(4)

    first = cast(img, Tensor.constant(rng.uniform(0, 1, size=15))).numpy()
    second = cast(img, Tensor.constant(rng.uniform(0, 1, size=15))).numpy()

    assert np.any(first != img.numpy())
    assert np.array_equal(first, second)


def test_cast_corrector_means_receive_gradient():
    img = Tensor.constant(_image(16).planes)
    cast = networks.CastCorrector(arch=CAST.model_copy(update={'identity_init': False}), seed=0)
    means = Tensor.constant(np.linspace(0.1, 0.9, 15))
    projection = Tensor.constant(np.random.default_rng(5).normal(size=(3, 16, 16)))

    with tensor.Graph() as graph:
        loss = tensor.total(cast(img, means) * projection)
    tensor.backward(loss, graph)

    assert cast['inject.weight'].grad is not None
    assert np.any(cast['inject.weight'].grad != 0)


def test_stub_outputs():
    gray = models.PlanarImage(planes=np.random.default_rng(2).uniform(0, 1, size=(1, 16, 16)))

    plain = networks.stub_forward(gray, networks.StubColorizer(arch=STUB, seed=0))
    signed = networks.stub_forward(gray, networks.StubColorizer(arch=STUB.model_copy(update={'signed': True}), seed=0))

    assert plain.planes.shape == signed.planes.shape == (3, 16, 16)
    assert not plain.band_domain
    assert np.all((plain.planes > 0) & (plain.planes < 1))
    assert signed.band_domain


def test_networks_check_their_inputs():
    stub = networks.StubColorizer(arch=STUB, seed=0)
    unet = networks.ArtifactRemover(arch=UNET, seed=0)

    with raises(ShapeError, match='divisible by 8'):
        stub(Tensor.constant(np.zeros((1, 12, 12))))
    with raises(ShapeError, match='1 channel'):
        stub(Tensor.constant(np.zeros((3, 16, 16))))
    with raises(ShapeError, match='divisible by 16'):
        unet(Tensor.constant(np.zeros((3, 8, 8))))


def test_reduction_must_divide_widths():
    with raises(ValueError, match='reduction ratio 3'):
        models.UNetArch(widths=(4, 8, 8, 8), reduction=3)


def test_seed_determines_weights():
    a = networks.StubColorizer(arch=STUB, seed=5).state()
    b = networks.StubColorizer(arch=STUB, seed=5).state()
    c = networks.StubColorizer(arch=STUB, seed=6).state()

    assert all(np.array_equal(a[name], b[name]) for name in a)
    assert any(not np.array_equal(a[name], c[name]) for name in a)


@mark.parametrize(
    ('network', 'channels', 'samples'),
    [
        (networks.StubColorizer, 1, None),
        (networks.ArtifactRemover, 3, 8),
        (networks.CastCorrector, 3, 8),
    ],
)
def test_network_gradients(network, channels, samples):
    arch = {
        networks.StubColorizer: models.StubArch(widths=(2, 2, 2), signed=True),
        networks.ArtifactRemover: models.UNetArch(widths=(2, 2, 2, 2), reduction=2, identity_init=False),
        networks.CastCorrector: models.CastArch(widths=(2, 2, 2), scheme='grid0', identity_init=False),
    }[network]

    with double_precision():
        rng = np.random.default_rng(3)
        net = network(arch=arch, seed=0)
        x = Tensor.constant(rng.uniform(0, 1, size=(channels, 16, 16)))
        projection = Tensor.constant(rng.normal(size=(3, 16, 16)))
        extra = (Tensor.constant(rng.uniform(0, 1, size=3)),) if network is networks.CastCorrector else ()

        def loss(input: Tensor) -> Tensor:
            return tensor.total(net(input, *extra) * projection)

        error = grad_check(loss, net.parameters(), x, epsilon=1e-4, samples=samples)

    assert error < 1e-3


def test_save_and_load(tmp_path):
    net = networks.CastCorrector(arch=CAST.model_copy(update={'scheme': 'grid1'}), seed=4)

    net.save(tmp_path / 'cast')
    loaded = load_network(tmp_path / 'cast')

    assert isinstance(loaded, networks.CastCorrector)
    assert loaded.arch == net.arch
    assert all(np.array_equal(loaded[name].numpy(), value) for name, value in net.state().items())


def test_load_errors(tmp_path):
    with raises(SnapshotError):
        load_network(tmp_path / 'missing')

    stub = networks.StubColorizer(arch=STUB, seed=0)
    state = stub.state()
    del state['head.bias']
    with raises(SnapshotError, match='head.bias'):
        stub.load_state(state)


def test_clone_is_independent():
    net = networks.StubColorizer(arch=STUB, seed=0)

    twin = net.clone()
    twin['head.bias'].data += 1

    assert np.all(net['head.bias'].numpy() == 0)
    assert np.all(twin['head.bias'].numpy() == 1)
