import numpy as np
from pytest import approx, mark, raises

from bandtint import constants
from bandtint.core import tensor
from bandtint.core.objectives import gaussian_window
from bandtint.core.tensor import Graph, OptimState, Tensor, backward, double_precision, grad_check, optim_step
from bandtint.errors import GradCheckError, GraphError, NonFiniteError, OptimizerError, PrecisionError, ShapeError

PRIMITIVES = [
    'add',
    'sub',
    'mul',
    'div',
    'abs',
    'sum',
    'mean',
    'concat',
    'channel_broadcast',
    'relu',
    'sigmoid',
    'down2_mean',
    'up2_nearest',
    'conv2d',
    'conv2d_stride2',
    'filter2d',
    'linear',
]


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    values = rng.normal(size=shape)
    return values + np.sign(values) * 0.1


def _primitive(name: str, rng: np.random.Generator) -> tuple[list[Tensor], object]:
    a = Tensor.parameter(_away_from_zero(rng, (2, 4, 4)), name='a')
    b = Tensor.parameter(rng.uniform(0.5, 1.5, size=(2, 4, 4)), name='b')
    kernel = Tensor.parameter(rng.normal(size=(3, 2, 3, 3)), name='kernel')
    bias = Tensor.parameter(rng.normal(size=3), name='bias')
    vector = Tensor.parameter(rng.normal(size=5), name='vector')
    weight = Tensor.parameter(rng.normal(size=(3, 5)), name='weight')

    match name:
        case 'add':
            return [a, b], lambda: a + b
        case 'sub':
            return [a, b], lambda: a - b
        case 'mul':
            return [a, b], lambda: a * b
        case 'div':
            return [a, b], lambda: a / b
        case 'abs':
            return [a], lambda: tensor.absolute(a)
        case 'sum':
            return [a], lambda: tensor.total(a * a)
        case 'mean':
            return [a], lambda: tensor.mean(a * a)
        case 'concat':
            return [a, b], lambda: tensor.concat([a, b])
        case 'channel_broadcast':
            return [bias], lambda: tensor.channel_broadcast(bias, 4, 4)
        case 'relu':
            return [a], lambda: tensor.activation(a, constants.Activation.RELU)
        case 'sigmoid':
            return [a], lambda: tensor.activation(a, constants.Activation.SIGMOID)
        case 'down2_mean':
            return [a], lambda: tensor.resample(a, constants.Resample.DOWN2_MEAN)
        case 'up2_nearest':
            return [a], lambda: tensor.resample(a, constants.Resample.UP2_NEAREST)
        case 'conv2d':
            return [a, kernel, bias], lambda: tensor.conv2d(a, kernel, bias, padding=1)
        case 'conv2d_stride2':
            return [a, kernel, bias], lambda: tensor.conv2d(a, kernel, bias, stride=2, padding=1)
        case 'filter2d':
            return [a], lambda: tensor.filter2d(a, gaussian_window(3, 1.0))
        case 'linear':
            return [vector, weight, bias], lambda: tensor.linear(vector, weight, bias)
    raise AssertionError(name)


@mark.parametrize('name', PRIMITIVES)
def test_primitive_gradients(name):
    with double_precision():
        rng = np.random.default_rng(7)
        params, op = _primitive(name, rng)
        projection = Tensor.constant(rng.normal(size=op().shape))

        def loss(_: Tensor) -> Tensor:
            return tensor.total(op() * projection)

        error = grad_check(loss, params, Tensor.constant(np.zeros(1)))

    assert error < 1e-4


def test_backward_fills_leaf_gradients_only():
    x = Tensor.parameter(np.array([1.0, -2.0, 3.0]), name='x')

    with Graph() as graph:
        y = x * x
        loss = tensor.total(y)
    backward(loss, graph)

    assert x.grad == approx([2.0, -4.0, 6.0])
    assert y.grad is None
    assert len(graph) == 2


def test_gradients_accumulate_over_reused_inputs():
    x = Tensor.parameter(np.array([3.0]), name='x')

    with Graph() as graph:
        loss = tensor.total(x * x + x)
    backward(loss, graph)

    assert x.grad == approx([7.0])


def test_nothing_is_recorded_outside_a_graph():
    x = Tensor.parameter(np.ones(3), name='x')

    y = x * 2.0

    assert not y.requires_grad


def test_backward_rejects_foreign_and_non_scalar_losses():
    x = Tensor.parameter(np.ones(3), name='x')

    outside = tensor.total(x * x)
    with raises(GraphError):
        backward(outside, Graph())

    with Graph() as graph:
        y = x * x
    with raises(GraphError):
        backward(y, graph)


def test_only_scalars_broadcast():
    a = Tensor.constant(np.ones((2, 3)))

    assert (a + 1.0).numpy() == approx(np.full((2, 3), 2.0))

    with raises(ShapeError):
        _ = a + Tensor.constant(np.ones(3))


def test_non_finite_results_are_refused():
    with raises(NonFiniteError), np.errstate(divide='ignore'):
        tensor.div(Tensor.constant([1.0]), Tensor.constant([0.0]))


def test_activations():
    x = Tensor.constant(np.array([[[-2.0, 0.0, 3.0]]]))

    relu = tensor.activation(x, constants.Activation.RELU).numpy()
    sigmoid = tensor.activation(x, constants.Activation.SIGMOID).numpy()

    assert relu == approx(np.array([[[0.0, 0.0, 3.0]]]))
    assert sigmoid[0, 0, 1] == 0.5
    assert np.all((sigmoid > 0) & (sigmoid < 1))


def test_resample():
    x = Tensor.constant(np.arange(16.0).reshape(1, 4, 4))

    down = tensor.resample(x, constants.Resample.DOWN2_MEAN).numpy()
    up = tensor.resample(x, constants.Resample.UP2_NEAREST).numpy()

    assert down == approx(np.array([[[2.5, 4.5], [10.5, 12.5]]]))
    assert up.shape == (1, 8, 8)
    assert up[0, 1, 1] == x.data[0, 0, 0]

    with raises(ShapeError):
        tensor.resample(Tensor.constant(np.ones((1, 3, 4))), constants.Resample.DOWN2_MEAN)


def _naive_conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, padding: int) -> np.ndarray:
    c_out, _, k, _ = kernel.shape
    padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    out_h = padded.shape[1] - k + 1
    out_w = padded.shape[2] - k + 1
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for i in range(out_h):
            for j in range(out_w):
                out[o, i, j] = np.sum(padded[:, i : i + k, j : j + k] * kernel[o]) + bias[o]
    return out


def test_conv2d_matches_direct_correlation():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5, 5))
    kernel = rng.normal(size=(3, 2, 3, 3))
    bias = rng.normal(size=3)

    with double_precision():
        same = tensor.conv2d(Tensor.constant(x), Tensor.constant(kernel), Tensor.constant(bias), padding=1)
        strided = tensor.conv2d(
            Tensor.constant(x), Tensor.constant(kernel), Tensor.constant(bias), stride=2, padding=1
        )

    expected = _naive_conv(x, kernel, bias, padding=1)
    assert same.numpy() == approx(expected, abs=1e-12)
    assert strided.shape == (3, 3, 3)
    assert strided.numpy() == approx(expected[:, ::2, ::2], abs=1e-12)


def test_conv2d_shape_errors():
    x = Tensor.constant(np.ones((2, 5, 5)))

    with raises(ShapeError, match='channel'):
        tensor.conv2d(x, Tensor.constant(np.ones((1, 3, 3, 3))))
    with raises(ShapeError):
        tensor.conv2d(x, Tensor.constant(np.ones((1, 2, 2, 2))))
    with raises(ShapeError):
        tensor.conv2d(x, Tensor.constant(np.ones((1, 2, 7, 7))))


def test_grad_check_requires_double_precision():
    x = Tensor.parameter(np.ones(3), name='x')

    with raises(PrecisionError):
        grad_check(lambda _: tensor.total(x * x), [x], Tensor.constant(np.zeros(1)))


def test_grad_check_reports_a_wrong_rule():
    def bad_square(x: Tensor) -> Tensor:
        # derivative missing its factor 2
        return tensor._emit('bad_square', x.data**2, (x,), lambda g: (g * x.data,))

    with double_precision():
        x = Tensor.parameter(np.array([1.0, 2.0]), name='x')
        error = grad_check(lambda _: tensor.total(bad_square(x)), [x], Tensor.constant(np.zeros(1)))

    assert error == approx(0.5, rel=1e-3)


def test_grad_check_samples_entries():
    with double_precision():
        rng = np.random.default_rng(1)
        w = Tensor.parameter(rng.normal(size=(20, 20)), name='w')
        error = grad_check(lambda _: tensor.total(w * w), [w], Tensor.constant(np.zeros(1)), samples=5)

    assert error < 1e-6


def test_grad_check_skips_entries_that_cross_a_kink():
    with double_precision():
        zeros = Tensor.constant(np.zeros(1))
        p = Tensor.parameter(np.array([1e-5, 0.5]), name='p')
        q = Tensor.parameter(np.array([-2e-5, 0.7]), name='q')
        relu = grad_check(lambda _: tensor.total(tensor.activation(p, constants.Activation.RELU)), [p], zeros)
        absolute = grad_check(lambda _: tensor.total(tensor.absolute(q)), [q], zeros)

    assert relu < 1e-9
    assert absolute < 1e-9


def test_grad_check_needs_an_entry_clear_of_kinks():
    with double_precision():
        x = Tensor.parameter(np.zeros(3), name='x')

        with raises(GradCheckError, match='kink'):
            grad_check(lambda _: tensor.total(tensor.absolute(x)), [x], Tensor.constant(np.zeros(1)))


def test_adam_first_step_moves_by_the_learning_rate():
    x = Tensor.parameter(np.array([1.0]), name='x')
    state = OptimState.for_params([x], learning_rate=0.1)

    with Graph() as graph:
        loss = tensor.total(x * x)
    backward(loss, graph)
    optim_step([x], state)

    assert x.data == approx([0.9], abs=1e-6)
    assert x.grad is None
    assert state.step_count == 1


def test_adam_with_zero_learning_rate_keeps_parameters():
    x = Tensor.parameter(np.array([1.0, -1.0]), name='x')
    state = OptimState.for_params([x], learning_rate=0.0)

    for _ in range(3):
        with Graph() as graph:
            loss = tensor.total(x * x)
        backward(loss, graph)
        optim_step([x], state)

    assert x.data.tolist() == [1.0, -1.0]


def test_optimizer_errors():
    x = Tensor.parameter(np.ones(2), name='x')

    with raises(OptimizerError):
        OptimState.for_params([x], learning_rate=-1.0)
    with raises(OptimizerError, match='x'):
        optim_step([x], OptimState.for_params([x]))


def test_precision_context():
    assert tensor.default_dtype() is np.float32
    with double_precision():
        assert Tensor.constant([1.0]).data.dtype == np.float64
    assert Tensor.constant([1.0]).data.dtype == np.float32
