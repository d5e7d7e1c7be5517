#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import abc
import math
import typing
import numpy
from numpy.lib.stride_tricks import sliding_window_view
from .._error import ContractViolationError
from ._parameter import Parameter, ParameterSet, Tensor


# Per-sample shape; the leading batch axis of tensors is never part of a Shape.
Shape = typing.Tuple[int, ...]

Cost = typing.NamedTuple('Cost', [
    ('params', int),
    ('flops', int),
])


def sum_costs(costs: typing.Iterable[Cost]) -> Cost:
    params, flops = 0, 0
    for c in costs:
        params += c.params
        flops += c.flops
    return Cost(params=params, flops=flops)


class Operator(abc.ABC):
    """
    A stateless operator kind. Parameters are owned by the caller and passed into every call,
    which makes all methods pure and reentrant.
    FLOPs convention: one multiply-accumulate counts as two FLOPs; normalization, activation and pooling
    are counted per element.
    """

    # The name used in configuration files; parametrized kinds extend it with a suffix.
    NAME = ''

    @property
    def name(self) -> str:
        return self.NAME

    @abc.abstractmethod
    def output_shape(self, input_shape: Shape) -> Shape:
        raise NotImplementedError

    def parameter_shapes(self, input_shape: Shape) -> typing.Dict[str, Shape]:
        self.output_shape(input_shape)      # Validates the input contract
        return {}

    def is_parametric(self, input_shape: Shape) -> bool:
        return bool(self.parameter_shapes(input_shape))

    def initialize(self, input_shape: Shape, rng: numpy.random.Generator) -> ParameterSet:
        """
        He fan-in initialization for weights, zeros for biases and normalization shifts, ones for scales.
        """
        out = {}    # type: ParameterSet
        for name, shape in self.parameter_shapes(input_shape).items():
            leaf = name.rsplit('.', 1)[-1]
            if leaf == 'weight':
                fan_in = int(numpy.prod(shape[1:])) if len(shape) > 1 else 1
                if len(shape) == 3:     # Depthwise kernels are (channels, k, k)
                    fan_in = shape[1] * shape[2]
                out[name] = Parameter(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape))
            elif leaf == 'scale':
                out[name] = Parameter(numpy.ones(shape))
            else:
                out[name] = Parameter(numpy.zeros(shape))
        return out

    @abc.abstractmethod
    def cost(self, input_shape: Shape) -> Cost:
        raise NotImplementedError

    def forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        self._check_arguments(params, x)
        return self._forward(params, x)

    def backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        """
        Returns the gradient with respect to the input; parameter gradients are accumulated into the parameters.
        Intermediate activations are recomputed from the input.
        """
        self._check_arguments(params, x)
        expected = (x.shape[0],) + self.output_shape(tuple(x.shape[1:]))
        if tuple(upstream.shape) != expected:
            dim = _first_mismatch(tuple(upstream.shape), expected)
            raise ContractViolationError('%s: upstream gradient dimension %d is %s, expected %s' %
                                         (self, dim, _dim_or_none(upstream.shape, dim), _dim_or_none(expected, dim)))
        return self._backward(params, x, upstream)

    @abc.abstractmethod
    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        raise NotImplementedError

    @abc.abstractmethod
    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        raise NotImplementedError

    def _check_arguments(self, params: ParameterSet, x: Tensor) -> None:
        if x.ndim < 2:
            raise ContractViolationError('%s: input must have a batch axis, got shape %s' % (self, x.shape))
        expected = self.parameter_shapes(tuple(x.shape[1:]))
        if set(expected) != set(params):
            raise ContractViolationError('%s: expected parameters %s, got %s' %
                                         (self, sorted(expected), sorted(params)))
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ContractViolationError('%s: parameter %r has shape %s, expected %s' %
                                             (self, name, params[name].shape, shape))

    def _require_image(self, input_shape: Shape) -> typing.Tuple[int, int, int]:
        if len(input_shape) != 3 or min(input_shape) < 1:
            raise ContractViolationError('%s: input must be (channels, height, width), got %s' % (self, input_shape))
        c, h, w = input_shape
        return c, h, w

    def __str__(self) -> str:
        return self.name

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Operator):
            return repr(self) == repr(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(repr(self))


class Identity(Operator):
    NAME = 'identity'

    def output_shape(self, input_shape: Shape) -> Shape:
        return tuple(input_shape)

    def cost(self, input_shape: Shape) -> Cost:
        return Cost(0, 0)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        return x

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        return upstream

    def __repr__(self) -> str:
        return 'Identity()'


class Zero(Operator):
    """Only legal in residual slots, where it disables the branch."""
    NAME = 'zero'

    def output_shape(self, input_shape: Shape) -> Shape:
        return tuple(input_shape)

    def cost(self, input_shape: Shape) -> Cost:
        return Cost(0, 0)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        return numpy.zeros_like(x)

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        return numpy.zeros_like(x)

    def __repr__(self) -> str:
        return 'Zero()'


class Dense(Operator):
    NAME = 'dense'

    def __init__(self, out_features: int):
        if out_features < 1:
            raise ValueError('Dense output width must be positive, got %r' % out_features)
        self._out_features = int(out_features)

    @property
    def out_features(self) -> int:
        return self._out_features

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) < 1 or min(input_shape) < 1:
            raise ContractViolationError('%s: invalid input shape %s' % (self, input_shape))
        return self._out_features,

    def parameter_shapes(self, input_shape: Shape) -> typing.Dict[str, Shape]:
        self.output_shape(input_shape)
        in_features = int(numpy.prod(input_shape))
        return {
            'weight': (self._out_features, in_features),
            'bias':   (self._out_features,),
        }

    def cost(self, input_shape: Shape) -> Cost:
        in_features = int(numpy.prod(input_shape))
        return Cost(params=in_features * self._out_features + self._out_features,
                    flops=2 * in_features * self._out_features)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        flat = x.reshape(x.shape[0], -1)
        return typing.cast(Tensor, flat @ params['weight'].value.T + params['bias'].value)

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        flat = x.reshape(x.shape[0], -1)
        params['weight'].accumulate(upstream.T @ flat)
        params['bias'].accumulate(upstream.sum(axis=0))
        return typing.cast(Tensor, (upstream @ params['weight'].value).reshape(x.shape))

    def __str__(self) -> str:
        return 'dense(out=%d)' % self._out_features

    def __repr__(self) -> str:
        return 'Dense(out_features=%r)' % self._out_features


class _PostNormMixin:
    """
    Optional learnable per-channel affine transform followed by ReLU, applied after a convolution.
    """

    _post_norm = False

    def _post_norm_shapes(self, channels: int) -> typing.Dict[str, Shape]:
        if not self._post_norm:
            return {}
        return {'norm.scale': (channels,), 'norm.shift': (channels,)}

    def _post_norm_cost(self, channels: int, height: int, width: int) -> Cost:
        if not self._post_norm:
            return Cost(0, 0)
        return Cost(params=2 * channels, flops=3 * channels * height * width)

    def _post_norm_forward(self, params: ParameterSet, z: Tensor) -> Tensor:
        if not self._post_norm:
            return z
        return _relu(_affine(z, params['norm.scale'].value, params['norm.shift'].value))

    def _post_norm_backward(self, params: ParameterSet, z: Tensor, upstream: Tensor) -> Tensor:
        if not self._post_norm:
            return upstream
        scale = params['norm.scale'].value
        u = _affine(z, scale, params['norm.shift'].value)
        gu = upstream * (u > 0)
        params['norm.scale'].accumulate((gu * z).sum(axis=(0, 2, 3)))
        params['norm.shift'].accumulate(gu.sum(axis=(0, 2, 3)))
        return typing.cast(Tensor, gu * scale[None, :, None, None])


class _Convolution(_PostNormMixin, Operator):
    KERNEL = 1

    def __init__(self, out_channels: int, post_norm: bool = False):
        if out_channels < 1:
            raise ValueError('Convolution output channels must be positive, got %r' % out_channels)
        self._out_channels = int(out_channels)
        self._post_norm = bool(post_norm)

    @property
    def out_channels(self) -> int:
        return self._out_channels

    @property
    def post_norm(self) -> bool:
        return self._post_norm

    def output_shape(self, input_shape: Shape) -> Shape:
        _, h, w = self._require_image(input_shape)
        return self._out_channels, h, w

    def parameter_shapes(self, input_shape: Shape) -> typing.Dict[str, Shape]:
        c, _, _ = self._require_image(input_shape)
        out = {
            'weight': self._weight_shape(c),
            'bias':   (self._out_channels,),
        }   # type: typing.Dict[str, Shape]
        out.update(self._post_norm_shapes(self._out_channels))
        return out

    def cost(self, input_shape: Shape) -> Cost:
        c, h, w = self._require_image(input_shape)
        k = self.KERNEL
        conv = Cost(params=k * k * c * self._out_channels + self._out_channels,
                    flops=2 * k * k * c * self._out_channels * h * w)
        return sum_costs([conv, self._post_norm_cost(self._out_channels, h, w)])

    def _weight_shape(self, in_channels: int) -> Shape:
        if self.KERNEL == 1:
            return self._out_channels, in_channels
        return self._out_channels, in_channels, self.KERNEL, self.KERNEL

    def _kernel(self, params: ParameterSet) -> Tensor:
        w = params['weight'].value
        return w.reshape(w.shape[0], w.shape[1], self.KERNEL, self.KERNEL)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        z = _convolve(x, self._kernel(params), params['bias'].value)
        return self._post_norm_forward(params, z)

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        kernel = self._kernel(params)
        z = _convolve(x, kernel, params['bias'].value)
        gz = self._post_norm_backward(params, z, upstream)
        dx, dw, db = _convolve_backward(x, kernel, gz)
        params['weight'].accumulate(dw.reshape(params['weight'].shape))
        params['bias'].accumulate(db)
        return dx

    def __str__(self) -> str:
        return '%s(out=%d%s)' % (self.NAME, self._out_channels, ', norm' if self._post_norm else '')

    def __repr__(self) -> str:
        return '%s(out_channels=%r, post_norm=%r)' % (type(self).__name__, self._out_channels, self._post_norm)


class Conv1x1(_Convolution):
    NAME = 'conv1x1'
    KERNEL = 1


class Conv3x3(_Convolution):
    NAME = 'conv3x3'
    KERNEL = 3


class DWSepConv(_PostNormMixin, Operator):
    """
    Pointwise expansion, depthwise k×k convolution with ReLU, pointwise projection back to the input width.
    """

    KERNELS = 1, 3
    EXPANSIONS = 0.5, 1.0, 2.0

    def __init__(self, kernel: int, expansion: float, post_norm: bool = False):
        if kernel not in self.KERNELS:
            raise ValueError('Depthwise kernel must be one of %s, got %r' % (self.KERNELS, kernel))
        if float(expansion) not in self.EXPANSIONS:
            raise ValueError('Expansion ratio must be one of %s, got %r' % (self.EXPANSIONS, expansion))
        self._kernel_size = int(kernel)
        self._expansion = float(expansion)
        self._post_norm = bool(post_norm)

    @property
    def kernel(self) -> int:
        return self._kernel_size

    @property
    def expansion(self) -> float:
        return self._expansion

    @property
    def name(self) -> str:
        return 'dwsep%dx%d_e%s' % (self._kernel_size, self._kernel_size, _format_ratio(self._expansion))

    def hidden_channels(self, in_channels: int) -> int:
        hidden = int(math.floor(self._expansion * in_channels + 0.5))
        if hidden < 1:
            raise ContractViolationError('%s: expansion %s of %d channels leaves no hidden channels' %
                                         (self, self._expansion, in_channels))
        return hidden

    def output_shape(self, input_shape: Shape) -> Shape:
        c, h, w = self._require_image(input_shape)
        self.hidden_channels(c)
        return c, h, w

    def parameter_shapes(self, input_shape: Shape) -> typing.Dict[str, Shape]:
        c, _, _ = self._require_image(input_shape)
        m = self.hidden_channels(c)
        k = self._kernel_size
        out = {
            'expand.weight':    (m, c),
            'expand.bias':      (m,),
            'depthwise.weight': (m, k, k),
            'depthwise.bias':   (m,),
            'project.weight':   (c, m),
            'project.bias':     (c,),
        }   # type: typing.Dict[str, Shape]
        out.update(self._post_norm_shapes(c))
        return out

    def cost(self, input_shape: Shape) -> Cost:
        c, h, w = self._require_image(input_shape)
        m = self.hidden_channels(c)
        k = self._kernel_size
        own = Cost(params=(c * m + m) + (k * k * m + m) + (m * c + c),
                   flops=2 * h * w * (c * m + k * k * m + m * c) + m * h * w)
        return sum_costs([own, self._post_norm_cost(c, h, w)])

    def _stages(self, params: ParameterSet, x: Tensor) -> typing.Tuple[Tensor, Tensor, Tensor]:
        a = _convolve(x, _pointwise(params['expand.weight'].value), params['expand.bias'].value)
        d = _convolve_depthwise(a, params['depthwise.weight'].value, params['depthwise.bias'].value)
        r = _relu(d)
        return a, d, r

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        _, _, r = self._stages(params, x)
        z = _convolve(r, _pointwise(params['project.weight'].value), params['project.bias'].value)
        return self._post_norm_forward(params, z)

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        a, d, r = self._stages(params, x)
        project = _pointwise(params['project.weight'].value)
        z = _convolve(r, project, params['project.bias'].value)
        gz = self._post_norm_backward(params, z, upstream)

        gr, dw, db = _convolve_backward(r, project, gz)
        params['project.weight'].accumulate(dw.reshape(params['project.weight'].shape))
        params['project.bias'].accumulate(db)

        gd = gr * (d > 0)
        ga, dw, db = _convolve_depthwise_backward(a, params['depthwise.weight'].value, gd)
        params['depthwise.weight'].accumulate(dw)
        params['depthwise.bias'].accumulate(db)

        expand = _pointwise(params['expand.weight'].value)
        gx, dw, db = _convolve_backward(x, expand, ga)
        params['expand.weight'].accumulate(dw.reshape(params['expand.weight'].shape))
        params['expand.bias'].accumulate(db)
        return gx

    def __str__(self) -> str:
        return self.name + ('(norm)' if self._post_norm else '')

    def __repr__(self) -> str:
        return 'DWSepConv(kernel=%r, expansion=%r, post_norm=%r)' % (self._kernel_size, self._expansion,
                                                                     self._post_norm)


class AvgPool(Operator):
    """Non-overlapping average pooling; the window must divide both spatial dimensions."""

    NAME = 'avgpool'

    def __init__(self, window: int):
        if window < 1:
            raise ValueError('Pooling window must be positive, got %r' % window)
        self._window = int(window)

    @property
    def window(self) -> int:
        return self._window

    def output_shape(self, input_shape: Shape) -> Shape:
        c, h, w = self._require_image(input_shape)
        for index, (label, size) in enumerate([('height', h), ('width', w)]):
            if size % self._window != 0:
                raise ContractViolationError('%s: input dimension %d (%s=%d) is not divisible by the window' %
                                             (self, index + 1, label, size))
        return c, h // self._window, w // self._window

    def cost(self, input_shape: Shape) -> Cost:
        c, h, w = self._require_image(input_shape)
        return Cost(params=0, flops=c * h * w)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        k = self._window
        return typing.cast(Tensor, x.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5)))

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        k = self._window
        spread = numpy.repeat(numpy.repeat(upstream, k, axis=2), k, axis=3)
        return typing.cast(Tensor, spread / float(k * k))

    def __str__(self) -> str:
        return 'avgpool(%d)' % self._window

    def __repr__(self) -> str:
        return 'AvgPool(window=%r)' % self._window


class AffineNorm(Operator):
    """Learnable per-channel scale and shift; holds no running statistics."""

    NAME = 'affine_norm'

    def output_shape(self, input_shape: Shape) -> Shape:
        return self._require_image(input_shape)

    def parameter_shapes(self, input_shape: Shape) -> typing.Dict[str, Shape]:
        c, _, _ = self._require_image(input_shape)
        return {'scale': (c,), 'shift': (c,)}

    def cost(self, input_shape: Shape) -> Cost:
        c, h, w = self._require_image(input_shape)
        return Cost(params=2 * c, flops=2 * c * h * w)

    def _forward(self, params: ParameterSet, x: Tensor) -> Tensor:
        return _affine(x, params['scale'].value, params['shift'].value)

    def _backward(self, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
        params['scale'].accumulate((upstream * x).sum(axis=(0, 2, 3)))
        params['shift'].accumulate(upstream.sum(axis=(0, 2, 3)))
        return typing.cast(Tensor, upstream * params['scale'].value[None, :, None, None])

    def __repr__(self) -> str:
        return 'AffineNorm()'


def forward(op: Operator, params: ParameterSet, x: Tensor) -> Tensor:
    return op.forward(params, x)


def backward(op: Operator, params: ParameterSet, x: Tensor, upstream: Tensor) -> Tensor:
    return op.backward(params, x, upstream)


def op_cost(op: Operator, input_shape: Shape) -> Cost:
    """
    >>> op_cost(Dense(4), (8,))
    Cost(params=36, flops=64)
    >>> op_cost(Conv3x3(4), (4, 8, 8)).params
    148
    >>> op_cost(Identity(), (4, 8, 8))
    Cost(params=0, flops=0)
    """
    return op.cost(tuple(input_shape))


#
# Numeric helpers. Convolutions use "same" padding so that the spatial shape is preserved.
#
def _relu(x: Tensor) -> Tensor:
    return typing.cast(Tensor, numpy.maximum(x, 0.0))


def _affine(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return typing.cast(Tensor, x * scale[None, :, None, None] + shift[None, :, None, None])


def _pointwise(weight: Tensor) -> Tensor:
    return weight.reshape(weight.shape[0], weight.shape[1], 1, 1)


def _windows(x: Tensor, k: int) -> Tensor:
    pad = k // 2
    padded = numpy.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return typing.cast(Tensor, sliding_window_view(padded, (k, k), axis=(2, 3)))


def _scatter_windows(window_grad: Tensor, k: int) -> Tensor:
    n, c, h, w = window_grad.shape[:4]
    pad = k // 2
    out = numpy.zeros((n, c, h + 2 * pad, w + 2 * pad))
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + h, j:j + w] += window_grad[:, :, :, :, i, j]
    return out[:, :, pad:pad + h, pad:pad + w]


def _convolve(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    win = _windows(x, kernel.shape[-1])
    return typing.cast(Tensor, numpy.einsum('nchwij,ocij->nohw', win, kernel) + bias[None, :, None, None])


def _convolve_backward(x: Tensor, kernel: Tensor, upstream: Tensor) -> typing.Tuple[Tensor, Tensor, Tensor]:
    k = kernel.shape[-1]
    win = _windows(x, k)
    dw = numpy.einsum('nchwij,nohw->ocij', win, upstream)
    db = upstream.sum(axis=(0, 2, 3))
    dx = _scatter_windows(numpy.einsum('nohw,ocij->nchwij', upstream, kernel), k)
    return dx, dw, db


def _convolve_depthwise(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    win = _windows(x, kernel.shape[-1])
    return typing.cast(Tensor, numpy.einsum('nchwij,cij->nchw', win, kernel) + bias[None, :, None, None])


def _convolve_depthwise_backward(x: Tensor, kernel: Tensor, upstream: Tensor) -> typing.Tuple[Tensor, Tensor, Tensor]:
    k = kernel.shape[-1]
    win = _windows(x, k)
    dw = numpy.einsum('nchwij,nchw->cij', win, upstream)
    db = upstream.sum(axis=(0, 2, 3))
    dx = _scatter_windows(numpy.einsum('nchw,cij->nchwij', upstream, kernel), k)
    return dx, dw, db


def _format_ratio(x: float) -> str:
    return ('%g' % x) if x != int(x) else str(int(x))


def _first_mismatch(a: Shape, b: Shape) -> int:
    for index, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return index
    return min(len(a), len(b))


def _dim_or_none(shape: typing.Sequence[int], index: int) -> typing.Optional[int]:
    return int(shape[index]) if index < len(shape) else None


def _unittest_forward_examples() -> None:
    from pytest import raises

    x = numpy.random.default_rng(0).normal(size=(1, 4, 8, 8))
    y = forward(Identity(), {}, x)
    assert y is x

    y = forward(Zero(), {}, x)
    assert y.shape == (1, 4, 8, 8)
    assert not y.any()

    conv = Conv1x1(2)
    params = {
        'weight': Parameter(numpy.array([[0.5], [-0.5]])),
        'bias':   Parameter(numpy.zeros(2)),
    }
    y = forward(conv, params, numpy.ones((1, 1, 2, 2)))
    assert y.shape == (1, 2, 2, 2)
    assert numpy.all(y[0, 0] == 0.5)
    assert numpy.all(y[0, 1] == -0.5)

    with raises(ContractViolationError, match=r'.*conv1x1.*weight.*'):
        forward(conv, {'weight': Parameter(numpy.ones((3, 1))), 'bias': Parameter(numpy.zeros(2))},
                numpy.ones((1, 1, 2, 2)))

    with raises(ContractViolationError, match=r'.*avgpool.*dimension 1.*height=7.*'):
        forward(AvgPool(2), {}, numpy.ones((1, 1, 7, 8)))

    with raises(ContractViolationError, match=r'.*conv3x3.*channels, height, width.*'):
        forward(Conv3x3(2), {}, numpy.ones((1, 4)))

    with raises(ContractViolationError, match=r'.*upstream gradient dimension 1.*'):
        backward(Identity(), {}, numpy.ones((2, 3, 4, 4)), numpy.ones((2, 2, 4, 4)))

    pooled = forward(AvgPool(2), {}, numpy.arange(16.0).reshape(1, 1, 4, 4))
    assert pooled.tolist() == [[[[2.5, 4.5], [10.5, 12.5]]]]

    # "Same" padding: the centre tap of a 3×3 kernel reproduces the input.
    kernel = numpy.zeros((1, 1, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    conv3 = Conv3x3(1)
    picture = numpy.arange(25.0).reshape(1, 1, 5, 5)
    assert numpy.array_equal(forward(conv3, {'weight': Parameter(kernel), 'bias': Parameter(numpy.zeros(1))},
                                     picture), picture)


def _unittest_backward_examples() -> None:
    rng = numpy.random.default_rng(1)
    x = rng.normal(size=(3, 4, 6, 6))
    g = rng.normal(size=x.shape)
    assert backward(Identity(), {}, x, g) is g
    assert not backward(Zero(), {}, x, g).any()

    dense = Dense(5)
    params = dense.initialize((4, 6, 6), rng)
    upstream = rng.normal(size=(3, 5))
    gx = backward(dense, params, x, upstream)
    assert gx.shape == x.shape
    assert numpy.allclose(gx.reshape(3, -1), upstream @ params['weight'].value)

    # Gradients accumulate across calls instead of being overwritten.
    first = params['bias'].gradient.copy()
    backward(dense, params, x, upstream)
    assert numpy.allclose(params['bias'].gradient, 2 * first)


def _unittest_cost() -> None:
    assert op_cost(Identity(), (4, 8, 8)) == op_cost(Zero(), (4, 8, 8)) == (0, 0)
    assert op_cost(AvgPool(2), (4, 8, 8)).params == 0
    assert op_cost(Dense(4), (8,)) == (36, 64)
    assert op_cost(Conv3x3(4), (4, 8, 8)).params == 148
    assert op_cost(Conv3x3(4), (4, 8, 8)).flops == 2 * 9 * 4 * 4 * 64
    assert op_cost(Conv1x1(4), (4, 8, 8)) == (20, 2 * 16 * 64)
    assert op_cost(Conv1x1(4, post_norm=True), (4, 8, 8)) == (28, 2 * 16 * 64 + 3 * 4 * 64)
    assert op_cost(AffineNorm(), (3, 2, 2)) == (6, 24)

    for width in range(1, 9):
        assert op_cost(Conv1x1(width + 1), (4, 8, 8)).params > op_cost(Conv1x1(width), (4, 8, 8)).params
        assert op_cost(Conv3x3(width + 1), (4, 8, 8)).flops > op_cost(Conv3x3(width), (4, 8, 8)).flops

    # Parameter count from the cost formula agrees with the actual parameter tensors.
    rng = numpy.random.default_rng(2)
    for op in [Dense(3), Conv1x1(5, post_norm=True), Conv3x3(2), AffineNorm(),
               DWSepConv(3, 0.5), DWSepConv(1, 2, post_norm=True), DWSepConv(3, 1)]:
        shape = (4, 4, 4)
        params = op.initialize(shape, rng)
        assert sum(p.size for p in params.values()) == op_cost(op, shape).params, op

    assert DWSepConv(3, 0.5).hidden_channels(1) == 1
    assert DWSepConv(3, 0.5).name == 'dwsep3x3_e0.5'
    assert DWSepConv(1, 2).name == 'dwsep1x1_e2'


def _unittest_initialization() -> None:
    rng = numpy.random.default_rng(3)
    params = Conv3x3(16, post_norm=True).initialize((8, 4, 4), rng)
    assert not params['bias'].value.any()
    assert numpy.all(params['norm.scale'].value == 1.0)
    assert not params['norm.shift'].value.any()
    std = float(numpy.std(params['weight'].value))
    assert abs(std - math.sqrt(2.0 / 72)) < 0.03


def _unittest_purity() -> None:
    import copy
    rng = numpy.random.default_rng(4)
    x = rng.normal(size=(2, 3, 4, 4))
    for op in [Conv3x3(3, post_norm=True), DWSepConv(3, 2), AvgPool(2), AffineNorm(), Dense(2)]:
        params = op.initialize((3, 4, 4), rng)
        assert numpy.array_equal(op.forward(params, x), op.forward(params, x))
        assert op == copy.deepcopy(op)
        assert len({op, copy.deepcopy(op)}) == 1
