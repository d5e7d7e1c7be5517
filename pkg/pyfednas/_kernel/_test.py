#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing
import numpy
from . import _operator
from ._parameter import Tensor


_FD_STEP = 1e-5


def _numeric_gradient(func: typing.Callable[[], float], tensor: Tensor, index: typing.Tuple[int, ...]) -> float:
    original = tensor[index]
    tensor[index] = original + _FD_STEP
    plus = func()
    tensor[index] = original - _FD_STEP
    minus = func()
    tensor[index] = original
    return (plus - minus) / (2 * _FD_STEP)


def _relative_errors(op: _operator.Operator,
                     input_shape: _operator.Shape,
                     batch: int,
                     rng: numpy.random.Generator) -> typing.List[float]:
    """
    Compares analytic input and parameter gradients against central finite differences of
    the scalar sum(upstream * forward(x)).
    """
    params = op.initialize(input_shape, rng)
    for p in params.values():      # Move away from the trivial ones/zeros initialization
        p.value = p.value + rng.normal(0.0, 0.3, size=p.shape)
    x = rng.normal(size=(batch,) + tuple(input_shape))
    upstream = rng.normal(size=(batch,) + op.output_shape(input_shape))

    def objective() -> float:
        return float(numpy.sum(upstream * op.forward(params, x)))

    gx = op.backward(params, x, upstream)
    checks = [(x, gx)]  # type: typing.List[typing.Tuple[Tensor, Tensor]]
    for p in params.values():
        checks.append((p.value, p.gradient.copy()))

    out = []
    for tensor, analytic in checks:
        for index in numpy.ndindex(*tensor.shape):
            numeric = _numeric_gradient(objective, tensor, index)
            a = float(analytic[index])
            out.append(abs(a - numeric) / max(abs(a), abs(numeric), 1e-6))
    return out


def _unittest_gradient_fidelity() -> None:
    from hypothesis import given, settings, strategies as st

    def make_ops(channels: int) -> typing.List[_operator.Operator]:
        return [
            _operator.Dense(3),
            _operator.Conv1x1(channels + 1),
            _operator.Conv1x1(2, post_norm=True),
            _operator.Conv3x3(2),
            _operator.Conv3x3(channels, post_norm=True),
            _operator.DWSepConv(3, 0.5),
            _operator.DWSepConv(3, 2, post_norm=True),
            _operator.DWSepConv(1, 1),
            _operator.AffineNorm(),
            _operator.AvgPool(2),
        ]

    @settings(max_examples=20, deadline=None, derandomize=True, database=None)
    @given(channels=st.integers(1, 3),
           size=st.sampled_from([2, 4]),
           batch=st.integers(1, 2),
           seed=st.integers(0, 2 ** 32 - 1))
    def check(channels: int, size: int, batch: int, seed: int) -> None:
        rng = numpy.random.default_rng(seed)
        for op in make_ops(channels):
            errors = _relative_errors(op, (channels, size, size), batch, rng)
            good = sum(1 for e in errors if e < 1e-4) / len(errors)
            assert good >= 0.95, (op, good)
            assert max(errors) < 1e-2, (op, max(errors))

    check()


def _unittest_identity_and_zero_gradients() -> None:
    rng = numpy.random.default_rng(0)
    x = rng.normal(size=(2, 3, 4, 4))
    upstream = rng.normal(size=x.shape)
    assert numpy.array_equal(_operator.backward(_operator.Identity(), {}, x, upstream), upstream)
    assert not _operator.backward(_operator.Zero(), {}, x, upstream).any()
