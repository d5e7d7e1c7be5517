#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing
import numpy
from .._error import ContractViolationError


Tensor = numpy.ndarray


class Parameter:
    """
    A trainable tensor together with its gradient accumulator and momentum buffer.
    The three arrays always share the same shape and dtype (float64).
    """

    def __init__(self, value: Tensor):
        self._value = numpy.array(value, dtype=numpy.float64)   # Always a private copy
        self._gradient = numpy.zeros_like(self._value)
        self._momentum_buffer = numpy.zeros_like(self._value)

    @property
    def value(self) -> Tensor:
        return self._value

    @value.setter
    def value(self, value: Tensor) -> None:
        value = numpy.asarray(value, dtype=numpy.float64)
        if value.shape != self._value.shape:
            raise ContractViolationError('Parameter shape is %s, cannot assign %s' % (self._value.shape, value.shape))
        self._value = value.copy()

    @property
    def gradient(self) -> Tensor:
        return self._gradient

    @property
    def momentum_buffer(self) -> Tensor:
        return self._momentum_buffer

    @property
    def shape(self) -> typing.Tuple[int, ...]:
        return tuple(self._value.shape)

    @property
    def size(self) -> int:
        return int(self._value.size)

    def accumulate(self, gradient: Tensor) -> None:
        if gradient.shape != self._value.shape:
            raise ContractViolationError('Gradient shape %s does not match parameter shape %s' %
                                         (gradient.shape, self._value.shape))
        self._gradient += gradient

    def zero_gradient(self) -> None:
        self._gradient.fill(0.0)

    def copy(self) -> 'Parameter':
        out = Parameter(self._value)
        out._gradient = self._gradient.copy()
        out._momentum_buffer = self._momentum_buffer.copy()
        return out

    def __repr__(self) -> str:
        return 'Parameter(shape=%r)' % (self.shape,)


ParameterSet = typing.Dict[str, Parameter]

# Plain parameter values without optimizer state; this is what travels between the server and the clients.
ValueSet = typing.Dict[str, Tensor]


def copy_parameter_set(params: ParameterSet) -> ParameterSet:
    return {name: p.copy() for name, p in params.items()}


def values_of(params: ParameterSet) -> ValueSet:
    return {name: p.value.copy() for name, p in params.items()}


def parameters_from_values(values: ValueSet) -> ParameterSet:
    return {name: Parameter(v) for name, v in values.items()}


def count_scalars(params: typing.Union[ParameterSet, ValueSet]) -> int:
    total = 0
    for v in params.values():
        total += int(v.size)
    return total


def _unittest_parameter() -> None:
    from pytest import raises

    p = Parameter(numpy.ones((2, 3)))
    assert p.shape == (2, 3)
    assert p.size == 6
    assert p.gradient.shape == p.momentum_buffer.shape == p.value.shape
    assert not p.gradient.any()

    p.accumulate(numpy.full((2, 3), 0.5))
    p.accumulate(numpy.full((2, 3), 0.25))
    assert numpy.all(p.gradient == 0.75)
    p.zero_gradient()
    assert not p.gradient.any()

    with raises(ContractViolationError):
        p.accumulate(numpy.ones(6))

    with raises(ContractViolationError):
        p.value = numpy.zeros((3, 2))

    q = p.copy()
    q.value = numpy.zeros((2, 3))
    assert numpy.all(p.value == 1.0)

    source = numpy.arange(3.0)
    r = Parameter(source)
    source[0] = 99.0
    assert r.value[0] == 0.0

    s = {'weight': Parameter(numpy.ones((4, 2))), 'bias': Parameter(numpy.zeros(4))}
    assert count_scalars(s) == 12
    v = values_of(s)
    v['bias'][0] = 1.0
    assert s['bias'].value[0] == 0.0
    assert parameters_from_values(v)['bias'].value[0] == 1.0
