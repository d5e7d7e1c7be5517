#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import math
import typing
import numpy
from .._error import ContractViolationError
from ._parameter import Tensor


def softmax_cross_entropy(logits: Tensor, labels: Tensor) -> typing.Tuple[float, Tensor]:
    """
    Mean cross-entropy over the batch and its gradient with respect to the logits.

    >>> loss, grad = softmax_cross_entropy(numpy.zeros((1, 4)), numpy.array([2]))
    >>> import math
    >>> loss == math.log(4)
    True
    >>> grad.tolist()
    [[0.25, 0.25, -0.75, 0.25]]
    """
    if logits.ndim != 2:
        raise ContractViolationError('Logits must be (batch, classes), got shape %s' % (logits.shape,))
    labels = numpy.asarray(labels, dtype=numpy.int64)
    if labels.shape != (logits.shape[0],):
        raise ContractViolationError('Expected %d labels, got shape %s' % (logits.shape[0], labels.shape))
    n, classes = logits.shape
    if n == 0 or labels.min() < 0 or labels.max() >= classes:
        raise ContractViolationError('Labels must be in [0, %d) for a non-empty batch' % classes)

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = numpy.exp(shifted)
    total = exp.sum(axis=1)
    rows = numpy.arange(n)
    log_total = numpy.fromiter((math.log(t) for t in total), dtype=numpy.float64, count=n)
    loss = float(numpy.mean(log_total - shifted[rows, labels]))
    grad = exp / total[:, None]
    grad[rows, labels] -= 1.0
    return loss, grad / float(n)


def count_correct(logits: Tensor, labels: Tensor) -> int:
    return int(numpy.count_nonzero(numpy.argmax(logits, axis=1) == numpy.asarray(labels)))


def _unittest_loss() -> None:
    from pytest import raises

    for classes in range(2, 12):
        loss, _ = softmax_cross_entropy(numpy.full((1, classes), 7.25), numpy.zeros(1, dtype=int))
        assert loss == math.log(classes)

    # A confident correct prediction has near-zero loss; the gradient rows always sum to zero.
    logits = numpy.array([[10.0, -10.0], [0.3, 0.1]])
    loss, grad = softmax_cross_entropy(logits, numpy.array([0, 1]))
    assert 0 < loss < 1
    assert numpy.allclose(grad.sum(axis=1), 0.0)

    # Finite-difference check of the analytic gradient.
    rng = numpy.random.default_rng(0)
    logits = rng.normal(size=(5, 3))
    labels = rng.integers(0, 3, size=5)
    _, grad = softmax_cross_entropy(logits, labels)
    h = 1e-5
    for index in numpy.ndindex(*logits.shape):
        plus, minus = logits.copy(), logits.copy()
        plus[index] += h
        minus[index] -= h
        numeric = (softmax_cross_entropy(plus, labels)[0] - softmax_cross_entropy(minus, labels)[0]) / (2 * h)
        assert abs(numeric - grad[index]) < 1e-7

    assert count_correct(numpy.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]]), numpy.array([0, 1, 1])) == 2

    with raises(ContractViolationError):
        softmax_cross_entropy(numpy.zeros(3), numpy.zeros(3))
    with raises(ContractViolationError):
        softmax_cross_entropy(numpy.zeros((2, 3)), numpy.array([0, 3]))
