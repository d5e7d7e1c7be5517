#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import enum
import math
import typing
import logging
import numpy
from .._error import NonFiniteGradientError
from ._parameter import Parameter


def sgd_step(params: typing.Iterable[Parameter],
             lr: float,
             momentum: float = 0.0,
             clip_norm: typing.Optional[float] = None) -> float:
    """
    One SGD step with heavy-ball momentum: b <- momentum * b + g; w <- w - lr * b.
    If clip_norm is given, the gradients are scaled jointly so that their global L2 norm does not exceed it.
    Gradients are zeroed afterwards. Returns the global gradient norm before clipping.
    A non-finite gradient aborts the step without touching the values.
    """
    if not lr > 0:
        raise ValueError('Learning rate must be positive, got %r' % lr)
    if not 0.0 <= momentum < 1.0:
        raise ValueError('Momentum must be in [0, 1), got %r' % momentum)
    if clip_norm is not None and not clip_norm > 0:
        raise ValueError('Clipping norm must be positive, got %r' % clip_norm)

    params = list(params)
    square_sum = 0.0
    for p in params:
        if not numpy.all(numpy.isfinite(p.gradient)):
            for q in params:
                q.zero_gradient()
            raise NonFiniteGradientError('Non-finite gradient in a parameter of shape %s; step aborted' % (p.shape,))
        square_sum += float(numpy.sum(p.gradient * p.gradient))

    norm = math.sqrt(square_sum)
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
        _logger.debug('Gradient norm %.3g clipped to %.3g', norm, clip_norm)

    for p in params:
        buffer = p.momentum_buffer
        buffer *= momentum
        buffer += p.gradient * scale
        p.value = p.value - lr * buffer
        p.zero_gradient()

    return norm


class Schedule(enum.Enum):
    CONSTANT = 'constant'
    COSINE = 'cosine'
    STEP = 'step'


# Both decaying schedules end ten times below the base rate.
_DECAY_FACTOR = 10.0
_STEP_MILESTONES = 0.5, 0.75


def scheduled_lr(schedule: Schedule, base_lr: float, step: int, total_steps: int) -> float:
    """
    >>> round(scheduled_lr(Schedule.COSINE, 0.1, 0, 100), 12)
    0.1
    >>> round(scheduled_lr(Schedule.COSINE, 0.1, 100, 100), 12)
    0.01
    >>> [scheduled_lr(Schedule.STEP, 1.0, s, 8) for s in (0, 3, 4, 6, 7)]
    [1.0, 1.0, 0.1, 0.01, 0.01]
    """
    if total_steps < 1 or schedule == Schedule.CONSTANT:
        return base_lr

    progress = min(max(step, 0), total_steps) / float(total_steps)
    if schedule == Schedule.COSINE:
        floor = base_lr / _DECAY_FACTOR
        return floor + 0.5 * (base_lr - floor) * (1.0 + math.cos(math.pi * progress))

    if schedule == Schedule.STEP:
        drops = sum(1 for m in _STEP_MILESTONES if progress >= m)
        return base_lr / (_DECAY_FACTOR ** drops)

    raise ValueError('Unknown schedule: %r' % schedule)     # pragma: no cover


_logger = logging.getLogger(__name__)


def _unittest_sgd() -> None:
    from pytest import raises, approx

    w = Parameter(numpy.array([1.0]))
    w.accumulate(numpy.array([2.0]))
    sgd_step([w], lr=0.1)
    assert w.value[0] == approx(0.8)
    assert not w.gradient.any()

    w = Parameter(numpy.array([0.0]))
    for _ in range(2):
        w.accumulate(numpy.array([1.0]))
        sgd_step([w], lr=0.1, momentum=0.9)
    assert w.value[0] == approx(-0.29)
    assert w.momentum_buffer[0] == approx(1.9)

    # Global norm of (2, 2, 2, 2) is 4; clipping to 1 scales every component by a quarter.
    a, b = Parameter(numpy.zeros(2)), Parameter(numpy.zeros(2))
    a.accumulate(numpy.array([2.0, 2.0]))
    b.accumulate(numpy.array([2.0, 2.0]))
    norm = sgd_step([a, b], lr=1.0, clip_norm=1.0)
    assert norm == approx(4.0)
    assert a.value.tolist() == approx([-0.5, -0.5])
    assert b.value.tolist() == approx([-0.5, -0.5])

    bad = Parameter(numpy.array([3.0]))
    bad.accumulate(numpy.array([numpy.nan]))
    with raises(NonFiniteGradientError):
        sgd_step([bad], lr=0.1)
    assert bad.value[0] == 3.0
    assert not bad.gradient.any()

    with raises(ValueError):
        sgd_step([w], lr=0.0)
    with raises(ValueError):
        sgd_step([w], lr=0.1, momentum=1.0)


def _unittest_schedules() -> None:
    from pytest import approx

    assert scheduled_lr(Schedule.CONSTANT, 0.05, 17, 20) == 0.05
    assert scheduled_lr(Schedule.COSINE, 0.05, 0, 0) == 0.05
    assert scheduled_lr(Schedule.COSINE, 1.0, 50, 100) == approx(0.55)
    lrs = [scheduled_lr(Schedule.COSINE, 1.0, s, 30) for s in range(31)]
    assert all(x >= y for x, y in zip(lrs, lrs[1:]))
    assert [scheduled_lr(Schedule.STEP, 0.1, s, 100) for s in (49, 50, 74, 75)] == \
        approx([0.1, 0.01, 0.01, 0.001])
