#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

"""
Every consumer of randomness gets its own generator derived from the master seed and a fixed key.
The key depends only on what is being computed (stage, round, client...), never on scheduling,
so results do not depend on the number of worker threads.
"""

import typing
import numpy


# Stage tags used as the first component of every derivation key.
STAGE_DATA = 0
STAGE_PARTITION = 1
STAGE_TIERS = 2
STAGE_SUPERNET = 3
STAGE_SEARCH = 4
STAGE_FINETUNE = 5
STAGE_BASELINE = 6

# Roles within a stage.
ROLE_SELECTION = 0
ROLE_SUBSPACE = 1
ROLE_CLIENT = 2
ROLE_PROBE = 3
ROLE_INIT = 4
ROLE_EVALUATION = 5


def derive(seed: int, *key: int) -> numpy.random.Generator:
    """
    >>> a = derive(123, STAGE_SUPERNET, 4, ROLE_CLIENT, 7).integers(1 << 30)
    >>> b = derive(123, STAGE_SUPERNET, 4, ROLE_CLIENT, 7).integers(1 << 30)
    >>> int(a) == int(b)
    True
    """
    if seed < 0:
        raise ValueError('The master seed must be non-negative, got %r' % seed)
    if any(k < 0 for k in key):
        raise ValueError('Derivation key components must be non-negative: %r' % (key,))
    return numpy.random.default_rng(numpy.random.SeedSequence(entropy=int(seed), spawn_key=tuple(map(int, key))))


def _unittest_derive() -> None:
    from pytest import raises

    def draw(*key: int) -> typing.List[float]:
        return list(derive(1, *key).random(4))

    assert draw(STAGE_SUPERNET, 0, ROLE_CLIENT, 1) == draw(STAGE_SUPERNET, 0, ROLE_CLIENT, 1)
    assert draw(STAGE_SUPERNET, 0, ROLE_CLIENT, 1) != draw(STAGE_SUPERNET, 0, ROLE_CLIENT, 2)
    assert draw(STAGE_SUPERNET, 0) != draw(STAGE_SEARCH, 0)
    assert list(derive(1).random(2)) != list(derive(2).random(2))

    with raises(ValueError):
        derive(-1)

    with raises(ValueError):
        derive(1, -5)
