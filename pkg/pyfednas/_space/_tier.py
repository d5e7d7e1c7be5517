#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import math
import typing
import logging
import numpy
from .._error import DegenerateSpaceError
from ._cost import CostModel
from ._search_space import SearchSpace


DEFAULT_SAMPLE_COUNT = 100000


class TierSpec:
    """
    Splits the training FLOPs axis into device tiers. Tier 0 is the closed interval [edges[0], edges[1]];
    every other tier t is the half-open interval (edges[t], edges[t + 1]].

    >>> spec = TierSpec([10, 20, 35], [0.5, 0.5])
    >>> spec.tier_of(10), spec.tier_of(20), spec.tier_of(21), spec.tier_of(35), spec.tier_of(36)
    (0, 0, 1, 1, None)
    >>> spec.budget(0), spec.budget(1)
    (21, 36)
    """

    def __init__(self,
                 edges: typing.Sequence[float],
                 client_fractions: typing.Optional[typing.Sequence[float]] = None):
        self._edges = tuple(float(x) for x in edges)
        if len(self._edges) < 2:
            raise ValueError('At least two edges are needed to define a tier')
        if any(a >= b for a, b in zip(self._edges, self._edges[1:])):
            raise ValueError('Tier edges must be strictly increasing: %r' % (self._edges,))

        if client_fractions is None:
            client_fractions = [1.0 / self.count] * self.count
        self._fractions = tuple(float(x) for x in client_fractions)
        if len(self._fractions) != self.count:
            raise ValueError('Expected %d client fractions, got %d' % (self.count, len(self._fractions)))
        if any(x < 0 for x in self._fractions) or abs(sum(self._fractions) - 1.0) > 1e-9:
            raise ValueError('Client fractions must be non-negative and sum up to one: %r' % (self._fractions,))

    @property
    def count(self) -> int:
        return len(self._edges) - 1

    @property
    def edges(self) -> typing.Tuple[float, ...]:
        return self._edges

    @property
    def client_fractions(self) -> typing.Tuple[float, ...]:
        return self._fractions

    def interval(self, tier: int) -> typing.Tuple[float, float]:
        return self._edges[tier], self._edges[tier + 1]

    def contains(self, tier: int, flops: float) -> bool:
        lo, hi = self.interval(tier)
        return (lo <= flops if tier == 0 else lo < flops) and flops <= hi

    def tier_of(self, flops: float) -> typing.Optional[int]:
        """None if the value lies outside of every tier."""
        for tier in range(self.count):
            if self.contains(tier, flops):
                return tier
        return None

    def budget(self, tier: int) -> int:
        """Strict upper bound on integer path FLOPs for the tier, as consumed by the path samplers."""
        return math.floor(self._edges[tier + 1]) + 1

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TierSpec):
            return self._edges == other._edges and self._fractions == other._fractions
        return NotImplemented

    def __repr__(self) -> str:
        return 'TierSpec(edges=%r, client_fractions=%r)' % (list(self._edges), list(self._fractions))


def lower_quantile(sorted_values: typing.Sequence[float], ratio: float) -> float:
    """
    The largest value among the first ratio*N elements of an ascending array.

    >>> lower_quantile(list(range(1, 101)), 0.9)
    90
    >>> lower_quantile([5, 6, 7], 0.1)
    5
    """
    index = max(int(math.floor(ratio * len(sorted_values))) - 1, 0)
    return sorted_values[index]


def sample_path_flops(costs: CostModel, count: int, rng: numpy.random.Generator) -> numpy.ndarray:
    """Training FLOPs of uniformly random paths, as an int64 array."""
    out = numpy.full(count, costs.fixed.flops, dtype=numpy.int64)
    for layer in costs.layers:
        table = numpy.array([c.flops for c in layer], dtype=numpy.int64)
        out += table[rng.integers(len(layer), size=count)]
    return out


def tier_boundaries(space: typing.Union[SearchSpace, CostModel],
                    count: int,
                    rho_low: float,
                    rho_high: float,
                    rng: numpy.random.Generator,
                    samples: int = DEFAULT_SAMPLE_COUNT,
                    client_fractions: typing.Optional[typing.Sequence[float]] = None) -> TierSpec:
    """
    The lower limit of the top tier is the rho_high lower quantile of the sampled path FLOPs; the top tier extends
    to the most expensive path of the space. With rho_low > 0, the boundary between the two lowest tiers is the
    rho_low quantile. The remaining range below the top tier is split evenly.
    """
    costs = space.cost_model if isinstance(space, SearchSpace) else space
    if count < 1:
        raise ValueError('At least one tier is required')
    if not (0.0 <= rho_low < rho_high <= 1.0):
        raise DegenerateSpaceError('Tier ratios must satisfy 0 <= rho_low < rho_high <= 1, got %r and %r' %
                                   (rho_low, rho_high))
    if samples < 1000:
        raise ValueError('Tier boundaries need at least 1000 sampled paths, got %d' % samples)

    lowest, highest = costs.min_path_flops, costs.max_path_flops
    if lowest == highest:
        raise DegenerateSpaceError('The search space has no FLOPs spread: every path costs %d' % lowest)
    if count == 1:
        return TierSpec([lowest, highest], client_fractions)
    if rho_high >= 1.0:
        raise DegenerateSpaceError('rho_high must be < 1 for multi-tier setups')

    flops = sorted(sample_path_flops(costs, samples, rng).tolist())
    b_high = float(lower_quantile(flops, rho_high))
    if rho_low > 0:
        b_low = float(lower_quantile(flops, rho_low))
        inner = list(numpy.linspace(b_low, b_high, count - 1)) if count > 2 else [b_high]
    else:
        b_low = float(flops[0])
        inner = list(numpy.linspace(b_low, b_high, count)[1:])
    edges = [float(lowest)] + [float(x) for x in inner] + [float(highest)]
    _logger.debug('Tier quantiles over %d sampled paths: low %r, high %r', samples, b_low, b_high)

    if any(a >= b for a, b in zip(edges, edges[1:])):
        raise DegenerateSpaceError('Tier boundaries collapse: %r; adjust rho_low/rho_high or the tier count' % edges)

    out = TierSpec(edges, client_fractions)
    _logger.info('Tiers: %s', ', '.join('T%d=%s%.0f, %.0f]' % (t, '[' if t == 0 else '(', *out.interval(t))
                                        for t in range(out.count)))
    return out


_logger = logging.getLogger(__name__)


def _unittest_tier_spec() -> None:
    from pytest import raises

    spec = TierSpec([0, 10.5, 20, 30])
    assert spec.count == 3
    assert spec.client_fractions == (1 / 3, 1 / 3, 1 / 3)
    assert spec.tier_of(0) == 0
    assert spec.tier_of(10) == 0
    assert spec.tier_of(11) == 1
    assert spec.tier_of(30) == 2
    assert spec.tier_of(-1) is None
    assert spec.budget(0) == 11
    assert spec.interval(2) == (20, 30)
    assert spec == TierSpec([0, 10.5, 20, 30], [1 / 3] * 3)

    with raises(ValueError):
        TierSpec([1])
    with raises(ValueError):
        TierSpec([1, 1, 2])
    with raises(ValueError):
        TierSpec([1, 2, 3], [0.7, 0.7])
    with raises(ValueError):
        TierSpec([1, 2, 3], [1.0])


def _unittest_tier_boundaries() -> None:
    from pytest import raises
    from .._kernel import Cost

    # Path FLOPs are uniform on 1..100.
    costs = CostModel([[Cost(0, 10 * i) for i in range(10)],
                       [Cost(0, i) for i in range(1, 11)]])
    rng = numpy.random.default_rng(0)
    spec = tier_boundaries(costs, 4, 0.0, 0.9, rng)
    assert spec.count == 4
    assert spec.edges[0] == 1 and spec.edges[-1] == 100
    for actual, expected in zip(spec.edges[1:-1], [30, 60, 90]):
        assert abs(actual - expected) <= 2
    assert spec.tier_of(100) == 3

    # Every path falls into exactly one tier.
    for flops in range(1, 101):
        assert sum(spec.contains(t, flops) for t in range(spec.count)) == 1

    two_sided = tier_boundaries(costs, 4, 0.2, 0.9, rng)
    assert abs(two_sided.edges[1] - 20) <= 2
    assert abs(two_sided.edges[2] - 55) <= 2
    assert abs(two_sided.edges[3] - 90) <= 2

    single = tier_boundaries(costs, 1, 0.0, 1.0, rng)
    assert single.edges == (1, 100)

    with raises(DegenerateSpaceError, match='rho_high must be < 1'):
        tier_boundaries(costs, 2, 0.0, 1.0, rng)
    with raises(DegenerateSpaceError):
        tier_boundaries(costs, 2, 0.5, 0.5, rng)
    with raises(ValueError):
        tier_boundaries(costs, 2, 0.0, 0.9, rng, samples=10)
    with raises(DegenerateSpaceError, match='no FLOPs spread'):
        tier_boundaries(CostModel([[Cost(0, 3), Cost(1, 3)]]), 2, 0.0, 0.9, rng)

    # Deterministic given the seed.
    assert tier_boundaries(costs, 3, 0.0, 0.8, numpy.random.default_rng(7)) == \
        tier_boundaries(costs, 3, 0.0, 0.8, numpy.random.default_rng(7))
