#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing
import logging
import numpy
from .._error import BudgetInfeasibleError
from .._kernel import Cost
from ._cost import CostModel, Path
from ._search_space import SearchSpace


DEFAULT_REJECTION_CAP = 10000


class Subspace:
    """
    A per-layer selection of candidates, such as the part of the supernet that is sent to the clients
    in one training round. Every layer keeps at least one candidate.
    """

    def __init__(self, costs: CostModel, mask: typing.Sequence[typing.Sequence[bool]]):
        if len(mask) != costs.layer_count:
            raise ValueError('The mask covers %d layers, the cost model has %d' % (len(mask), costs.layer_count))
        candidates = []
        for layer, row in enumerate(mask):
            if len(row) != costs.candidate_count(layer):
                raise ValueError('Layer %d: mask of %d entries for %d candidates' %
                                 (layer, len(row), costs.candidate_count(layer)))
            selected = tuple(c for c, m in enumerate(row) if m)
            if not selected:
                raise ValueError('Layer %d has no selected candidates' % layer)
            candidates.append(selected)
        self._costs = costs
        self._candidates = tuple(candidates)

    @property
    def cost_model(self) -> CostModel:
        return self._costs

    @property
    def layer_count(self) -> int:
        return len(self._candidates)

    def candidates(self, layer: int) -> typing.Tuple[int, ...]:
        return self._candidates[layer]

    @property
    def mask(self) -> typing.List[typing.List[bool]]:
        return [[c in sel for c in range(self._costs.candidate_count(layer))]
                for layer, sel in enumerate(self._candidates)]

    @property
    def param_size(self) -> int:
        """Total parameter count of the selected searchable candidates."""
        return sum(self._costs.cost(layer, c).params
                   for layer, sel in enumerate(self._candidates) for c in sel)

    @property
    def selection_count(self) -> int:
        return sum(map(len, self._candidates))

    def contains(self, path: Path) -> bool:
        return len(path) == self.layer_count and all(c in sel for c, sel in zip(path, self._candidates))

    def min_path_flops(self) -> int:
        return self._costs.fixed.flops + sum(self._layer_floor(layer) for layer in range(self.layer_count))

    def _layer_floor(self, layer: int) -> int:
        return min(self._costs.cost(layer, c).flops for c in self._candidates[layer])

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Subspace):
            return self._candidates == other._candidates
        return NotImplemented

    def __repr__(self) -> str:
        return 'Subspace(%s, params=%d)' % (' '.join(','.join(map(str, sel)) for sel in self._candidates),
                                            self.param_size)


def _cost_model_of(space: typing.Union[SearchSpace, CostModel]) -> CostModel:
    return space.cost_model if isinstance(space, SearchSpace) else space


def full_subspace(space: typing.Union[SearchSpace, CostModel]) -> Subspace:
    costs = _cost_model_of(space)
    return Subspace(costs, [[True] * len(layer) for layer in costs.layers])


def minimum_communication_budget(space: typing.Union[SearchSpace, CostModel]) -> int:
    """
    The smallest budget that admits a subspace: the cheapest parametric candidate of every layer that has
    no parameter-free option, plus one because the budget is a strict upper bound.
    """
    costs = _cost_model_of(space)
    return 1 + sum(min(c.params for c in layer) for layer in costs.layers)


def sample_subspace(space: typing.Union[SearchSpace, CostModel],
                    budget: int,
                    rng: numpy.random.Generator) -> Subspace:
    """
    Selects candidates until the parameter budget is hit; the total stays strictly below the budget.
    Parameter-free candidates are always selected. Layers that have none are served first, one parametric
    candidate each, with enough budget reserved for the layers that are still waiting.
    The remaining candidates are then visited in uniformly random order and taken whenever they fit.
    """
    costs = _cost_model_of(space)
    minimum = minimum_communication_budget(costs)
    if budget < minimum:
        raise BudgetInfeasibleError('Communication budget of %d parameters is infeasible; the minimum feasible '
                                    'budget is %d' % (budget, minimum))

    def params(layer: int, candidate: int) -> int:
        return costs.cost(layer, candidate).params

    mask = [[c.params == 0 for c in layer] for layer in costs.layers]
    mandatory = [layer for layer, row in enumerate(mask) if not any(row)]
    total = 0
    reserved = minimum - 1
    for layer in map(int, rng.permutation(mandatory)):
        reserved -= min(params(layer, c) for c in range(costs.candidate_count(layer)))
        allowed = [c for c in range(costs.candidate_count(layer)) if total + params(layer, c) + reserved < budget]
        pick = allowed[int(rng.integers(len(allowed)))]
        mask[layer][pick] = True
        total += params(layer, pick)
    assert reserved == 0

    pending = [(layer, c) for layer, row in enumerate(mask) for c, m in enumerate(row) if not m]
    for index in rng.permutation(len(pending)):
        layer, c = pending[int(index)]
        if total + params(layer, c) < budget:
            mask[layer][c] = True
            total += params(layer, c)

    out = Subspace(costs, mask)
    assert out.param_size == total < budget
    _logger.debug('Sampled %r under the budget of %d', out, budget)
    return out


def uniform_path(subspace: Subspace, rng: numpy.random.Generator) -> Path:
    return Path(sel[int(rng.integers(len(sel)))] for sel in (subspace.candidates(i)
                                                              for i in range(subspace.layer_count)))


def sample_path_rejection(subspace: Subspace,
                          budget: int,
                          rng: numpy.random.Generator,
                          max_attempts: int = DEFAULT_REJECTION_CAP) -> Path:
    """
    Uniform over the paths of the subspace whose training FLOPs are strictly below the budget.
    Slow when the feasible set is small; the greedy sampler is the practical alternative.
    """
    costs = subspace.cost_model
    for _ in range(max_attempts):
        path = uniform_path(subspace, rng)
        if costs.path_cost(path).flops < budget:
            return path
    raise BudgetInfeasibleError('Path budget of %d FLOPs is infeasible or pathological: no path found in %d attempts'
                                % (budget, max_attempts))


def sample_path_greedy(subspace: Subspace,
                       budget: int,
                       rng: numpy.random.Generator) -> Path:
    """
    Picks the layers in a random order, the ones without a free candidate first, choosing uniformly among
    the candidates that leave room for the cheapest completion of the layers not visited yet.
    Never resamples; every returned path is strictly under the budget.

    >>> costs = CostModel([[Cost(0, 0), Cost(1, 1), Cost(3, 3)], [Cost(0, 0), Cost(2, 2), Cost(5, 5)]])
    >>> path = sample_path_greedy(full_subspace(costs), 4, numpy.random.default_rng(0))
    >>> costs.path_cost(path).flops < 4
    True
    """
    costs = subspace.cost_model

    def flops(layer: int, candidate: int) -> int:
        return costs.cost(layer, candidate).flops

    floors = [min(flops(layer, c) for c in subspace.candidates(layer)) for layer in range(subspace.layer_count)]
    cheapest = costs.fixed.flops + sum(floors)
    if cheapest >= budget:
        raise BudgetInfeasibleError('Path budget of %d FLOPs is infeasible: the cheapest path of %r costs %d' %
                                    (budget, subspace, cheapest))

    order = [int(x) for x in rng.permutation(subspace.layer_count)]
    order = [x for x in order if floors[x] > 0] + [x for x in order if floors[x] == 0]
    choices = [0] * subspace.layer_count
    total = costs.fixed.flops
    reserved = sum(floors)
    for layer in order:
        reserved -= floors[layer]
        allowed = [c for c in subspace.candidates(layer) if total + flops(layer, c) + reserved < budget]
        choices[layer] = allowed[int(rng.integers(len(allowed)))]
        total += flops(layer, choices[layer])

    out = Path(choices)
    assert costs.path_cost(out).flops == total < budget
    return out


def enumerate_feasible_paths(subspace: Subspace, budget: int) -> typing.List[Path]:
    """Brute force; only sensible for small spaces."""
    costs = subspace.cost_model
    out = []
    for path in costs.enumerate_paths():
        if subspace.contains(path) and costs.path_cost(path).flops < budget:
            out.append(path)
    return out


def minimal_supernet(paths: typing.Iterable[Path], space: typing.Union[SearchSpace, CostModel]) -> Subspace:
    """The per-layer union of the chosen candidates; its param_size is what delivering all the paths costs."""
    costs = _cost_model_of(space)
    mask = [[False] * len(layer) for layer in costs.layers]
    empty = True
    for path in paths:
        costs.path_cost(path)   # Validates the path.
        for layer, c in enumerate(path):
            mask[layer][c] = True
        empty = False
    if empty:
        raise ValueError('A minimal supernet needs at least one path')
    return Subspace(costs, mask)


_logger = logging.getLogger(__name__)


def _make_small_costs() -> CostModel:
    return CostModel([[Cost(0, 0), Cost(1, 1), Cost(3, 3)],
                      [Cost(0, 0), Cost(2, 2), Cost(5, 5)]])


def _unittest_sample_subspace() -> None:
    from pytest import raises
    from ._search_space import build_space, SpaceConfig

    space = build_space(SpaceConfig(), classes=4)
    costs = space.cost_model
    rng = numpy.random.default_rng(0)

    assert sample_subspace(space, costs.searchable_params + 1, rng) == full_subspace(space)

    # Every layer has identity, so the minimal subspace holds the identities only.
    minimal = sample_subspace(space, minimum_communication_budget(space), rng)
    assert minimal.param_size == 0
    assert all(minimal.candidates(layer) == (0,) for layer in range(space.L))

    with raises(BudgetInfeasibleError, match='minimum feasible budget is 1'):
        sample_subspace(space, 0, rng)

    half = costs.searchable_params // 2
    draws = 10000
    seen = set()
    for _ in range(draws):
        sub = sample_subspace(space, half, rng)
        assert sub.param_size < half
        assert all(sub.candidates(layer) for layer in range(space.L))
        assert all(0 in sub.candidates(layer) for layer in range(space.L))
        seen.update((layer, c) for layer in range(space.L) for c in sub.candidates(layer))
    assert len(seen) == sum(len(layer.candidates) for layer in space.layers)

    # Equal parametric candidates: exactly two of the six fit under half the budget, any two alike.
    equal = CostModel([[Cost(0, 0), Cost(10, 1), Cost(10, 1)]] * 3)
    counts = numpy.zeros((3, 3))
    for _ in range(draws):
        sub = sample_subspace(equal, equal.searchable_params // 2, rng)
        assert sub.param_size == 20
        for layer in range(3):
            for c in sub.candidates(layer):
                counts[layer, c] += 1
    assert numpy.all(counts[:, 0] == draws)
    p = 1 / 3
    sigma = (p * (1 - p) / draws) ** 0.5
    assert numpy.all(numpy.abs(counts[:, 1:] / draws - p) < 3 * sigma)


def _unittest_sample_subspace_mandatory() -> None:
    from pytest import raises

    costs = CostModel([[Cost(10, 1), Cost(20, 2)],
                       [Cost(0, 0), Cost(5, 1)],
                       [Cost(7, 1), Cost(30, 3), Cost(8, 1)]])
    assert minimum_communication_budget(costs) == 18
    rng = numpy.random.default_rng(1)
    forced = sample_subspace(costs, 18, rng)
    assert [forced.candidates(i) for i in range(3)] == [(0,), (0,), (0,)]
    assert forced.param_size == 17

    with raises(BudgetInfeasibleError, match='minimum feasible budget is 18'):
        sample_subspace(costs, 17, rng)

    for _ in range(200):
        sub = sample_subspace(costs, 40, rng)
        assert sub.param_size < 40
        assert 0 in sub.candidates(1)


def _unittest_sample_path_rejection() -> None:
    from pytest import raises

    costs = _make_small_costs()
    sub = full_subspace(costs)
    rng = numpy.random.default_rng(2)
    feasible = enumerate_feasible_paths(sub, 4)
    assert sorted(feasible) == [Path([0, 0]), Path([0, 1]), Path([1, 0]), Path([1, 1]), Path([2, 0])]

    draws = 20000
    counts = {p: 0 for p in feasible}
    for _ in range(draws):
        counts[sample_path_rejection(sub, 4, rng)] += 1
    p = 1 / len(feasible)
    sigma = (p * (1 - p) / draws) ** 0.5
    assert all(abs(c / draws - p) < 5 * sigma for c in counts.values())

    # Budget above the most expensive path: uniform over all nine.
    draws = 18000
    everything = {p: 0 for p in costs.enumerate_paths()}
    for _ in range(draws):
        everything[sample_path_rejection(sub, costs.max_path_flops + 1, rng)] += 1
    p = 1 / 9
    sigma = (p * (1 - p) / draws) ** 0.5
    assert all(abs(c / draws - p) < 5 * sigma for c in everything.values())

    with raises(BudgetInfeasibleError, match='pathological'):
        sample_path_rejection(sub, 0, rng, max_attempts=100)


def _unittest_sample_path_greedy() -> None:
    from pytest import raises

    costs = _make_small_costs()
    sub = full_subspace(costs)
    rng = numpy.random.default_rng(3)
    feasible = set(enumerate_feasible_paths(sub, 4))
    seen = set()
    for _ in range(100000):
        path = sample_path_greedy(sub, 4, rng)
        assert path in feasible
        seen.add(path)
    assert seen == feasible

    # Budget never binds: the marginals are uniform.
    draws = 30000
    marginal = numpy.zeros((2, 3))
    for _ in range(draws):
        path = sample_path_greedy(sub, costs.max_path_flops + 1, rng)
        marginal[0, path[0]] += 1
        marginal[1, path[1]] += 1
    sigma = ((1 / 3) * (2 / 3) / draws) ** 0.5
    assert numpy.all(numpy.abs(marginal / draws - 1 / 3) < 3 * sigma)

    with raises(BudgetInfeasibleError):
        sample_path_greedy(sub, 0, rng)

    # Mandatory layers and a fixed cost.
    costs = CostModel([[Cost(1, 5), Cost(1, 9)], [Cost(0, 0), Cost(1, 4)], [Cost(1, 3), Cost(1, 6), Cost(1, 1)]],
                      fixed=Cost(0, 10))
    sub = full_subspace(costs)
    for _ in range(2000):
        assert costs.path_cost(sample_path_greedy(sub, 18, rng)).flops < 18


def _unittest_greedy_support_equals_feasible_set() -> None:
    rng = numpy.random.default_rng(4)
    for trial in range(20):
        layers = int(rng.integers(2, 4))
        table = []
        for _layer in range(layers):
            n = int(rng.integers(2, 5))
            flops = [int(x) for x in rng.integers(0, 10, size=n)]
            table.append([Cost(f, f) for f in flops])
        costs = CostModel(table, fixed=Cost(1, 1))
        if trial % 2 == 0:
            sub = full_subspace(costs)
        else:
            # A random non-empty selection per layer.
            mask = []
            for row in table:
                keep = [bool(x) for x in rng.integers(0, 2, size=len(row))]
                keep[int(rng.integers(len(row)))] = True
                mask.append(keep)
            sub = Subspace(costs, mask)
        within = [costs.path_cost(p).flops for p in costs.enumerate_paths() if sub.contains(p)]
        budget = int(rng.integers(min(within) + 1, max(within) + 2))
        assert min(within) == sub.min_path_flops()
        feasible = set(enumerate_feasible_paths(sub, budget))
        assert feasible
        seen = set()
        for _ in range(4000):
            path = sample_path_greedy(sub, budget, rng)
            assert path in feasible
            seen.add(path)
        assert seen == feasible


def _unittest_subspace_and_minimal_supernet() -> None:
    from pytest import raises

    costs = _make_small_costs()
    sub = Subspace(costs, [[True, False, True], [True, True, False]])
    assert sub.candidates(0) == (0, 2)
    assert sub.param_size == 3 + 2
    assert sub.contains(Path([2, 1]))
    assert not sub.contains(Path([1, 1]))
    assert sub.min_path_flops() == 0
    assert sub.mask == [[True, False, True], [True, True, False]]
    for _ in range(100):
        assert sub.contains(sample_path_greedy(sub, 100, numpy.random.default_rng(5)))

    with raises(ValueError):
        Subspace(costs, [[False, False, False], [True, True, True]])
    with raises(ValueError):
        Subspace(costs, [[True, True, True]])

    one = minimal_supernet([Path([2, 1])], costs)
    assert one.param_size == 3 + 2
    two = minimal_supernet([Path([2, 1]), Path([2, 2])], costs)
    assert two.param_size == 3 + 2 + 5
    same = minimal_supernet([Path([1, 1])] * 5, costs)
    assert same.param_size == 1 + 2
    assert two.param_size <= min(5 + 8, costs.searchable_params)
    with raises(ValueError):
        minimal_supernet([], costs)

