#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing
import itertools
from .._kernel import Cost, sum_costs


class Path:
    """
    One candidate index per searchable layer. Immutable and hashable.

    >>> p = Path([0, 2, 1])
    >>> p
    Path(0-2-1)
    >>> len(p), p[1], list(p)
    (3, 2, [0, 2, 1])
    >>> p == Path((0, 2, 1)), p.replace(1, 0)
    (True, Path(0-0-1))
    """

    def __init__(self, choices: typing.Iterable[int]):
        self._choices = tuple(int(x) for x in choices)
        if any(x < 0 for x in self._choices):
            raise ValueError('Candidate indexes cannot be negative: %r' % (self._choices,))

    @property
    def choices(self) -> typing.Tuple[int, ...]:
        return self._choices

    def replace(self, layer: int, candidate: int) -> 'Path':
        out = list(self._choices)
        out[layer] = candidate
        return Path(out)

    def __len__(self) -> int:
        return len(self._choices)

    def __getitem__(self, layer: int) -> int:
        return self._choices[layer]

    def __iter__(self) -> typing.Iterator[int]:
        return iter(self._choices)

    def __hash__(self) -> int:
        return hash(self._choices)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Path):
            return self._choices == other._choices
        return NotImplemented

    def __lt__(self, other: 'Path') -> bool:
        return self._choices < other._choices

    def __str__(self) -> str:
        return '-'.join(map(str, self._choices))

    def __repr__(self) -> str:
        return 'Path(%s)' % self


class CostModel:
    """
    Per-candidate costs of every searchable layer plus the cost of the fixed components.
    This is all the samplers and the tier logic need to know about a search space, which allows them
    to be exercised on synthetic cost tables.
    """

    def __init__(self,
                 layers: typing.Sequence[typing.Sequence[Cost]],
                 fixed: Cost = Cost(0, 0)):
        self._layers = tuple(tuple(Cost(int(c.params), int(c.flops)) for c in layer) for layer in layers)
        self._fixed = Cost(int(fixed.params), int(fixed.flops))
        if not self._layers:
            raise ValueError('A cost model needs at least one layer')
        for index, layer in enumerate(self._layers):
            if not layer:
                raise ValueError('Layer %d has no candidates' % index)
            if any(c.params < 0 or c.flops < 0 for c in layer):
                raise ValueError('Layer %d has negative costs' % index)

    @property
    def layer_count(self) -> int:
        return len(self._layers)

    @property
    def fixed(self) -> Cost:
        return self._fixed

    @property
    def layers(self) -> typing.Tuple[typing.Tuple[Cost, ...], ...]:
        return self._layers

    def candidate_count(self, layer: int) -> int:
        return len(self._layers[layer])

    def cost(self, layer: int, candidate: int) -> Cost:
        return self._layers[layer][candidate]

    def path_cost(self, path: Path) -> Cost:
        """Chosen candidates plus the fixed components."""
        if len(path) != self.layer_count:
            raise ValueError('Path %s has %d choices, the space has %d layers' % (path, len(path), self.layer_count))
        for layer, candidate in enumerate(path):
            if candidate >= self.candidate_count(layer):
                raise ValueError('Path %s: layer %d has only %d candidates' %
                                 (path, layer, self.candidate_count(layer)))
        return sum_costs(itertools.chain([self._fixed], (self._layers[i][c] for i, c in enumerate(path))))

    @property
    def min_path_flops(self) -> int:
        return self._fixed.flops + sum(min(c.flops for c in layer) for layer in self._layers)

    @property
    def max_path_flops(self) -> int:
        return self._fixed.flops + sum(max(c.flops for c in layer) for layer in self._layers)

    @property
    def searchable_params(self) -> int:
        return sum(c.params for layer in self._layers for c in layer)

    def cheapest_path(self) -> Path:
        return Path(min(range(len(layer)), key=lambda c: (layer[c].flops, c)) for layer in self._layers)

    def path_count(self) -> int:
        out = 1
        for layer in self._layers:
            out *= len(layer)
        return out

    def enumerate_paths(self) -> typing.Iterator[Path]:
        """Exhaustive enumeration; only sensible for small spaces."""
        for choices in itertools.product(*(range(len(layer)) for layer in self._layers)):
            yield Path(choices)

    def __repr__(self) -> str:
        return 'CostModel(layers=%r, fixed=%r)' % (self._layers, self._fixed)


def _unittest_cost_model() -> None:
    from pytest import raises

    cm = CostModel([[Cost(0, 0), Cost(10, 1), Cost(30, 3)],
                    [Cost(0, 0), Cost(20, 2), Cost(50, 5)]],
                   fixed=Cost(7, 100))
    assert cm.layer_count == 2
    assert cm.path_cost(Path([0, 0])) == cm.fixed
    assert cm.path_cost(Path([2, 1])) == (7 + 30 + 20, 100 + 3 + 2)
    assert cm.min_path_flops == 100
    assert cm.max_path_flops == 108
    assert cm.searchable_params == 110
    assert cm.path_count() == 9
    assert len(set(cm.enumerate_paths())) == 9
    assert cm.cheapest_path() == Path([0, 0])

    # Path cost against independent per-layer summation over every path.
    for p in cm.enumerate_paths():
        expected_flops = 100 + [0, 1, 3][p[0]] + [0, 2, 5][p[1]]
        assert cm.path_cost(p).flops == expected_flops

    with raises(ValueError):
        cm.path_cost(Path([0]))
    with raises(ValueError):
        cm.path_cost(Path([3, 0]))
    with raises(ValueError):
        CostModel([])
    with raises(ValueError):
        CostModel([[Cost(-1, 0)]])
    with raises(ValueError):
        Path([-1])

    assert sorted([Path([1, 0]), Path([0, 2])]) == [Path([0, 2]), Path([1, 0])]
