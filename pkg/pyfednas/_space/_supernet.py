#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing
import numpy
from .. import _kernel
from .._error import ContractViolationError
from ._cost import Path
from ._search_space import SearchSpace, FixedOperator, Layer
from ._sampling import Subspace


OperatorKey = typing.NamedTuple('OperatorKey', [
    ('layer', int),
    ('candidate', int),
])


class Model:
    """
    An executable network along one path. The parameter dictionaries are used by reference: a model built by
    Supernet.view() trains the supernet itself, whereas one returned by extract_model() owns private copies.
    """

    def __init__(self,
                 space: SearchSpace,
                 path: Path,
                 searchable: typing.Mapping[OperatorKey, _kernel.ParameterSet],
                 fixed: typing.Mapping[str, _kernel.ParameterSet]):
        space.validate_path(path)
        self._space = space
        self._path = path
        self._searchable = {}   # type: typing.Dict[OperatorKey, _kernel.ParameterSet]
        for layer in space.layers:
            key = OperatorKey(layer.index, path[layer.index])
            if layer.candidates[key.candidate].is_parametric(layer.input_shape):
                if key not in searchable:
                    raise ContractViolationError('Parameters of %s (%s) are missing' %
                                                 (key, layer.candidates[key.candidate]))
                self._searchable[key] = searchable[key]
        self._fixed = {}    # type: typing.Dict[str, _kernel.ParameterSet]
        for f in space.fixed_operators:
            if f.key not in fixed:
                raise ContractViolationError('Parameters of the fixed component %r are missing' % f.key)
            self._fixed[f.key] = fixed[f.key]
        self._trace = []    # type: typing.List[_kernel.Tensor]

    @staticmethod
    def initialize(space: SearchSpace, path: Path, rng: numpy.random.Generator) -> 'Model':
        """A model with fresh He-initialized parameters; nothing is inherited from a supernet."""
        searchable = {}     # type: typing.Dict[OperatorKey, _kernel.ParameterSet]
        for layer in space.layers:
            op = layer.candidates[path[layer.index]]
            if op.is_parametric(layer.input_shape):
                searchable[OperatorKey(layer.index, path[layer.index])] = op.initialize(layer.input_shape, rng)
        fixed = {f.key: f.operator.initialize(f.input_shape, rng) for f in space.fixed_operators}
        return Model(space, path, searchable, fixed)

    @property
    def space(self) -> SearchSpace:
        return self._space

    @property
    def path(self) -> Path:
        return self._path

    @property
    def cost(self) -> _kernel.Cost:
        return self._space.cost_model.path_cost(self._path)

    @property
    def searchable(self) -> typing.Dict[OperatorKey, _kernel.ParameterSet]:
        return self._searchable

    @property
    def fixed(self) -> typing.Dict[str, _kernel.ParameterSet]:
        return self._fixed

    def _stage_params(self, stage: typing.Union[FixedOperator, Layer]) -> typing.Tuple[_kernel.Operator,
                                                                                        _kernel.ParameterSet]:
        if isinstance(stage, FixedOperator):
            return stage.operator, self._fixed[stage.key]
        candidate = self._path[stage.index]
        return stage.candidates[candidate], self._searchable.get(OperatorKey(stage.index, candidate), {})

    def forward(self, x: _kernel.Tensor) -> _kernel.Tensor:
        """Returns logits; keeps the stage inputs for a subsequent backward()."""
        self._trace = []
        for stage in self._space.stages:
            op, params = self._stage_params(stage)
            self._trace.append(x)
            y = op.forward(params, x)
            x = x + y if isinstance(stage, Layer) and stage.residual else y
        return x

    def backward(self, upstream: _kernel.Tensor) -> None:
        if len(self._trace) != len(self._space.stages):
            raise ContractViolationError('backward() requires a preceding forward()')
        g = upstream
        for stage, x in zip(reversed(self._space.stages), reversed(self._trace)):
            op, params = self._stage_params(stage)
            gx = op.backward(params, x, g)
            g = gx + g if isinstance(stage, Layer) and stage.residual else gx
        self._trace = []

    def named_parameters(self) -> typing.List[typing.Tuple[str, _kernel.Parameter]]:
        """Deterministic order: execution order of the stages, then parameter name."""
        out = []
        for stage in self._space.stages:
            op, params = self._stage_params(stage)
            if isinstance(stage, FixedOperator):
                prefix = stage.key
            else:
                prefix = 'layer.%d.%d' % (stage.index, self._path[stage.index])
            for name in sorted(params):
                out.append(('%s/%s' % (prefix, name), params[name]))
        return out

    def parameters(self) -> typing.List[_kernel.Parameter]:
        return [p for _, p in self.named_parameters()]

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def assign(self, key: typing.Union[OperatorKey, str], values: _kernel.ValueSet) -> None:
        target = self._fixed[key] if isinstance(key, str) else self._searchable[key]
        if set(target) != set(values):
            raise ContractViolationError('%s: expected parameters %s, got %s' % (key, sorted(target), sorted(values)))
        for name, value in values.items():
            target[name].value = value

    def evaluate(self,
                 inputs: _kernel.Tensor,
                 labels: _kernel.Tensor,
                 batch_size: int = 256) -> typing.Tuple[int, float]:
        """Returns (number of correct predictions, summed cross-entropy). Does not modify the parameters."""
        correct, loss_sum = 0, 0.0
        for start in range(0, len(labels), batch_size):
            x = inputs[start:start + batch_size]
            y = labels[start:start + batch_size]
            logits = self.forward(x)
            loss, _ = _kernel.softmax_cross_entropy(logits, y)
            correct += _kernel.count_correct(logits, y)
            loss_sum += loss * len(y)
        self._trace = []
        return correct, loss_sum

    def __repr__(self) -> str:
        return 'Model(path=%s, params=%d)' % (self._path, self.param_count)


class Supernet:
    """
    The server-resident parameter store: one parameter set per parametric (layer, candidate) pair
    plus the fixed components.
    """

    def __init__(self, space: SearchSpace, rng: numpy.random.Generator):
        self._space = space
        self._searchable = {}   # type: typing.Dict[OperatorKey, _kernel.ParameterSet]
        for layer in space.layers:
            for index, op in enumerate(layer.candidates):
                if op.is_parametric(layer.input_shape):
                    self._searchable[OperatorKey(layer.index, index)] = op.initialize(layer.input_shape, rng)
        self._fixed = {f.key: f.operator.initialize(f.input_shape, rng)
                       for f in space.fixed_operators}  # type: typing.Dict[str, _kernel.ParameterSet]

    @property
    def space(self) -> SearchSpace:
        return self._space

    @property
    def searchable(self) -> typing.Dict[OperatorKey, _kernel.ParameterSet]:
        return self._searchable

    @property
    def fixed(self) -> typing.Dict[str, _kernel.ParameterSet]:
        return self._fixed

    @property
    def searchable_param_count(self) -> int:
        return sum(_kernel.count_scalars(p) for p in self._searchable.values())

    @property
    def fixed_param_count(self) -> int:
        return sum(_kernel.count_scalars(p) for p in self._fixed.values())

    @property
    def total_param_count(self) -> int:
        return self.searchable_param_count + self.fixed_param_count

    def view(self, path: Path) -> Model:
        """A model that shares the supernet's parameters. Training it trains the supernet."""
        return Model(self._space, path, self._searchable, self._fixed)

    def snapshot(self, subspace: Subspace) -> typing.Tuple[typing.Dict[OperatorKey, _kernel.ValueSet],
                                                           typing.Dict[str, _kernel.ValueSet]]:
        """
        Copies of everything a client receives: every selected candidate (an empty value set for the
        non-parametric ones) and all fixed components.
        """
        searchable = {}     # type: typing.Dict[OperatorKey, _kernel.ValueSet]
        for layer in range(subspace.layer_count):
            for candidate in subspace.candidates(layer):
                key = OperatorKey(layer, candidate)
                searchable[key] = _kernel.values_of(self._searchable.get(key, {}))
        fixed = {k: _kernel.values_of(v) for k, v in self._fixed.items()}
        return searchable, fixed

    def assign(self, key: typing.Union[OperatorKey, str], values: _kernel.ValueSet) -> None:
        target = self._fixed[key] if isinstance(key, str) else self._searchable[key]
        if set(target) != set(values):
            raise ContractViolationError('%s: expected parameters %s, got %s' % (key, sorted(target), sorted(values)))
        for name, value in values.items():
            target[name].value = value

    def copy(self) -> 'Supernet':
        out = Supernet.__new__(Supernet)
        out._space = self._space
        out._searchable = {k: _kernel.copy_parameter_set(v) for k, v in self._searchable.items()}
        out._fixed = {k: _kernel.copy_parameter_set(v) for k, v in self._fixed.items()}
        return out

    def __repr__(self) -> str:
        return 'Supernet(layers=%d, searchable_params=%d, fixed_params=%d)' % \
            (self._space.L, self.searchable_param_count, self.fixed_param_count)


def extract_model(supernet: Supernet, path: Path) -> Model:
    """A standalone deep copy of the path's parameters plus the fixed components."""
    view = supernet.view(path)
    return Model(supernet.space,
                 path,
                 {k: _kernel.copy_parameter_set(v) for k, v in view.searchable.items()},
                 {k: _kernel.copy_parameter_set(v) for k, v in view.fixed.items()})


def _unittest_supernet() -> None:
    from ._search_space import build_space, SpaceConfig
    from ._sampling import full_subspace

    space = build_space(SpaceConfig(), classes=4)
    supernet = Supernet(space, numpy.random.default_rng(0))
    parametric = sum(1 for layer in space.layers for op in layer.candidates if op.is_parametric(layer.input_shape))
    assert len(supernet.searchable) == parametric == 4 * 5
    assert supernet.searchable_param_count == space.cost_model.searchable_params
    assert supernet.fixed_param_count == space.cost_model.fixed.params
    assert supernet.total_param_count == supernet.searchable_param_count + supernet.fixed_param_count

    searchable, fixed = supernet.snapshot(full_subspace(space.cost_model))
    assert len(searchable) == 4 * 6
    assert searchable[OperatorKey(0, 0)] == {}
    assert set(fixed) == {f.key for f in space.fixed_operators}


def _unittest_extract_model() -> None:
    from ._search_space import build_space, SpaceConfig

    space = build_space(SpaceConfig(), classes=4)
    supernet = Supernet(space, numpy.random.default_rng(1))
    x = numpy.random.default_rng(2).normal(size=(5,) + space.input_shape)

    path = Path([2, 5, 1, 3])
    model = extract_model(supernet, path)
    assert numpy.array_equal(model.forward(x), supernet.view(path).forward(x))
    assert model.param_count == space.cost_model.path_cost(path).params

    before = [p.value.copy() for p in supernet.view(path).parameters()]
    for p in model.parameters():
        p.value = p.value + 1.0
    after = [p.value for p in supernet.view(path).parameters()]
    assert all(numpy.array_equal(a, b) for a, b in zip(before, after))

    identity = extract_model(supernet, Path([0, 0, 0, 0]))
    assert identity.searchable == {}
    assert identity.param_count == space.cost_model.fixed.params

    # Training a view changes the supernet.
    view = supernet.view(path)
    logits = view.forward(x)
    _, grad = _kernel.softmax_cross_entropy(logits, numpy.zeros(5, dtype=int))
    view.backward(grad)
    _kernel.sgd_step(view.parameters(), lr=0.1)
    assert not all(numpy.array_equal(a, b) for a, b in zip(before, [p.value for p in view.parameters()]))


def _unittest_model_backward_residual() -> None:
    from ._search_space import build_space, SpaceConfig

    space = build_space(SpaceConfig(candidates=(('zero', 'conv1x1', 'identity'),), residual=True,
                                    stem_channels=4, blocks=1), classes=3)
    model = Model.initialize(space, Path([1, 2]), numpy.random.default_rng(3))
    rng = numpy.random.default_rng(4)
    x = rng.normal(size=(3,) + space.input_shape)
    labels = numpy.array([0, 1, 2])

    def loss() -> float:
        return _kernel.softmax_cross_entropy(model.forward(x), labels)[0]

    _, grad = _kernel.softmax_cross_entropy(model.forward(x), labels)
    model.backward(grad)
    name, param = model.named_parameters()[0]
    assert name == 'stem/bias'
    analytic = param.gradient[0]
    param.value[0] += 1e-5
    plus = loss()
    param.value[0] -= 2e-5
    minus = loss()
    param.value[0] += 1e-5
    assert abs((plus - minus) / 2e-5 - analytic) < 1e-6

    from pytest import raises
    with raises(ContractViolationError):
        model.backward(grad)
