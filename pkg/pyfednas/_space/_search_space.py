#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import re
import typing
import hashlib
import logging
from .. import _kernel
from .._error import SearchSpaceError, ContractViolationError
from ._cost import CostModel, Path


DEFAULT_CANDIDATES = ('identity', 'conv1x1', 'conv3x3', 'dwsep3x3_e0.5', 'dwsep3x3_e1', 'dwsep3x3_e2')

KNOWN_OPERATORS = ('identity', 'zero', 'conv1x1', 'conv3x3') + tuple(
    'dwsep%dx%d_e%s' % (k, k, e) for k in (1, 3) for e in ('0.5', '1', '2')
)

_DWSEP_PATTERN = re.compile(r'^dwsep([13])x\1_e(0\.5|1|2)$')


class SpaceConfig(typing.NamedTuple):
    input_channels:   int = 1
    input_size:       int = 8
    stem_channels:    int = 8
    blocks:           int = 2
    layers_per_block: int = 2
    # Either a single candidate list shared by all layers or one list per searchable layer.
    candidates:       typing.Tuple[typing.Tuple[str, ...], ...] = (DEFAULT_CANDIDATES,)
    channel_growth:   float = 1.5
    residual:         bool = False


def make_operator(name: str, channels: int) -> _kernel.Operator:
    """
    Constructs a shape-preserving searchable operator from its configuration name.

    >>> make_operator('conv3x3', 8)
    Conv3x3(out_channels=8, post_norm=True)
    >>> make_operator('dwsep3x3_e0.5', 8)
    DWSepConv(kernel=3, expansion=0.5, post_norm=True)
    """
    if name == 'identity':
        return _kernel.Identity()
    if name == 'zero':
        return _kernel.Zero()
    if name == 'conv1x1':
        return _kernel.Conv1x1(channels, post_norm=True)
    if name == 'conv3x3':
        return _kernel.Conv3x3(channels, post_norm=True)
    match = _DWSEP_PATTERN.match(name)
    if match:
        return _kernel.DWSepConv(int(match.group(1)), float(match.group(2)), post_norm=True)
    raise SearchSpaceError('Unknown operator %r; valid kinds: %s' % (name, ', '.join(KNOWN_OPERATORS)))


class Layer:
    """A searchable layer: a list of shape-preserving candidate operators."""

    def __init__(self,
                 index: int,
                 block: int,
                 input_shape: _kernel.Shape,
                 candidates: typing.Sequence[_kernel.Operator],
                 residual: bool):
        self._index = int(index)
        self._block = int(block)
        self._input_shape = tuple(input_shape)
        self._candidates = tuple(candidates)
        self._residual = bool(residual)

    @property
    def index(self) -> int:
        return self._index

    @property
    def block(self) -> int:
        return self._block

    @property
    def input_shape(self) -> _kernel.Shape:
        return self._input_shape

    @property
    def candidates(self) -> typing.Tuple[_kernel.Operator, ...]:
        return self._candidates

    @property
    def residual(self) -> bool:
        """Residual layers compute x + op(x)."""
        return self._residual

    @property
    def mandatory(self) -> bool:
        """
        A layer without an identity or zero option always costs something; such layers are given priority
        whenever a budget has to be distributed.
        """
        return not any(isinstance(c, (_kernel.Identity, _kernel.Zero)) for c in self._candidates)

    def __repr__(self) -> str:
        return 'Layer(index=%r, block=%r, input_shape=%r, candidates=%r, residual=%r)' % \
            (self._index, self._block, self._input_shape, list(self._candidates), self._residual)


class FixedOperator:
    """A non-searchable operator present in every path: stem, reductions, classifier."""

    def __init__(self, key: str, operator: _kernel.Operator, input_shape: _kernel.Shape):
        self._key = str(key)
        self._operator = operator
        self._input_shape = tuple(input_shape)

    @property
    def key(self) -> str:
        return self._key

    @property
    def operator(self) -> _kernel.Operator:
        return self._operator

    @property
    def input_shape(self) -> _kernel.Shape:
        return self._input_shape

    def __repr__(self) -> str:
        return 'FixedOperator(key=%r, operator=%r, input_shape=%r)' % (self._key, self._operator, self._input_shape)


Stage = typing.Union[FixedOperator, Layer]


class SearchSpace:
    """
    stem -> block 0 -> reduction 0 -> block 1 -> ... -> block N-1 -> classifier
    where every block is a sequence of searchable layers.
    Immutable after construction.
    """

    def __init__(self,
                 input_shape: _kernel.Shape,
                 stem: typing.Sequence[_kernel.Operator],
                 blocks: typing.Sequence[typing.Sequence[typing.Sequence[_kernel.Operator]]],
                 reductions: typing.Sequence[typing.Sequence[_kernel.Operator]],
                 classifier: typing.Sequence[_kernel.Operator],
                 residual: bool = False):
        if not blocks:
            raise SearchSpaceError('The search space needs at least one block')
        if len(reductions) != len(blocks) - 1:
            raise SearchSpaceError('Expected %d reductions between %d blocks, got %d' %
                                   (len(blocks) - 1, len(blocks), len(reductions)))

        self._input_shape = tuple(input_shape)
        self._residual = bool(residual)
        stages = []     # type: typing.List[Stage]
        layers = []     # type: typing.List[Layer]
        shape = self._input_shape

        def add_fixed(key: str, ops: typing.Sequence[_kernel.Operator]) -> None:
            nonlocal shape
            for index, op in enumerate(ops):
                full_key = key if len(ops) == 1 else '%s.%d' % (key, index)
                try:
                    next_shape = op.output_shape(shape)
                except ContractViolationError as ex:
                    raise SearchSpaceError('Fixed component %s cannot accept shape %s: %s' %
                                           (full_key, shape, ex.text)) from None
                stages.append(FixedOperator(full_key, op, shape))
                shape = next_shape

        add_fixed('stem', stem)
        for block_index, block in enumerate(blocks):
            for candidates in block:
                layer = self._make_layer(len(layers), block_index, shape, candidates)
                layers.append(layer)
                stages.append(layer)
            if block_index < len(reductions):
                add_fixed('reduction.%d' % block_index, reductions[block_index])
        add_fixed('classifier', classifier)

        if len(shape) != 1:
            raise SearchSpaceError('The classifier must produce a flat vector of logits, got shape %s' % (shape,))

        self._stages = tuple(stages)
        self._layers = tuple(layers)
        self._output_shape = shape
        self._cost_model = CostModel(
            [[op.cost(layer.input_shape) for op in layer.candidates] for layer in self._layers],
            fixed=_kernel.sum_costs(s.operator.cost(s.input_shape) for s in self.fixed_operators),
        )

    def _make_layer(self,
                    index: int,
                    block: int,
                    shape: _kernel.Shape,
                    candidates: typing.Sequence[_kernel.Operator]) -> Layer:
        if len(candidates) < 2:
            raise SearchSpaceError('Searchable layer %d: layer needs >=2 candidates, got %d' % (index, len(candidates)))
        for cand_index, op in enumerate(candidates):
            if isinstance(op, _kernel.Zero) and not self._residual:
                raise SearchSpaceError('Searchable layer %d: candidate %d (zero) is only allowed in residual layers' %
                                       (index, cand_index))
            try:
                out = op.output_shape(shape)
            except ContractViolationError as ex:
                raise SearchSpaceError('Searchable layer %d: candidate %d (%s) is shape-incompatible: %s' %
                                       (index, cand_index, op, ex.text)) from None
            if out != shape:
                raise SearchSpaceError('Searchable layer %d: candidate %d (%s) maps %s to %s; '
                                       'candidates must preserve the shape' % (index, cand_index, op, shape, out))
        return Layer(index, block, shape, candidates, self._residual)

    @property
    def input_shape(self) -> _kernel.Shape:
        return self._input_shape

    @property
    def output_shape(self) -> _kernel.Shape:
        return self._output_shape

    @property
    def classes(self) -> int:
        return self._output_shape[0]

    @property
    def stages(self) -> typing.Tuple[Stage, ...]:
        """All stages in execution order."""
        return self._stages

    @property
    def layers(self) -> typing.Tuple[Layer, ...]:
        return self._layers

    @property
    def L(self) -> int:
        return len(self._layers)

    @property
    def fixed_operators(self) -> typing.Tuple[FixedOperator, ...]:
        return tuple(s for s in self._stages if isinstance(s, FixedOperator))

    @property
    def cost_model(self) -> CostModel:
        return self._cost_model

    @property
    def digest(self) -> str:
        """Identifies the space structure; stored next to serialized models."""
        return hashlib.sha256(repr(self).encode('utf8')).hexdigest()

    def validate_path(self, path: Path) -> None:
        self._cost_model.path_cost(path)

    def __repr__(self) -> str:
        return 'SearchSpace(input_shape=%r, stages=%r)' % (self._input_shape, list(self._stages))


def build_space(config: SpaceConfig, classes: int) -> SearchSpace:
    """
    Channel width is constant within a block; every reduction halves the spatial size with average pooling
    and widens the channels by the growth factor with a pointwise convolution.
    """
    for name in ['input_channels', 'input_size', 'stem_channels', 'blocks', 'layers_per_block']:
        if getattr(config, name) < 1:
            raise SearchSpaceError('space.%s: must be positive, got %r' % (name, getattr(config, name)))
    if classes < 2:
        raise SearchSpaceError('At least two classes are required, got %r' % classes)
    if config.channel_growth < 1:
        raise SearchSpaceError('space.channel_growth: must be at least 1, got %r' % config.channel_growth)
    if config.input_size % (2 ** (config.blocks - 1)) != 0:
        raise SearchSpaceError('space.input_size: %d cannot be halved %d times' %
                               (config.input_size, config.blocks - 1))

    layer_count = config.blocks * config.layers_per_block
    if len(config.candidates) not in (1, layer_count):
        raise SearchSpaceError('space.candidates: expected 1 or %d candidate lists, got %d' %
                               (layer_count, len(config.candidates)))

    def candidates_of(layer: int) -> typing.Sequence[str]:
        return config.candidates[0 if len(config.candidates) == 1 else layer]

    channels = config.stem_channels
    size = config.input_size
    blocks = []         # type: typing.List[typing.List[typing.List[_kernel.Operator]]]
    reductions = []     # type: typing.List[typing.List[_kernel.Operator]]
    for b in range(config.blocks):
        block = []
        for i in range(config.layers_per_block):
            names = candidates_of(b * config.layers_per_block + i)
            block.append([make_operator(n, channels) for n in names])
        blocks.append(block)
        if b + 1 < config.blocks:
            channels = int(round(channels * config.channel_growth))
            reductions.append([_kernel.AvgPool(2), _kernel.Conv1x1(channels, post_norm=True)])
            size //= 2

    space = SearchSpace(input_shape=(config.input_channels, config.input_size, config.input_size),
                        stem=[_kernel.Conv3x3(config.stem_channels, post_norm=True)],
                        blocks=blocks,
                        reductions=reductions,
                        classifier=[_kernel.AvgPool(size), _kernel.Dense(classes)],
                        residual=config.residual)
    cm = space.cost_model
    _logger.info('Search space: %d searchable layers, %d paths, %d searchable params, fixed cost %s, '
                 'path FLOPs in [%d, %d]',
                 space.L, cm.path_count(), cm.searchable_params, cm.fixed, cm.min_path_flops, cm.max_path_flops)
    for layer in space.layers:
        _logger.debug(_LOG_LIST_ITEM_PREFIX + 'layer %d%s: %s', layer.index, ' (mandatory)' if layer.mandatory else '',
                      ', '.join(map(str, layer.candidates)))
    return space


def cost_of_path(space: typing.Union[SearchSpace, CostModel], path: Path) -> _kernel.Cost:
    cm = space.cost_model if isinstance(space, SearchSpace) else space
    return cm.path_cost(path)


_LOG_LIST_ITEM_PREFIX = ' ' * 4

_logger = logging.getLogger(__name__)


def _unittest_build_space() -> None:
    from pytest import raises

    space = build_space(SpaceConfig(), classes=4)
    assert space.L == 4
    assert space.input_shape == (1, 8, 8)
    assert space.output_shape == (4,)
    assert [len(layer.candidates) for layer in space.layers] == [6, 6, 6, 6]
    assert [layer.input_shape for layer in space.layers] == [(8, 8, 8), (8, 8, 8), (12, 4, 4), (12, 4, 4)]
    assert not any(layer.mandatory for layer in space.layers)
    assert [f.key for f in space.fixed_operators] == \
        ['stem', 'reduction.0.0', 'reduction.0.1', 'classifier.0', 'classifier.1']
    for layer in space.layers:
        for op in layer.candidates:
            assert op.output_shape(layer.input_shape) == layer.input_shape

    assert build_space(SpaceConfig(), classes=4).digest == space.digest
    assert build_space(SpaceConfig(stem_channels=6), classes=4).digest != space.digest

    with raises(SearchSpaceError, match=r'.*needs >=2 candidates.*'):
        build_space(SpaceConfig(candidates=(('conv1x1',),)), classes=4)

    with raises(SearchSpaceError, match=r'.*Unknown operator.*valid kinds: identity, zero.*'):
        build_space(SpaceConfig(candidates=(('identity', 'conv5x5'),)), classes=4)

    with raises(SearchSpaceError, match=r'.*zero.*residual.*'):
        build_space(SpaceConfig(candidates=(('identity', 'zero'),)), classes=4)

    residual = build_space(SpaceConfig(candidates=(('zero', 'conv1x1'),), residual=True), classes=3)
    assert all(layer.residual and not layer.mandatory for layer in residual.layers)

    per_layer = (('conv1x1', 'conv3x3'),) + (DEFAULT_CANDIDATES,) * 3
    mandatory = build_space(SpaceConfig(candidates=per_layer), classes=4)
    assert [layer.mandatory for layer in mandatory.layers] == [True, False, False, False]

    with raises(SearchSpaceError, match=r'.*expected 1 or 4 candidate lists.*'):
        build_space(SpaceConfig(candidates=(DEFAULT_CANDIDATES,) * 2), classes=4)

    with raises(SearchSpaceError, match=r'.*input_size.*'):
        build_space(SpaceConfig(input_size=6, blocks=3), classes=4)

    # A candidate that changes the width breaks the shape contract of the layer.
    with raises(SearchSpaceError, match=r'.*layer 0: candidate 1.*preserve.*'):
        SearchSpace(input_shape=(2, 4, 4),
                    stem=[_kernel.Identity()],
                    blocks=[[[_kernel.Identity(), _kernel.Conv1x1(3)]]],
                    reductions=[],
                    classifier=[_kernel.Dense(2)])


def _unittest_cost_of_path() -> None:
    space = build_space(SpaceConfig(), classes=4)
    identity = Path([0] * space.L)
    assert cost_of_path(space, identity) == space.cost_model.fixed
    assert cost_of_path(space, identity).params == sum(
        f.operator.cost(f.input_shape).params for f in space.fixed_operators)

    conv3x3 = DEFAULT_CANDIDATES.index('conv3x3')
    for layer in range(space.L):
        heavier = cost_of_path(space, identity.replace(layer, conv3x3))
        assert heavier.params > cost_of_path(space, identity).params
        assert heavier.flops > cost_of_path(space, identity).flops

    # Path cost agrees with summing operator costs stage by stage.
    p = Path([1, 3, 5, 2])
    total = cost_of_path(space, p)
    expected = _kernel.sum_costs(
        (s.operator.cost(s.input_shape) if isinstance(s, FixedOperator) else
         s.candidates[p[s.index]].cost(s.input_shape)) for s in space.stages)
    assert total == expected
