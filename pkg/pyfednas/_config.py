#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import os
import math
import typing
import hashlib
import logging
from . import _parser
from ._error import InvalidConfigError, SearchSpaceError
from ._space import SpaceConfig, DEFAULT_CANDIDATES, KNOWN_OPERATORS, SearchSpace, build_space
from ._federated import TrainingConfig, LocalConfig, Aggregator, PATH_SAMPLERS
from ._finetune import FinetuneConfig
from ._search import Metric
from ._kernel import Schedule


CONFIG_FILE_NAME = 'config.ini'

EVAL_CENTRAL = 'central'
EVAL_FEDERATED = 'federated'

BASELINE_RAND_INIT = 'rand_init'
BASELINE_RANDOM_SEARCH = 'random_search'

Key = typing.Tuple[str, str]

# The canonical order of sections and keys; every key has a default.
_SCHEMA = [
    ('space', [
        ('input_channels',          1),
        ('input_size',              8),
        ('stem_channels',           8),
        ('blocks',                  2),
        ('layers_per_block',        2),
        ('candidates',              list(DEFAULT_CANDIDATES)),
        ('channel_growth',          1.5),
        ('residual',                False),
    ]),
    ('data', [
        ('classes',                 4),
        ('samples',                 3200),
        ('noise',                   0.5),
        ('import_path',             ''),
        ('val_fraction',            0.15),
        ('test_fraction',           0.15),
        ('val_subsample',           1.0),
    ]),
    ('partition', [
        ('clients',                 32),
        ('alpha',                   1.0),
    ]),
    ('tiers', [
        ('count',                   4),
        ('rho_low',                 0.0),
        ('rho_high',                0.9),
        ('fractions',               []),    # Equal split unless given
        ('samples',                 100000),
    ]),
    ('supernet', [
        ('rounds',                  60),
        ('clients_per_round',       8),
        ('bcomm_fraction',          0.5),
        ('local_epochs',            1),
        ('batch_size',              32),
        ('lr',                      0.05),
        ('momentum',                0.9),
        ('clip_norm',               5.0),   # Zero disables clipping
        ('probe_interval',          10),
        ('probe_paths',             4),
        ('per_client_subspace',     False),
        ('aggregator',              Aggregator.OPA.value),
        ('sampler',                 'greedy'),
    ]),
    ('search', [
        ('iterations',              8),
        ('population',              32),
        ('sample',                  16),
        ('eval',                    EVAL_CENTRAL),
        ('fe_rounds',               2),
        ('fe_clients_per_round',    8),
        ('metric',                  Metric.ACCURACY.value),
    ]),
    ('finetune', [
        ('rounds',                  30),
        ('clients_per_round',       6),
        ('local_epochs',            1),
        ('batch_size',              32),
        ('lr',                      0.01),
        ('momentum',                0.9),
        ('schedule',                Schedule.COSINE.value),
        ('baselines',               [BASELINE_RAND_INIT]),
        ('rand_init_rounds',        60),
    ]),
    ('run', [
        ('seed',                    0),
        ('threads',                 1),
    ]),
]   # type: typing.List[typing.Tuple[str, typing.List[typing.Tuple[str, _parser.Value]]]]

_DEFAULTS = {(section, key): value for section, keys in _SCHEMA for key, value in keys}

_LIST_NAMES = 'names'
_LIST_NESTED_NAMES = 'nested names'
_LIST_REALS = 'reals'

_LIST_KINDS = {
    ('space', 'candidates'):    _LIST_NESTED_NAMES,
    ('tiers', 'fractions'):      _LIST_REALS,
    ('finetune', 'baselines'):   _LIST_NAMES,
}


class DataConfig(typing.NamedTuple):
    classes:        int = 4
    samples:        int = 3200
    noise:          float = 0.5
    import_path:    typing.Optional[str] = None
    val_fraction:   float = 0.15
    test_fraction:  float = 0.15
    val_subsample:  float = 1.0


class PartitionConfig(typing.NamedTuple):
    clients: int = 32
    alpha:   float = 1.0


class TierConfig(typing.NamedTuple):
    count:      int = 4
    rho_low:    float = 0.0
    rho_high:   float = 0.9
    fractions:  typing.Tuple[float, ...] = (0.25,) * 4
    samples:    int = 100000


class SearchConfig(typing.NamedTuple):
    iterations:             int = 8
    population:             int = 32
    sample:                 int = 16
    federated:              bool = False
    fe_rounds:              int = 2
    fe_clients_per_round:   int = 8
    metric:                 Metric = Metric.ACCURACY


RawConfig = typing.Dict[Key, _parser.Assignment]


class ExperimentConfig:
    """
    A validated configuration with every key explicit. Instances are obtained from validate().
    """

    def __init__(self, values: typing.Mapping[Key, _parser.Value], space: SearchSpace):
        assert set(values) == set(_DEFAULTS)
        self._values = dict(values)
        self._space = space

    def get(self, section: str, key: str) -> _parser.Value:
        return self._values[section, key]

    @property
    def values(self) -> typing.Dict[Key, _parser.Value]:
        return dict(self._values)

    @property
    def space_config(self) -> SpaceConfig:
        return _space_config(self._values)

    @property
    def space(self) -> SearchSpace:
        return self._space

    @property
    def data(self) -> DataConfig:
        return DataConfig(classes=self.get('data', 'classes'),
                          samples=self.get('data', 'samples'),
                          noise=self.get('data', 'noise'),
                          import_path=self.get('data', 'import_path') or None,
                          val_fraction=self.get('data', 'val_fraction'),
                          test_fraction=self.get('data', 'test_fraction'),
                          val_subsample=self.get('data', 'val_subsample'))

    @property
    def partition(self) -> PartitionConfig:
        return PartitionConfig(clients=self.get('partition', 'clients'), alpha=self.get('partition', 'alpha'))

    @property
    def tiers(self) -> TierConfig:
        return TierConfig(count=self.get('tiers', 'count'),
                          rho_low=self.get('tiers', 'rho_low'),
                          rho_high=self.get('tiers', 'rho_high'),
                          fractions=tuple(self.get('tiers', 'fractions')),
                          samples=self.get('tiers', 'samples'))

    @property
    def training(self) -> TrainingConfig:
        local = LocalConfig(epochs=self.get('supernet', 'local_epochs'),
                            batch_size=self.get('supernet', 'batch_size'),
                            lr=self.get('supernet', 'lr'),
                            momentum=self.get('supernet', 'momentum'),
                            clip_norm=self.get('supernet', 'clip_norm') or None,
                            sampler=self.get('supernet', 'sampler'))
        return TrainingConfig(rounds=self.get('supernet', 'rounds'),
                              clients_per_round=self.get('supernet', 'clients_per_round'),
                              bcomm_fraction=self.get('supernet', 'bcomm_fraction'),
                              local=local,
                              probe_interval=self.get('supernet', 'probe_interval'),
                              probe_paths=self.get('supernet', 'probe_paths'),
                              per_client_subspace=self.get('supernet', 'per_client_subspace'),
                              aggregator=Aggregator(self.get('supernet', 'aggregator')))

    @property
    def search(self) -> SearchConfig:
        return SearchConfig(iterations=self.get('search', 'iterations'),
                            population=self.get('search', 'population'),
                            sample=self.get('search', 'sample'),
                            federated=self.get('search', 'eval') == EVAL_FEDERATED,
                            fe_rounds=self.get('search', 'fe_rounds'),
                            fe_clients_per_round=self.get('search', 'fe_clients_per_round'),
                            metric=Metric(self.get('search', 'metric')))

    @property
    def finetune(self) -> FinetuneConfig:
        local = LocalConfig(epochs=self.get('finetune', 'local_epochs'),
                            batch_size=self.get('finetune', 'batch_size'),
                            lr=self.get('finetune', 'lr'),
                            momentum=self.get('finetune', 'momentum'),
                            clip_norm=self.get('supernet', 'clip_norm') or None)
        return FinetuneConfig(rounds=self.get('finetune', 'rounds'),
                              clients_per_round=self.get('finetune', 'clients_per_round'),
                              local=local,
                              schedule=Schedule(self.get('finetune', 'schedule')))

    @property
    def rand_init(self) -> FinetuneConfig:
        """Training from scratch gets its own span; everything else is shared with fine-tuning."""
        return self.finetune._replace(rounds=self.get('finetune', 'rand_init_rounds'))

    @property
    def baselines(self) -> typing.Tuple[str, ...]:
        return tuple(self.get('finetune', 'baselines'))

    @property
    def seed(self) -> int:
        out = self.get('run', 'seed')
        assert isinstance(out, int)
        return out

    @property
    def threads(self) -> int:
        out = self.get('run', 'threads')
        assert isinstance(out, int)
        return out

    def render(self) -> str:
        """The normalized configuration in the configuration file syntax; parsing it yields an equal config."""
        out = []
        for section, keys in _SCHEMA:
            if out:
                out.append('')
            out.append('[%s]' % section)
            width = max(len(k) for k, _ in keys)
            for key, _ in keys:
                out.append('%s = %s' % (key.ljust(width), _render_value(self._values[section, key])))
        return '\n'.join(out) + '\n'

    @property
    def digest(self) -> str:
        """Identifies the experiment. The thread count has no effect on the results and is left out."""
        values = dict(self._values)
        values['run', 'threads'] = _DEFAULTS['run', 'threads']
        return hashlib.sha256(ExperimentConfig(values, self._space).render().encode()).hexdigest()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ExperimentConfig):
            return self._values == other._values
        return NotImplemented

    def __repr__(self) -> str:
        return 'ExperimentConfig(%s)' % ', '.join('%s.%s=%r' % (s, k, v) for (s, k), v in sorted(self._values.items()))


def _render_value(value: _parser.Value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"%s"' % value
    assert isinstance(value, list)
    return '[%s]' % ', '.join(map(_render_value, value))


def parse_config(text: str, path: typing.Optional[str] = None) -> RawConfig:
    """Parses the text and rejects unknown sections and keys. Values are checked by validate()."""
    out = {}    # type: RawConfig
    sections = sorted({s for s, _ in _DEFAULTS})
    for a in _parser.parse(text, path):
        if a.section not in sections:
            raise InvalidConfigError('Unknown section [%s]; valid sections: %s' % (a.section, ', '.join(sections)),
                                     path=path, line=a.line)
        if (a.section, a.key) not in _DEFAULTS:
            valid = ', '.join(k for s, k in _DEFAULTS if s == a.section)
            raise InvalidConfigError('Unknown key %s.%s; valid keys: %s' % (a.section, a.key, valid),
                                     path=path, line=a.line)
        out[a.section, a.key] = a
    return out


def override(raw: RawConfig, section: str, key: str, value: _parser.Value) -> RawConfig:
    """Returns a copy with the value replaced, as if it were given in the file; the line number is lost."""
    if (section, key) not in _DEFAULTS:
        raise InvalidConfigError('Unknown key %s.%s' % (section, key))
    out = dict(raw)
    out[section, key] = _parser.Assignment(section, key, value, 0)
    return out


def validate(raw: RawConfig, path: typing.Optional[str] = None) -> ExperimentConfig:
    """
    Fills in the defaults, checks the types and the cross-field constraints, and returns the normalized
    configuration. Every error names the offending field and, when known, its line in the file.

    >>> validate({}).get('supernet', 'bcomm_fraction')
    0.5
    """
    def fail(section: str, key: str, reason: str) -> typing.NoReturn:
        a = raw.get((section, key))
        raise InvalidConfigError('%s.%s: %s' % (section, key, reason), path=path, line=(a.line or None) if a else None)

    values = {}     # type: typing.Dict[Key, _parser.Value]
    for (section, key), default in _DEFAULTS.items():
        a = raw.get((section, key))
        values[section, key] = default if a is None else \
            _coerce(a.value, default, _LIST_KINDS.get((section, key)), lambda r: fail(section, key, r))

    def v(section: str, key: str) -> typing.Any:
        return values[section, key]

    def require(condition: bool, section: str, key: str, reason: str) -> None:
        if not condition:
            fail(section, key, reason)

    # Plain ranges.
    for section, key, low in [('space', 'input_channels', 1), ('space', 'input_size', 1),
                              ('space', 'stem_channels', 1), ('space', 'blocks', 1), ('space', 'layers_per_block', 1),
                              ('data', 'classes', 2), ('data', 'samples', 1), ('partition', 'clients', 1),
                              ('tiers', 'count', 1), ('tiers', 'samples', 1000),
                              ('supernet', 'rounds', 1), ('supernet', 'clients_per_round', 1),
                              ('supernet', 'local_epochs', 1), ('supernet', 'batch_size', 1),
                              ('supernet', 'probe_interval', 0), ('supernet', 'probe_paths', 0),
                              ('search', 'iterations', 0), ('search', 'population', 2), ('search', 'sample', 2),
                              ('search', 'fe_rounds', 1), ('search', 'fe_clients_per_round', 1),
                              ('finetune', 'rounds', 0), ('finetune', 'clients_per_round', 1),
                              ('finetune', 'local_epochs', 1), ('finetune', 'batch_size', 1),
                              ('finetune', 'rand_init_rounds', 0), ('run', 'seed', 0), ('run', 'threads', 1)]:
        require(v(section, key) >= low, section, key, 'must be at least %d, got %r' % (low, v(section, key)))

    for section, key in [('space', 'channel_growth'), ('partition', 'alpha'), ('supernet', 'lr'),
                         ('finetune', 'lr'), ('data', 'val_fraction'), ('data', 'test_fraction')]:
        require(v(section, key) > 0, section, key, 'must be positive, got %r' % v(section, key))
    for section, key in [('data', 'noise'), ('supernet', 'clip_norm')]:
        require(v(section, key) >= 0, section, key, 'must not be negative, got %r' % v(section, key))
    for section in ('supernet', 'finetune'):
        require(0 <= v(section, 'momentum') < 1, section, 'momentum', 'must be in [0, 1), got %r' %
                v(section, 'momentum'))

    # Enumerations.
    def one_of(section: str, key: str, options: typing.Iterable[str]) -> None:
        options = sorted(options)
        require(v(section, key) in options, section, key, 'unknown value %r; valid values: %s' %
                (v(section, key), ', '.join(options)))

    one_of('supernet', 'aggregator', (x.value for x in Aggregator))
    one_of('supernet', 'sampler', PATH_SAMPLERS)
    one_of('search', 'eval', (EVAL_CENTRAL, EVAL_FEDERATED))
    one_of('search', 'metric', (x.value for x in Metric))
    one_of('finetune', 'schedule', (x.value for x in Schedule))
    for name in v('finetune', 'baselines'):
        require(name in (BASELINE_RAND_INIT, BASELINE_RANDOM_SEARCH), 'finetune', 'baselines',
                'unknown baseline %r; valid baselines: %s, %s' % (name, BASELINE_RAND_INIT, BASELINE_RANDOM_SEARCH))
    require(len(set(v('finetune', 'baselines'))) == len(v('finetune', 'baselines')), 'finetune', 'baselines',
            'duplicate entries')

    # Cross-field constraints.
    require(0 < v('supernet', 'bcomm_fraction') <= 1, 'supernet', 'bcomm_fraction',
            'must be in (0, 1], got %r' % v('supernet', 'bcomm_fraction'))
    require(v('data', 'val_fraction') + v('data', 'test_fraction') < 1, 'data', 'test_fraction',
            'the validation and test fractions must leave data for training')
    require(0 < v('data', 'val_subsample') <= 1, 'data', 'val_subsample',
            'must be in (0, 1], got %r' % v('data', 'val_subsample'))
    if v('data', 'import_path'):
        require(os.path.isdir(v('data', 'import_path')), 'data', 'import_path',
                'directory %r does not exist' % v('data', 'import_path'))
    for section in ('supernet', 'finetune'):
        require(v(section, 'clients_per_round') <= v('partition', 'clients'), section, 'clients_per_round',
                'cannot exceed the number of clients (%d)' % v('partition', 'clients'))

    count = v('tiers', 'count')
    if not v('tiers', 'fractions'):
        values['tiers', 'fractions'] = [1.0 / count] * count
    fractions = v('tiers', 'fractions')
    require(len(fractions) == count, 'tiers', 'fractions', 'expected %d entries, got %d' % (count, len(fractions)))
    require(all(f >= 0 for f in fractions) and math.isclose(sum(fractions), 1.0, abs_tol=1e-9),
            'tiers', 'fractions', 'must be non-negative and sum up to one, got %r' % fractions)
    require(0 <= v('tiers', 'rho_low') < v('tiers', 'rho_high') <= 1, 'tiers', 'rho_high',
            'the ratios must satisfy 0 <= rho_low < rho_high <= 1')
    require(count == 1 or v('tiers', 'rho_high') < 1, 'tiers', 'rho_high', 'must be below one with several tiers')

    candidates = v('space', 'candidates')
    require(len(candidates) > 0, 'space', 'candidates', 'at least one candidate is required')
    for name in (n for x in candidates for n in (x if isinstance(x, list) else [x])):
        require(name in KNOWN_OPERATORS, 'space', 'candidates',
                'unknown operator %r; valid kinds: %s' % (name, ', '.join(KNOWN_OPERATORS)))

    try:
        space = build_space(_space_config(values), classes=v('data', 'classes'))
    except SearchSpaceError as ex:
        # Field-specific messages start with the field path.
        key = ex.text.split(':')[0].split('.')[-1] if ex.text.startswith('space.') else 'candidates'
        a = raw.get(('space', key))
        ex.set_error_location_if_unknown(path=path, line=a.line if a else None)
        raise ex

    out = ExperimentConfig(values, space)
    _logger.debug('Validated configuration: %r', out)
    return out


def _space_config(values: typing.Mapping[Key, _parser.Value]) -> SpaceConfig:
    candidates = values['space', 'candidates']
    if candidates and isinstance(candidates[0], list):
        per_layer = tuple(tuple(x) for x in candidates)
    else:
        per_layer = (tuple(candidates),)
    return SpaceConfig(input_channels=values['space', 'input_channels'],
                       input_size=values['space', 'input_size'],
                       stem_channels=values['space', 'stem_channels'],
                       blocks=values['space', 'blocks'],
                       layers_per_block=values['space', 'layers_per_block'],
                       candidates=per_layer,
                       channel_growth=values['space', 'channel_growth'],
                       residual=values['space', 'residual'])


def _coerce(value: _parser.Value,
            default: _parser.Value,
            list_kind: typing.Optional[str],
            fail: typing.Callable[[str], typing.NoReturn]) -> _parser.Value:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail('expected a boolean, got %r' % (value,))
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            fail('expected an integer, got %r' % (value,))
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail('expected a real number, got %r' % (value,))
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            fail('expected a string, got %r' % (value,))
        return value

    assert isinstance(default, list) and list_kind is not None
    if not isinstance(value, list):
        fail('expected a list, got %r' % (value,))
    if list_kind == _LIST_REALS:
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            fail('expected a list of numbers, got %r' % (value,))
        return [float(x) for x in value]
    if all(isinstance(x, str) for x in value):
        return value
    if list_kind == _LIST_NESTED_NAMES and \
            all(isinstance(x, list) and all(isinstance(y, str) for y in x) for x in value):
        return value
    fail('expected a list of %s, got %r' % ('names or a list of lists of names' if list_kind == _LIST_NESTED_NAMES
                                           else 'names', value))


def load_config(path: typing.Optional[str],
                overrides: typing.Iterable[typing.Tuple[str, str, _parser.Value]] = ()) -> ExperimentConfig:
    """
    Reads and validates the configuration file; None stands for an empty file. The overrides are applied
    after parsing and before validation.
    """
    text = ''
    if path is not None:
        try:
            with open(path) as f:
                text = f.read()
        except OSError as ex:
            raise InvalidConfigError('Cannot read the configuration: %s' % ex.strerror, path=path) from None
    raw = parse_config(text, path)
    for section, key, value in overrides:
        raw = override(raw, section, key, value)
    return validate(raw, path)


_logger = logging.getLogger(__name__)


def _unittest_defaults() -> None:
    config = validate({})
    assert config.training.bcomm_fraction == 0.5
    assert config.training.aggregator == Aggregator.OPA
    assert config.tiers.fractions == (0.25, 0.25, 0.25, 0.25)
    assert config.space_config == SpaceConfig()
    assert config.data.import_path is None
    assert config.search == SearchConfig()
    assert config.finetune.schedule == Schedule.COSINE
    assert config.rand_init.rounds == 60
    assert config.baselines == (BASELINE_RAND_INIT,)
    assert config.space.L == 4
    assert validate(parse_config(config.render())) == config
    assert config.digest == validate(parse_config('[run]\nthreads = 8\n')).digest
    assert config.digest != validate(parse_config('[run]\nseed = 8\n')).digest


def _unittest_validate() -> None:
    from pytest import raises

    text = '\n'.join([
        '[partition]',
        'clients = 16',
        '[tiers]',
        'count = 2',
        'fractions = [0.75, 0.25]',
        '[supernet]',
        'aggregator = "fedavg"',
        'clip_norm = 0',
        '[search]',
        'eval = "federated"',
        '[space]',
        'candidates = [["conv1x1", "conv3x3"], ["identity", "conv1x1", "dwsep3x3_e1"], ["identity", "conv3x3"],'
        ' ["dwsep1x1_e2", "conv1x1"]]',
    ])
    config = validate(parse_config(text, 'exp.ini'), 'exp.ini')
    assert config.tiers.fractions == (0.75, 0.25)
    assert config.training.aggregator == Aggregator.FEDAVG
    assert config.training.local.clip_norm is None
    assert config.search.federated
    assert config.space_config.candidates[0] == ('conv1x1', 'conv3x3')
    assert config.space.layers[0].mandatory
    rendered = config.render()
    assert 'fractions = [0.75, 0.25]' in rendered
    assert validate(parse_config(rendered)) == config

    def invalid(text: str, line: typing.Optional[int], match: str) -> None:
        with raises(InvalidConfigError, match=match) as ex_info:
            validate(parse_config(text, 'exp.ini'), 'exp.ini')
        assert ex_info.value.line == line and ex_info.value.path == 'exp.ini'

    invalid('[tiers]\nfractions = [0.5, 0.4, 0.05, 0.05]\n\nfractions = [0.5]', 4, r'.*Duplicate.*')
    invalid('[tiers]\n\nfractions = [0.5, 0.4, 0.05, 0.01]', 3, r'.*tiers.fractions.*sum up to one.*')
    invalid('[tiers]\ncount = 2\nrho_high = 1.0', 3, r'.*tiers.rho_high.*below one.*')
    invalid('[space]\ncandidates = ["conv1x1", "conv5x5"]', 2, r'.*unknown operator.*conv5x5.*dwsep3x3_e2.*')
    invalid('[space]\ncandidates = [["conv1x1", "conv3x3"], ["identity", "conv3x3"]]', 2, r'.*candidate lists.*')
    invalid('[supernet]\nbcomm_fraction = 1.5', 2, r'.*supernet.bcomm_fraction.*')
    invalid('[supernet]\nbcomm_fraction = 0', 2, r'.*supernet.bcomm_fraction.*')
    invalid('[supernet]\nrounds = 1.5', 2, r'.*supernet.rounds.*integer.*')
    invalid('[supernet]\nper_client_subspace = 1', 2, r'.*boolean.*')
    invalid('[supernet]\naggregator = "median"', 2, r'.*valid values: fedavg, opa.*')
    invalid('[supernet]\nclients_per_round = 33', 2, r'.*cannot exceed.*')
    invalid('[finetune]\nbaselines = ["rand_init", "rand_init"]', 2, r'.*duplicate.*')
    invalid('[run]\nthreads = 0', 2, r'.*run.threads.*at least 1.*')
    invalid('[run]\nverbose = true', 2, r'.*Unknown key run.verbose.*valid keys: seed, threads.*')
    invalid('[plot]\nx = 1', 2, r'.*Unknown section \[plot\].*')
    invalid('[data]\nimport_path = "/nonexistent/directory"', 2, r'.*does not exist.*')

    # Overrides lose the line number.
    with raises(InvalidConfigError, match=r'.*supernet.bcomm_fraction.*') as ex_info:
        validate(override(parse_config('[supernet]\nbcomm_fraction = 0.25'), 'supernet', 'bcomm_fraction', 2.0))
    assert ex_info.value.line is None


def _unittest_load_config() -> None:
    import tempfile
    from pytest import raises

    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, CONFIG_FILE_NAME)
        with open(path, 'w') as f:
            f.write('[run]\nseed = 7\n[supernet]\nbcomm_fraction = 0.25\n')
        config = load_config(path, [('run', 'seed', 3), ('search', 'eval', EVAL_FEDERATED)])
        assert config.seed == 3
        assert config.training.bcomm_fraction == 0.25
        assert config.search.federated

        with raises(InvalidConfigError) as ex_info:
            load_config(os.path.join(directory, 'missing.ini'))
        assert ex_info.value.path is not None and ex_info.value.path.endswith('missing.ini')

    assert load_config(None) == validate({})
