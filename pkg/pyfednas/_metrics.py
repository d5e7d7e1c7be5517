#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import os
import csv
import json
import math
import typing
import logging
import numpy
from ._error import InvalidConfigError
from ._space import SearchSpace, Model, Path
from ._finetune import TierModel, Provenance


# Bump the version of a table whenever its columns change.
PARTITION_SCHEMA = 'partition-1'
SUPERNET_ROUNDS_SCHEMA = 'supernet-rounds-1'
SEARCH_TRACE_SCHEMA = 'search-trace-1'
FINETUNE_ROUNDS_SCHEMA = 'finetune-rounds-1'
REPORT_SCHEMA = 'report-1'
SUMMARY_SCHEMA = 'summary-1'
MODEL_FORMAT = 'pyfednas-model-1'

PARTITION_COLUMNS = 'client', 'tier', 'samples', 'val_samples', 'class_counts'
SUPERNET_ROUNDS_COLUMNS = (
    'round', 'participants', 'failed', 'params_down', 'params_up', 'bytes_down', 'bytes_up',
    'max_subspace_params', 'mean_loss', 'training_flops', 'probe_accuracy',
)
SEARCH_TRACE_COLUMNS = (
    'tier', 'iteration', 'best_metric', 'front_size', 'population_size', 'evaluations', 'union_params',
    'fe_comm', 'tau',
)
FINETUNE_ROUNDS_COLUMNS = (
    'tier', 'provenance', 'round', 'participants', 'failed', 'lr', 'mean_loss', 'training_flops', 'val_accuracy',
)
REPORT_COLUMNS = 'tier', 'provenance', 'runs', 'test_accuracy_mean', 'test_accuracy_std'

SCHEMAS = {
    'partition.csv':        (PARTITION_SCHEMA, PARTITION_COLUMNS),
    'supernet_rounds.csv':  (SUPERNET_ROUNDS_SCHEMA, SUPERNET_ROUNDS_COLUMNS),
    'search_trace.csv':     (SEARCH_TRACE_SCHEMA, SEARCH_TRACE_COLUMNS),
    'finetune_rounds.csv':  (FINETUNE_ROUNDS_SCHEMA, FINETUNE_ROUNDS_COLUMNS),
    'report.csv':           (REPORT_SCHEMA, REPORT_COLUMNS),
}

_PAYLOAD_DTYPE = numpy.dtype('<f8')

Cell = typing.Union[None, bool, int, float, str, typing.Sequence[typing.Any], typing.Mapping[int, float]]


def format_cell(value: Cell) -> str:
    """
    Floats are written with repr() so that equal runs produce byte-identical files.

    >>> [format_cell(x) for x in (None, True, 3, 0.1, 'opa', [1, 2], {1: 0.5, 0: 0.25})]
    ['', 'true', '3', '0.1', 'opa', '1;2', '0:0.25;1:0.5']
    """
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (int, str)):
        return str(value)
    if isinstance(value, typing.Mapping):
        return ';'.join('%s:%s' % (k, format_cell(value[k])) for k in sorted(value))
    return ';'.join(format_cell(x) for x in value)


class CSVSink:
    """
    A table written row by row; every row is flushed so that a failed run keeps what it has produced.
    """

    def __init__(self, path: str, columns: typing.Sequence[str]):
        self._path = path
        self._columns = tuple(columns)
        self._file = open(path, 'w', newline='')
        self._writer = csv.writer(self._file, lineterminator='\n')
        self._writer.writerow(self._columns)
        self._file.flush()

    @property
    def path(self) -> str:
        return self._path

    def write(self, row: typing.Mapping[str, Cell]) -> None:
        if set(row) != set(self._columns):
            raise ValueError('%s: expected columns %s, got %s' % (self._path, sorted(self._columns), sorted(row)))
        self._writer.writerow([format_cell(row[c]) for c in self._columns])
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> 'CSVSink':
        return self

    def __exit__(self, *_: typing.Any) -> None:
        self.close()


def read_csv(path: str) -> typing.List[typing.Dict[str, str]]:
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def write_json(path: str, obj: typing.Any) -> None:
    with open(path, 'w') as f:
        f.write(json.dumps(obj, indent=2, sort_keys=True) + '\n')


def read_json(path: str) -> typing.Any:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, ValueError) as ex:
        raise InvalidConfigError('Cannot read JSON: %s' % ex, path=path) from None


def model_file_names(tier: int, provenance: Provenance) -> typing.Tuple[str, str]:
    """
    >>> model_file_names(2, Provenance.SUPERNET_INIT)
    ('tier2.bin', 'tier2.json')
    >>> model_file_names(0, Provenance.RAND_INIT)
    ('tier0.rand-init.bin', 'tier0.rand-init.json')
    """
    base = 'tier%d' % tier if provenance == Provenance.SUPERNET_INIT else 'tier%d.%s' % (tier, provenance.value)
    return base + '.bin', base + '.json'


def save_model(model: TierModel, directory: str) -> typing.Tuple[str, str]:
    """
    The blob is the concatenation of all parameter values in the model's parameter order as little-endian
    float64; the manifest lists the names and shapes in that order along with the path and the space digest.
    """
    bin_name, json_name = model_file_names(model.tier, model.provenance)
    named = model.model.named_parameters()
    with open(os.path.join(directory, bin_name), 'wb') as f:
        for _, p in named:
            f.write(numpy.ascontiguousarray(p.value, dtype=_PAYLOAD_DTYPE).tobytes())
    write_json(os.path.join(directory, json_name), {
        'format': MODEL_FORMAT,
        'tier': model.tier,
        'provenance': model.provenance.value,
        'path': list(model.path),
        'space_digest': model.model.space.digest,
        'params': model.cost.params,
        'flops': model.cost.flops,
        'parameters': [{'name': n, 'shape': list(p.shape)} for n, p in named],
    })
    _logger.debug('Saved %r into %s', model, bin_name)
    return bin_name, json_name


def load_model(directory: str, tier: int, space: SearchSpace,
               provenance: Provenance = Provenance.SUPERNET_INIT) -> TierModel:
    bin_name, json_name = model_file_names(tier, provenance)
    manifest_path = os.path.join(directory, json_name)
    manifest = read_json(manifest_path)
    if not isinstance(manifest, dict) or manifest.get('format') != MODEL_FORMAT:
        raise InvalidConfigError('Unsupported model format; expected %r' % MODEL_FORMAT, path=manifest_path)
    if manifest.get('space_digest') != space.digest:
        raise InvalidConfigError('The model was built for a different search space', path=manifest_path)

    path = Path(int(x) for x in manifest['path'])
    # The values are overwritten below; the generator only provides the structure.
    model = Model.initialize(space, path, numpy.random.default_rng(0))
    named = model.named_parameters()
    expected = [{'name': n, 'shape': list(p.shape)} for n, p in named]
    if manifest.get('parameters') != expected:
        raise InvalidConfigError('The parameter layout does not match the path %s' % path, path=manifest_path)

    blob_path = os.path.join(directory, bin_name)
    try:
        with open(blob_path, 'rb') as f:
            payload = numpy.frombuffer(f.read(), dtype=_PAYLOAD_DTYPE)
    except OSError as ex:
        raise InvalidConfigError('Cannot read the model: %s' % ex.strerror, path=blob_path) from None
    if payload.size != sum(p.size for _, p in named):
        raise InvalidConfigError('Expected %d values, found %d' % (sum(p.size for _, p in named), payload.size),
                                 path=blob_path)
    offset = 0
    for _, p in named:
        p.value = payload[offset:offset + p.size].reshape(p.shape).astype(numpy.float64)
        offset += p.size
    return TierModel(int(manifest['tier']), model, Provenance(manifest['provenance']))


def mean_std(values: typing.Sequence[float]) -> typing.Tuple[float, float]:
    """
    Sample standard deviation; zero for a single value.

    >>> mean_std([1.0, 2.0, 3.0])
    (2.0, 1.0)
    >>> mean_std([0.5])
    (0.5, 0.0)
    """
    if not values:
        return math.nan, math.nan
    arr = numpy.asarray(values, dtype=numpy.float64)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


_logger = logging.getLogger(__name__)


def _unittest_csv_sink() -> None:
    import tempfile
    from pytest import raises

    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'table.csv')
        with CSVSink(path, ('round', 'loss', 'probe')) as sink:
            sink.write({'round': 0, 'loss': 1 / 3, 'probe': None})
            sink.write({'round': 1, 'loss': 0.25, 'probe': {0: 0.5}})
            with raises(ValueError):
                sink.write({'round': 2})
        with open(path) as f:
            assert f.read() == 'round,loss,probe\n0,0.3333333333333333,\n1,0.25,0:0.5\n'
        rows = read_csv(path)
        assert rows[0] == {'round': '0', 'loss': '0.3333333333333333', 'probe': ''}
        assert float(rows[0]['loss']) == 1 / 3

        write_json(os.path.join(directory, 'x.json'), {'b': [1.5], 'a': None})
        assert read_json(os.path.join(directory, 'x.json')) == {'a': None, 'b': [1.5]}
        with raises(InvalidConfigError):
            read_json(os.path.join(directory, 'missing.json'))


def _unittest_model_files() -> None:
    import tempfile
    from pytest import raises
    from ._space import build_space, SpaceConfig, Supernet, extract_model

    space = build_space(SpaceConfig(), classes=4)
    supernet = Supernet(space, numpy.random.default_rng(0))
    path = Path([2, 5, 1, 3])
    model = TierModel(1, extract_model(supernet, path), Provenance.SUPERNET_INIT)
    x = numpy.random.default_rng(1).normal(size=(3,) + space.input_shape)

    with tempfile.TemporaryDirectory() as directory:
        assert save_model(model, directory) == ('tier1.bin', 'tier1.json')
        with open(os.path.join(directory, 'tier1.bin'), 'rb') as f:
            assert len(f.read()) == 8 * model.model.param_count
        loaded = load_model(directory, 1, space)
        assert loaded.path == path and loaded.tier == 1 and loaded.provenance == Provenance.SUPERNET_INIT
        assert numpy.array_equal(loaded.model.forward(x), model.model.forward(x))

        with raises(InvalidConfigError, match=r'.*different search space.*'):
            load_model(directory, 1, build_space(SpaceConfig(stem_channels=6), classes=4))
        with raises(InvalidConfigError):
            load_model(directory, 2, space)

        with open(os.path.join(directory, 'tier1.bin'), 'ab') as f:
            f.write(b'\0' * 8)
        with raises(InvalidConfigError, match=r'.*Expected \d+ values.*'):
            load_model(directory, 1, space)
