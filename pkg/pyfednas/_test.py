#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

"""
Cross-module scenarios: whole experiments at a scale that completes in seconds.
"""

import os
import typing
import tempfile
import numpy
from . import _metrics
from . import _experiment
from ._config import load_config, parse_config, validate, ExperimentConfig, CONFIG_FILE_NAME
from ._space import Supernet, Path, full_subspace, enumerate_feasible_paths
from ._search import evaluate_centralized, evaluate_federated
from ._finetune import Provenance
from ._error import InvalidConfigError


# Two tiers over a nine-path space: the cheapest six paths form tier 0, the remaining three tier 1.
_TINY_CONFIG = '''
# Nine architectures, eight clients.
[space]
stem_channels    = 4
blocks           = 1
layers_per_block = 2
candidates       = ["identity", "conv1x1", "conv3x3"]

[data]
classes = 3
samples = 480

[partition]
clients = 8

[tiers]
count    = 2
rho_high = 0.6
samples  = 2000

[supernet]
rounds            = 3
clients_per_round = 4
probe_interval    = 2
probe_paths       = 2

[search]
iterations = 2
population = 4
sample     = 4

[finetune]
rounds            = 2
clients_per_round = 3
baselines         = ["rand_init", "random_search"]
rand_init_rounds  = 2
'''

_METRICS_FILES = 'partition.csv', 'supernet_rounds.csv', 'search_trace.csv', 'finetune_rounds.csv'


def _tiny_config(*overrides: typing.Tuple[str, str, typing.Any]) -> ExperimentConfig:
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, CONFIG_FILE_NAME)
        with open(path, 'w') as f:
            f.write(_TINY_CONFIG)
        return load_config(path, overrides)


def _read_bytes(directory: str, name: str) -> bytes:
    with open(os.path.join(directory, name), 'rb') as f:
        return f.read()


def _unittest_e2e_artifacts() -> None:
    config = _tiny_config()
    with tempfile.TemporaryDirectory() as directory:
        experiment = _experiment.Experiment(config, directory)
        experiment.run(_experiment.COMMAND_E2E)
        setup = experiment.setup
        assert setup.tiers.count == 2

        assert not os.path.exists(os.path.join(directory, _experiment.FAILED_FILE_NAME))
        for name in _METRICS_FILES:
            rows = _metrics.read_csv(os.path.join(directory, name))
            with open(os.path.join(directory, name)) as f:
                assert f.readline().rstrip('\n').split(',') == list(_metrics.SCHEMAS[name][1])
            assert rows, name

        partition = _metrics.read_csv(os.path.join(directory, 'partition.csv'))
        assert len(partition) == 8
        assert sum(int(r['samples']) for r in partition) == len(setup.train)
        assert sum(int(r['val_samples']) for r in partition) == len(setup.search_val)
        assert {r['tier'] for r in partition} == {'0', '1'}

        rounds = _metrics.read_csv(os.path.join(directory, 'supernet_rounds.csv'))
        assert [r['round'] for r in rounds] == ['0', '1', '2']
        assert [bool(r['probe_accuracy']) for r in rounds] == [False, True, True]
        assert all(int(r['bytes_down']) == 8 * int(r['params_down']) for r in rounds)

        trace = _metrics.read_csv(os.path.join(directory, 'search_trace.csv'))
        assert [(r['tier'], r['iteration']) for r in trace] == [(str(t), str(i)) for t in range(2) for i in range(3)]
        assert all(r['fe_comm'] == '' and r['tau'] == '' for r in trace)

        finetune = _metrics.read_csv(os.path.join(directory, 'finetune_rounds.csv'))
        assert {(r['tier'], r['provenance']) for r in finetune} == \
            {(str(t), p.value) for t in range(2) for p in (Provenance.SUPERNET_INIT, Provenance.RAND_INIT)}
        assert all(r['val_accuracy'] for r in finetune)

        # The normalized configuration reproduces the experiment.
        with open(os.path.join(directory, CONFIG_FILE_NAME)) as f:
            assert validate(parse_config(f.read())) == config

        run = _metrics.read_json(os.path.join(directory, _experiment.RUN_FILE_NAME))
        assert run['config_digest'] == config.digest
        assert run['space_digest'] == config.space.digest

        summary = _metrics.read_json(os.path.join(directory, _experiment.SUMMARY_FILE_NAME))
        assert summary['schema'] == _metrics.SUMMARY_SCHEMA
        assert summary['supernet']['rounds'] == 3
        assert summary['pipeline_training_flops'] > summary['supernet']['training_flops'] > 0
        assert summary['random_search']['spent_flops'] >= summary['random_search']['budget_flops']
        searched = {s['tier']: s['best']['path'] for s in summary['search']['tiers']}
        assert set(searched) == {0, 1}

        provenances = {(m['tier'], m['provenance']) for m in summary['models']}
        assert {(0, 'supernet-init'), (1, 'supernet-init'), (0, 'rand-init'), (1, 'rand-init')} <= provenances
        assert any(p == 'random-search' for _, p in provenances)
        for m in summary['models']:
            assert setup.tiers.contains(m['tier'], m['flops'])
            assert 0.0 <= m['test_accuracy'] <= 1.0
            provenance = Provenance(m['provenance'])
            model = _metrics.load_model(directory, m['tier'], config.space, provenance)
            assert list(model.path) == m['path']
            assert model.evaluate(setup.test) == m['test_accuracy']
            if provenance != Provenance.RANDOM_SEARCH:
                assert m['path'] == searched[m['tier']]


def _unittest_determinism_and_stages() -> None:
    config = _tiny_config()
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b, \
            tempfile.TemporaryDirectory() as c:
        _experiment.Experiment(config, a, threads=1).run(_experiment.COMMAND_E2E)
        _experiment.Experiment(config, b, threads=4).run(_experiment.COMMAND_E2E)
        for name in _METRICS_FILES:
            assert _read_bytes(a, name) == _read_bytes(b, name), name

        # The stages can be run one at a time; fine-tuning picks up the searched models from the directory.
        _experiment.Experiment(config, c, threads=2).run(_experiment.COMMAND_SEARCH)
        assert not os.path.exists(os.path.join(c, 'finetune_rounds.csv'))
        _experiment.Experiment(config, c, threads=2).run(_experiment.COMMAND_FINETUNE)
        for name in _METRICS_FILES:
            assert _read_bytes(a, name) == _read_bytes(c, name), name

        rows = _experiment.report([a, b, c])
        assert rows
        for r in rows:
            assert r.runs == 3
            assert r.std == 0.0
            assert 0.0 <= r.mean <= 1.0
        with tempfile.TemporaryDirectory() as out:
            assert _experiment.report([a, b], out) == [r._replace(runs=2) for r in rows]
            assert len(_metrics.read_csv(os.path.join(out, 'report.csv'))) == len(rows)


def _unittest_run_directory_errors() -> None:
    from pytest import raises

    config = _tiny_config()
    with tempfile.TemporaryDirectory() as directory:
        with raises(_experiment.RunDirectoryError, match=r'.*run the search first.*'):
            _experiment.Experiment(config, directory).run(_experiment.COMMAND_FINETUNE)
        with open(os.path.join(directory, _experiment.FAILED_FILE_NAME)) as f:
            assert f.read().startswith('RunDirectoryError: ')

        _experiment.Experiment(config, directory).run(_experiment.COMMAND_PARTITION)
        assert not os.path.exists(os.path.join(directory, _experiment.FAILED_FILE_NAME))
        assert os.path.exists(os.path.join(directory, 'partition.csv'))
        assert not os.path.exists(os.path.join(directory, 'supernet_rounds.csv'))

        other = _tiny_config(('run', 'seed', 5))
        with raises(_experiment.RunDirectoryError, match=r'.*different configuration.*'):
            _experiment.Experiment(other, directory).run(_experiment.COMMAND_FINETUNE)

        with raises(ValueError):
            _experiment.Experiment(config, directory).run('deploy')

        with raises(InvalidConfigError):
            _experiment.report([directory])


def _unittest_federated_evaluation_matches_central() -> None:
    from ._random import derive

    config = _tiny_config()
    setup = _experiment.prepare(config)
    assert sum(len(c.val) for c in setup.clients if c.val is not None) == len(setup.search_val)

    supernet = Supernet(setup.space, numpy.random.default_rng(3))
    # Every client may run the tier-0 paths, so exhaustive federated evaluation pools the whole validation set.
    paths = enumerate_feasible_paths(full_subspace(setup.space), setup.tiers.budget(0))
    paths = [p for p in paths if setup.tiers.tier_of(setup.space.cost_model.path_cost(p).flops) == 0]
    assert len(paths) == 6
    result = evaluate_federated(supernet, paths, setup.clients, setup.tiers, fe_rounds=1,
                                clients_per_round=len(setup.clients), rng=derive(0))
    central = [evaluate_centralized(supernet, p, setup.search_val) for p in paths]
    assert result.metrics == central
    assert sum(result.contributors) > 0


def _unittest_cli_federated_search() -> None:
    from ._cli import main, EXIT_SUCCESS

    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'tiny.ini')
        with open(path, 'w') as f:
            f.write(_TINY_CONFIG)
        out = os.path.join(directory, 'run')
        assert main(['search', '--config', path, '--out', out, '--eval', 'federated', '--fe-rounds', '1',
                     '--aggregator', 'fedavg', '--bcomm-frac', '1.0', '--seed', '7']) == EXIT_SUCCESS

        with open(os.path.join(out, CONFIG_FILE_NAME)) as f:
            config = validate(parse_config(f.read()))
        assert config.seed == 7
        assert config.search.federated and config.search.fe_rounds == 1
        assert config.training.bcomm_fraction == 1.0

        trace = _metrics.read_csv(os.path.join(out, 'search_trace.csv'))
        for tier in ('0', '1'):
            comm = [int(r['fe_comm']) for r in trace if r['tier'] == tier]
            assert comm[0] > 0
            assert comm == sorted(comm)
        assert all(r['tau'] == '' or -1.0 <= float(r['tau']) <= 1.0 for r in trace)

        searched = _metrics.read_json(os.path.join(out, _experiment.SUMMARY_FILE_NAME))['search']['tiers']
        for s in searched:
            model = _metrics.load_model(os.path.join(out, _experiment.SEARCHED_MODELS_DIRECTORY_NAME), s['tier'],
                                        config.space)
            assert model.path == Path(s['best']['path'])
