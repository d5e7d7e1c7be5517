#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import os
import sys
import time
import typing
import logging
import argparse
from ._error import SimulationError, InvalidConfigError, InternalError
from ._config import load_config, EVAL_CENTRAL, EVAL_FEDERATED
from ._federated import Aggregator
from ._experiment import Experiment, COMMANDS, report


OUTPUT_DIRECTORY_ENVIRONMENT_VARIABLE = 'FEDORAS_SIM_OUT'

COMMAND_REPORT = 'report'

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    args = _make_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)-8s %(message)s')
    out = args.out or os.environ.get(OUTPUT_DIRECTORY_ENVIRONMENT_VARIABLE) or None
    started_at = time.monotonic()
    try:
        if args.command == COMMAND_REPORT:
            rows = report(args.runs, out)
            for r in rows:
                print(r)
        else:
            if out is None:
                raise InvalidConfigError('The output directory is not set; use --out or set %s' %
                                         OUTPUT_DIRECTORY_ENVIRONMENT_VARIABLE)
            config = load_config(args.config, _overrides(args))
            Experiment(config, out, threads=args.threads).run(args.command)

    except InvalidConfigError as ex:
        print(ex, file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except InternalError as ex:
        print('Internal error:', ex, file=sys.stderr)
        return EXIT_FAILURE
    except SimulationError as ex:
        print(ex, file=sys.stderr)
        return EXIT_FAILURE

    _logger.info('Done in %.1f s', time.monotonic() - started_at)
    return EXIT_SUCCESS


def _overrides(args: argparse.Namespace) -> typing.List[typing.Tuple[str, str, typing.Any]]:
    """Command line options take precedence over the configuration file."""
    out = []    # type: typing.List[typing.Tuple[str, str, typing.Any]]
    for value, section, key in [
        (args.seed,         'run',      'seed'),
        (args.threads,      'run',      'threads'),
        (args.aggregator,   'supernet', 'aggregator'),
        (args.bcomm_frac,   'supernet', 'bcomm_fraction'),
        (args.eval,         'search',   'eval'),
        (args.fe_rounds,    'search',   'fe_rounds'),
    ]:
        if value is not None:
            out.append((section, key, value))
    return out


def _make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', metavar='DIR',
                        help='run directory; defaults to $%s' % OUTPUT_DIRECTORY_ENVIRONMENT_VARIABLE)
    common.add_argument('--verbose', '-v', action='store_true', help='log debug messages')

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument('--config', metavar='PATH', help='experiment configuration file')
    experiment.add_argument('--seed', type=int, metavar='N', help='master seed')
    experiment.add_argument('--threads', type=int, metavar='N', help='worker threads; results do not depend on it')
    experiment.add_argument('--aggregator', choices=[a.value for a in Aggregator], help='supernet aggregation rule')
    experiment.add_argument('--bcomm-frac', type=float, metavar='F',
                            help='communication budget as a fraction of the searchable supernet size')
    experiment.add_argument('--eval', choices=[EVAL_CENTRAL, EVAL_FEDERATED], help='search-time evaluation mode')
    experiment.add_argument('--fe-rounds', type=int, metavar='N', help='federated evaluation rounds per batch')

    parser = argparse.ArgumentParser(prog='pyfednas',
                                     description='Resource-aware federated neural architecture search simulator.')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    descriptions = {
        'partition':        'generate the data, the client partition and the tiers',
        'train-supernet':   'partition, then train the supernet federatedly',
        'search':           'train the supernet, then search every tier',
        'finetune':         'fine-tune the models found by an earlier search in the same run directory',
        'e2e':              'run every stage in order',
    }
    assert set(descriptions) == set(COMMANDS)
    for name in COMMANDS:
        commands.add_parser(name, parents=[common, experiment], help=descriptions[name])

    p = commands.add_parser(COMMAND_REPORT, parents=[common], help='aggregate the results of several runs')
    p.add_argument('runs', nargs='+', metavar='RUN', help='run directories')
    return parser


_logger = logging.getLogger(__name__)


def _unittest_overrides() -> None:
    from pytest import raises

    args = _make_parser().parse_args(['e2e', '--seed', '3', '--bcomm-frac', '0.25', '--eval', 'federated'])
    assert args.command == 'e2e'
    assert _overrides(args) == [
        ('run', 'seed', 3),
        ('supernet', 'bcomm_fraction', 0.25),
        ('search', 'eval', 'federated'),
    ]

    args = _make_parser().parse_args(['report', 'a', 'b'])
    assert args.runs == ['a', 'b']

    with raises(SystemExit):
        _make_parser().parse_args(['e2e', '--aggregator', 'median'])

    with raises(SystemExit):
        _make_parser().parse_args([])


def _unittest_main_errors() -> None:
    import tempfile

    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'bad.ini')
        with open(path, 'w') as f:
            f.write('[tiers]\nfractions = [0.5, 0.25]\n')
        assert main(['partition', '--config', path, '--out', directory]) == EXIT_INVALID_CONFIG
        assert main(['report', os.path.join(directory, 'missing')]) == EXIT_INVALID_CONFIG
