#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import os
import math
import time
import typing
import logging
import contextlib
import numpy
from . import _random
from . import _metrics
from ._error import InvalidConfigError
from ._config import ExperimentConfig, CONFIG_FILE_NAME, BASELINE_RAND_INIT, BASELINE_RANDOM_SEARCH
from ._data import Dataset, ClientShard, gen_synthetic, load_dataset, holdout_split, val_subsample
from ._data import lda_partition, assign_tiers, partition_validation
from ._space import SearchSpace, Supernet, TierSpec, Path, tier_boundaries
from ._federated import Client, RoundReport, make_clients, train_supernet
from ._search import SearchResult, IterationRecord, Metric, CentralEvaluator, FederatedEvaluator, nsga2_search
from ._search import evaluate_centralized, kendall_tau
from ._finetune import TierModel, FinetuneReport, Provenance, finetune_tier, rand_init_baseline
from ._finetune import random_search_baseline


class RunDirectoryError(InvalidConfigError):
    """
    The run directory lacks the artifacts of an earlier stage, or they were produced by a different experiment.
    """
    pass


RUN_FILE_NAME = 'run.json'
SUMMARY_FILE_NAME = 'summary.json'
FAILED_FILE_NAME = 'FAILED'
SEARCHED_MODELS_DIRECTORY_NAME = 'searched'
RUN_FORMAT = 'pyfednas-run-1'

COMMAND_PARTITION = 'partition'
COMMAND_TRAIN_SUPERNET = 'train-supernet'
COMMAND_SEARCH = 'search'
COMMAND_FINETUNE = 'finetune'
COMMAND_E2E = 'e2e'

COMMANDS = COMMAND_PARTITION, COMMAND_TRAIN_SUPERNET, COMMAND_SEARCH, COMMAND_FINETUNE, COMMAND_E2E

_Evaluator = typing.Union[CentralEvaluator, FederatedEvaluator]


class Setup(typing.NamedTuple):
    """Everything derived from the configuration before any training takes place."""
    space: SearchSpace
    train: Dataset
    val: Dataset
    test: Dataset
    search_val: Dataset
    shards: typing.List[ClientShard]
    clients: typing.List[Client]
    tiers: TierSpec


class ModelRecord(typing.NamedTuple):
    tier: int
    provenance: Provenance
    path: Path
    flops: int
    params: int
    training_flops: int
    val_accuracy: float
    test_accuracy: float

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            'tier': self.tier,
            'provenance': self.provenance.value,
            'path': list(self.path),
            'flops': self.flops,
            'params': self.params,
            'training_flops': self.training_flops,
            'val_accuracy': self.val_accuracy,
            'test_accuracy': self.test_accuracy,
        }


class ReportRow(typing.NamedTuple):
    tier: int
    provenance: str
    runs: int
    mean: float
    std: float

    def __str__(self) -> str:
        return 'T%d %-14s %.4f +/- %.4f (%d runs)' % (self.tier, self.provenance, self.mean, self.std, self.runs)


def prepare(config: ExperimentConfig) -> Setup:
    """
    Builds the dataset splits, the client partition and the tiers. The outcome depends on the configuration only.
    """
    seed = config.seed
    space = config.space
    data = config.data
    if data.import_path:
        dataset = load_dataset(data.import_path)
        if dataset.classes != data.classes or dataset.sample_shape != space.input_shape:
            raise InvalidConfigError('The imported dataset has %d classes of shape %r, the configuration expects %d '
                                     'classes of shape %r' % (dataset.classes, dataset.sample_shape, data.classes,
                                                               space.input_shape), path=data.import_path)
    else:
        c, h, w = space.input_shape
        dataset = gen_synthetic(data.classes, data.samples, data.noise, seed, shape=(c, h, w))

    train, val, test = holdout_split(dataset, data.val_fraction, data.test_fraction,
                                     _random.derive(seed, _random.STAGE_DATA, 1))
    search_val = val_subsample(val, data.val_subsample, _random.derive(seed, _random.STAGE_DATA, 2))

    partition = config.partition
    shards = lda_partition(train, partition.clients, partition.alpha, _random.derive(seed, _random.STAGE_PARTITION, 0))
    tier_config = config.tiers
    tiers = tier_boundaries(space, tier_config.count, tier_config.rho_low, tier_config.rho_high,
                            _random.derive(seed, _random.STAGE_TIERS), tier_config.samples, tier_config.fractions)
    shards = assign_tiers(shards, tiers.client_fractions, _random.derive(seed, _random.STAGE_PARTITION, 1))
    # The validation shards partition the search-time validation set, so that exhaustive federated evaluation
    # sees exactly the samples of the centralized one.
    shards = partition_validation(search_val, shards, _random.derive(seed, _random.STAGE_PARTITION, 2))
    clients = make_clients(shards, train, search_val)
    return Setup(space, train, val, test, search_val, shards, clients, tiers)


class RunDirectory:
    """The output directory of one experiment; creates it if necessary."""

    def __init__(self, path: str):
        self._path = os.path.abspath(path)
        os.makedirs(self._path, exist_ok=True)

    @property
    def path(self) -> str:
        return self._path

    def file(self, *name: str) -> str:
        return os.path.join(self._path, *name)

    def sink(self, name: str) -> _metrics.CSVSink:
        _, columns = _metrics.SCHEMAS[name]
        return _metrics.CSVSink(self.file(name), columns)

    def read_json(self, name: str) -> typing.Dict[str, typing.Any]:
        """Empty if the file does not exist."""
        if not os.path.exists(self.file(name)):
            return {}
        out = _metrics.read_json(self.file(name))
        if not isinstance(out, dict):
            raise RunDirectoryError('Expected a JSON object', path=self.file(name))
        return out

    def update_summary(self, **sections: typing.Any) -> None:
        summary = self.read_json(SUMMARY_FILE_NAME)
        summary.update(sections)
        summary['schema'] = _metrics.SUMMARY_SCHEMA
        _metrics.write_json(self.file(SUMMARY_FILE_NAME), summary)

    @contextlib.contextmanager
    def failure_marker(self) -> typing.Iterator[None]:
        """Leaves a marker file with the error text if the enclosed block fails; the artifacts are retained."""
        marker = self.file(FAILED_FILE_NAME)
        if os.path.exists(marker):
            os.remove(marker)
        try:
            yield
        except Exception as ex:
            with open(marker, 'w') as f:
                f.write('%s: %s\n' % (type(ex).__name__, ex))
            raise

    def __repr__(self) -> str:
        return 'RunDirectory(%r)' % self._path


class Experiment:
    """
    Runs the stages of one experiment and writes their artifacts into the run directory.
    The thread count overrides the configuration; it never affects the results.
    """

    def __init__(self, config: ExperimentConfig, directory: str, threads: typing.Optional[int] = None):
        self._config = config
        self._directory = RunDirectory(directory)
        self._threads = max(1, threads if threads is not None else config.threads)
        self._setup = None  # type: typing.Optional[Setup]

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def directory(self) -> RunDirectory:
        return self._directory

    @property
    def setup(self) -> Setup:
        if self._setup is None:
            self._setup = prepare(self._config)
        return self._setup

    def run(self, command: str) -> None:
        """Executes the stages that the command requires, in order. Raises on failure after marking the run."""
        if command not in COMMANDS:
            raise ValueError('Unknown command %r; valid commands: %s' % (command, ', '.join(COMMANDS)))
        started_at = time.monotonic()
        with self._directory.failure_marker():
            if command == COMMAND_FINETUNE:
                self._check_previous_run()
            self._write_run_file(command)
            self.partition()
            if command in (COMMAND_TRAIN_SUPERNET, COMMAND_SEARCH, COMMAND_E2E):
                supernet = self.train_supernet()
                if command in (COMMAND_SEARCH, COMMAND_E2E):
                    searched = self.search(supernet)
                    if command == COMMAND_E2E:
                        self.finetune(searched)
            elif command == COMMAND_FINETUNE:
                self.finetune(self.load_searched_models())
        _logger.info('Command %r completed in %.1f s; artifacts in %s', command, time.monotonic() - started_at,
                     self._directory.path)

    # ================================================== Stages ==================================================

    def partition(self) -> Setup:
        setup = self.setup
        with self._directory.sink('partition.csv') as sink:
            for shard in setup.shards:
                sink.write({
                    'client': shard.client_id,
                    'tier': shard.tier,
                    'samples': shard.size,
                    'val_samples': len(shard.val_indices) if shard.val_indices is not None else 0,
                    'class_counts': numpy.bincount(setup.train.labels[shard.indices],
                                                   minlength=setup.train.classes).tolist(),
                })
        for tier in range(setup.tiers.count):
            lo, hi = setup.tiers.interval(tier)
            _logger.info(_LOG_LIST_ITEM_PREFIX + 'tier %d: FLOPs %s%.0f, %.0f], %d clients', tier,
                         '[' if tier == 0 else '(', lo, hi, sum(1 for c in setup.clients if c.tier == tier))
        return setup

    def train_supernet(self) -> Supernet:
        setup = self.setup
        supernet = Supernet(setup.space, _random.derive(self._config.seed, _random.STAGE_SUPERNET))
        with self._directory.sink('supernet_rounds.csv') as sink:
            history = train_supernet(supernet, setup.clients, setup.tiers, self._config.training, self._config.seed,
                                     val=setup.search_val,
                                     threads=self._threads,
                                     on_round=lambda r: sink.write(_round_row(r)))
        probes = [r.probe for r in history if r.probe is not None]
        self._directory.update_summary(supernet={
            'rounds': len(history),
            'training_flops': sum(r.training_flops for r in history),
            'params_down': sum(r.params_down for r in history),
            'params_up': sum(r.params_up for r in history),
            'bytes_down': sum(r.bytes_down for r in history),
            'bytes_up': sum(r.bytes_up for r in history),
            'final_probe': {str(t): a for t, a in sorted(probes[-1].items())} if probes else None,
        })
        return supernet

    def search(self, supernet: Supernet) -> typing.Dict[int, TierModel]:
        """Searches every tier and stores the winning architectures with their inherited weights."""
        setup = self.setup
        search = self._config.search
        results = []    # type: typing.List[typing.Tuple[SearchResult, typing.Optional[int]]]
        with self._directory.sink('search_trace.csv') as sink:
            for tier in range(setup.tiers.count):
                if search.federated:
                    evaluator = FederatedEvaluator(supernet, setup.clients, setup.tiers, search.fe_rounds,
                                                   search.fe_clients_per_round, self._config.seed, tier,
                                                   search.metric)  # type: _Evaluator
                else:
                    evaluator = CentralEvaluator(supernet, setup.search_val, search.metric, self._threads)

                def observe(record: IterationRecord, fresh: typing.List[Path]) -> None:
                    fe_comm, tau = None, None   # type: typing.Optional[int], typing.Optional[float]
                    if isinstance(evaluator, FederatedEvaluator):
                        fe_comm = evaluator.comm_cost
                        tau = _fidelity(supernet, evaluator, fresh, setup.search_val, search.metric)
                    sink.write(_trace_row(record, fe_comm, tau))

                result = nsga2_search(setup.space, setup.tiers, tier, evaluator, search.iterations,
                                      _random.derive(self._config.seed, _random.STAGE_SEARCH, tier),
                                      population=search.population,
                                      sample=search.sample,
                                      observer=observe)
                fe_total = evaluator.comm_cost if isinstance(evaluator, FederatedEvaluator) else None
                results.append((result, fe_total))

        directory = self._directory.file(SEARCHED_MODELS_DIRECTORY_NAME)
        os.makedirs(directory, exist_ok=True)
        out = {}    # type: typing.Dict[int, TierModel]
        for result, _ in results:
            out[result.tier] = TierModel.from_supernet(supernet, result.best.path, result.tier, setup.tiers)
            _metrics.save_model(out[result.tier], directory)
        self._directory.update_summary(search={'tiers': [_search_json(r, c, setup.tiers) for r, c in results]})
        return out

    def load_searched_models(self) -> typing.Dict[int, TierModel]:
        directory = self._directory.file(SEARCHED_MODELS_DIRECTORY_NAME)
        return {t: _metrics.load_model(directory, t, self.setup.space) for t in range(self.setup.tiers.count)}

    def finetune(self, searched: typing.Mapping[int, TierModel]) -> typing.List[ModelRecord]:
        """
        Fine-tunes the searched models within their tiers, then runs the configured baselines.
        The random search gets the training cost of the whole pipeline as its budget.
        """
        setup = self.setup
        config = self._config
        supernet_summary = self._directory.read_json(SUMMARY_FILE_NAME).get('supernet')
        if not isinstance(supernet_summary, dict):
            raise RunDirectoryError('The supernet stage has not been completed', path=self._directory.file(
                SUMMARY_FILE_NAME))
        pipeline_flops = int(supernet_summary['training_flops'])

        records = []    # type: typing.List[ModelRecord]
        with self._directory.sink('finetune_rounds.csv') as sink:
            def write(report: FinetuneReport) -> None:
                sink.write(_finetune_row(report))

            for tier in sorted(searched):
                model, history = finetune_tier(searched[tier], setup.clients, config.finetune, config.seed,
                                               val=setup.val, threads=self._threads, on_round=write)
                pipeline_flops += sum(r.training_flops for r in history)
                records.append(self._record(model, sum(r.training_flops for r in history)))

            if BASELINE_RAND_INIT in config.baselines:
                for tier in sorted(searched):
                    model, history = rand_init_baseline(setup.space, searched[tier].path, tier, setup.tiers,
                                                        setup.clients, config.rand_init, config.seed,
                                                        val=setup.val, threads=self._threads, on_round=write)
                    records.append(self._record(model, sum(r.training_flops for r in history)))

        random_search = None    # type: typing.Optional[typing.Dict[str, typing.Any]]
        if BASELINE_RANDOM_SEARCH in config.baselines:
            result = random_search_baseline(setup.space, setup.tiers, setup.clients, pipeline_flops,
                                            config.finetune, config.seed, setup.val, threads=self._threads)
            for tier, model in sorted(result.best.items()):
                # The first of the equally accurate trials is the one kept.
                winner = max((t for t in result.trials if t.tier == tier), key=lambda t: t.metric)
                records.append(self._record(model, winner.training_flops))
            random_search = {
                'budget_flops': pipeline_flops,
                'spent_flops': result.spent_flops,
                'trials': [{'path': list(t.path), 'tier': t.tier, 'val_accuracy': t.metric,
                            'training_flops': t.training_flops} for t in result.trials],
            }

        for r in records:
            _logger.info(_LOG_LIST_ITEM_PREFIX + 'tier %d %s %s: test accuracy %.4f', r.tier, r.provenance.value,
                         r.path, r.test_accuracy)
        self._directory.update_summary(models=[r.to_json() for r in records],
                                       pipeline_training_flops=pipeline_flops,
                                       random_search=random_search)
        return records

    # ================================================== Internals ==================================================

    def _record(self, model: TierModel, training_flops: int) -> ModelRecord:
        _metrics.save_model(model, self._directory.path)
        return ModelRecord(tier=model.tier,
                           provenance=model.provenance,
                           path=model.path,
                           flops=model.cost.flops,
                           params=model.cost.params,
                           training_flops=training_flops,
                           val_accuracy=model.evaluate(self.setup.val),
                           test_accuracy=model.evaluate(self.setup.test))

    def _write_run_file(self, command: str) -> None:
        from . import __version__
        _metrics.write_json(self._directory.file(RUN_FILE_NAME), {
            'format': RUN_FORMAT,
            'command': command,
            'seed': self._config.seed,
            'config_digest': self._config.digest,
            'space_digest': self._config.space.digest,
            'versions': {'pyfednas': __version__, 'numpy': numpy.__version__},
            'schemas': {name: schema for name, (schema, _) in sorted(_metrics.SCHEMAS.items())
                        if name != 'report.csv'},
        })
        with open(self._directory.file(CONFIG_FILE_NAME), 'w') as f:
            f.write(self._config.render())

    def _check_previous_run(self) -> None:
        previous = self._directory.read_json(RUN_FILE_NAME)
        if not previous:
            raise RunDirectoryError('No previous run found; run the search first', path=self._directory.path)
        if previous.get('config_digest') != self._config.digest:
            raise RunDirectoryError('The run directory was produced with a different configuration',
                                    path=self._directory.file(RUN_FILE_NAME))


def report(run_directories: typing.Sequence[str], output_directory: typing.Optional[str] = None) \
        -> typing.List[ReportRow]:
    """
    Aggregates the test accuracy of the final models of several runs into one row per tier and provenance.
    """
    if not run_directories:
        raise ValueError('At least one run directory is required')
    values = {}     # type: typing.Dict[typing.Tuple[int, str], typing.List[float]]
    for directory in run_directories:
        path = os.path.join(directory, SUMMARY_FILE_NAME)
        summary = _metrics.read_json(path)
        models = summary.get('models') if isinstance(summary, dict) else None
        if not isinstance(models, list):
            raise RunDirectoryError('The run has no fine-tuned models', path=path)
        for m in models:
            values.setdefault((int(m['tier']), str(m['provenance'])), []).append(float(m['test_accuracy']))

    rows = []
    for (tier, provenance), accuracies in sorted(values.items()):
        mean, std = _metrics.mean_std(accuracies)
        rows.append(ReportRow(tier, provenance, len(accuracies), mean, std))

    if output_directory is not None:
        with RunDirectory(output_directory).sink('report.csv') as sink:
            for r in rows:
                sink.write({'tier': r.tier, 'provenance': r.provenance, 'runs': r.runs,
                            'test_accuracy_mean': r.mean, 'test_accuracy_std': r.std})
    return rows


def _fidelity(supernet: Supernet,
              evaluator: FederatedEvaluator,
              fresh: typing.Sequence[Path],
              val: Dataset,
              metric: Metric) -> typing.Optional[float]:
    """Kendall tau between the federated and the centralized scores of the latest batch, where both exist."""
    last = evaluator.last
    if not fresh or last is None or len(last.metrics) != len(fresh):
        return None
    pairs = [(m, evaluate_centralized(supernet, p, val, metric)) for p, m in zip(fresh, last.metrics) if m is not None]
    if len(pairs) < 2:
        return None
    return kendall_tau([a for a, _ in pairs], [b for _, b in pairs])


def _finite_or_none(value: float) -> typing.Optional[float]:
    return value if math.isfinite(value) else None


def _round_row(report: RoundReport) -> typing.Dict[str, _metrics.Cell]:
    return {
        'round': report.round_index,
        'participants': len(report.participants),
        'failed': len(report.failed),
        'params_down': report.params_down,
        'params_up': report.params_up,
        'bytes_down': report.bytes_down,
        'bytes_up': report.bytes_up,
        'max_subspace_params': report.max_subspace_params,
        'mean_loss': report.mean_loss,
        'training_flops': report.training_flops,
        'probe_accuracy': report.probe,
    }


def _trace_row(record: IterationRecord,
               fe_comm: typing.Optional[int],
               tau: typing.Optional[float]) -> typing.Dict[str, _metrics.Cell]:
    return {
        'tier': record.tier,
        'iteration': record.iteration,
        'best_metric': _finite_or_none(record.best_metric),
        'front_size': record.front_size,
        'population_size': record.population_size,
        'evaluations': record.evaluations,
        'union_params': record.union_params,
        'fe_comm': fe_comm,
        'tau': tau,
    }


def _finetune_row(report: FinetuneReport) -> typing.Dict[str, _metrics.Cell]:
    return {
        'tier': report.tier,
        'provenance': report.provenance.value,
        'round': report.round_index,
        'participants': len(report.participants),
        'failed': len(report.failed),
        'lr': report.lr,
        'mean_loss': report.mean_loss,
        'training_flops': report.training_flops,
        'val_accuracy': report.val_accuracy,
    }


def _search_json(result: SearchResult, fe_comm: typing.Optional[int], tiers: TierSpec) -> typing.Dict[str, typing.Any]:
    def individual(m: typing.Any) -> typing.Dict[str, typing.Any]:
        return {'path': list(m.path), 'metric': _finite_or_none(m.metric), 'flops': m.flops}

    return {
        'tier': result.tier,
        'interval': list(tiers.interval(result.tier)),
        'best': individual(result.best),
        'front': [individual(m) for m in result.front],
        'evaluations': result.trace[-1].evaluations,
        'fe_comm': fe_comm,
    }


_LOG_LIST_ITEM_PREFIX = ' ' * 4

_logger = logging.getLogger(__name__)
