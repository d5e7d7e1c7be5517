#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import enum
import math
import time
import typing
import logging
import concurrent.futures
import numpy
from . import _kernel
from . import _random
from ._data import Dataset, ClientShard
from ._error import AggregationError, RoundAbortedError, NonFiniteGradientError, BudgetInfeasibleError
from ._space import SearchSpace, Supernet, Subspace, OperatorKey, TierSpec, Model, Path
from ._space import sample_subspace, sample_path_greedy, sample_path_rejection, full_subspace


BYTES_PER_PARAMETER = 8

# A backward pass costs about twice the forward pass.
TRAINING_FLOPS_MULTIPLIER = 3

ValuesByKey = typing.Dict[OperatorKey, _kernel.ValueSet]
# Anything that owns searchable and fixed parameter sets and accepts aggregated values.
ParameterStore = typing.Union[Supernet, Model]
FixedValues = typing.Dict[str, _kernel.ValueSet]


class Aggregator(enum.Enum):
    OPA = 'opa'
    FEDAVG = 'fedavg'


PathSampler = typing.Callable[[Subspace, int, numpy.random.Generator], Path]

PATH_SAMPLERS = {
    'greedy': sample_path_greedy,
    'rejection': sample_path_rejection,
}   # type: typing.Dict[str, PathSampler]


class LocalConfig(typing.NamedTuple):
    epochs: int = 1
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    clip_norm: typing.Optional[float] = 5.0
    sampler: str = 'greedy'


class TrainingConfig(typing.NamedTuple):
    rounds: int = 60
    clients_per_round: int = 8
    bcomm_fraction: float = 0.5
    local: LocalConfig = LocalConfig()
    probe_interval: int = 10
    probe_paths: int = 4
    per_client_subspace: bool = False
    aggregator: Aggregator = Aggregator.OPA


class Client:
    """A simulated device: its training data, its optional validation shard, and its tier."""

    def __init__(self, shard: ClientShard, train: Dataset, val: typing.Optional[Dataset] = None):
        self._shard = shard
        self._data = train.subset(shard.indices)
        self._val = None    # type: typing.Optional[Dataset]
        if val is not None and shard.val_indices is not None and len(shard.val_indices) > 0:
            self._val = val.subset(shard.val_indices)

    @property
    def client_id(self) -> int:
        return self._shard.client_id

    @property
    def tier(self) -> int:
        return self._shard.tier

    @property
    def data(self) -> Dataset:
        return self._data

    @property
    def val(self) -> typing.Optional[Dataset]:
        return self._val

    @property
    def size(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return 'Client(id=%d, tier=%d, samples=%d, val=%d)' % \
            (self.client_id, self.tier, self.size, len(self._val) if self._val is not None else 0)


def make_clients(shards: typing.Sequence[ClientShard],
                 train: Dataset,
                 val: typing.Optional[Dataset] = None) -> typing.List[Client]:
    return [Client(s, train, val) for s in sorted(shards, key=lambda s: s.client_id)]


class ClientUpdate(typing.NamedTuple):
    client_id: int
    searchable: ValuesByKey
    fixed: FixedValues
    histogram: typing.Dict[OperatorKey, int]
    total_samples: int
    samples_processed: int
    training_flops: int
    losses: typing.List[float]

    @property
    def param_count(self) -> int:
        return sum(_kernel.count_scalars(v) for v in self.searchable.values()) + \
            sum(_kernel.count_scalars(v) for v in self.fixed.values())


class RoundReport(typing.NamedTuple):
    round_index: int
    participants: typing.List[int]
    failed: typing.List[int]
    params_down: int
    params_up: int
    max_subspace_params: int
    losses: typing.Dict[int, typing.List[float]]
    training_flops: int
    probe: typing.Optional[typing.Dict[int, float]] = None

    @property
    def bytes_down(self) -> int:
        return self.params_down * BYTES_PER_PARAMETER

    @property
    def bytes_up(self) -> int:
        return self.params_up * BYTES_PER_PARAMETER

    @property
    def mean_loss(self) -> float:
        values = [x for v in self.losses.values() for x in v]
        return float(numpy.mean(values)) if values else math.nan


def communication_budget(space: typing.Union[SearchSpace, Supernet], fraction: float) -> int:
    """
    The downstream budget in parameters as a fraction of the searchable part of the supernet.
    A fraction of one admits the whole supernet.

    >>> from ._space import build_space, SpaceConfig
    >>> space = build_space(SpaceConfig(), classes=4)
    >>> communication_budget(space, 1.0) == space.cost_model.searchable_params + 1
    True
    """
    if not fraction > 0:
        raise ValueError('The communication budget fraction must be positive, got %r' % fraction)
    if isinstance(space, Supernet):
        space = space.space
    return int(math.floor(fraction * space.cost_model.searchable_params)) + 1


def client_local_train(space: SearchSpace,
                       subspace: Subspace,
                       searchable: ValuesByKey,
                       fixed: FixedValues,
                       client: Client,
                       tier_budget: int,
                       config: LocalConfig,
                       rng: numpy.random.Generator) -> ClientUpdate:
    """
    Every batch trains one path drawn from the received subspace under the tier budget; one SGD step per batch.
    The histogram counts how many samples passed through each received candidate; the fixed components see
    every sample. All received values are returned, trained or not.
    """
    if client.size == 0:
        raise ValueError('Client %d has no data' % client.client_id)
    sampler = PATH_SAMPLERS[config.sampler]
    params = {k: _kernel.parameters_from_values(v) for k, v in searchable.items()}
    fixed_params = {k: _kernel.parameters_from_values(v) for k, v in fixed.items()}
    histogram = {k: 0 for k in searchable}
    losses = []     # type: typing.List[float]
    processed = 0
    flops = 0
    for _epoch in range(config.epochs):
        order = rng.permutation(client.size)
        for start in range(0, client.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            path = sampler(subspace, tier_budget, rng)
            model = Model(space, path, params, fixed_params)
            logits = model.forward(client.data.inputs[batch])
            loss, grad = _kernel.softmax_cross_entropy(logits, client.data.labels[batch])
            if not math.isfinite(loss):
                raise NonFiniteGradientError('Client %d: non-finite loss along %s' % (client.client_id, path))
            model.backward(grad)
            _kernel.sgd_step(model.parameters(), config.lr, config.momentum, config.clip_norm)
            for layer, candidate in enumerate(path):
                histogram[OperatorKey(layer, candidate)] += len(batch)
            processed += len(batch)
            flops += model.cost.flops * len(batch) * TRAINING_FLOPS_MULTIPLIER
            losses.append(loss)

    return ClientUpdate(client_id=client.client_id,
                        searchable={k: _kernel.values_of(v) for k, v in params.items()},
                        fixed={k: _kernel.values_of(v) for k, v in fixed_params.items()},
                        histogram=histogram,
                        total_samples=client.size,
                        samples_processed=processed,
                        training_flops=flops,
                        losses=losses)


def _weighted_mean(values: typing.Sequence[_kernel.Tensor], counts: typing.Sequence[int]) -> _kernel.Tensor:
    """
    >>> float(_weighted_mean([numpy.array(1.0), numpy.array(2.0), numpy.array(4.0)], [2, 3, 5]))
    2.8
    >>> float(_weighted_mean([numpy.array(0.0), numpy.array(4.0)], [1, 3]))
    3.0
    """
    total = sum(counts)
    assert total > 0
    acc = numpy.zeros_like(values[0])
    for v, c in zip(values, counts):
        acc = acc + float(c) * v
    return acc / float(total)


def _check_updates(supernet: ParameterStore, updates: typing.Sequence[ClientUpdate]) -> None:
    if not updates:
        raise AggregationError('Nothing to aggregate')
    for u in updates:
        if not set(u.histogram) <= set(u.searchable):
            raise AggregationError('Client %d: histogram entries %s have no parameters' %
                                   (u.client_id, sorted(set(u.histogram) - set(u.searchable))))
        if any(c < 0 for c in u.histogram.values()):
            raise AggregationError('Client %d: negative histogram counts' % u.client_id)
        for key, values in u.searchable.items():
            expected = set(supernet.searchable.get(key, {}))
            if set(values) != expected:
                raise AggregationError('Client %d: parameters of %s are %s, expected %s' %
                                       (u.client_id, key, sorted(values), sorted(expected)))
        if set(u.fixed) != set(supernet.fixed):
            raise AggregationError('Client %d: fixed components %s, expected %s' %
                                   (u.client_id, sorted(u.fixed), sorted(supernet.fixed)))


def _merge(supernet: ParameterStore,
           key: typing.Union[OperatorKey, str],
           contributions: typing.Sequence[typing.Tuple[int, _kernel.ValueSet]]) -> None:
    names = sorted(contributions[0][1])
    if names:
        supernet.assign(key, {name: _weighted_mean([v[name] for _, v in contributions],
                                                   [c for c, _ in contributions])
                              for name in names})


def opa_aggregate(supernet: Supernet, updates: typing.Sequence[ClientUpdate]) -> Supernet:
    """
    Each operator is averaged over the clients that actually trained it, weighted by the number of samples that
    passed through it on each client. Operators trained by fewer than two clients keep their global value.
    Fixed components follow the same rule with the number of processed samples.
    """
    _check_updates(supernet, updates)
    updates = sorted(updates, key=lambda u: u.client_id)
    keys = sorted({k for u in updates for k in u.searchable})
    for key in keys:
        contributions = [(u.histogram.get(key, 0), u.searchable[key]) for u in updates if key in u.searchable]
        contributions = [(c, v) for c, v in contributions if c > 0]
        if len(contributions) > 1:
            _merge(supernet, key, contributions)

    for name in sorted(supernet.fixed):
        contributions = [(u.samples_processed, u.fixed[name]) for u in updates if u.samples_processed > 0]
        if len(contributions) > 1:
            _merge(supernet, name, contributions)
    return supernet


def fedavg_aggregate(supernet: ParameterStore, updates: typing.Sequence[ClientUpdate]) -> ParameterStore:
    """Every received parameter is averaged over its recipients, weighted by their dataset sizes."""
    _check_updates(supernet, updates)
    updates = sorted(updates, key=lambda u: u.client_id)
    keys = sorted({k for u in updates for k in u.searchable})
    for key in keys:
        _merge(supernet, key, [(u.total_samples, u.searchable[key]) for u in updates if key in u.searchable])
    for name in sorted(supernet.fixed):
        _merge(supernet, name, [(u.total_samples, u.fixed[name]) for u in updates])
    return supernet


AGGREGATORS = {
    Aggregator.OPA: opa_aggregate,
    Aggregator.FEDAVG: fedavg_aggregate,
}   # type: typing.Dict[Aggregator, typing.Callable[[Supernet, typing.Sequence[ClientUpdate]], object]]


def run_round(supernet: Supernet,
              clients: typing.Sequence[Client],
              k: int,
              b_comm: int,
              tier_budgets: typing.Sequence[int],
              config: LocalConfig,
              seed: int,
              round_index: int,
              aggregator: Aggregator = Aggregator.OPA,
              per_client_subspace: bool = False,
              threads: int = 1) -> RoundReport:
    """
    Samples k clients, sends each of them a subspace below the communication budget, trains them in parallel,
    and aggregates the results in the order of client IDs. Clients whose training fails are dropped.
    If every participant fails, the supernet is left unchanged and RoundAbortedError is raised.
    """
    if not 1 <= k <= len(clients):
        raise ValueError('Cannot sample %d clients out of %d' % (k, len(clients)))
    started_at = time.monotonic()
    space = supernet.space
    selection = _random.derive(seed, _random.STAGE_SUPERNET, round_index, _random.ROLE_SELECTION)
    participants = sorted((clients[int(i)] for i in selection.choice(len(clients), size=k, replace=False)),
                          key=lambda c: c.client_id)

    shared = sample_subspace(space, b_comm, _random.derive(seed, _random.STAGE_SUPERNET, round_index,
                                                           _random.ROLE_SUBSPACE))
    dispatch = []   # type: typing.List[typing.Tuple[Client, Subspace, ValuesByKey, FixedValues]]
    for client in participants:
        subspace = shared
        if per_client_subspace:
            subspace = sample_subspace(space, b_comm, _random.derive(seed, _random.STAGE_SUPERNET, round_index,
                                                                     _random.ROLE_SUBSPACE, client.client_id))
        searchable, fixed = supernet.snapshot(subspace)
        dispatch.append((client, subspace, searchable, fixed))

    def train(item: typing.Tuple[Client, Subspace, ValuesByKey, FixedValues]) -> typing.Optional[ClientUpdate]:
        client, subspace, searchable, fixed = item
        rng = _random.derive(seed, _random.STAGE_SUPERNET, round_index, _random.ROLE_CLIENT, client.client_id)
        try:
            return client_local_train(space, subspace, searchable, fixed, client,
                                      tier_budgets[client.tier], config, rng)
        except (NonFiniteGradientError, BudgetInfeasibleError) as ex:
            _logger.warning('Round %d: client %d dropped: %s', round_index, client.client_id, ex)
            return None

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(train, dispatch))

    updates = [u for u in results if u is not None]
    failed = [item[0].client_id for item, u in zip(dispatch, results) if u is None]
    if not updates:
        raise RoundAbortedError('Round %d aborted: all %d participants failed' % (round_index, len(participants)))

    AGGREGATORS[aggregator](supernet, updates)

    fixed_size = supernet.fixed_param_count
    report = RoundReport(round_index=round_index,
                         participants=[c.client_id for c in participants],
                         failed=failed,
                         params_down=sum(s.param_size + fixed_size for _, s, _, _ in dispatch),
                         params_up=sum(u.param_count for u in updates),
                         max_subspace_params=max(s.param_size for _, s, _, _ in dispatch),
                         losses={u.client_id: u.losses for u in updates},
                         training_flops=sum(u.training_flops for u in updates))
    _logger.info('Round %d: %d/%d clients, mean loss %.4f, %d params down, %d params up, %.1f s',
                 round_index, len(updates), len(participants), report.mean_loss, report.params_down,
                 report.params_up, time.monotonic() - started_at)
    return report


def probe_validation(supernet: Supernet,
                     val: Dataset,
                     num_paths: int,
                     tiers: TierSpec,
                     rng: numpy.random.Generator) -> typing.Dict[int, float]:
    """Mean validation accuracy of randomly sampled budget-respecting paths, per tier. Leaves the supernet intact."""
    if len(val) == 0:
        raise ValueError('The validation set is empty')
    out = {}    # type: typing.Dict[int, float]
    if num_paths <= 0:
        return out
    everything = full_subspace(supernet.space)
    for tier in range(tiers.count):
        accuracies = []
        for _ in range(num_paths):
            path = sample_path_greedy(everything, tiers.budget(tier), rng)
            correct, _ = supernet.view(path).evaluate(val.inputs, val.labels)
            accuracies.append(correct / len(val))
        out[tier] = float(numpy.mean(accuracies))
    return out


def train_supernet(supernet: Supernet,
                   clients: typing.Sequence[Client],
                   tiers: TierSpec,
                   config: TrainingConfig,
                   seed: int,
                   val: typing.Optional[Dataset] = None,
                   threads: int = 1,
                   on_round: typing.Optional[typing.Callable[[RoundReport], None]] = None) -> typing.List[RoundReport]:
    """
    Runs the configured number of rounds. The validation probe runs after every probe_interval rounds and after
    the last one. The callback receives every round report as soon as it is available.
    """
    started_at = time.monotonic()
    b_comm = communication_budget(supernet, config.bcomm_fraction)
    tier_budgets = [tiers.budget(t) for t in range(tiers.count)]
    k = min(config.clients_per_round, len(clients))
    _logger.info('Supernet training: %d rounds, %d of %d clients per round, communication budget %d params, '
                 'aggregator %s', config.rounds, k, len(clients), b_comm, config.aggregator.value)

    history = []    # type: typing.List[RoundReport]
    for t in range(config.rounds):
        report = run_round(supernet, clients, k, b_comm, tier_budgets, config.local, seed, t,
                           aggregator=config.aggregator,
                           per_client_subspace=config.per_client_subspace,
                           threads=threads)
        due = config.probe_interval > 0 and ((t + 1) % config.probe_interval == 0 or t + 1 == config.rounds)
        if val is not None and due:
            probe = probe_validation(supernet, val, config.probe_paths, tiers,
                                     _random.derive(seed, _random.STAGE_SUPERNET, t, _random.ROLE_PROBE))
            report = report._replace(probe=probe)
            _logger.info(_LOG_LIST_ITEM_PREFIX + 'probe after round %d: %s', t,
                         ', '.join('T%d %.3f' % (tier, acc) for tier, acc in sorted(probe.items())))
        history.append(report)
        if on_round is not None:
            on_round(report)

    _logger.info('Supernet training finished in %.1f s', time.monotonic() - started_at)
    return history


_LOG_LIST_ITEM_PREFIX = ' ' * 4

_logger = logging.getLogger(__name__)


def _make_tiny_setup(clients: int = 4, samples: int = 160) -> typing.Tuple[Supernet, typing.List[Client], TierSpec]:
    from ._data import gen_synthetic, lda_partition, assign_tiers
    from ._space import build_space, SpaceConfig, tier_boundaries

    space = build_space(SpaceConfig(stem_channels=4, blocks=1, layers_per_block=2,
                                    candidates=(('identity', 'conv1x1', 'conv3x3', 'dwsep3x3_e1'),)), classes=3)
    data = gen_synthetic(3, samples, 0.5, seed=0)
    rng = numpy.random.default_rng(0)
    shards = assign_tiers(lda_partition(data, clients, 1.0, rng), [0.5, 0.5], rng)
    tiers = tier_boundaries(space, 2, 0.0, 0.5, rng, samples=1000)
    return Supernet(space, numpy.random.default_rng(1)), make_clients(shards, data), tiers


def _make_update(supernet: Supernet,
                 client_id: int,
                 value: float,
                 counts: typing.Dict[OperatorKey, int],
                 total: int) -> ClientUpdate:
    searchable = {k: {n: numpy.full(p.shape, value) for n, p in supernet.searchable[k].items()} for k in counts}
    fixed = {k: {n: numpy.full(p.shape, value) for n, p in v.items()} for k, v in supernet.fixed.items()}
    return ClientUpdate(client_id, searchable, fixed, dict(counts), total, total, 0, [])


def _unittest_opa_aggregate() -> None:
    from pytest import raises

    supernet, _, _ = _make_tiny_setup()
    a, b = OperatorKey(0, 1), OperatorKey(1, 2)
    before = {k: _kernel.values_of(v) for k, v in supernet.searchable.items()}
    updates = [
        _make_update(supernet, 0, 1.0, {a: 2, b: 0}, 10),
        _make_update(supernet, 1, 2.0, {a: 3, b: 7}, 30),
        _make_update(supernet, 2, 4.0, {a: 5, b: 0}, 60),
    ]
    opa_aggregate(supernet, list(reversed(updates)))
    assert all(numpy.all(p.value == 2.8) for p in supernet.searchable[a].values())
    # Trained by one client only: bitwise unchanged.
    assert all(numpy.array_equal(p.value, before[b][n]) for n, p in supernet.searchable[b].items())
    # Fixed components use the processed sample counts.
    assert all(numpy.allclose(p.value, (10 * 1 + 30 * 2 + 60 * 4) / 100) for v in supernet.fixed.values()
               for p in v.values())
    # Never received at all.
    key = OperatorKey(0, 2)
    assert all(numpy.array_equal(p.value, before[key][n]) for n, p in supernet.searchable[key].items())

    bad = _make_update(supernet, 5, 0.0, {a: 1}, 1)
    bad.histogram[OperatorKey(1, 1)] = 1
    with raises(AggregationError, match='Client 5'):
        opa_aggregate(supernet, [bad])
    bad = _make_update(supernet, 6, 0.0, {a: 1}, 1)
    bad.searchable[a].pop(sorted(bad.searchable[a])[0])
    with raises(AggregationError, match='Client 6'):
        opa_aggregate(supernet, [bad])


def _unittest_fedavg_aggregate() -> None:
    supernet, _, _ = _make_tiny_setup()
    a, b = OperatorKey(0, 1), OperatorKey(1, 2)
    fedavg_aggregate(supernet, [_make_update(supernet, 0, 0.0, {a: 0, b: 1}, 1),
                                _make_update(supernet, 1, 4.0, {a: 0, b: 3}, 3)])
    assert all(numpy.all(p.value == 3.0) for k in (a, b) for p in supernet.searchable[k].values())

    fedavg_aggregate(supernet, [_make_update(supernet, 0, 7.0, {a: 5}, 5)])
    assert all(numpy.all(p.value == 7.0) for p in supernet.searchable[a].values())
    assert all(numpy.all(p.value == 7.0) for v in supernet.fixed.values() for p in v.values())


def _unittest_opa_recovers_fedavg() -> None:
    # Every client trains every operator on all of its samples: both rules weight alike.
    base, _, _ = _make_tiny_setup()
    rng = numpy.random.default_rng(5)
    keys = sorted(base.searchable)
    for _ in range(1000):
        updates = []
        for client in range(int(rng.integers(2, 6))):
            total = int(rng.integers(1, 50))
            u = _make_update(base, client, 0.0, {k: total for k in keys}, total)
            scale = float(rng.uniform(0.01, 10.0))
            for values in list(u.searchable.values()) + list(u.fixed.values()):
                for name in values:
                    values[name] = scale * rng.normal(size=values[name].shape)
            updates.append(u)
        updates = [updates[int(i)] for i in rng.permutation(len(updates))]
        x, y = base.copy(), base.copy()
        opa_aggregate(x, updates)
        fedavg_aggregate(y, updates)
        for key in keys:
            for name in x.searchable[key]:
                assert numpy.allclose(x.searchable[key][name].value, y.searchable[key][name].value,
                                      rtol=0, atol=1e-12)
        for key in x.fixed:
            for name in x.fixed[key]:
                assert numpy.allclose(x.fixed[key][name].value, y.fixed[key][name].value, rtol=0, atol=1e-12)


def _unittest_client_local_train() -> None:
    supernet, clients, tiers = _make_tiny_setup()
    space = supernet.space
    client = clients[0]
    everything = full_subspace(space)
    searchable, fixed = supernet.snapshot(everything)
    config = LocalConfig(epochs=2, batch_size=client.size // 4 + 1)
    update = client_local_train(space, everything, searchable, fixed, client, tiers.budget(tiers.count - 1), config,
                                numpy.random.default_rng(0))
    assert update.samples_processed == 2 * client.size
    assert set(update.histogram) <= set(update.searchable)
    assert set(update.searchable) == set(searchable)
    for layer in range(space.L):
        assert sum(c for k, c in update.histogram.items() if k.layer == layer) == update.samples_processed
    assert len(update.losses) == 2 * 4
    assert update.training_flops > 0
    # The supernet is untouched by local training.
    assert all(numpy.array_equal(p.value, searchable[k][n]) for k, v in supernet.searchable.items()
               for n, p in v.items())

    # One candidate per layer: the path is constant.
    single = Subspace(space.cost_model, [[c == 1 for c in range(4)] for _ in range(space.L)])
    searchable, fixed = supernet.snapshot(single)
    update = client_local_train(space, single, searchable, fixed, client, tiers.budget(tiers.count - 1),
                                LocalConfig(), numpy.random.default_rng(0))
    assert all(c == client.size for c in update.histogram.values())


def _unittest_run_round() -> None:
    from pytest import raises

    def run(threads: int) -> typing.Tuple[Supernet, RoundReport]:
        supernet, clients, tiers = _make_tiny_setup()
        b_comm = communication_budget(supernet, 0.5)
        report = run_round(supernet, clients, 3, b_comm, [tiers.budget(t) for t in range(tiers.count)],
                           LocalConfig(batch_size=8), seed=3, round_index=0, threads=threads)
        assert report.max_subspace_params < b_comm
        assert len(report.participants) == 3
        assert report.participants == sorted(report.participants)
        assert report.bytes_down == 8 * report.params_down
        return supernet, report

    a, ra = run(1)
    b, rb = run(4)
    assert ra.participants == rb.participants and ra.losses == rb.losses
    for key in a.searchable:
        for name in a.searchable[key]:
            assert numpy.array_equal(a.searchable[key][name].value, b.searchable[key][name].value)

    # All participants fail: nothing changes.
    supernet, clients, tiers = _make_tiny_setup()
    broken = []
    for c in clients:
        inputs = numpy.full(c.data.inputs.shape, numpy.nan)
        shard = ClientShard(c.client_id, numpy.arange(c.size), c.tier)
        broken.append(Client(shard, Dataset(inputs, c.data.labels, c.data.classes)))
    before = supernet.copy()
    with raises(RoundAbortedError):
        run_round(supernet, broken, 2, communication_budget(supernet, 1.0), [tiers.budget(t) for t in range(2)],
                  LocalConfig(), seed=0, round_index=0)
    for key in supernet.searchable:
        for name in supernet.searchable[key]:
            assert numpy.array_equal(supernet.searchable[key][name].value, before.searchable[key][name].value)


def _unittest_probe_and_train() -> None:
    from ._data import gen_synthetic

    supernet, clients, tiers = _make_tiny_setup()
    val = gen_synthetic(3, 300, 0.5, seed=9)
    untouched = supernet.copy()
    assert probe_validation(supernet, val, 0, tiers, numpy.random.default_rng(0)) == {}
    probe = probe_validation(supernet, val, 3, tiers, numpy.random.default_rng(0))
    assert set(probe) == {0, 1}
    assert all(0.0 <= x <= 1.0 for x in probe.values())

    history = train_supernet(supernet, clients, tiers, TrainingConfig(rounds=0), seed=0, val=val)
    assert history == []
    for key in supernet.searchable:
        for name in supernet.searchable[key]:
            assert numpy.array_equal(supernet.searchable[key][name].value, untouched.searchable[key][name].value)

    seen = []   # type: typing.List[int]
    history = train_supernet(supernet, clients, tiers,
                             TrainingConfig(rounds=3, clients_per_round=2, probe_interval=2, probe_paths=1,
                                            local=LocalConfig(batch_size=16)),
                             seed=0, val=val, on_round=lambda r: seen.append(r.round_index))
    assert seen == [0, 1, 2]
    assert [r.probe is not None for r in history] == [False, True, True]
