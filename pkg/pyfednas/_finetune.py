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
from ._data import Dataset
from ._error import EligibilityError, BudgetInfeasibleError, NonFiniteGradientError, RoundAbortedError
from ._federated import Client, ClientUpdate, LocalConfig, client_local_train, fedavg_aggregate
from ._space import SearchSpace, Supernet, Model, Path, TierSpec, OperatorKey
from ._space import extract_model, minimal_supernet, full_subspace, uniform_path


class Provenance(enum.Enum):
    SUPERNET_INIT = 'supernet-init'
    RAND_INIT = 'rand-init'
    RANDOM_SEARCH = 'random-search'


class FinetuneConfig(typing.NamedTuple):
    rounds: int = 30
    clients_per_round: int = 6
    local: LocalConfig = LocalConfig(lr=0.01)
    schedule: _kernel.Schedule = _kernel.Schedule.COSINE


class TierModel:
    """A standalone model assigned to one tier. Its cost is checked against the tier interval when given."""

    def __init__(self, tier: int, model: Model, provenance: Provenance, tiers: typing.Optional[TierSpec] = None):
        self._tier = int(tier)
        self._model = model
        self._provenance = provenance
        if tiers is not None and not tiers.contains(self._tier, model.cost.flops):
            raise BudgetInfeasibleError('Path %s with %d FLOPs does not belong to tier %d %r' %
                                        (model.path, model.cost.flops, self._tier, tiers.interval(self._tier)))

    @staticmethod
    def from_supernet(supernet: Supernet, path: Path, tier: int, tiers: TierSpec) -> 'TierModel':
        return TierModel(tier, extract_model(supernet, path), Provenance.SUPERNET_INIT, tiers)

    @property
    def tier(self) -> int:
        return self._tier

    @property
    def path(self) -> Path:
        return self._model.path

    @property
    def model(self) -> Model:
        return self._model

    @property
    def provenance(self) -> Provenance:
        return self._provenance

    @property
    def cost(self) -> _kernel.Cost:
        return self._model.cost

    def evaluate(self, dataset: Dataset) -> float:
        """Accuracy on the dataset."""
        if len(dataset) == 0:
            raise ValueError('Cannot evaluate on an empty dataset')
        correct, _ = self._model.evaluate(dataset.inputs, dataset.labels)
        return correct / len(dataset)

    def __repr__(self) -> str:
        return 'TierModel(tier=%d, path=%s, provenance=%s, params=%d, flops=%d)' % \
            (self._tier, self.path, self._provenance.value, self.cost.params, self.cost.flops)


class FinetuneReport(typing.NamedTuple):
    tier: int
    provenance: Provenance
    round_index: int
    participants: typing.List[int]
    failed: typing.List[int]
    lr: float
    mean_loss: float
    training_flops: int
    val_accuracy: typing.Optional[float] = None


def eligible_clients(clients: typing.Sequence[Client], tier: int) -> typing.List[Client]:
    """Clients of the given tier and above."""
    return [c for c in clients if c.tier >= tier]


def _snapshot(model: Model) -> typing.Tuple[typing.Dict[OperatorKey, _kernel.ValueSet],
                                            typing.Dict[str, _kernel.ValueSet]]:
    searchable = {}     # type: typing.Dict[OperatorKey, _kernel.ValueSet]
    for layer, candidate in enumerate(model.path):
        key = OperatorKey(layer, candidate)
        searchable[key] = _kernel.values_of(model.searchable.get(key, {}))
    return searchable, {k: _kernel.values_of(v) for k, v in model.fixed.items()}


def finetune_tier(model: TierModel,
                  clients: typing.Sequence[Client],
                  config: FinetuneConfig,
                  seed: int,
                  stage: int = _random.STAGE_FINETUNE,
                  stream: typing.Sequence[int] = (),
                  val: typing.Optional[Dataset] = None,
                  threads: int = 1,
                  on_round: typing.Optional[typing.Callable[[FinetuneReport], None]] = None) \
        -> typing.Tuple[TierModel, typing.List[FinetuneReport]]:
    """
    Federated averaging over the clients whose tier is not below the model's tier, with partial participation.
    The model is trained in place; the learning rate follows the configured schedule over the rounds.
    The random streams are keyed by the stage, the optional stream prefix, the tier, the round and the client.
    """
    eligible = eligible_clients(clients, model.tier)
    if not eligible:
        raise EligibilityError('Tier %d: no eligible clients among %d' % (model.tier, len(clients)))
    started_at = time.monotonic()
    space = model.model.space
    subspace = minimal_supernet([model.path], space)
    budget = model.cost.flops + 1
    k = min(config.clients_per_round, len(eligible))
    _logger.info('Fine-tuning %r: %d rounds, %d of %d eligible clients per round',
                 model, config.rounds, k, len(eligible))

    history = []    # type: typing.List[FinetuneReport]
    for t in range(config.rounds):
        prefix = (stage,) + tuple(stream) + (model.tier, t)
        selection = _random.derive(seed, *prefix, _random.ROLE_SELECTION)
        participants = sorted((eligible[int(i)] for i in selection.choice(len(eligible), size=k, replace=False)),
                              key=lambda c: c.client_id)
        assert all(c.tier >= model.tier for c in participants)
        lr = _kernel.scheduled_lr(config.schedule, config.local.lr, t, config.rounds)
        local = config.local._replace(lr=lr)
        searchable, fixed = _snapshot(model.model)

        def train(client: Client) -> typing.Optional[ClientUpdate]:
            rng = _random.derive(seed, *prefix, _random.ROLE_CLIENT, client.client_id)
            try:
                return client_local_train(space, subspace, searchable, fixed, client, budget, local, rng)
            except NonFiniteGradientError as ex:
                _logger.warning('Tier %d round %d: client %d dropped: %s', model.tier, t, client.client_id, ex)
                return None

        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            results = list(executor.map(train, participants))
        updates = [u for u in results if u is not None]
        if not updates:
            raise RoundAbortedError('Tier %d fine-tuning round %d aborted: all %d participants failed' %
                                    (model.tier, t, len(participants)))
        fedavg_aggregate(model.model, updates)

        losses = [x for u in updates for x in u.losses]
        report = FinetuneReport(tier=model.tier,
                                provenance=model.provenance,
                                round_index=t,
                                participants=[c.client_id for c in participants],
                                failed=[c.client_id for c, u in zip(participants, results) if u is None],
                                lr=lr,
                                mean_loss=float(numpy.mean(losses)) if losses else math.nan,
                                training_flops=sum(u.training_flops for u in updates),
                                val_accuracy=model.evaluate(val) if val is not None else None)
        _logger.debug(_LOG_LIST_ITEM_PREFIX + 'tier %d round %d: lr %.5f, mean loss %.4f', model.tier, t, lr,
                      report.mean_loss)
        history.append(report)
        if on_round is not None:
            on_round(report)

    _logger.info('Tier %d fine-tuning finished in %.1f s', model.tier, time.monotonic() - started_at)
    return model, history


def rand_init_baseline(space: SearchSpace,
                       path: Path,
                       tier: int,
                       tiers: TierSpec,
                       clients: typing.Sequence[Client],
                       config: FinetuneConfig,
                       seed: int,
                       val: typing.Optional[Dataset] = None,
                       threads: int = 1,
                       on_round: typing.Optional[typing.Callable[[FinetuneReport], None]] = None) \
        -> typing.Tuple[TierModel, typing.List[FinetuneReport]]:
    """The same architecture trained from scratch; nothing is inherited from the supernet."""
    rng = _random.derive(seed, _random.STAGE_BASELINE, 0, tier, _random.ROLE_INIT)
    model = TierModel(tier, Model.initialize(space, path, rng), Provenance.RAND_INIT, tiers)
    return finetune_tier(model, clients, config, seed, _random.STAGE_BASELINE, (0,), val, threads, on_round)


class RandomSearchTrial(typing.NamedTuple):
    path: Path
    tier: int
    metric: float
    training_flops: int


class RandomSearchResult(typing.NamedTuple):
    best: typing.Dict[int, TierModel]
    trials: typing.List[RandomSearchTrial]
    spent_flops: int


# Upper bound on sampled paths, including those skipped for lack of eligible clients.
_RANDOM_SEARCH_MAX_DRAWS = 10000


def random_search_baseline(space: SearchSpace,
                           tiers: TierSpec,
                           clients: typing.Sequence[Client],
                           budget_flops: int,
                           config: FinetuneConfig,
                           seed: int,
                           val: Dataset,
                           threads: int = 1) -> RandomSearchResult:
    """
    Trains uniformly sampled architectures from scratch in their own tiers until the cumulative client-side
    training FLOPs reach the budget; the last model is always completed. Returns the most accurate model per tier.
    """
    started_at = time.monotonic()
    everything = full_subspace(space)
    best = {}   # type: typing.Dict[int, TierModel]
    best_metric = {}    # type: typing.Dict[int, float]
    trials = []     # type: typing.List[RandomSearchTrial]
    spent = 0
    for draw in range(_RANDOM_SEARCH_MAX_DRAWS):
        if spent >= budget_flops and trials:
            break
        path = uniform_path(everything, _random.derive(seed, _random.STAGE_BASELINE, 1, draw, _random.ROLE_SELECTION))
        tier = tiers.tier_of(space.cost_model.path_cost(path).flops)
        assert tier is not None
        if not eligible_clients(clients, tier):
            _logger.debug('Random search: no eligible clients for %s in tier %d', path, tier)
            continue
        rng = _random.derive(seed, _random.STAGE_BASELINE, 1, draw, _random.ROLE_INIT)
        model = TierModel(tier, Model.initialize(space, path, rng), Provenance.RANDOM_SEARCH, tiers)
        model, history = finetune_tier(model, clients, config, seed, _random.STAGE_BASELINE, (1, draw),
                                       threads=threads)
        cost = sum(r.training_flops for r in history)
        spent += cost
        metric = model.evaluate(val)
        trials.append(RandomSearchTrial(path, tier, metric, cost))
        _logger.info('Random search: model %d %s tier %d accuracy %.4f, %d of %d FLOPs spent',
                     len(trials), path, tier, metric, spent, budget_flops)
        if tier not in best or metric > best_metric[tier]:
            best[tier], best_metric[tier] = model, metric
    else:
        _logger.warning('Random search stopped after %d draws with %d of %d FLOPs spent',
                        _RANDOM_SEARCH_MAX_DRAWS, spent, budget_flops)

    _logger.info('Random search finished in %.1f s: %d models, best per tier: %s', time.monotonic() - started_at,
                 len(trials), ', '.join('T%d %.4f' % (t, m) for t, m in sorted(best_metric.items())))
    return RandomSearchResult(best, trials, spent)


_LOG_LIST_ITEM_PREFIX = ' ' * 4

_logger = logging.getLogger(__name__)


def _make_tiered_setup() -> typing.Tuple[Supernet, typing.List[Client], TierSpec, Dataset]:
    from ._data import gen_synthetic, lda_partition, assign_tiers
    from ._federated import make_clients
    from ._space import build_space, SpaceConfig

    space = build_space(SpaceConfig(stem_channels=4, blocks=1, layers_per_block=2,
                                    candidates=(('identity', 'conv1x1', 'conv3x3', 'dwsep3x3_e1'),)), classes=3)
    data = gen_synthetic(3, 320, 0.5, seed=0)
    rng = numpy.random.default_rng(0)
    shards = assign_tiers(lda_partition(data, 8, 1.0, rng), [0.25] * 4, rng)
    # Every tier holds at least one distinct path cost.
    distinct = sorted({space.cost_model.path_cost(p).flops for p in space.cost_model.enumerate_paths()})
    n = len(distinct)
    assert n >= 5
    tiers = TierSpec([distinct[i] for i in (0, n // 4, n // 2, 3 * n // 4, n - 1)])
    val = gen_synthetic(3, 90, 0.5, seed=1)
    return Supernet(space, numpy.random.default_rng(1)), make_clients(shards, data), tiers, val


def _path_in_tier(space: SearchSpace, tiers: TierSpec, tier: int) -> Path:
    costs = space.cost_model
    return next(p for p in costs.enumerate_paths() if tiers.contains(tier, costs.path_cost(p).flops))


def _unittest_eligibility() -> None:
    from pytest import raises

    supernet, clients, tiers, _ = _make_tiered_setup()
    assert len(eligible_clients(clients, 0)) == 8
    assert len(eligible_clients(clients, 3)) == 2
    assert all(c.tier == 3 for c in eligible_clients(clients, 3))

    top = _path_in_tier(supernet.space, tiers, 3)
    model = TierModel.from_supernet(supernet, top, 3, tiers)
    assert model.provenance == Provenance.SUPERNET_INIT
    with raises(EligibilityError):
        finetune_tier(model, [c for c in clients if c.tier < 3], FinetuneConfig(rounds=1), seed=0)
    with raises(BudgetInfeasibleError):
        TierModel.from_supernet(supernet, top, 0, tiers)


def _unittest_finetune_tier() -> None:
    supernet, clients, tiers, val = _make_tiered_setup()
    path = _path_in_tier(supernet.space, tiers, 2)
    config = FinetuneConfig(rounds=4, clients_per_round=3, local=LocalConfig(lr=0.05))

    before = {n: p.value.copy() for n, p in supernet.view(path).named_parameters()}
    seen = []   # type: typing.List[FinetuneReport]
    model, history = finetune_tier(TierModel.from_supernet(supernet, path, 2, tiers), clients, config, seed=0,
                                   val=val, on_round=seen.append)
    assert seen == history and len(history) == 4
    eligible_ids = {c.client_id for c in eligible_clients(clients, 2)}
    assert all(set(r.participants) <= eligible_ids and len(r.participants) == 3 for r in history)
    assert math.isclose(history[0].lr, 0.05) and history[-1].lr < 0.04
    assert all(r.val_accuracy is not None and 0 <= r.val_accuracy <= 1 for r in history)
    # The supernet is left intact.
    assert all(numpy.array_equal(p.value, before[n]) for n, p in supernet.view(path).named_parameters())
    assert any(not numpy.array_equal(p.value, before[n]) for n, p in model.model.named_parameters())

    # Deterministic regardless of the thread count.
    again, _ = finetune_tier(TierModel.from_supernet(supernet, path, 2, tiers), clients, config, seed=0, threads=3)
    assert all(numpy.array_equal(a.value, b.value)
               for (_, a), (_, b) in zip(model.model.named_parameters(), again.model.named_parameters()))

    unchanged, history = finetune_tier(TierModel.from_supernet(supernet, path, 2, tiers), clients,
                                       config._replace(rounds=0), seed=0)
    assert history == []
    assert all(numpy.array_equal(p.value, before[n]) for n, p in unchanged.model.named_parameters())


def _unittest_finetune_matches_fedavg() -> None:
    from ._federated import fedavg_aggregate as reference

    supernet, clients, tiers, _ = _make_tiered_setup()
    path = _path_in_tier(supernet.space, tiers, 0)
    model = TierModel.from_supernet(supernet, path, 0, tiers)
    subspace = minimal_supernet([path], supernet.space)
    searchable, fixed = _snapshot(model.model)
    local = LocalConfig(lr=0.05)
    updates = [client_local_train(supernet.space, subspace, searchable, fixed, c, model.cost.flops + 1, local,
                                  numpy.random.default_rng(c.client_id)) for c in clients[:3]]
    # The standalone model and the supernet restricted to the same path aggregate identically.
    reference(model.model, updates)
    reference(supernet, updates)
    assert all(numpy.array_equal(a.value, b.value)
               for (_, a), (_, b) in zip(model.model.named_parameters(), supernet.view(path).named_parameters()))


def _unittest_rand_init_baseline() -> None:
    supernet, clients, tiers, val = _make_tiered_setup()
    path = _path_in_tier(supernet.space, tiers, 1)
    config = FinetuneConfig(rounds=0)
    model, history = rand_init_baseline(supernet.space, path, 1, tiers, clients, config, seed=0)
    assert history == [] and model.path == path and model.provenance == Provenance.RAND_INIT
    inherited = TierModel.from_supernet(supernet, path, 1, tiers)
    assert inherited.path == model.path and inherited.provenance != model.provenance
    assert any(not numpy.array_equal(a.value, b.value)
               for (_, a), (_, b) in zip(model.model.named_parameters(), inherited.model.named_parameters()))
    assert abs(model.evaluate(val) - 1 / 3) < 0.35


def _unittest_random_search_baseline() -> None:
    supernet, clients, tiers, val = _make_tiered_setup()
    config = FinetuneConfig(rounds=1, clients_per_round=2)

    single = random_search_baseline(supernet.space, tiers, clients, 1, config, seed=0, val=val)
    assert len(single.trials) == 1
    assert list(single.best) == [single.trials[0].tier]

    result = random_search_baseline(supernet.space, tiers, clients, 3 * single.spent_flops, config, seed=0, val=val)
    assert result.spent_flops >= 3 * single.spent_flops
    assert result.spent_flops - result.trials[-1].training_flops < 3 * single.spent_flops
    assert result.spent_flops == sum(t.training_flops for t in result.trials)
    for tier, model in result.best.items():
        assert model.provenance == Provenance.RANDOM_SEARCH
        assert tiers.contains(tier, model.cost.flops)
        assert model.evaluate(val) == max(t.metric for t in result.trials if t.tier == tier)
