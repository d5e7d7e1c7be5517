#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import enum
import math
import time
import typing
import logging
import itertools
import concurrent.futures
import numpy
from . import _random
from ._data import Dataset
from ._error import SimulationError, RankingError, BudgetInfeasibleError
from ._federated import Client
from ._space import SearchSpace, CostModel, Supernet, Path, TierSpec
from ._space import full_subspace, sample_path_greedy, minimal_supernet


WORST_METRIC = -math.inf

REPAIR_ATTEMPTS = 100

# Initialization gives up after this many sampled paths per requested population member.
_INIT_ATTEMPTS_PER_MEMBER = 50


class Metric(enum.Enum):
    ACCURACY = 'accuracy'
    NEG_LOSS = 'neg_loss'


class Individual(typing.NamedTuple):
    path: Path
    tier: int
    metric: float
    flops: int


BatchEvaluator = typing.Callable[[typing.Sequence[Path]], typing.List[typing.Optional[float]]]


def dominates(a: Individual, b: Individual) -> bool:
    """Higher metric and lower FLOPs are better."""
    return a.metric >= b.metric and a.flops <= b.flops and (a.metric > b.metric or a.flops < b.flops)


def nondominated_sort(population: typing.Sequence[Individual]) -> typing.List[typing.List[int]]:
    """
    Returns the fronts as lists of indexes into the population; front 0 is the Pareto set, each subsequent
    front is the Pareto set of what remains.

    >>> pop = [Individual(Path([0]), 0, .9, 10), Individual(Path([1]), 0, .8, 5), Individual(Path([2]), 0, .7, 20)]
    >>> nondominated_sort(pop)
    [[0, 1], [2]]
    """
    dominated_by = [[] for _ in population]     # type: typing.List[typing.List[int]]
    counts = [0] * len(population)
    for i, j in itertools.combinations(range(len(population)), 2):
        if dominates(population[i], population[j]):
            dominated_by[i].append(j)
            counts[j] += 1
        elif dominates(population[j], population[i]):
            dominated_by[j].append(i)
            counts[i] += 1

    fronts = []
    current = [i for i, c in enumerate(counts) if c == 0]
    while current:
        fronts.append(current)
        following = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    following.append(j)
        current = sorted(following)
    return fronts


def crowding_distance(population: typing.Sequence[Individual], front: typing.Sequence[int]) -> typing.Dict[int, float]:
    out = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: math.inf for i in front}
    for key in (lambda i: population[i].metric, lambda i: float(population[i].flops)):
        ordered = sorted(front, key=lambda i: (key(i), i))
        lo, hi = key(ordered[0]), key(ordered[-1])
        out[ordered[0]] = out[ordered[-1]] = math.inf
        span = hi - lo
        if not math.isfinite(span) or span <= 0:
            continue
        for prev, this, nxt in zip(ordered, ordered[1:], ordered[2:]):
            out[this] += (key(nxt) - key(prev)) / span
    return out


class ParetoFront:
    """Mutually non-dominated individuals ordered by FLOPs."""

    def __init__(self, members: typing.Iterable[Individual]):
        self._members = tuple(sorted(members, key=lambda x: (x.flops, -x.metric, x.path)))
        assert not any(dominates(a, b) for a in self._members for b in self._members)

    @property
    def members(self) -> typing.Tuple[Individual, ...]:
        return self._members

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> typing.Iterator[Individual]:
        return iter(self._members)

    def __repr__(self) -> str:
        return 'ParetoFront(%s)' % ', '.join('%s:%.4f@%d' % (m.path, m.metric, m.flops) for m in self._members)


class IterationRecord(typing.NamedTuple):
    tier: int
    iteration: int
    best_metric: float
    front_size: int
    population_size: int
    evaluations: int
    union_params: int


class SearchResult(typing.NamedTuple):
    tier: int
    best: Individual
    front: ParetoFront
    population: typing.List[Individual]
    trace: typing.List[IterationRecord]


def _rank_and_crowd(population: typing.Sequence[Individual]) -> typing.List[typing.Tuple[int, float]]:
    fitness = [(0, 0.0)] * len(population)
    for rank, front in enumerate(nondominated_sort(population)):
        for i, d in crowding_distance(population, front).items():
            fitness[i] = rank, d
    return fitness


def _better(a: typing.Tuple[int, float], b: typing.Tuple[int, float]) -> bool:
    return a[0] < b[0] or (a[0] == b[0] and a[1] > b[1])


def _environmental_selection(population: typing.Sequence[Individual], size: int) -> typing.List[Individual]:
    out = []    # type: typing.List[Individual]
    for front in nondominated_sort(population):
        if len(out) + len(front) <= size:
            out += [population[i] for i in front]
            continue
        crowd = crowding_distance(population, front)
        out += [population[i] for i in sorted(front, key=lambda i: (-crowd[i], i))[:size - len(out)]]
        break
    return out


def nsga2_search(space: typing.Union[SearchSpace, CostModel],
                 tiers: TierSpec,
                 tier: int,
                 evaluate: BatchEvaluator,
                 iterations: int,
                 rng: numpy.random.Generator,
                 population: int = 128,
                 sample: int = 64,
                 observer: typing.Optional[typing.Callable[[IterationRecord, typing.List[Path]], None]] = None) \
        -> SearchResult:
    """
    Two objectives: maximize the metric produced by the evaluator, minimize training FLOPs. Every individual
    lies within the tier's FLOPs interval. The evaluator receives batches of previously unseen paths and returns
    one metric per path, or None for paths it could not score; those, and every path of a batch whose
    evaluation failed, get the worst possible metric. The observer, if any, is invoked once per generation
    (the initial one included) with the record and the freshly evaluated paths.
    """
    costs = space.cost_model if isinstance(space, SearchSpace) else space
    if population < 2 or sample < 2:
        raise ValueError('Population and sample sizes must be at least 2, got %d and %d' % (population, sample))
    started_at = time.monotonic()
    everything = full_subspace(costs)
    budget = tiers.budget(tier)
    lo, hi = tiers.interval(tier)

    def flops_of(path: Path) -> int:
        return costs.path_cost(path).flops

    def in_tier(path: Path) -> bool:
        return tiers.contains(tier, flops_of(path))

    cache = {}  # type: typing.Dict[Path, float]

    def score(paths: typing.Sequence[Path]) -> typing.List[Individual]:
        fresh = [p for p in dict.fromkeys(paths) if p not in cache]
        if fresh:
            try:
                metrics = evaluate(fresh)   # type: typing.Sequence[typing.Optional[float]]
            except SimulationError as ex:
                _logger.warning('Tier %d: evaluation of %d paths failed: %s', tier, len(fresh), ex)
                metrics = [None] * len(fresh)
            if len(metrics) != len(fresh):
                raise ValueError('The evaluator returned %d metrics for %d paths' % (len(metrics), len(fresh)))
            for p, m in zip(fresh, metrics):
                cache[p] = WORST_METRIC if m is None or not math.isfinite(m) else float(m)
        return [Individual(p, tier, cache[p], flops_of(p)) for p in paths]

    def record(iteration: int, members: typing.Sequence[Individual], fresh: typing.List[Path]) -> IterationRecord:
        out = IterationRecord(tier=tier,
                              iteration=iteration,
                              best_metric=max(m.metric for m in members),
                              front_size=len(nondominated_sort(members)[0]),
                              population_size=len(members),
                              evaluations=len(cache),
                              union_params=minimal_supernet([m.path for m in members], costs).param_size)
        if observer is not None:
            observer(out, fresh)
        _logger.info('Tier %d, iteration %d: best metric %.4f, front of %d, %d paths evaluated, union %d params',
                     tier, iteration, out.best_metric, out.front_size, out.evaluations, out.union_params)
        return out

    def repair(path: Path) -> typing.Optional[Path]:
        for _ in range(REPAIR_ATTEMPTS):
            try:
                candidate = sample_path_greedy(everything, budget, rng)
            except BudgetInfeasibleError:
                return None
            if in_tier(candidate):
                return candidate
        # Move one layer at a time toward the cheapest or the most expensive option.
        choices = list(path)
        for layer in map(int, rng.permutation(costs.layer_count)):
            if in_tier(Path(choices)):
                break
            options = costs.layers[layer]
            if flops_of(Path(choices)) > hi:
                choices[layer] = min(range(len(options)), key=lambda c: (options[c].flops, c))
            else:
                choices[layer] = max(range(len(options)), key=lambda c: (options[c].flops, -c))
        return Path(choices) if in_tier(Path(choices)) else None

    initial = []    # type: typing.List[Path]
    for _ in range(population * _INIT_ATTEMPTS_PER_MEMBER):
        if len(initial) >= population:
            break
        path = sample_path_greedy(everything, budget, rng)
        if in_tier(path) and path not in initial:
            initial.append(path)
    if not initial:
        raise BudgetInfeasibleError('Tier %d (%r, %r] admits no sampled path' % (tier, lo, hi))
    if len(initial) < population:
        _logger.warning('Tier %d: population shrinks from %d to %d distinct feasible paths',
                        tier, population, len(initial))

    members = score(initial)
    trace = [record(0, members, list(initial))]
    mutation_rate = 1.0 / costs.layer_count
    for iteration in range(1, iterations + 1):
        fitness = _rank_and_crowd(members)
        parents = []
        for _ in range(sample):
            i, j = (int(x) for x in rng.integers(len(members), size=2))
            parents.append(members[i if _better(fitness[i], fitness[j]) or fitness[i] == fitness[j] else j].path)

        seen = {m.path for m in members}
        children = []   # type: typing.List[Path]
        for a, b in zip(parents[0::2], parents[1::2]):
            if costs.layer_count > 1:
                point = int(rng.integers(1, costs.layer_count))
                offspring = [list(a)[:point] + list(b)[point:], list(b)[:point] + list(a)[point:]]
            else:
                offspring = [list(a), list(b)]
            for genes in offspring:
                for layer in range(costs.layer_count):
                    if rng.random() < mutation_rate:
                        genes[layer] = int(rng.integers(costs.candidate_count(layer)))
                child = Path(genes)     # type: typing.Optional[Path]
                if not in_tier(Path(genes)):
                    child = repair(Path(genes))
                if child is not None and child not in seen:
                    seen.add(child)
                    children.append(child)

        fresh = [p for p in children if p not in cache]
        members = _environmental_selection(members + score(children), population)
        trace.append(record(iteration, members, fresh))

    assert all(in_tier(m.path) for m in members)
    best = max(members, key=lambda m: (m.metric, -m.flops, m.path))
    front = ParetoFront(members[i] for i in nondominated_sort(members)[0])
    _logger.info('Tier %d search finished in %.1f s: best %s metric %.4f at %d FLOPs',
                 tier, time.monotonic() - started_at, best.path, best.metric, best.flops)
    return SearchResult(tier, best, front, members, trace)


def _score(correct: int, loss_sum: float, count: int, metric: Metric) -> float:
    return correct / count if metric == Metric.ACCURACY else -loss_sum / count


def evaluate_centralized(supernet: Supernet, path: Path, val: Dataset, metric: Metric = Metric.ACCURACY) -> float:
    """Scores the path with the supernet's weights on the global validation set. Read-only."""
    if len(val) == 0:
        raise ValueError('The validation set is empty')
    correct, loss_sum = supernet.view(path).evaluate(val.inputs, val.labels)
    return _score(correct, loss_sum, len(val), metric)


class CentralEvaluator:
    def __init__(self, supernet: Supernet, val: Dataset, metric: Metric = Metric.ACCURACY, threads: int = 1):
        self._supernet = supernet
        self._val = val
        self._metric = metric
        self._threads = max(1, threads)

    def __call__(self, paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        with concurrent.futures.ThreadPoolExecutor(max_workers=self._threads) as executor:
            return list(executor.map(lambda p: evaluate_centralized(self._supernet, p, self._val, self._metric),
                                     paths))


class FederatedEvaluation(typing.NamedTuple):
    metrics: typing.List[typing.Optional[float]]
    contributors: typing.List[int]
    deliveries: int
    comm_cost: int


def evaluate_federated(supernet: Supernet,
                       paths: typing.Sequence[Path],
                       clients: typing.Sequence[Client],
                       tiers: TierSpec,
                       fe_rounds: int,
                       clients_per_round: int,
                       rng: numpy.random.Generator,
                       metric: Metric = Metric.ACCURACY) -> FederatedEvaluation:
    """
    Every round draws clients that have not participated yet in this evaluation. A client scores each path
    of the batch that its tier can run on its local validation shard; only the minimal supernet covering
    those paths is sent to it. A path metric pools the correct predictions (or losses) of every contributing
    client, so with all clients and shards that partition the validation set it equals the centralized metric.
    Paths that no client could score get None.
    """
    if fe_rounds < 1 or clients_per_round < 1:
        raise ValueError('Federated evaluation needs at least one round and one client per round')
    costs = supernet.space.cost_model
    path_tiers = []
    for p in paths:
        t = tiers.tier_of(costs.path_cost(p).flops)
        path_tiers.append(tiers.count - 1 if t is None else t)

    pool = [clients[int(i)] for i in rng.permutation(len(clients))]
    pool = [c for c in pool if c.val is not None]
    correct = [0] * len(paths)
    losses = [0.0] * len(paths)
    counts = [0] * len(paths)
    contributors = [0] * len(paths)
    deliveries, comm = 0, 0
    for round_index in range(fe_rounds):
        selected = pool[round_index * clients_per_round:(round_index + 1) * clients_per_round]
        if not selected:
            _logger.debug('Federated evaluation ran out of fresh clients after %d rounds', round_index)
            break
        for client in sorted(selected, key=lambda c: c.client_id):
            eligible = [i for i, t in enumerate(path_tiers) if t <= client.tier]
            val = client.val
            if not eligible or val is None:
                continue
            deliveries += 1
            comm += minimal_supernet([paths[i] for i in eligible], costs).param_size + costs.fixed.params
            for i in eligible:
                c, loss_sum = supernet.view(paths[i]).evaluate(val.inputs, val.labels)
                correct[i] += c
                losses[i] += loss_sum
                counts[i] += len(val)
                contributors[i] += 1

    metrics = [_score(correct[i], losses[i], counts[i], metric) if counts[i] > 0 else None
               for i in range(len(paths))]   # type: typing.List[typing.Optional[float]]
    return FederatedEvaluation(metrics, contributors, deliveries, comm)


class FederatedEvaluator:
    """Batch evaluator for the search; keeps the cumulative communication cost and the last evaluation."""

    def __init__(self,
                 supernet: Supernet,
                 clients: typing.Sequence[Client],
                 tiers: TierSpec,
                 fe_rounds: int,
                 clients_per_round: int,
                 seed: int,
                 tier: int,
                 metric: Metric = Metric.ACCURACY):
        self._supernet = supernet
        self._clients = list(clients)
        self._tiers = tiers
        self._fe_rounds = fe_rounds
        self._clients_per_round = clients_per_round
        self._seed = seed
        self._tier = tier
        self._metric = metric
        self._calls = 0
        self._comm_cost = 0
        self._last = None   # type: typing.Optional[FederatedEvaluation]

    @property
    def comm_cost(self) -> int:
        return self._comm_cost

    @property
    def last(self) -> typing.Optional[FederatedEvaluation]:
        return self._last

    def __call__(self, paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        rng = _random.derive(self._seed, _random.STAGE_SEARCH, self._tier, self._calls, _random.ROLE_EVALUATION)
        self._calls += 1
        result = evaluate_federated(self._supernet, paths, self._clients, self._tiers, self._fe_rounds,
                                    self._clients_per_round, rng, self._metric)
        self._comm_cost += result.comm_cost
        self._last = result
        return result.metrics


def kendall_tau(a: typing.Sequence[float], b: typing.Sequence[float]) -> float:
    """
    Tau-a over two score sequences of the same items; tied pairs count as neither concordant nor discordant.

    >>> kendall_tau([1, 2, 3, 4], [1, 2, 4, 3])
    0.6666666666666666
    >>> kendall_tau([1, 2, 3], [3, 2, 1])
    -1.0
    """
    if len(a) != len(b):
        raise RankingError('Rankings of different lengths: %d and %d' % (len(a), len(b)))
    if len(a) < 2:
        raise RankingError('At least two items are needed to correlate rankings')
    x = numpy.asarray(a, dtype=numpy.float64)
    y = numpy.asarray(b, dtype=numpy.float64)
    upper = numpy.triu_indices(len(x), k=1)
    sx = numpy.sign(x[:, None] - x[None, :])[upper]
    sy = numpy.sign(y[:, None] - y[None, :])[upper]
    return float(numpy.sum(sx * sy)) / len(sx)


_logger = logging.getLogger(__name__)


def _unittest_nondominated_sort() -> None:
    from hypothesis import given, settings, strategies

    assert nondominated_sort([Individual(Path([0]), 0, 0.5, 1)]) == [[0]]

    @settings(max_examples=100, deadline=None, derandomize=True, database=None)
    @given(strategies.lists(strategies.tuples(strategies.integers(0, 10), strategies.integers(0, 10)),
                            min_size=1, max_size=50))
    def check(points: typing.List[typing.Tuple[int, int]]) -> None:
        pop = [Individual(Path([i]), 0, m / 10, f) for i, (m, f) in enumerate(points)]
        fronts = nondominated_sort(pop)
        assert sorted(i for f in fronts for i in f) == list(range(len(pop)))
        oracle = [i for i in range(len(pop)) if not any(dominates(pop[j], pop[i]) for j in range(len(pop)))]
        assert sorted(fronts[0]) == oracle
        # Every member of a later front is dominated by someone in the preceding front.
        for prev, this in zip(fronts, fronts[1:]):
            assert all(any(dominates(pop[j], pop[i]) for j in prev) for i in this)
        ParetoFront(pop[i] for i in fronts[0])

    check()


def _unittest_crowding_distance() -> None:
    pop = [Individual(Path([i]), 0, m, f) for i, (m, f) in enumerate([(0.9, 40), (0.8, 30), (0.5, 20), (0.1, 10)])]
    d = crowding_distance(pop, [0, 1, 2, 3])
    assert d[0] == d[3] == math.inf
    assert math.isclose(d[1], (0.9 - 0.5) / 0.8 + (40 - 20) / 30)
    assert crowding_distance(pop, [1, 2]) == {1: math.inf, 2: math.inf}
    assert [m.path for m in _environmental_selection(pop, 3)] == [Path([0]), Path([1]), Path([3])]


def _unittest_kendall_tau() -> None:
    from pytest import raises
    from hypothesis import given, settings, strategies
    from scipy.stats import kendalltau   # type: ignore

    assert kendall_tau([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
    assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
    assert kendall_tau([1, 2, 3, 4], [1, 2, 4, 3]) == (5 - 1) / 6
    assert kendall_tau([1, 1, 2], [1, 2, 3]) == 2 / 3
    with raises(RankingError):
        kendall_tau([1], [1])
    with raises(RankingError):
        kendall_tau([1, 2], [1, 2, 3])

    @settings(max_examples=200, deadline=None, derandomize=True, database=None)
    @given(strategies.lists(strategies.tuples(strategies.integers(0, 5), strategies.integers(0, 5)),
                            min_size=2, max_size=12))
    def check(pairs: typing.List[typing.Tuple[int, int]]) -> None:
        a, b = [x for x, _ in pairs], [y for _, y in pairs]
        concordant = discordant = 0
        for i, j in itertools.combinations(range(len(a)), 2):
            s = (a[i] - a[j]) * (b[i] - b[j])
            concordant += s > 0
            discordant += s < 0
        assert kendall_tau(a, b) == (concordant - discordant) / (len(a) * (len(a) - 1) // 2)

    check()

    # Without ties, tau-a and tau-b coincide.
    rng = numpy.random.default_rng(0)
    for _ in range(20):
        x, y = rng.permutation(10), rng.permutation(10)
        assert math.isclose(kendall_tau(x, y), kendalltau(x, y)[0], abs_tol=1e-12)


def _make_small_problem() -> typing.Tuple[CostModel, TierSpec]:
    from ._kernel import Cost
    costs = CostModel([[Cost(0, 0), Cost(3, 3), Cost(7, 7)],
                       [Cost(0, 0), Cost(2, 2), Cost(5, 5)],
                       [Cost(0, 0), Cost(1, 1), Cost(4, 4)]], fixed=Cost(1, 1))
    return costs, TierSpec([1, 6, 17])


def _unittest_nsga2_converges_to_cheapest() -> None:
    costs, tiers = _make_small_problem()

    def negative_flops(paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        return [-float(costs.path_cost(p).flops) for p in paths]

    for tier in range(tiers.count):
        feasible = [p for p in costs.enumerate_paths() if tiers.contains(tier, costs.path_cost(p).flops)]
        cheapest = min(costs.path_cost(p).flops for p in feasible)
        records = []    # type: typing.List[IterationRecord]
        result = nsga2_search(costs, tiers, tier, negative_flops, 20, numpy.random.default_rng(tier),
                              population=8, sample=8, observer=lambda r, _: records.append(r))
        assert result.best.flops == cheapest
        assert all(tiers.contains(tier, m.flops) for m in result.population)
        assert all(m.flops == cheapest for m in result.front)
        assert [r.iteration for r in result.trace] == list(range(21)) and records == result.trace


def _unittest_nsga2_edge_cases() -> None:
    costs, tiers = _make_small_problem()
    calls = []  # type: typing.List[int]

    def by_sum(paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        calls.append(len(paths))
        return [float(sum(p)) for p in paths]

    result = nsga2_search(costs, tiers, 1, by_sum, 0, numpy.random.default_rng(0), population=6, sample=4)
    assert result.best.metric == max(m.metric for m in result.population)
    assert len(result.trace) == 1 and len(calls) == 1

    # Repeated paths are never re-evaluated.
    calls.clear()
    result = nsga2_search(costs, tiers, 1, by_sum, 5, numpy.random.default_rng(0), population=6, sample=4)
    assert sum(calls) == result.trace[-1].evaluations

    def failing(paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        raise SimulationError('unreachable client')

    result = nsga2_search(costs, tiers, 0, failing, 2, numpy.random.default_rng(0), population=4, sample=4)
    assert all(m.metric == WORST_METRIC for m in result.population)

    def unscored(paths: typing.Sequence[Path]) -> typing.List[typing.Optional[float]]:
        return [None for _ in paths]

    result = nsga2_search(costs, tiers, 0, unscored, 1, numpy.random.default_rng(0), population=4, sample=4)
    assert all(m.metric == WORST_METRIC for m in result.population)


def _unittest_evaluation() -> None:
    from ._federated import _make_tiny_setup, make_clients
    from ._data import gen_synthetic, lda_partition, partition_validation
    from ._space import uniform_path

    supernet, _, _ = _make_tiny_setup()
    space = supernet.space
    train = gen_synthetic(3, 200, 0.5, seed=0)
    val = gen_synthetic(3, 120, 0.5, seed=1)
    rng = numpy.random.default_rng(0)
    shards = partition_validation(val, lda_partition(train, 6, 1.0, rng), rng)
    clients = make_clients(shards, train, val)
    single_tier = TierSpec([space.cost_model.min_path_flops, space.cost_model.max_path_flops])

    paths = [uniform_path(full_subspace(space), rng) for _ in range(6)]
    central = [evaluate_centralized(supernet, p, val) for p in paths]
    assert central == CentralEvaluator(supernet, val, threads=3)(paths)
    assert evaluate_centralized(supernet, paths[0], val) == central[0]
    assert all(abs(c - 1 / 3) < 0.35 for c in central)

    # All clients, shards partitioning the validation set: identical to the centralized metric.
    fe = evaluate_federated(supernet, paths, clients, single_tier, 6, 1, numpy.random.default_rng(1))
    assert fe.metrics == central
    assert fe.deliveries == 6

    loss_fe = evaluate_federated(supernet, paths[:2], clients, single_tier, 3, 2, numpy.random.default_rng(1),
                                 metric=Metric.NEG_LOSS)
    assert all(m is not None and math.isclose(m, evaluate_centralized(supernet, p, val, Metric.NEG_LOSS))
               for m, p in zip(loss_fe.metrics, paths[:2]))

    # One client, one round: its own local accuracy.
    fe = evaluate_federated(supernet, paths[:1], clients[:1], single_tier, 1, 1, numpy.random.default_rng(2))
    local = clients[0].val
    assert local is not None
    assert fe.metrics == [evaluate_centralized(supernet, paths[0], local)]

    # Identical paths: the delivery carries one path's parameters.
    fe = evaluate_federated(supernet, [paths[0]] * 3, clients, single_tier, 2, 2, numpy.random.default_rng(3))
    assert fe.deliveries == 4
    assert fe.comm_cost == space.cost_model.path_cost(paths[0]).params * 4

    # Top-tier paths are not scored by lower-tier clients.
    two_tiers = TierSpec([space.cost_model.min_path_flops, space.cost_model.min_path_flops + 1,
                          space.cost_model.max_path_flops])
    low = make_clients([s._replace(tier=0) for s in shards], train, val)
    expensive = Path([2] * space.L)
    fe = evaluate_federated(supernet, [expensive], low, two_tiers, 6, 1, numpy.random.default_rng(4))
    assert fe.metrics == [None] and fe.deliveries == 0 and fe.comm_cost == 0

    evaluator = FederatedEvaluator(supernet, clients, single_tier, 2, 2, seed=0, tier=0)
    assert len(evaluator(paths[:2])) == 2
    first = evaluator.comm_cost
    evaluator(paths[:2])
    assert evaluator.comm_cost > first and evaluator.last is not None


def _unittest_federated_evaluation_fidelity() -> None:
    """
    The rank agreement between federated and centralized evaluation grows with the number of evaluation rounds,
    and reaches full agreement once every client has taken part.
    """
    from ._federated import _make_tiny_setup, make_clients
    from ._data import ClientShard, partition_validation

    space = _make_tiny_setup()[0].space
    paths = [Path([a, b]) for a in range(4) for b in range(2)]
    accuracy = {tuple(p): 0.40 + 0.02 * i for i, p in enumerate(paths)}

    class Scorer:
        """A path classifies a sample correctly if the sample's key is below the path's accuracy."""
        def __init__(self, path: Path):
            self._threshold = accuracy[tuple(path)]

        def evaluate(self, inputs: numpy.ndarray, labels: numpy.ndarray) -> typing.Tuple[int, float]:
            correct = int(numpy.sum(inputs[:, 0, 0, 0] < self._threshold))
            return correct, float(len(labels) - correct)

    class ScoredSupernet:
        def __init__(self) -> None:
            self.space = space

        def view(self, path: Path) -> Scorer:
            return Scorer(path)

    # Keys evenly spread over [0, 1) so that no two paths tie on the whole validation set.
    rng = numpy.random.default_rng(0)
    keys = rng.permutation((numpy.arange(400) + 0.5) / 400)
    val = Dataset(numpy.broadcast_to(keys[:, None, None, None], (400,) + space.input_shape).copy(),
                  numpy.arange(400) % 3, 3)
    shards = partition_validation(val, [ClientShard(i, numpy.array([i])) for i in range(20)], rng)
    clients = make_clients(shards, val, val)
    tiers = TierSpec([space.cost_model.min_path_flops, space.cost_model.max_path_flops])
    supernet = typing.cast(Supernet, ScoredSupernet())

    central = [evaluate_centralized(supernet, p, val) for p in paths]
    assert central == sorted(central) and len(set(central)) == len(central)

    sweep = [1, 2, 3, 5, 10]    # Two clients per round; ten rounds use all of them.
    mean_tau = []
    for fe_rounds in sweep:
        taus = []
        for seed in range(5):
            fe = evaluate_federated(supernet, paths, clients, tiers, fe_rounds, 2, numpy.random.default_rng(seed))
            assert all(m is not None for m in fe.metrics)
            assert all(n == 2 * fe_rounds for n in fe.contributors)
            taus.append(kendall_tau(typing.cast(typing.List[float], fe.metrics), central))
        mean_tau.append(sum(taus) / len(taus))

    assert mean_tau == sorted(mean_tau)
    assert mean_tau[0] < 1.0
    assert mean_tau[sweep.index(5)] >= 0.8
    assert mean_tau[-1] == 1.0
