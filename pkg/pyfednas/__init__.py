#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import sys as _sys

_min_supported_python_version = 3, 7
if _sys.version_info[:2] < _min_supported_python_version:   # pragma: no cover
    print('This package requires a Python version', '.'.join(map(str, _min_supported_python_version)), 'or newer',
          file=_sys.stderr)
    _sys.exit(1)

__version__ = '1.0.0'
__version_info__ = tuple(map(int, __version__.split('.')))
__license__ = 'MIT'
__author__ = 'pyfednas contributors'

# Never import anything that is not available here - API stability guarantees are only provided for the exposed items.

# Error model.
from ._error import SimulationError as SimulationError
from ._error import InternalError as InternalError
from ._error import InvalidConfigError as InvalidConfigError
from ._error import ContractViolationError as ContractViolationError
from ._error import NonFiniteGradientError as NonFiniteGradientError
from ._error import SearchSpaceError as SearchSpaceError
from ._error import BudgetInfeasibleError as BudgetInfeasibleError
from ._error import DegenerateSpaceError as DegenerateSpaceError
from ._error import PartitionError as PartitionError
from ._error import AggregationError as AggregationError
from ._error import RoundAbortedError as RoundAbortedError
from ._error import EligibilityError as EligibilityError
from ._error import RankingError as RankingError

# Search space and supernet.
from ._space import Path as Path
from ._space import CostModel as CostModel
from ._space import SpaceConfig as SpaceConfig
from ._space import SearchSpace as SearchSpace
from ._space import build_space as build_space
from ._space import cost_of_path as cost_of_path
from ._space import Subspace as Subspace
from ._space import full_subspace as full_subspace
from ._space import sample_subspace as sample_subspace
from ._space import uniform_path as uniform_path
from ._space import sample_path_rejection as sample_path_rejection
from ._space import sample_path_greedy as sample_path_greedy
from ._space import enumerate_feasible_paths as enumerate_feasible_paths
from ._space import minimal_supernet as minimal_supernet
from ._space import Model as Model
from ._space import Supernet as Supernet
from ._space import extract_model as extract_model
from ._space import TierSpec as TierSpec
from ._space import tier_boundaries as tier_boundaries

# Data.
from ._data import Dataset as Dataset
from ._data import ClientShard as ClientShard
from ._data import gen_synthetic as gen_synthetic
from ._data import lda_partition as lda_partition
from ._data import assign_tiers as assign_tiers
from ._data import holdout_split as holdout_split
from ._data import val_subsample as val_subsample
from ._data import partition_validation as partition_validation
from ._data import save_dataset as save_dataset
from ._data import load_dataset as load_dataset

# Federated training.
from ._federated import Aggregator as Aggregator
from ._federated import LocalConfig as LocalConfig
from ._federated import TrainingConfig as TrainingConfig
from ._federated import Client as Client
from ._federated import ClientUpdate as ClientUpdate
from ._federated import RoundReport as RoundReport
from ._federated import make_clients as make_clients
from ._federated import communication_budget as communication_budget
from ._federated import client_local_train as client_local_train
from ._federated import opa_aggregate as opa_aggregate
from ._federated import fedavg_aggregate as fedavg_aggregate
from ._federated import run_round as run_round
from ._federated import probe_validation as probe_validation
from ._federated import train_supernet as train_supernet

# Search.
from ._search import Metric as Metric
from ._search import Individual as Individual
from ._search import ParetoFront as ParetoFront
from ._search import SearchResult as SearchResult
from ._search import dominates as dominates
from ._search import nondominated_sort as nondominated_sort
from ._search import crowding_distance as crowding_distance
from ._search import nsga2_search as nsga2_search
from ._search import evaluate_centralized as evaluate_centralized
from ._search import evaluate_federated as evaluate_federated
from ._search import CentralEvaluator as CentralEvaluator
from ._search import FederatedEvaluator as FederatedEvaluator
from ._search import kendall_tau as kendall_tau

# Fine-tuning and baselines.
from ._finetune import Provenance as Provenance
from ._finetune import FinetuneConfig as FinetuneConfig
from ._finetune import TierModel as TierModel
from ._finetune import finetune_tier as finetune_tier
from ._finetune import rand_init_baseline as rand_init_baseline
from ._finetune import random_search_baseline as random_search_baseline

# Experiments.
from ._config import ExperimentConfig as ExperimentConfig
from ._config import load_config as load_config
from ._config import parse_config as parse_config
from ._config import validate as validate
from ._experiment import Experiment as Experiment
from ._experiment import report as report
from ._metrics import save_model as save_model
from ._metrics import load_model as load_model
