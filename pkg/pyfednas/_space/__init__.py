#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

from ._cost import Path as Path
from ._cost import CostModel as CostModel

from ._search_space import DEFAULT_CANDIDATES as DEFAULT_CANDIDATES
from ._search_space import KNOWN_OPERATORS as KNOWN_OPERATORS
from ._search_space import SpaceConfig as SpaceConfig
from ._search_space import Layer as Layer
from ._search_space import FixedOperator as FixedOperator
from ._search_space import SearchSpace as SearchSpace
from ._search_space import make_operator as make_operator
from ._search_space import build_space as build_space
from ._search_space import cost_of_path as cost_of_path

from ._sampling import Subspace as Subspace
from ._sampling import full_subspace as full_subspace
from ._sampling import minimum_communication_budget as minimum_communication_budget
from ._sampling import sample_subspace as sample_subspace
from ._sampling import uniform_path as uniform_path
from ._sampling import sample_path_rejection as sample_path_rejection
from ._sampling import sample_path_greedy as sample_path_greedy
from ._sampling import enumerate_feasible_paths as enumerate_feasible_paths
from ._sampling import minimal_supernet as minimal_supernet

from ._supernet import OperatorKey as OperatorKey
from ._supernet import Model as Model
from ._supernet import Supernet as Supernet
from ._supernet import extract_model as extract_model

from ._tier import TierSpec as TierSpec
from ._tier import lower_quantile as lower_quantile
from ._tier import tier_boundaries as tier_boundaries
