#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

from ._parameter import Tensor as Tensor
from ._parameter import Parameter as Parameter
from ._parameter import ParameterSet as ParameterSet
from ._parameter import ValueSet as ValueSet
from ._parameter import copy_parameter_set as copy_parameter_set
from ._parameter import values_of as values_of
from ._parameter import parameters_from_values as parameters_from_values
from ._parameter import count_scalars as count_scalars

from ._operator import Shape as Shape
from ._operator import Cost as Cost
from ._operator import sum_costs as sum_costs
from ._operator import Operator as Operator
from ._operator import Identity as Identity
from ._operator import Zero as Zero
from ._operator import Dense as Dense
from ._operator import Conv1x1 as Conv1x1
from ._operator import Conv3x3 as Conv3x3
from ._operator import DWSepConv as DWSepConv
from ._operator import AvgPool as AvgPool
from ._operator import AffineNorm as AffineNorm
from ._operator import forward as forward
from ._operator import backward as backward
from ._operator import op_cost as op_cost

from ._loss import softmax_cross_entropy as softmax_cross_entropy
from ._loss import count_correct as count_correct

from ._optimizer import sgd_step as sgd_step
from ._optimizer import Schedule as Schedule
from ._optimizer import scheduled_lr as scheduled_lr
