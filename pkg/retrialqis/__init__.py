"""
Matrix-analytic solver and simulation oracle for a multi-server retrial queueing-inventory
system with asynchronous multiple server vacations and (s,Q) replenishment.

The analytic pipeline runs

    ModelParams -> StateSpace -> GeneratorBlocks -> solve() -> compute_metrics()

and :mod:`retrialqis.simulator` provides an independent discrete-event estimate of the same
measures.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

from .exceptions import (RetrialQISException, ParameterError, ConfigurationError, StateNotFound, GeneratorError,
                         NumericalError, ReducibleGeneratorError, RDivergenceError, ConditioningError,
                         DivergentTailError, UnstableModelError, MetricsError, SimulationError, ConditioningWarning)
from .model import ModelParams, validate_params, derived_quantities
from .statespace import StateSpace, enumerate_states, block_dimension_formula, dump_states
from .generator import GeneratorBlocks, dump_generator
from .solver import solve, QbdSolution, StationaryDistribution, dump_solution
from .metrics import MetricsReport, compute_metrics, solution_metrics, expected_total_cost
from .simulator import simulate, replicate, SimEstimate

__version__ = "0.1.0"
