"""
Steady state performance measures and expected total cost.

The measures are expectations over the stationary distribution. Sums over the unbounded orbit
use the closed-form geometric tail of :func:`retrialqis.solver.tail_moments`, never a numeric
truncation.

===========  ===============================================  ==================
Measure      Meaning                                          Units
===========  ===============================================  ==================
L1           Mean inventory level                             items
L2           Mean reorder rate                                1/time
L3           Mean number of customers in orbit                customers
L4           Rate of customers entering the orbit             1/time
L5           Mean waiting time in orbit (L3 / L4)             time
L6           Mean number of customers in the waiting hall     customers
L7           Rate of primary customers entering the hall      1/time
L8           Mean waiting time in the hall (L6 / L7)          time
L9           Customer loss rate                               1/time
L10          Mean number of busy servers                      servers
L11          Mean number of servers on vacation               servers
L12          Mean number of idle servers                      servers
L13          Overall retrial rate                             1/time
L14          Rate of successful retrials                      1/time
L15          Fraction of successful retrials (L14 / L13)      -
L16          Probability that all servers are on vacation     -
===========  ===============================================  ==================

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import dataclasses

import numpy

from .exceptions import MetricsError
from .measures import MEASURES, REPORT_COLUMNS, ratio
from .solver import tail_moments
from .statespace import MacroKind


@dataclasses.dataclass(frozen=True)
class MetricsReport:
    """
    The sixteen steady state measures, the cost, and the health of the distribution they came from.

    ``L5`` and ``L15`` (and ``L8``) are None when their denominators vanish.
    ``L9_uniform`` is the loss rate with a single ``(1-p)`` weight on every full-hall state.
    """
    L1: float
    L2: float
    L3: float
    L4: float
    L5: float | None
    L6: float
    L7: float
    L8: float | None
    L9: float
    L10: float
    L11: float
    L12: float
    L13: float
    L14: float
    L15: float | None
    L16: float
    L9_uniform: float
    ETC: float
    normalisation_error: float = 0.0

    def as_dict(self):
        """
        Measures in report column order.

        :rtype: dict
        """
        return {a_column: getattr(self, a_column) for a_column in REPORT_COLUMNS}


class _Expectation:
    """
    Expectations over the stationary distribution of per-state quantities.
    """
    def __init__(self, dist):
        self._levels = dist.levels
        tail = tail_moments(dist)
        self._marginal = sum(self._levels) + tail.mass0
        self._orbit_weighted = sum(j * a_level for j, a_level in enumerate(self._levels)) + tail.mass1

    def __call__(self, values):
        """
        ``E[f(state)]`` for a vector ``f`` over the block.
        """
        return float(self._marginal @ values)

    def orbit(self, values):
        """
        ``E[iota1 f(state)]`` for a vector ``f`` over the block.
        """
        return float(self._orbit_weighted @ values)

    @property
    def total(self):
        return float(self._marginal.sum())


def expected_total_cost(report, params):
    """
    ``ch*L1 + cs*L2 + co*L3 + cw*L6 + cl*L9``.

    :type report: MetricsReport
    :type params: ModelParams
    :rtype: float
    """
    return (params.ch * report.L1 + params.cs * report.L2 + params.co * report.L3 +
            params.cw * report.L6 + params.cl * report.L9)


def compute_metrics(dist, space, params, tol=1e-8):
    """
    Evaluates the steady state measures of a stationary distribution.

    :param dist: Stationary distribution of the truncated chain.
    :type dist: StationaryDistribution
    :param space: The state space of one orbit level.
    :type space: StateSpace
    :param params: The parameters the distribution was computed for.
    :type params: ModelParams
    :param tol: Largest acceptable deviation of the total mass from 1.
    :rtype: MetricsReport
    :raises MetricsError: If the distribution is not normalised.
    """
    expect = _Expectation(dist)
    normalisation_error = abs(expect.total - 1.0)
    if normalisation_error > tol:
        raise MetricsError(f"Distribution is not normalised, total mass deviates from 1 by {normalisation_error:.3e}")

    ones = numpy.ones(space.block_dim)
    full = (space.hall == params.N).astype(float)
    not_full = 1.0 - full
    all_on_vacation = (space.kind != MacroKind.INV).astype(float)
    zero_star_full = ((space.kind == MacroKind.ZERO_STAR) & (space.hall == params.N)).astype(float)
    at_trigger = ((space.kind == MacroKind.INV) & (space.inventory == params.s + 1)).astype(float)

    L1 = expect(space.inventory.astype(float))
    L2 = expect(params.mu * space.busy * at_trigger)
    L3 = expect.orbit(ones)
    L4 = params.p * params.lam * expect(full)
    L6 = expect(space.hall.astype(float))
    L7 = params.lam * expect(not_full)
    L9 = params.p * params.lam * expect(zero_star_full) + (1.0 - params.p) * params.lam * expect(full - zero_star_full)
    L9_uniform = (1.0 - params.p) * params.lam * expect(full)
    L10 = expect(space.busy.astype(float))
    L11 = expect(space.vacation.astype(float))
    L12 = params.c - (L10 + L11)
    L13 = params.theta * L3
    L14 = params.theta * expect.orbit(not_full)
    L16 = expect(all_on_vacation)

    report = MetricsReport(L1=L1, L2=L2, L3=L3, L4=L4, L5=ratio(L3, L4), L6=L6, L7=L7, L8=ratio(L6, L7), L9=L9,
                           L10=L10, L11=L11, L12=L12, L13=L13, L14=L14, L15=ratio(L14, L13), L16=L16,
                           L9_uniform=L9_uniform, ETC=0.0, normalisation_error=normalisation_error)
    return dataclasses.replace(report, ETC=expected_total_cost(report, params))


def solution_metrics(solution):
    """
    Measures of a :class:`retrialqis.solver.QbdSolution`.
    """
    return compute_metrics(solution.distribution, solution.space, solution.params)
