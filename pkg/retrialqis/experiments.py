"""
Experiment drivers: single solves, parameter sweeps, inventory optimisation and analytic
versus simulated validation.

Every driver returns a pandas table with one row per parameter point (or per measure, for the
validation), in deterministic order regardless of how the work was distributed.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import dataclasses
import itertools
import logging
import math
import time

import pandas

from .exceptions import ConfigurationError, ParameterError, RetrialQISException
from .measures import REPORT_COLUMNS
from .metrics import solution_metrics
from .model import ModelParams, FIELD_ALIASES, report_name
from .simulator import replicate
from .solver import solve
from .utils import map_in_pool

PARAM_COLUMNS = ("lambda", "mu", "theta", "eta", "beta", "p", "S", "s", "c", "N", "M")
POINT_COLUMNS = PARAM_COLUMNS + REPORT_COLUMNS + ("error",)


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 100000
    auto_M: bool = False
    tail_tol: float = 1e-6

    @classmethod
    def from_section(cls, section, **overrides):
        values = dict(section or {})
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(tol=float(values.get("tol", cls.tol)),
                       max_iter=int(values.get("max_iter", cls.max_iter)),
                       auto_M=bool(values.get("auto_M", cls.auto_M)),
                       tail_tol=float(values.get("tail_tol", cls.tail_tol)))
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid solver settings: {e}")


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """
    A base parameter point and the grids of the swept parameters.

    Several swept parameters form a cartesian grid, iterated with the last parameter varying fastest.

    :param base: The parameters that are not swept.
    :param grids: Swept parameter name to its values.
    """
    base: ModelParams
    grids: dict
    out: str = None

    def __post_init__(self):
        if not self.grids:
            raise ConfigurationError("A sweep needs at least one swept parameter")
        known = set(ModelParams.field_names()) | set(FIELD_ALIASES)
        for a_name, a_grid in self.grids.items():
            if a_name not in known:
                raise ConfigurationError(f"Cannot sweep {a_name}, it is not a model parameter")
            if not isinstance(a_grid, (list, tuple)) or len(a_grid) == 0:
                raise ConfigurationError(f"The grid of {a_name} must be a non-empty list")
        for a_point in self.assignments():
            try:
                self.base.replace(**a_point)
            except ParameterError as e:
                raise ConfigurationError(f"Grid point {a_point} is invalid: {e.message}")

    def assignments(self):
        names = list(self.grids)
        for values in itertools.product(*(self.grids[a_name] for a_name in names)):
            yield dict(zip(names, values))

    def points(self):
        """
        The validated parameter points of the grid, in grid order.

        :rtype: list[ModelParams]
        """
        return [self.base.replace(**a_point) for a_point in self.assignments()]


def solve_point(params, options=None, perturbation=None):
    """
    Runs the analytic pipeline for one parameter point with the given solver settings.

    :type options: SolverOptions
    :rtype: QbdSolution
    """
    options = options or SolverOptions()
    return solve(params, tol=options.tol, max_iter=options.max_iter, auto_M=options.auto_M,
                 tail_tol=options.tail_tol, perturbation=perturbation)


def parameter_row(params):
    """
    The parameter columns of a report row.
    """
    values = params.as_dict()
    return {k: values[k] for k in PARAM_COLUMNS}


def solution_row(solution):
    """
    Report row of a solved parameter point (parameters, measures and an empty error column).

    :type solution: QbdSolution
    :rtype: dict
    """
    row = dict.fromkeys(POINT_COLUMNS)
    row.update(parameter_row(solution.params))
    row.update(solution_metrics(solution).as_dict())
    row["error"] = ""
    return row


def simulation_row(params, estimate):
    """
    Report row of a simulation estimate, in the analytic columns followed by the standard errors.

    :type estimate: SimEstimate
    :rtype: dict
    """
    row = parameter_row(params)
    row.update(estimate.as_dict())
    return row


def evaluate_point(args):
    """
    Solves one parameter point and returns its report row; failures are recorded in the ``error`` column.

    :param args: (params, solver options, perturbation)
    :rtype: dict
    """
    params, options, perturbation = args
    started = time.perf_counter()
    try:
        row = solution_row(solve_point(params, options, perturbation))
    except RetrialQISException as e:
        row = dict.fromkeys(POINT_COLUMNS)
        row.update(parameter_row(params))
        row["error"] = f"{type(e).__name__}: {e.message}"
        logging.warning(f"Point {params} failed with {row['error']}")
    logging.info(f"Point solved in {time.perf_counter() - started:.3f}s")
    return row


def run_points(points, options=None, perturbation=None, workers=None):
    """
    Report rows of several parameter points.

    :rtype: pandas.DataFrame
    """
    options = options or SolverOptions()
    rows = map_in_pool(evaluate_point, [(a_point, options, perturbation) for a_point in points], workers)
    return pandas.DataFrame(rows, columns=list(POINT_COLUMNS))


def run_sweep(spec, options=None, workers=None):
    """
    Evaluates every point of a sweep.

    :type spec: SweepSpec
    :rtype: pandas.DataFrame
    """
    points = spec.points()
    logging.info(f"Sweeping {', '.join(spec.grids)} over {len(points)} points")
    return run_points(points, options, workers=workers)


def to_long(table, id_columns=PARAM_COLUMNS):
    """
    Long format (one row per point and measure) of a report table, for plotting tools.

    :rtype: pandas.DataFrame
    """
    id_columns = [a_column for a_column in id_columns if a_column in table.columns]
    value_columns = [a_column for a_column in REPORT_COLUMNS if a_column in table.columns]
    return table.melt(id_vars=id_columns, value_vars=value_columns, var_name="measure", value_name="value")


def run_optimisation(base, grids, options=None, workers=None, objective="ETC"):
    """
    Evaluates the objective over a grid of inventory (and optionally hall) sizes and locates its minimum.

    :param base: Parameters that are not varied.
    :param grids: Grid per varied parameter, for example ``{"S": [...], "N": [...]}``.
    :returns: The table of all points and a summary of the best one.
    :rtype: tuple[pandas.DataFrame, dict]
    """
    spec = SweepSpec(base, grids)
    table = run_sweep(spec, options, workers)
    feasible = table[(table["error"] == "") & table[objective].notna()]
    if feasible.empty:
        return table, {"objective": objective, "best": None, "interior": False}
    best_position = feasible[objective].astype(float).idxmin()
    best = table.loc[best_position]
    interior = True
    for a_name in spec.grids:
        column = report_name(a_name)
        others = [report_name(n) for n in spec.grids if n != a_name]
        line = feasible
        for another in others:
            line = line[line[another] == best[another]]
        line = line.sort_values(column)
        position = list(line.index).index(best_position)
        if position == 0 or position == len(line) - 1:
            interior = False
    summary = {"objective": objective,
               "best": {k: _plain(best[k]) for k in PARAM_COLUMNS},
               "value": float(best[objective]),
               "interior": interior}
    logging.info(f"Minimum {objective}={summary['value']:.6g} at {summary['best']} (interior: {interior})")
    return table, summary


def _plain(value):
    return value.item() if hasattr(value, "item") else value


def z_score(analytic, simulated, se):
    """
    ``(analytic - simulated) / se``; NaN when either value is undefined.
    """
    if analytic is None or simulated is None or se is None:
        return math.nan
    if se == 0:
        return 0.0 if math.isclose(analytic, simulated, rel_tol=0.0, abs_tol=1e-12) else math.inf
    return (analytic - simulated) / se


def run_validation(params, reps, horizon, warmup=0.0, seed=0, options=None, perturbation=None, workers=None,
                   threshold=3.0):
    """
    Compares the analytic measures against simulation replications.

    :param perturbation: Rate multipliers applied to the analytic generator only (mutation checks).
    :returns: One row per measure with the analytic value, the simulated mean and standard error,
              the z-score and whether ``|z|`` exceeds the threshold.
    :rtype: pandas.DataFrame
    """
    solution = solve_point(params, options, perturbation)
    analytic = solution_metrics(solution).as_dict()
    estimate = replicate(params, reps, horizon, warmup, seed, workers=workers)
    rows = []
    for a_measure in REPORT_COLUMNS:
        # The simulator has a single loss rate; both analytic loss variants are compared against it.
        simulated_column = "L9" if a_measure == "L9_uniform" else a_measure
        simulated = estimate.mean[simulated_column]
        se = estimate.se[simulated_column]
        z = z_score(analytic[a_measure], simulated, se)
        rows.append({"measure": a_measure, "analytic": analytic[a_measure], "simulated": simulated, "se": se,
                     "z": z, "flag": bool(not math.isnan(z) and abs(z) > threshold)})
    table = pandas.DataFrame(rows, columns=["measure", "analytic", "simulated", "se", "z", "flag"])
    logging.info(f"Validation flagged {int(table['flag'].sum())} of {len(table)} measures")
    return table
