#!/bin/env python
"""

Retrial queueing-inventory solver
---------------------------------

::

    Usage: rqis [OPTIONS] COMMAND [ARGS]...

      Retrial queueing-inventory system -- solver and simulation oracle.

    Options:
      --log-level TEXT  Logging level (overrides RQIS_LOGLEVEL)
      --help            Show this message and exit.

    Commands:
      dump-generator  Lists the nonzero entries of the generator blocks...
      dump-space      Lists the states of one orbit level
      optimise        Locates the minimum expected total cost over a grid...
      simulate        Estimates the measures by independent simulation...
      solve           Solves one model and reports its measures
      sweep           Solves every point of a parameter grid
      validate        Compares the analytic measures against simulation


Configuration
-------------

Every command reads an optional configuration file (``--config``), a YAML mapping (``key: value``
or ``key = value`` lines) of model parameters, optionally followed by the sections ``solver``,
``simulation``, ``sweep`` and ``optimise``. Omitted parameters take their baseline values and
repeated ``--set key=value`` options override the file.

::

    S = 32
    s = 10
    lambda = 2.5
    solver:
      auto_M: true
    sweep:
      lambda: [2.0, 2.25, 2.5, 2.75, 3.0]


Exit codes
----------

0 on success, 1 on configuration errors, 2 when the model is unstable and 3 on numerical or
simulation failures.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import contextlib
import sys

import click
import pandas
import yaml

from retrialqis import experiments
from retrialqis import exceptions
from retrialqis import utils
from retrialqis.generator import GeneratorBlocks, dump_generator
from retrialqis.simulator import replicate
from retrialqis.solver import dump_solution
from retrialqis.statespace import enumerate_states, dump_states

SIMULATION_DEFAULTS = {"reps": 16, "horizon": 100000.0, "warmup": 100.0, "seed": 0}


def _fail(message, code):
    click.echo(message, err=True)
    sys.exit(code)


@contextlib.contextmanager
def exit_codes():
    """
    Maps package exceptions to the exit codes of the command line.
    """
    try:
        yield
    except exceptions.UnstableModelError as e:
        _fail(f"unstable: z1*p*lambda={e.drift_up:.6g} >= z2*M*theta={e.drift_down:.6g}", 2)
    except (exceptions.ConfigurationError, exceptions.ParameterError) as e:
        _fail(f"ERROR: {e.message}", 1)
    except (exceptions.NumericalError, exceptions.SimulationError, exceptions.MetricsError) as e:
        _fail(f"ERROR: {type(e).__name__}: {e.message}", 3)
    except ValueError as e:
        _fail(f"ERROR: {e}", 1)


def _load(config, overrides):
    return utils.params_from_config(utils.read_config(config), utils.parse_overrides(overrides))


def _grids(section, grid_options):
    grids = dict(section or {})
    grids.update(utils.parse_overrides(grid_options))
    return grids


def _perturbation(perturb):
    try:
        return {k: float(v) for k, v in utils.parse_overrides(perturb).items()} or None
    except (TypeError, ValueError) as e:
        raise exceptions.ConfigurationError(
            f"Rate multipliers are expected as class=factor or class@state_index=factor: {e}")


def _simulation_settings(section, **overrides):
    values = dict(SIMULATION_DEFAULTS)
    values.update(section or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return int(values["reps"]), float(values["horizon"]), float(values["warmup"]), int(values["seed"])
    except (TypeError, ValueError) as e:
        raise exceptions.ConfigurationError(f"Invalid simulation settings: {e}")


config_option = click.option("--config", "-c", type=click.Path(exists=True, dir_okay=False), default=None,
                             help="Configuration file (YAML or key = value lines)")
set_option = click.option("--set", "-s", "overrides", multiple=True, help="Parameter override, as key=value")
out_option = click.option("--out", "-o", type=click.Path(dir_okay=False), default=None,
                          help="Output file (defaults to stdout)")
grid_option = click.option("--grid", "-g", multiple=True, help="Grid of a parameter, as name=[v1,v2,...]")
perturb_option = click.option("--perturb", multiple=True, hidden=True,
                              help="Multiplies a rate of the analytic generator, as class=factor or class@state_index=factor")


def simulation_options(func):
    for an_option in reversed([click.option("--reps", type=int, default=None,
                                            help="Number of replications (default 16)"),
                               click.option("--horizon", type=float, default=None,
                                            help="Simulated time per replication (default 1e5)"),
                               click.option("--warmup", type=float, default=None, help="Warm-up time per replication"),
                               click.option("--seed", type=int, default=None, help="Base seed of the replication streams")]):
        func = an_option(func)
    return func


@click.group()
@click.option("--log-level", type=str, default=None, help="Logging level (overrides RQIS_LOGLEVEL)")
def rqis(log_level):
    """
    Retrial queueing-inventory system -- solver and simulation oracle.
    """
    utils.setup_logging(log_level)


@rqis.command()
@config_option
@set_option
@out_option
@click.option("--auto-M", "auto_M", is_flag=True, default=False, help="Double M until the tail mass is negligible")
@click.option("--diagnostics", "-d", type=click.Path(dir_okay=False), default=None,
              help="Writes the numerical diagnostics (YAML) to this file")
@click.option("--distribution", type=click.Path(dir_okay=False), default=None,
              help="Writes the stationary distribution of levels 0..M (CSV) to this file")
@perturb_option
def solve(config, overrides, out, auto_M, diagnostics, distribution, perturb):
    """
    Solves one model and reports its measures
    """
    with exit_codes():
        params, sections = _load(config, overrides)
        options = experiments.SolverOptions.from_section(sections.get("solver"), auto_M=auto_M or None)
        solution = experiments.solve_point(params, options, _perturbation(perturb))
        table = pandas.DataFrame([experiments.solution_row(solution)], columns=list(experiments.POINT_COLUMNS))
        utils.write_table(table.drop(columns=["error"]), out)
        if diagnostics is not None:
            utils.write_text(yaml.safe_dump(solution.diagnostics(), sort_keys=False), diagnostics)
        if distribution is not None:
            utils.write_table(dump_solution(solution.distribution), distribution)


@rqis.command()
@config_option
@set_option
@out_option
@grid_option
@click.option("--long", "long_format", is_flag=True, default=False,
              help="One row per point and measure (for plotting tools)")
def sweep(config, overrides, out, grid, long_format):
    """
    Solves every point of a parameter grid

    The grid comes from the ``sweep`` section of the configuration and from --grid options.
    Points that fail carry their error in the ``error`` column.
    """
    with exit_codes():
        params, sections = _load(config, overrides)
        spec = experiments.SweepSpec(params, _grids(sections.get("sweep"), grid), out)
        options = experiments.SolverOptions.from_section(sections.get("solver"))
        table = experiments.run_sweep(spec, options)
        utils.write_table(experiments.to_long(table) if long_format else table, out)


@rqis.command()
@config_option
@set_option
@out_option
@simulation_options
def simulate(config, overrides, out, reps, horizon, warmup, seed):
    """
    Estimates the measures by independent simulation replications
    """
    with exit_codes():
        params, sections = _load(config, overrides)
        reps, horizon, warmup, seed = _simulation_settings(sections.get("simulation"), reps=reps, horizon=horizon,
                                                           warmup=warmup, seed=seed)
        estimate = replicate(params, reps, horizon, warmup, seed)
        utils.write_table(pandas.DataFrame([experiments.simulation_row(params, estimate)]), out)


@rqis.command()
@config_option
@set_option
@out_option
@simulation_options
@click.option("--threshold", type=float, default=3.0, help="Flags measures with |z| above this")
@perturb_option
def validate(config, overrides, out, reps, horizon, warmup, seed, threshold, perturb):
    """
    Compares the analytic measures against simulation
    """
    with exit_codes():
        params, sections = _load(config, overrides)
        reps, horizon, warmup, seed = _simulation_settings(sections.get("simulation"), reps=reps, horizon=horizon,
                                                           warmup=warmup, seed=seed)
        options = experiments.SolverOptions.from_section(sections.get("solver"))
        table = experiments.run_validation(params, reps, horizon, warmup, seed, options,
                                           perturbation=_perturbation(perturb), threshold=threshold)
        utils.write_table(table, out)


@rqis.command()
@config_option
@set_option
@out_option
@grid_option
@click.option("--summary", type=click.Path(dir_okay=False), default=None,
              help="Writes the best grid point (YAML) to this file instead of stderr")
def optimise(config, overrides, out, grid, summary):
    """
    Locates the minimum expected total cost over a grid of S (and optionally s or N)
    """
    with exit_codes():
        params, sections = _load(config, overrides)
        grids = _grids(sections.get("optimise"), grid)
        if not grids:
            raise exceptions.ConfigurationError("Optimisation needs a grid, e.g. --grid S=[20,24,28,32,36]")
        options = experiments.SolverOptions.from_section(sections.get("solver"))
        table, best = experiments.run_optimisation(params, grids, options)
        utils.write_table(table, out)
        text = yaml.safe_dump(best, sort_keys=False)
        if summary is None:
            click.echo(text, err=True)
        else:
            utils.write_text(text, summary)


@rqis.command("dump-space")
@config_option
@set_option
@out_option
def dump_space(config, overrides, out):
    """
    Lists the states of one orbit level
    """
    with exit_codes():
        params, _ = _load(config, overrides)
        utils.write_text(dump_states(enumerate_states(params)), out)


@rqis.command("dump-generator")
@config_option
@set_option
@out_option
@click.option("--level", "-l", type=int, default=1, help="Orbit level of the blocks")
def dump_generator_blocks(config, overrides, out, level):
    """
    Lists the nonzero entries of the generator blocks of one orbit level
    """
    with exit_codes():
        params, _ = _load(config, overrides)
        if level < 0:
            raise exceptions.ConfigurationError(f"Orbit levels are >= 0, received {level}")
        blocks = GeneratorBlocks(enumerate_states(params), params)
        utils.write_text(dump_generator(blocks, level), out)


if __name__ == "__main__":
    rqis()
