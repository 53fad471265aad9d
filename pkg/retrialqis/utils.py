"""
Utilities shared by the command line and the experiment drivers: configuration loading,
worker pools, logging setup and report emission.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import concurrent.futures
import logging
import os
import pathlib
import re
import sys

import pandas
import yaml

from .exceptions import ConfigurationError, ParameterError
from .model import ModelParams, FIELD_ALIASES

CONFIG_SECTIONS = {"solver": {"tol", "max_iter", "auto_M", "tail_tol"},
                   "simulation": {"reps", "horizon", "warmup", "seed"},
                   "sweep": None,
                   "optimise": None}

LOG_FORMAT = "%(levelname)s:%(name)s:%(asctime)s:%(message)s"


def setup_logging(level=None):
    """
    Configures the root logger once, from ``level`` or the ``RQIS_LOGLEVEL`` environment variable.
    """
    level = level or os.environ.get("RQIS_LOGLEVEL", "WARNING")
    logging.basicConfig(format=LOG_FORMAT, datefmt="%m/%d/%Y %I:%M:%S %p", level=getattr(logging, str(level).upper(), logging.WARNING))


def worker_count(default=None):
    """
    Size of the worker pool, from ``RQIS_WORKERS`` (defaults to the number of CPUs).
    """
    value = os.environ.get("RQIS_WORKERS")
    if value is None:
        return default if default is not None else (os.cpu_count() or 1)
    try:
        workers = int(value)
    except ValueError:
        raise ConfigurationError(f"RQIS_WORKERS must be an integer, received {value}")
    if workers < 1:
        raise ConfigurationError(f"RQIS_WORKERS must be >= 1, received {workers}")
    return workers


def map_in_pool(func, items, workers=None):
    """
    Applies ``func`` to every item, in a process pool when more than one worker is available.

    Results come back in the order of ``items`` regardless of completion order.

    :param func: A picklable (module level) callable.
    :param items: The arguments, one per call.
    :param workers: Pool size, defaults to :func:`worker_count`.
    :rtype: list
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(an_item) for an_item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


_KEY_VALUE = re.compile(r"^(\s*)([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*)$")


def _normalise_key_values(text):
    """
    Turns ``key = value`` lines into YAML ``key: value`` lines, leaving everything else alone.
    """
    return "\n".join(_KEY_VALUE.sub(r"\1\2: \3", a_line) for a_line in text.splitlines())


def parse_config_text(text):
    """
    Parses the text of a configuration file into a dictionary.

    :rtype: dict
    """
    try:
        content = yaml.safe_load(_normalise_key_values(text))
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Malformed configuration: {e}")
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigurationError("A configuration is expected to be a mapping of parameter names to values")
    return content


def read_config(path=None):
    """
    Reads a configuration file; no path (or an empty file) means the baseline configuration.

    :rtype: dict
    """
    if path is None:
        return {}
    config_path = pathlib.Path(path)
    try:
        text = config_path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration {config_path}: {e}")
    return parse_config_text(text)


def parse_overrides(overrides):
    """
    Parses repeated ``key=value`` command line overrides.

    :rtype: dict
    """
    values = {}
    for an_override in overrides or ():
        if "=" not in an_override:
            raise ConfigurationError(f"Overrides are expected as key=value. Please revise {an_override} and try again")
        key, value = an_override.split("=", 1)
        key = key.strip()
        try:
            values[key] = yaml.safe_load(value)
        except yaml.YAMLError:
            values[key] = value.strip()
    return values


def split_config(config):
    """
    Separates the model parameters of a configuration from its optional sections.

    :returns: (parameter values, sections)
    :rtype: tuple[dict, dict]
    """
    params, sections = {}, {}
    known = set(ModelParams.field_names()) | set(FIELD_ALIASES)
    for key, value in config.items():
        if key in CONFIG_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"Section {key} is expected to be a mapping")
            allowed = CONFIG_SECTIONS[key]
            if allowed is not None and not set(value) <= allowed:
                raise ConfigurationError(f"Unknown keys in section {key}: {sorted(set(value) - allowed)}")
            sections[key] = value
        elif key in known:
            params[key] = value
        else:
            raise ConfigurationError(f"Unknown configuration key {key}")
    return params, sections


def params_from_config(config, overrides=None):
    """
    Builds validated parameters from a configuration mapping and overrides.

    :rtype: tuple[ModelParams, dict]
    :raises ConfigurationError: On unknown keys or values that fail validation.
    """
    values, sections = split_config(dict(config))
    extra_values, extra_sections = split_config(overrides or {})
    values.update(extra_values)
    for a_section, section_values in extra_sections.items():
        sections.setdefault(a_section, {}).update(section_values)
    try:
        return ModelParams(**values), sections
    except ParameterError as e:
        raise ConfigurationError(f"Invalid parameter {e.field}: {e.message}")


def write_table(table, out=None):
    """
    Writes a table as CSV to a path, or to stdout.

    :type table: pandas.DataFrame
    """
    if out is None or str(out) == "-":
        table.to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        table.to_csv(out, index=False, lineterminator="\n")


def write_text(text, out=None):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        pathlib.Path(out).write_text(text)
