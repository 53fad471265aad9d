"""
System parameters of the retrial queueing-inventory system.

A :class:`ModelParams` holds every rate, size, probability and unit cost of the system. Each
field is a validated property, so a value outside its own range is rejected on assignment,
while the relations that tie fields together (``s < S``, ``s < Q``, ``N >= c``) are checked by
:func:`validate_params` once all fields are in place. A constructed ModelParams is immutable.

The defaults reproduce the baseline configuration (S=32, s=10, c=3, N=4, M=5, ...).

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections

from .exceptions import ParameterError
from .properties import ParamInt, ParamFloat, ParamBase

DerivedQuantities = collections.namedtuple("DerivedQuantities", ["Q", "rho"])

# Field names as they appear in configuration files and reports, where they differ from the
# attribute name (``lambda`` is a Python keyword).
FIELD_ALIASES = {"lambda": "lam"}
REPORT_NAMES = {"lam": "lambda"}

RATE_FIELDS = ("lam", "mu", "theta", "eta", "beta")
COST_FIELDS = ("ch", "cs", "co", "cw", "cl")


class ModelParams:
    """
    Rates, sizes, probabilities and unit costs of the system.

    Keyword arguments may use either the attribute names or the report names (``lambda``).
    Omitted fields take their default values.
    """
    S = ParamInt(32, help_str="Maximum inventory level", units="items", vmin=1)
    s = ParamInt(10, help_str="Reorder level", units="items", vmin=0)
    c = ParamInt(3, help_str="Number of identical servers", vmin=1)
    N = ParamInt(4, help_str="Waiting hall capacity (including customers in service)", units="customers", vmin=1)
    M = ParamInt(5, help_str="Orbit level from which the retrial rate is frozen", vmin=1)
    lam = ParamFloat(2.5, help_str="Primary arrival rate", units="1/time", vmin=0.0, strict=True)
    mu = ParamFloat(5.0, help_str="Per-server service rate", units="1/time", vmin=0.0, strict=True)
    theta = ParamFloat(0.7, help_str="Per-customer retrial rate", units="1/time", vmin=0.0)
    eta = ParamFloat(2.7, help_str="Per-server vacation completion rate", units="1/time", vmin=0.0, strict=True)
    beta = ParamFloat(1.5, help_str="Replenishment (lead time) rate", units="1/time", vmin=0.0, strict=True)
    p = ParamFloat(0.7, help_str="Probability that an overflowing customer joins the orbit", vmin=0.0, vmax=1.0)
    ch = ParamFloat(0.01, help_str="Holding cost", units="per item per time", vmin=0.0)
    cs = ParamFloat(3.0, help_str="Setup cost", units="per order", vmin=0.0)
    co = ParamFloat(1.0, help_str="Orbit waiting cost", units="per customer per time", vmin=0.0)
    cw = ParamFloat(1.3, help_str="Waiting hall cost", units="per customer per time", vmin=0.0)
    cl = ParamFloat(0.01, help_str="Customer loss cost", units="per customer", vmin=0.0)

    def __init__(self, **kwargs):
        object.__setattr__(self, "_frozen", False)
        known = self.field_names()
        for key, value in kwargs.items():
            attr = FIELD_ALIASES.get(key, key)
            if attr not in known:
                raise ParameterError(key, f"Unknown model parameter {key}")
            setattr(self, attr, value)
        validate_params(self)
        object.__setattr__(self, "_frozen", True)

    def __setattr__(self, name, value):
        if self._frozen:
            raise AttributeError(f"ModelParams is immutable, cannot set {name}")
        super().__setattr__(name, value)

    @classmethod
    def fields(cls):
        """
        Returns the parameter descriptors in declaration order.

        :rtype: dict[str, ParamBase]
        """
        return {a_name: a_var for a_name, a_var in vars(cls).items() if isinstance(a_var, ParamBase)}

    @classmethod
    def field_names(cls):
        return tuple(cls.fields().keys())

    def as_dict(self, report_names=True):
        """
        Returns the parameter values in declaration order.

        :param report_names: Use the names of configuration files and reports (``lambda``) rather than attribute names.
        :type report_names: bool
        :rtype: dict
        """
        return {(REPORT_NAMES.get(a_name, a_name) if report_names else a_name): getattr(self, a_name)
                for a_name in self.field_names()}

    def replace(self, **changes):
        """
        Returns a new (validated) ModelParams with some fields changed.
        """
        values = self.as_dict(report_names=False)
        values.update({FIELD_ALIASES.get(k, k): v for k, v in changes.items()})
        return ModelParams(**values)

    def scaled(self, k):
        """
        Multiplies every rate by ``k``, which amounts to changing the unit of time.
        """
        if not k > 0:
            raise ParameterError("k", f"Rate scaling factor must be > 0, received {k}")
        return self.replace(**{a_field: getattr(self, a_field) * k for a_field in RATE_FIELDS})

    @property
    def Q(self):
        return self.S - self.s

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(tuple(self.as_dict().items()))

    def __repr__(self):
        values = ", ".join(f"{k}={v}" for k, v in self.as_dict().items())
        return f"ModelParams({values})"


def validate_params(raw):
    """
    Checks the relations between the fields of a set of parameters.

    Field ranges are enforced by the properties themselves; this checks what they cannot see
    on their own.

    :param raw: The parameters to check.
    :type raw: ModelParams
    :returns: The same object, unchanged.
    :rtype: ModelParams
    :raises ParameterError: Naming the field and the violated relation.
    """
    if not raw.s < raw.S:
        raise ParameterError("s", f"s must be < S, received s={raw.s}, S={raw.S}")
    if not raw.s < raw.S - raw.s:
        raise ParameterError("s", f"s must be < Q=S-s, received s={raw.s}, Q={raw.S - raw.s}")
    if not raw.N >= raw.c:
        raise ParameterError("N", f"N must be >= c, received N={raw.N}, c={raw.c}")
    return raw


def derived_quantities(params):
    """
    Reorder quantity and offered load.

    :param params: Validated parameters.
    :type params: ModelParams
    :rtype: DerivedQuantities
    """
    return DerivedQuantities(Q=params.S - params.s, rho=params.lam / (params.c * params.mu))


def report_name(name):
    """
    The name a parameter carries in configuration files and reports, given either of its names.
    """
    attr = FIELD_ALIASES.get(name, name)
    return REPORT_NAMES.get(attr, attr)
