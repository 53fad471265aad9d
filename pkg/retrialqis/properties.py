"""
Validated properties for parameter objects.

Each property is a Python descriptor that checks (and coerces) a value on assignment and
records a default value and a short description.

:authors: Athanasios Anastasiou
:date: Oct 2026
"""

import enum

from .exceptions import ParameterError


class SpecialPropertyValues(enum.Enum):
    """
    Special values for properties.
    """
    # Denotes that the property has not even been attempted to be set by the user.
    UNDEFINED = 1


class ParamBase:
    """
    Models a single validated parameter along with its constraints.

    This is a Python descriptor.

    :param default_value: The value the parameter takes when it is not set explicitly.
    :param help_str: A short human readable description (used by the CLI).
    :param units: The units the value is expressed in.

    :type default_value: Any
    :type help_str: str
    :type units: str
    """
    def __init__(self, default_value=SpecialPropertyValues.UNDEFINED, help_str="", units=""):
        self._name = None
        self._private_name = None
        self._help_str = help_str
        self._units = units
        self._default_value = default_value

    def __set_name__(self, owner, name):
        """
        Creates the private member attribute and validates the default against the constraints.
        """
        self._name = name
        self._private_name = f"_{name}"
        if self._default_value is not SpecialPropertyValues.UNDEFINED:
            self._default_value = self.validate(self._default_value)
        setattr(owner, self._private_name, self._default_value)

    def __get__(self, obj, obj_type=None):
        if obj is None:
            return self
        return getattr(obj, self._private_name)

    def __set__(self, obj, value):
        setattr(obj, self._private_name, self.validate(value))

    def validate(self, a_value):
        return a_value

    @property
    def name(self):
        return self._name

    @property
    def default_value(self):
        return self._default_value

    @property
    def help_str(self):
        return self._help_str

    @property
    def units(self):
        return self._units


class _BoundedParam(ParamBase):
    """
    Shared range checks for numeric parameters.

    Lower bounds are inclusive unless ``strict`` is set; upper bounds are always inclusive.
    """
    def __init__(self, default_value=SpecialPropertyValues.UNDEFINED, help_str="", units="",
                 vmin=None, vmax=None, strict=False):
        self._vmin = vmin
        self._vmax = vmax
        self._strict = strict
        super().__init__(default_value, help_str, units)

    @property
    def vmin(self):
        return self._vmin

    @property
    def vmax(self):
        return self._vmax

    @property
    def strict(self):
        return self._strict

    def _check_range(self, new_value):
        if self._vmin is not None and self._vmax is not None:
            if not (self._vmin <= new_value <= self._vmax):
                raise ParameterError(self._name,
                                     f"{self._name} must lie in [{self._vmin},{self._vmax}], received {new_value}")
        if self._vmin is not None:
            if self._strict and new_value <= self._vmin:
                raise ParameterError(self._name, f"{self._name} must be > {self._vmin}, received {new_value}")
            if new_value < self._vmin:
                raise ParameterError(self._name, f"{self._name} must be >= {self._vmin}, received {new_value}")
        if self._vmax is not None and new_value > self._vmax:
            raise ParameterError(self._name, f"{self._name} must be <= {self._vmax}, received {new_value}")
        return new_value


class ParamInt(_BoundedParam):
    """
    Enforces a parameter to hold an integer number.

    An integer parameter (x) can have:

    * A `default_value`
    * A `help_str` (used by the command line help).
    * `vmin, vmax` such that `vmin <= x <= vmax`.
    """
    def validate(self, new_value):
        if isinstance(new_value, bool):
            raise ParameterError(self._name, f"{self._name} expects an integer, received {new_value!r}")
        try:
            as_float = float(new_value)
        except (TypeError, ValueError):
            raise ParameterError(self._name, f"{self._name} expects an integer, received {new_value!r}")
        if not as_float.is_integer():
            raise ParameterError(self._name, f"{self._name} expects an integer, received {new_value!r}")
        return self._check_range(int(as_float))


class ParamFloat(_BoundedParam):
    def validate(self, new_value):
        if isinstance(new_value, bool):
            raise ParameterError(self._name, f"{self._name} expects a real number, received {new_value!r}")
        try:
            new_value = float(new_value)
        except (TypeError, ValueError):
            raise ParameterError(self._name, f"{self._name} expects a real number, received {new_value!r}")
        if new_value != new_value or new_value in (float("inf"), float("-inf")):
            raise ParameterError(self._name, f"{self._name} expects a finite real number, received {new_value}")
        return self._check_range(new_value)
