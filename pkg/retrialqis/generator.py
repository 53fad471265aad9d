"""
Block matrices of the infinitesimal generator.

The generator is block tridiagonal over the orbit size ``iota1``::

    level iota1 -> iota1 + 1 : H0                 (overflowing arrival joins the orbit)
    level iota1 -> iota1     : Hdiag(iota1)       (arrivals, services, vacations, replenishment)
    level iota1 -> iota1 - 1 : Hlower(iota1)      (successful retrial)

Every block is a dense square matrix over the states of one orbit level (see
:mod:`retrialqis.statespace`). Diagonals are the negated row outflow, which includes the
overflow rate housed in H0 and the retrial rate housed in Hlower.

Server decisions follow the residual queue and residual stock left over by the *other* active
servers: after a service completion (with the departing customer and the item already gone) a
server keeps serving if both residuals are positive, goes idle if exactly one of them is, and
starts a vacation if neither is. A server returning from vacation rejoins if at least one
residual is positive and otherwise takes another vacation, which leaves the state unchanged.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import logging

import numpy

from .exceptions import GeneratorError, StateNotFound
from .statespace import MacroKind, zero_star, q_star, inv

TRANSITION_CLASSES = ("arrival", "orbit_entry", "retrial", "service", "vacation", "replenishment")

Transition = collections.namedtuple("Transition", ["source", "target", "rate", "kind"])


def _rate_scales(perturbation, block_dim=None):
    """
    Rate multipliers keyed by transition class (``service``) or by a single entry (``service@17``).

    An entry key scales the one transition of that class leaving the state with the given index.
    """
    scales = dict.fromkeys(TRANSITION_CLASSES, 1.0)
    for a_key, a_factor in (perturbation or {}).items():
        a_class, at, a_source = str(a_key).partition("@")
        if a_class not in TRANSITION_CLASSES:
            raise ValueError(f"Unknown transition class {a_class}, expected one of {', '.join(TRANSITION_CLASSES)}")
        if at:
            if not a_source.isdigit() or (block_dim is not None and int(a_source) >= block_dim):
                raise ValueError(f"Rate multiplier {a_key} does not name a state index of the block")
            a_key = f"{a_class}@{int(a_source)}"
        if not float(a_factor) >= 0.0:
            raise ValueError(f"Rate multiplier for {a_key} must be >= 0, received {a_factor}")
        scales[a_key] = float(a_factor)
    return scales


def _scale(scales, kind, source):
    return scales[kind] * scales.get(f"{kind}@{source}", 1.0)


def _target(space, macro, active, hall, rule, source):
    try:
        return space.locate(macro, active, hall)
    except StateNotFound:
        src_level, src_state = space.state_of(source)
        raise GeneratorError(f"{rule} from {src_level.label},{tuple(src_state)} has no feasible target "
                             f"(macro-level {macro.label}, {active} active servers, hall {hall})")


def level_transitions(space, params, perturbation=None):
    """
    Yields the transitions that keep the orbit size unchanged.

    :param space: The state space of one orbit level.
    :type space: StateSpace
    :param params: Validated model parameters.
    :type params: ModelParams
    :param perturbation: Optional multipliers per transition class or per single entry (``service@17``).
    :type perturbation: dict[str, float]
    :rtype: Iterator[Transition]
    """
    scales = _rate_scales(perturbation)
    c, N, s, Q = params.c, params.N, params.s, params.S - params.s
    for idx, (a_level, a_state) in enumerate(space):
        k = a_level.k
        active = c - a_state.iota3
        busy = a_state.iota4
        hall = a_state.iota6

        if hall < N:
            yield Transition(idx, _target(space, a_level, active, hall + 1, "Arrival", idx),
                             params.lam * _scale(scales, "arrival", idx), "arrival")

        if busy > 0:
            k_after, hall_after = k - 1, hall - 1
            residual_queue = max(hall_after - (active - 1), 0)
            residual_stock = max(k_after - (active - 1), 0)
            active_after = active - 1 if residual_queue == 0 and residual_stock == 0 else active
            if active_after == 0:
                if k_after != 0:
                    raise GeneratorError(f"Service completion from {a_level.label},{tuple(a_state)} sends the last "
                                         f"server on vacation with {k_after} items in stock")
                target_level = zero_star()
            else:
                target_level = inv(k_after)
            yield Transition(idx, _target(space, target_level, active_after, hall_after, "Service completion", idx),
                             busy * params.mu * _scale(scales, "service", idx), "service")

        if active < c:
            residual_queue = max(hall - active, 0)
            residual_stock = max(k - active, 0)
            if residual_queue > 0 or residual_stock > 0:
                target_level = a_level if a_level.kind == MacroKind.INV else inv(k)
                yield Transition(idx, _target(space, target_level, active + 1, hall, "Vacation completion", idx),
                                 a_state.iota3 * params.eta * _scale(scales, "vacation", idx), "vacation")

        if a_level.kind == MacroKind.ZERO_STAR:
            yield Transition(idx, _target(space, q_star(params), 0, hall, "Replenishment", idx),
                             params.beta * _scale(scales, "replenishment", idx), "replenishment")
        elif a_level.kind == MacroKind.INV and k <= s:
            yield Transition(idx, _target(space, inv(k + Q), active, hall, "Replenishment", idx),
                             params.beta * _scale(scales, "replenishment", idx), "replenishment")


def retrial_transitions(space, params, perturbation=None):
    """
    Yields the successful retrials of a single orbiting customer (rate theta).

    The rate out of orbit level ``iota1`` is ``iota1`` times these.
    """
    scales = _rate_scales(perturbation)
    for idx, (a_level, a_state) in enumerate(space):
        if a_state.iota6 < params.N:
            yield Transition(idx, _target(space, a_level, params.c - a_state.iota3, a_state.iota6 + 1, "Retrial", idx),
                             params.theta * _scale(scales, "retrial", idx), "retrial")


def _accumulate(transitions, dim):
    block = numpy.zeros((dim, dim))
    for a_transition in transitions:
        block[a_transition.source, a_transition.target] += a_transition.rate
    return block


def build_H0(space, params, perturbation=None):
    """
    Orbit entry block: ``p*lambda`` on the diagonal positions of the full-hall states.

    :rtype: numpy.ndarray
    """
    scales = _rate_scales(perturbation)
    rates = [params.p * params.lam * _scale(scales, "orbit_entry", idx) if hall == params.N else 0.0
             for idx, hall in enumerate(space.hall)]
    return numpy.diag(rates)


def build_H_lower(iota1, space, params, perturbation=None):
    """
    Retrial block out of orbit level ``iota1``.

    :param iota1: Orbit size, at least 1.
    :type iota1: int
    :rtype: numpy.ndarray
    """
    if iota1 < 1:
        raise ValueError(f"Retrial blocks exist for orbit levels >= 1, received {iota1}")
    return iota1 * _accumulate(retrial_transitions(space, params, perturbation), space.block_dim)


def _diagonal_block(within, H0, H_lower):
    block = within.copy()
    numpy.fill_diagonal(block, 0.0)
    outflow = block.sum(axis=1) + H0.sum(axis=1) + H_lower.sum(axis=1)
    numpy.fill_diagonal(block, -outflow)
    return block


def build_H_diag(iota1, space, params, perturbation=None):
    """
    Within-level block at orbit level ``iota1``.

    :param iota1: Orbit size, at least 0.
    :type iota1: int
    :rtype: numpy.ndarray
    """
    if iota1 < 0:
        raise ValueError(f"Orbit levels are >= 0, received {iota1}")
    within = _accumulate(level_transitions(space, params, perturbation), space.block_dim)
    H_lower = build_H_lower(iota1, space, params, perturbation) if iota1 > 0 else numpy.zeros_like(within)
    return _diagonal_block(within, build_H0(space, params, perturbation), H_lower)


def build_modified_diag(space, params, perturbation=None):
    """
    Within-level block of every orbit level from M onwards, where the retrial rate is frozen at ``M*theta``.
    """
    return build_H_diag(params.M, space, params, perturbation)


class GeneratorBlocks:
    """
    The three kinds of generator blocks, built once and scaled per orbit level.

    :param space: The state space of one orbit level.
    :type space: StateSpace
    :param params: Validated model parameters.
    :type params: ModelParams
    :param perturbation: Optional multipliers per transition class or per single entry (mutation checks only).
    :type perturbation: dict[str, float]
    """
    def __init__(self, space, params, perturbation=None):
        self._space = space
        self._params = params
        self._scales = _rate_scales(perturbation, space.block_dim)
        self._perturbation = {k: v for k, v in self._scales.items() if v != 1.0}
        dim = space.block_dim
        self._H0 = build_H0(space, params, self._perturbation)
        self._within = _accumulate(level_transitions(space, params, self._perturbation), dim)
        numpy.fill_diagonal(self._within, 0.0)
        self._retrial = _accumulate(retrial_transitions(space, params, self._perturbation), dim)
        for a_block in (self._H0, self._within, self._retrial):
            a_block.setflags(write=False)
        if self._perturbation:
            logging.warning(f"Generator built with perturbed rates {self._perturbation}")

    @property
    def space(self):
        return self._space

    @property
    def params(self):
        return self._params

    @property
    def perturbation(self):
        return dict(self._perturbation)

    @property
    def H0(self):
        return self._H0

    @property
    def within(self):
        """
        Off-diagonal part of the within-level block (identical for every orbit level).
        """
        return self._within

    def effective_rate(self, kind):
        """
        Rate of a transition class after perturbation, e.g. ``p*lambda`` for ``orbit_entry``.
        """
        base = {"arrival": self._params.lam,
                "orbit_entry": self._params.p * self._params.lam,
                "retrial": self._params.theta,
                "service": self._params.mu,
                "vacation": self._params.eta,
                "replenishment": self._params.beta}[kind]
        return base * self._scales[kind]

    def H_lower(self, iota1):
        if iota1 < 1:
            raise ValueError(f"Retrial blocks exist for orbit levels >= 1, received {iota1}")
        return iota1 * self._retrial

    def H_diag(self, iota1):
        if iota1 < 0:
            raise ValueError(f"Orbit levels are >= 0, received {iota1}")
        H_lower = iota1 * self._retrial
        return _diagonal_block(self._within, self._H0, H_lower)

    def modified_diag(self, M=None):
        return self.H_diag(self._params.M if M is None else M)


def dump_generator(blocks, iota1):
    """
    Coordinate listing ``block,row,col,rate`` of the nonzero entries of H0, Hdiag(iota1) and Hlower(iota1).

    :rtype: str
    """
    lines = ["block,row,col,rate"]
    named_blocks = [("H0", blocks.H0), ("Hdiag", blocks.H_diag(iota1))]
    if iota1 >= 1:
        named_blocks.append(("Hlower", blocks.H_lower(iota1)))
    for a_name, a_block in named_blocks:
        for row, col in zip(*numpy.nonzero(a_block)):
            lines.append(f"{a_name},{row},{col},{float(a_block[row, col])!r}")
    return "\n".join(lines) + "\n"
