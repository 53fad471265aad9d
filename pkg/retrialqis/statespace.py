"""
State space of a single orbit level.

Within one orbit level, a state is an inventory macro-level together with a server
configuration (servers on vacation, busy, idle) and the waiting hall occupancy, which counts
customers in service as well. The macro-levels are, in order::

    0*, Q*, 0, 1, ..., S

where ``0*`` and ``Q*`` hold the states in which every server is on vacation with, respectively,
an empty inventory and an inventory of exactly Q items just delivered.

Every server configuration is determined by the number of *active* (non-vacationing) servers
``a``, since busy servers are ``min(a, hall, inventory)`` and the remaining active ones are idle.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import enum
import logging

import numpy

from .exceptions import StateNotFound


class MacroKind(enum.IntEnum):
    ZERO_STAR = 0
    Q_STAR = 1
    INV = 2


class MacroLevel(collections.namedtuple("MacroLevel", ["kind", "k"])):
    """
    An inventory macro-level. ``k`` is the on-hand inventory (0 for ``0*``, Q for ``Q*``).
    """
    __slots__ = ()

    @property
    def label(self):
        if self.kind == MacroKind.ZERO_STAR:
            return "0*"
        if self.kind == MacroKind.Q_STAR:
            return "Q*"
        return str(self.k)

    def __str__(self):
        return self.label


ServerState = collections.namedtuple("ServerState", ["iota3", "iota4", "iota5", "iota6"])


def zero_star():
    return MacroLevel(MacroKind.ZERO_STAR, 0)


def q_star(params):
    return MacroLevel(MacroKind.Q_STAR, params.S - params.s)


def inv(k):
    return MacroLevel(MacroKind.INV, k)


def server_state(c, k, active, hall):
    """
    Builds the server state of a configuration with ``active`` non-vacationing servers.

    :param c: Number of servers.
    :param k: On-hand inventory.
    :param active: Servers not on vacation.
    :param hall: Waiting hall occupancy.
    :rtype: ServerState
    """
    busy = min(active, hall, k)
    return ServerState(c - active, busy, active - busy, hall)


def is_feasible(macro, active, hall, c, N):
    """
    Decides whether ``active`` servers and ``hall`` customers can coexist at a macro-level.

    :rtype: bool
    """
    if not (0 <= hall <= N and 0 <= active <= c):
        return False
    if macro.kind != MacroKind.INV:
        return active == 0
    if active == 0:
        return False
    # With fewer items than active servers, every active server has a customer.
    if active > macro.k:
        return hall >= active
    return True


class StateSpace:
    """
    Enumeration and dense bidirectional indexing of the states of one orbit level.

    :param params: Validated model parameters.
    :type params: ModelParams
    """
    def __init__(self, params):
        self._c = params.c
        self._N = params.N
        self._S = params.S
        self._s = params.s
        self._Q = params.S - params.s
        self._levels = tuple([zero_star(), q_star(params)] + [inv(k) for k in range(params.S + 1)])
        self._states = {}
        self._flat = []
        self._index = {}
        for a_level in self._levels:
            level_states = sorted(server_state(self._c, a_level.k, a, n)
                                  for a in range(self._c + 1)
                                  for n in range(self._N + 1)
                                  if is_feasible(a_level, a, n, self._c, self._N))
            self._states[a_level] = tuple(level_states)
            for a_state in level_states:
                self._index[(a_level, a_state)] = len(self._flat)
                self._flat.append((a_level, a_state))
        self._build_vectors()

    def _build_vectors(self):
        kinds, inventory, vacation, busy, idle, hall = [], [], [], [], [], []
        for a_level, a_state in self._flat:
            kinds.append(int(a_level.kind))
            inventory.append(a_level.k)
            vacation.append(a_state.iota3)
            busy.append(a_state.iota4)
            idle.append(a_state.iota5)
            hall.append(a_state.iota6)
        self.kind = numpy.array(kinds, dtype=int)
        self.inventory = numpy.array(inventory, dtype=int)
        self.vacation = numpy.array(vacation, dtype=int)
        self.busy = numpy.array(busy, dtype=int)
        self.idle = numpy.array(idle, dtype=int)
        self.hall = numpy.array(hall, dtype=int)
        self.active = self.busy + self.idle
        for a_vector in (self.kind, self.inventory, self.vacation, self.busy, self.idle, self.hall, self.active):
            a_vector.setflags(write=False)

    @property
    def c(self):
        return self._c

    @property
    def N(self):
        return self._N

    @property
    def S(self):
        return self._S

    @property
    def Q(self):
        return self._Q

    @property
    def levels(self):
        return self._levels

    @property
    def block_dim(self):
        return len(self._flat)

    def states_of(self, macro):
        """
        Returns the ordered states of a macro-level.
        """
        try:
            return self._states[macro]
        except KeyError:
            raise StateNotFound(f"Macro-level {macro} is not part of this state space")

    def index_of(self, macro, st):
        """
        Returns the dense index of a state.

        :raises StateNotFound: If the state is not feasible.
        """
        try:
            return self._index[(macro, ServerState(*st))]
        except KeyError:
            raise StateNotFound(f"State {tuple(st)} at macro-level {macro} is not part of this state space")

    def state_of(self, idx):
        """
        Returns the (macro-level, server state) pair at a dense index.

        :raises StateNotFound: If the index is out of range.
        """
        if isinstance(idx, bool) or not 0 <= int(idx) < len(self._flat) or int(idx) != idx:
            raise StateNotFound(f"Index {idx} is outside 0..{len(self._flat) - 1}")
        return self._flat[int(idx)]

    def locate(self, macro, active, hall):
        """
        Index of the configuration with ``active`` non-vacationing servers and ``hall`` customers.
        """
        return self.index_of(macro, server_state(self._c, macro.k, active, hall))

    def level_mask(self, macro):
        """
        Boolean mask over the block selecting the states of one macro-level.
        """
        mask = numpy.zeros(self.block_dim, dtype=bool)
        for a_state in self.states_of(macro):
            mask[self._index[(macro, a_state)]] = True
        return mask

    def __iter__(self):
        return iter(self._flat)

    def __len__(self):
        return len(self._flat)

    def dimension_mismatch(self):
        """
        Compares the enumeration against the closed form for the block dimension.

        The two coincide whenever ``S >= c - 1``; the enumeration is authoritative.

        :returns: None if they agree, otherwise (enumerated, closed form).
        """
        formula = block_dimension_formula_values(self._S, self._c, self._N)
        if formula == self.block_dim:
            return None
        logging.warning(f"Block dimension {self.block_dim} by enumeration differs from closed form {formula} "
                        f"(S={self._S}, c={self._c}, N={self._N})")
        return (self.block_dim, formula)


def enumerate_states(params):
    """
    Enumerates the feasible states of one orbit level.

    :param params: Validated model parameters.
    :type params: ModelParams
    :rtype: StateSpace
    """
    space = StateSpace(params)
    logging.info(f"State space with {space.block_dim} states per orbit level across {len(space.levels)} macro-levels")
    return space


def block_dimension_formula_values(S, c, N):
    return S * c * (N + 1) + (c + 2) * N - (2 * c ** 3 + 3 * c ** 2 - 5 * c - 12) // 6


def block_dimension_formula(params):
    """
    Closed form count of the states of one orbit level, ``Sc(N+1) + (c+2)N - (2c^3+3c^2-5c-12)/6``.

    :rtype: int
    """
    return block_dimension_formula_values(params.S, params.c, params.N)


def dump_states(space):
    """
    Text listing of the state space, one state per line.

    :rtype: str
    """
    lines = ["level,iota3,iota4,iota5,iota6,index"]
    for idx, (a_level, a_state) in enumerate(space):
        lines.append(f"{a_level.label},{a_state.iota3},{a_state.iota4},{a_state.iota5},{a_state.iota6},{idx}")
    return "\n".join(lines) + "\n"
