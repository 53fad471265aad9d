from retrialqis.model import ModelParams
from retrialqis.statespace import (StateSpace, enumerate_states, block_dimension_formula,
                                   block_dimension_formula_values, dump_states, is_feasible, server_state,
                                   zero_star, q_star, inv, MacroKind, MacroLevel)
from retrialqis.exceptions import StateNotFound
import numpy
import pytest

DESK = dict(S=6, s=2, c=2, N=3, M=4)


def test_block_dimension_baseline():
    """
    The baseline configuration has 491 states per orbit level
    """
    params = ModelParams()
    space = enumerate_states(params)

    assert space.block_dim == 491
    assert len(space) == 491
    assert block_dimension_formula(params) == 491
    assert space.dimension_mismatch() is None


def test_block_dimension_small():
    """
    Small configurations, counted by hand
    """
    assert StateSpace(ModelParams(**DESK)).block_dim == 59
    assert StateSpace(ModelParams(S=4, s=1, c=1, N=2)).block_dim == 20


def test_block_dimension_formula_grid():
    """
    The closed form agrees with the enumeration whenever S >= c - 1
    """
    checked = 0
    for c in range(1, 5):
        for N in range(c, c + 4):
            for S in range(max(1, c - 1), c + 6):
                space = StateSpace(ModelParams(S=S, s=0, c=c, N=N))
                assert space.block_dim == block_dimension_formula_values(S, c, N), (S, c, N)
                checked += 1
    assert checked >= 50


def test_block_dimension_formula_small_inventory():
    """
    With fewer than c - 1 items the closed form undercounts and the mismatch is reported
    """
    space = StateSpace(ModelParams(S=1, s=0, c=4, N=4))
    mismatch = space.dimension_mismatch()

    assert mismatch is not None
    assert mismatch[0] == space.block_dim
    assert mismatch[0] > mismatch[1]


def test_index_bijection():
    """
    index_of and state_of are inverse to each other over the whole space
    """
    space = StateSpace(ModelParams(**DESK))
    for idx in range(space.block_dim):
        macro, st = space.state_of(idx)
        assert space.index_of(macro, st) == idx


def test_ordering():
    """
    Macro-levels come in the order 0*, Q*, 0..S and states are lexicographic within each
    """
    params = ModelParams(**DESK)
    space = StateSpace(params)

    assert [a_level.label for a_level in space.levels] == ["0*", "Q*", "0", "1", "2", "3", "4", "5", "6"]
    for a_level in space.levels:
        states = list(space.states_of(a_level))
        assert states == sorted(states)
    assert numpy.all(numpy.diff(space.kind) >= 0)


def test_all_on_vacation_levels():
    """
    0* and Q* hold exactly the configurations with every server on vacation, one per hall occupancy
    """
    params = ModelParams(**DESK)
    space = StateSpace(params)

    for a_level in (zero_star(), q_star(params)):
        states = space.states_of(a_level)
        assert len(states) == params.N + 1
        assert all(a_state.iota3 == params.c and a_state.iota4 == 0 and a_state.iota5 == 0 for a_state in states)
    assert q_star(params).k == params.Q


def test_feasibility():
    """
    With fewer items than active servers, every active server holds a customer
    """
    c, N = 2, 3

    assert is_feasible(inv(0), 1, 1, c, N)
    assert not is_feasible(inv(0), 1, 0, c, N)
    assert not is_feasible(inv(1), 2, 1, c, N)
    assert is_feasible(inv(1), 2, 2, c, N)
    assert is_feasible(inv(2), 2, 0, c, N)
    assert not is_feasible(inv(2), 0, 0, c, N)
    assert not is_feasible(zero_star(), 1, 1, c, N)
    assert not is_feasible(inv(2), 1, N + 1, c, N)


def _defining_sets(c, N, S, Q):
    """
    The states of one orbit level written out set by set, as (macro-level, (iota3, iota4, iota5, iota6)).

    Inventories above S are dropped, which only matters when S < c - 1.
    """
    states = set()

    def add(kind, k, vacation, busy, idle, hall):
        if k <= S:
            states.add((MacroLevel(kind, k), (vacation, busy, idle, hall)))

    # E1, x1 = 0 is the all-on-vacation level 0*
    for x1 in range(c + 1):
        for hall in range(x1, N + 1):
            if x1 == 0:
                add(MacroKind.ZERO_STAR, 0, c, 0, 0, hall)
            else:
                add(MacroKind.INV, 0, c - x1, 0, x1, hall)
    # E2, E3
    for x2 in range(1, c - 1):
        for j in range(x2):
            for busy in range(j + 1):
                add(MacroKind.INV, x2 + 1, c - (j + 1), busy, j + 1 - busy, busy)
            for hall in range(j + 1, N + 1):
                add(MacroKind.INV, x2 + 1, c - (j + 1), j + 1, 0, hall)
    # E4, E5
    for x3 in range(1, c):
        for j in range(c, S + 1):
            for busy in range(x3):
                add(MacroKind.INV, j, c - x3, busy, x3 - busy, busy)
            for hall in range(x3, N + 1):
                add(MacroKind.INV, j, c - x3, x3, 0, hall)
    # E6
    for hall in range(N + 1):
        add(MacroKind.Q_STAR, Q, c, 0, 0, hall)
    # E7
    for x4 in range(c):
        for busy in range(x4 + 1):
            add(MacroKind.INV, x4 + 1, c - (x4 + 1), busy, x4 + 1 - busy, busy)
    # E8
    for x5 in range(1, c + 1):
        for hall in range(x5, N + 1):
            add(MacroKind.INV, x5, c - x5, x5, 0, hall)
    # E9
    for x6 in range(1, c):
        for j in range(1, c - x6 + 1):
            for hall in range(x6 + j, N + 1):
                add(MacroKind.INV, x6, c - (x6 + j), x6, j, hall)
    # E10, E11
    for x7 in range(c + 1, S + 1):
        for busy in range(c):
            add(MacroKind.INV, x7, 0, busy, c - busy, busy)
        for hall in range(c, N + 1):
            add(MacroKind.INV, x7, 0, c, 0, hall)
    return states


def test_feasibility_matches_defining_sets():
    """
    The feasibility rule enumerates exactly the union of the eleven defining sets
    """
    for c in range(1, 5):
        for N in range(c, c + 4):
            for S in range(2, 11):
                params = ModelParams(S=S, s=0, c=c, N=N)
                enumerated = {(a_level, tuple(a_state)) for a_level, a_state in StateSpace(params)}
                assert enumerated == _defining_sets(c, N, S, params.Q), (S, c, N)


def test_inventory_levels_above_servers():
    """
    Every inventory level from c to S holds the same server configurations
    """
    for c, N, S in ((3, 4, 32), (2, 3, 6), (4, 6, 9), (1, 1, 3)):
        space = StateSpace(ModelParams(S=S, s=0, c=c, N=N))
        reference = space.states_of(inv(c))
        assert reference
        for k in range(c, S + 1):
            assert space.states_of(inv(k)) == reference, (c, N, S, k)


def test_level_vectors():
    """
    Busy servers are min(active, hall, inventory) and the server counts add up to c
    """
    params = ModelParams(**DESK)
    space = StateSpace(params)

    assert numpy.array_equal(space.vacation + space.busy + space.idle, numpy.full(space.block_dim, params.c))
    inv_states = space.kind == MacroKind.INV
    expected_busy = numpy.minimum(numpy.minimum(space.active, space.hall), space.inventory)
    assert numpy.array_equal(space.busy[inv_states], expected_busy[inv_states])
    assert numpy.all(space.busy[~inv_states] == 0)
    with pytest.raises(ValueError):
        space.hall[0] = 1


def test_server_state():
    """
    Server states follow from the number of active servers
    """
    assert server_state(3, 1, 2, 4) == (1, 1, 1, 4)
    assert server_state(3, 5, 3, 2) == (0, 2, 1, 2)


def test_lookup_errors():
    """
    Lookups outside the space raise StateNotFound, which is also a KeyError
    """
    space = StateSpace(ModelParams(**DESK))

    with pytest.raises(StateNotFound):
        space.state_of(space.block_dim)
    with pytest.raises(StateNotFound):
        space.state_of(-1)
    with pytest.raises(KeyError):
        space.index_of(inv(1), (0, 1, 1, 1))
    with pytest.raises(StateNotFound):
        space.states_of(inv(7))


def test_level_mask():
    """
    Level masks partition the block
    """
    space = StateSpace(ModelParams(**DESK))
    total = sum(space.level_mask(a_level).astype(int) for a_level in space.levels)

    assert numpy.array_equal(total, numpy.ones(space.block_dim, dtype=int))
    assert space.level_mask(zero_star()).sum() == 4


def test_dump_states():
    """
    The dump lists one state per line under a header
    """
    space = StateSpace(ModelParams(**DESK))
    lines = dump_states(space).splitlines()

    assert lines[0] == "level,iota3,iota4,iota5,iota6,index"
    assert len(lines) == space.block_dim + 1
    assert lines[1] == "0*,2,0,0,0,0"
    assert lines[-1].endswith(f",{space.block_dim - 1}")
