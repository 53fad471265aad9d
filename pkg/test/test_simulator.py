from retrialqis.model import ModelParams
import retrialqis.simulator
from retrialqis.simulator import (Simulation, simulate, replicate, replication_seeds, TRACE_HEADER, COUNTERS,
                                  ServerStatus)
from retrialqis.measures import REPORT_COLUMNS
from retrialqis.metrics import solution_metrics
from retrialqis.solver import solve
from retrialqis.experiments import run_validation
from retrialqis.exceptions import SimulationError
import ast
import inspect
import pickle
import numpy
import pytest

DESK = dict(S=6, s=2, c=2, N=3, M=4)


def test_determinism():
    """
    The same seed gives the same run
    """
    params = ModelParams(**DESK)
    a_run = simulate(params, horizon=300.0, warmup=10.0, seed=7)
    another_run = simulate(params, horizon=300.0, warmup=10.0, seed=7)
    a_third_run = simulate(params, horizon=300.0, warmup=10.0, seed=8)

    assert a_run.events == another_run.events
    assert a_run.measures(params) == another_run.measures(params)
    assert a_run.measures(params) != a_third_run.measures(params)


def test_run_invariants():
    """
    Every traced state respects server conservation, hall capacity and the busy server bound
    """
    params = ModelParams(**DESK)
    lines = []
    result = simulate(params, horizon=200.0, seed=3, trace_sink=lines.append)

    assert len(lines) >= result.events
    assert lines[0].split(",")[1] == "start"
    for a_line in lines:
        fields = a_line.split(",")
        assert len(fields) == len(TRACE_HEADER.split(","))
        orbit, inventory, vacationing, busy, idle, hall = map(int, fields[2:])
        assert vacationing + busy + idle == params.c
        assert 0 <= hall <= params.N
        assert 0 <= inventory <= params.S
        assert busy <= min(hall, inventory)
        assert orbit >= 0


def test_counters():
    """
    Counted events are consistent with each other
    """
    params = ModelParams(**DESK)
    result = simulate(params, horizon=500.0, seed=11)
    counts = result.counts

    assert set(counts) == set(COUNTERS)
    assert counts["arrivals"] == counts["entered_hall"] + counts["orbit_entries"] + counts["losses"]
    assert counts["retrial_successes"] <= counts["retrial_attempts"]
    assert counts["deliveries"] <= counts["reorders"] <= counts["deliveries"] + 1
    assert counts["services"] > 0


def test_without_joining():
    """
    Without joining the orbit stays empty
    """
    params = ModelParams(**DESK, p=0.0)
    result = simulate(params, horizon=300.0, seed=5)
    measures = result.measures(params)

    assert measures["L3"] == 0.0
    assert result.counts["orbit_entries"] == 0
    assert measures["L5"] is None
    assert measures["L15"] is None


def test_measure_columns():
    """
    Simulated measures use the same columns as the analytic report
    """
    params = ModelParams(**DESK)
    measures = simulate(params, horizon=200.0, seed=1).measures(params)

    assert tuple(measures) == REPORT_COLUMNS
    assert measures["L10"] + measures["L11"] + measures["L12"] == pytest.approx(params.c)
    assert measures["ETC"] == pytest.approx(0.01 * measures["L1"] + 3.0 * measures["L2"] + measures["L3"] +
                                            1.3 * measures["L6"] + 0.01 * measures["L9"])


def test_run_arguments():
    """
    Horizon and warm-up must leave something to observe
    """
    params = ModelParams(**DESK)
    with pytest.raises(ValueError):
        simulate(params, horizon=10.0, warmup=10.0)
    with pytest.raises(ValueError):
        simulate(params, horizon=10.0, warmup=-1.0)


def test_tripwire():
    """
    An impossible state stops the run and carries the recent trace
    """
    params = ModelParams(**DESK)
    simulation = Simulation(params, numpy.random.default_rng(0))
    simulation.state.busy += 1

    with pytest.raises(SimulationError) as e:
        simulation._record("tampered")
    assert "server conservation" in e.value.message
    assert e.value.trace[0] == TRACE_HEADER
    assert e.value.trace[-1].split(",")[1] == "tampered"


def test_simulation_error_pickles():
    """
    Simulation errors survive the trip back from a worker process
    """
    an_error = SimulationError("Replication 3: breach", trace=["a", "b"], replication=3)
    restored = pickle.loads(pickle.dumps(an_error))

    assert restored.message == an_error.message
    assert restored.trace == ["a", "b"]
    assert restored.replication == 3


def test_replication_arguments():
    """
    Standard errors need at least two replications on distinct streams
    """
    params = ModelParams(**DESK)
    with pytest.raises(ValueError):
        replicate(params, 1, 100.0, workers=1)
    with pytest.raises(ValueError):
        replicate(params, 2, 100.0, seeds=[4, 4], workers=1)
    with pytest.raises(ValueError):
        replicate(params, 3, 100.0, seeds=[1, 2], workers=1)


def test_replication_seeds():
    """
    Replication streams are spawned from the base seed
    """
    seeds = replication_seeds(42, 3)
    again = replication_seeds(42, 3)

    assert len(seeds) == 3
    assert [a_seed.spawn_key for a_seed in seeds] == [(0,), (1,), (2,)]
    assert [a_seed.generate_state(1)[0] for a_seed in seeds] == [a_seed.generate_state(1)[0] for a_seed in again]


def test_replicate():
    """
    Replications summarise into means and standard errors in the report columns
    """
    params = ModelParams(**DESK)
    estimate = replicate(params, 3, 200.0, warmup=10.0, base_seed=9, workers=1)
    values = estimate.as_dict()

    assert estimate.reps == 3
    assert estimate.replications.shape == (3, len(REPORT_COLUMNS))
    assert estimate.mean["L1"] == pytest.approx(estimate.replications["L1"].mean())
    assert estimate.se["L1"] > 0.0
    assert "L1_se" in values and "ETC_se" in values
    assert estimate.counts["events"] > 0

    again = replicate(params, 3, 200.0, warmup=10.0, base_seed=9, workers=1)
    assert again.mean == estimate.mean


def test_baseline_oracle_agreement():
    """
    Every analytic measure of the baseline configuration lies within three standard errors of its
    simulated estimate, both loss rates included
    """
    table = run_validation(ModelParams(), reps=16, horizon=100000.0, warmup=100.0, seed=11).set_index("measure")
    outliers = table.loc[~(table["z"].abs() <= 3.0), ["analytic", "simulated", "se", "z"]]

    assert list(table.index) == list(REPORT_COLUMNS)
    assert outliers.empty, outliers
    assert not table["flag"].any()


def test_oracle_agreement():
    """
    Quick agreement check at a small configuration with short replications
    """
    params = ModelParams(**DESK)
    analytic = solution_metrics(solve(params.replace(M=16))).as_dict()
    estimate = replicate(params, 8, 4000.0, warmup=50.0, base_seed=2026, workers=1)

    for a_measure in ("L1", "L2", "L6", "L10", "L11", "L16", "L9_uniform", "ETC"):
        z = (analytic[a_measure] - estimate.mean[a_measure]) / estimate.se[a_measure]
        assert abs(z) <= 4.5, (a_measure, analytic[a_measure], estimate.mean[a_measure], estimate.se[a_measure])


def test_server_status():
    assert {a_status.name for a_status in ServerStatus} == {"BUSY", "IDLE", "VACATION"}


def test_independent_of_analytic_metrics():
    """
    The simulator shares only the report columns with the analytic side
    """
    tree = ast.parse(inspect.getsource(retrialqis.simulator))
    imported = {a_node.module for a_node in ast.walk(tree) if isinstance(a_node, ast.ImportFrom)}

    assert "measures" in imported
    assert not imported & {"metrics", "solver", "retrialqis.metrics", "retrialqis.solver"}
