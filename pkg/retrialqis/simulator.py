"""
Discrete-event simulation of the retrial queueing-inventory system.

This is an independent oracle for the analytic pipeline: it works from the behavioural rules of
the system and shares nothing but :class:`~retrialqis.model.ModelParams` with the solver.

Rules
-----

* Primary customers arrive at rate ``lambda``. If the waiting hall (capacity N, customers in
  service included) has room they enter it, otherwise they join the orbit with probability ``p``
  and are lost otherwise.
* Each orbiting customer retries at rate ``theta``; the orbit as a whole runs one exponential clock
  of rate ``orbit * theta``. A retrial succeeds if the hall has room, otherwise the customer stays
  in orbit.
* A busy server holds one customer and one item. On completion the customer leaves with the
  item. The server then looks at the *residual* queue and stock, i.e. what is left once every
  other active server has claimed a customer and an item: it takes the next customer if both are
  positive, stays idle if exactly one is, and goes on vacation if neither is.
* A server returning from vacation (rate ``eta``, per server) applies the same residuals, counting
  every active server: it rejoins (busy when there is work it can do, idle otherwise) if at least
  one residual is positive, and starts another vacation otherwise.
* An order for ``Q = S - s`` items is placed the instant the inventory drops to ``s`` and arrives
  after an exponential lead time of rate ``beta``.

The simulation is built on the simpy event kernel; random variates come from numpy generators.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import dataclasses
import enum
import logging

import numpy
import pandas
import simpy

from .exceptions import SimulationError
from .measures import REPORT_COLUMNS, ratio
from .utils import map_in_pool

TRACE_HEADER = "t,event,orbit,inv,vac,busy,idle,hall"

COUNTERS = ("arrivals", "entered_hall", "orbit_entries", "losses", "retrial_attempts", "retrial_successes",
            "services", "reorders", "deliveries")
INTEGRALS = ("inventory", "orbit", "hall", "busy", "vacationing", "idle", "all_on_vacation")


class ServerStatus(enum.Enum):
    BUSY = 1
    IDLE = 2
    VACATION = 3


@dataclasses.dataclass
class SimState:
    """
    The state of the system; servers are counted rather than identified.
    """
    orbit: int = 0
    inventory: int = 0
    vacationing: int = 0
    busy: int = 0
    idle: int = 0
    hall: int = 0
    outstanding_order: bool = False

    @property
    def active(self):
        return self.busy + self.idle

    @property
    def waiting(self):
        """
        Customers in the hall that are not in service.
        """
        return self.hall - self.busy

    @property
    def free_stock(self):
        """
        Items that no busy server holds.
        """
        return self.inventory - self.busy


@dataclasses.dataclass
class RunResult:
    """
    Accumulators of a single simulation run, gathered after the warm-up period.
    """
    duration: float
    integrals: dict
    counts: dict
    events: int
    seed: object = None

    def measures(self, params):
        """
        The measures of the run, in the same columns as :class:`~retrialqis.metrics.MetricsReport`.

        :rtype: dict
        """
        T = self.duration
        mean = {a_name: self.integrals[a_name] / T for a_name in INTEGRALS}
        rate = {a_name: self.counts[a_name] / T for a_name in COUNTERS}
        values = {"L1": mean["inventory"],
                  "L2": rate["reorders"],
                  "L3": mean["orbit"],
                  "L4": rate["orbit_entries"],
                  "L5": ratio(mean["orbit"], rate["orbit_entries"]),
                  "L6": mean["hall"],
                  "L7": rate["entered_hall"],
                  "L8": ratio(mean["hall"], rate["entered_hall"]),
                  "L9": rate["losses"],
                  "L10": mean["busy"],
                  "L11": mean["vacationing"],
                  "L12": mean["idle"],
                  "L13": rate["retrial_attempts"],
                  "L14": rate["retrial_successes"],
                  "L15": ratio(rate["retrial_successes"], rate["retrial_attempts"]),
                  "L16": mean["all_on_vacation"],
                  "L9_uniform": rate["losses"]}
        values["ETC"] = (params.ch * values["L1"] + params.cs * values["L2"] + params.co * values["L3"] +
                         params.cw * values["L6"] + params.cl * values["L9"])
        return {a_column: values[a_column] for a_column in REPORT_COLUMNS}


class Simulation:
    """
    One simulation run.

    :param params: Validated model parameters.
    :type params: ModelParams
    :param rng: Source of random variates.
    :type rng: numpy.random.Generator
    :param warmup: Time before which nothing is accumulated.
    :param trace_sink: Optional callable receiving one trace line per event.
    :param trace_depth: Number of recent trace lines kept for error reports.
    """
    def __init__(self, params, rng, warmup=0.0, trace_sink=None, trace_depth=64):
        self.params = params
        self.rng = rng
        self.warmup = warmup
        self.env = simpy.Environment()
        self.state = SimState(inventory=params.S, idle=params.c)
        self.integrals = dict.fromkeys(INTEGRALS, 0.0)
        self.counts = dict.fromkeys(COUNTERS, 0)
        self.events = 0
        self._last = 0.0
        self._trace = collections.deque(maxlen=trace_depth)
        self._trace_sink = trace_sink
        self._work_signal = self.env.event()
        self._orbit_signal = self.env.event()

        self.env.process(self._arrivals())
        self.env.process(self._orbit())
        for _ in range(params.c):
            self.env.process(self._server())

    # Bookkeeping

    def _advance(self):
        now = self.env.now
        start = max(self._last, self.warmup)
        if now > start:
            dt = now - start
            st = self.state
            self.integrals["inventory"] += dt * st.inventory
            self.integrals["orbit"] += dt * st.orbit
            self.integrals["hall"] += dt * st.hall
            self.integrals["busy"] += dt * st.busy
            self.integrals["vacationing"] += dt * st.vacationing
            self.integrals["idle"] += dt * st.idle
            if st.vacationing == self.params.c:
                self.integrals["all_on_vacation"] += dt
        self._last = now

    def _count(self, counter):
        if self.env.now >= self.warmup:
            self.counts[counter] += 1

    def _record(self, event):
        st = self.state
        line = f"{self.env.now!r},{event},{st.orbit},{st.inventory},{st.vacationing},{st.busy},{st.idle},{st.hall}"
        self._trace.append(line)
        if self._trace_sink is not None:
            self._trace_sink(line)
        self._check(event)

    def _check(self, event):
        st = self.state
        p = self.params
        problems = []
        if st.vacationing + st.busy + st.idle != p.c:
            problems.append("server conservation")
        if not 0 <= st.hall <= p.N:
            problems.append("hall capacity")
        if not 0 <= st.inventory <= p.S:
            problems.append("inventory bounds")
        if st.busy > min(st.hall, st.inventory):
            problems.append("busy servers without a customer or an item")
        if st.orbit < 0 or min(st.vacationing, st.busy, st.idle) < 0:
            problems.append("negative count")
        if st.outstanding_order != (st.inventory <= p.s):
            problems.append("outstanding order does not match the reorder level")
        if problems:
            raise SimulationError(f"Invariant breach after {event} at t={self.env.now}: {', '.join(problems)}",
                                  trace=[TRACE_HEADER] + list(self._trace))

    def _signal_work(self):
        signal, self._work_signal = self._work_signal, self.env.event()
        signal.succeed()

    def _signal_orbit(self):
        signal, self._orbit_signal = self._orbit_signal, self.env.event()
        signal.succeed()

    def _exponential(self, rate):
        return self.rng.exponential(1.0 / rate)

    # Processes

    def _arrivals(self):
        p = self.params
        while True:
            yield self.env.timeout(self._exponential(p.lam))
            self._advance()
            self.events += 1
            self._count("arrivals")
            st = self.state
            if st.hall < p.N:
                st.hall += 1
                self._count("entered_hall")
                self._record("arrival")
                self._signal_work()
            elif self.rng.random() < p.p:
                st.orbit += 1
                self._count("orbit_entries")
                self._record("orbit_entry")
                self._signal_orbit()
            else:
                self._count("losses")
                self._record("loss")

    def _orbit(self):
        p = self.params
        while True:
            if self.state.orbit == 0 or p.theta == 0:
                yield self._orbit_signal
                continue
            clock = self.env.timeout(self._exponential(self.state.orbit * p.theta))
            fired = yield clock | self._orbit_signal
            if clock not in fired:
                # The orbit grew; memorylessness allows a fresh draw at the new rate.
                continue
            self._advance()
            self.events += 1
            self._count("retrial_attempts")
            st = self.state
            if st.hall < p.N:
                st.orbit -= 1
                st.hall += 1
                self._count("retrial_successes")
                self._record("retrial")
                self._signal_work()
            else:
                self._record("retrial_blocked")

    def _replenishment(self):
        p = self.params
        yield self.env.timeout(self._exponential(p.beta))
        self._advance()
        self.events += 1
        self.state.inventory += p.S - p.s
        self.state.outstanding_order = False
        self._count("deliveries")
        self._record("replenishment")
        self._signal_work()

    def _can_serve(self):
        return self.state.waiting > 0 and self.state.free_stock > 0

    def _server(self):
        p = self.params
        st = self.state
        status = ServerStatus.IDLE
        while True:
            if status is ServerStatus.IDLE:
                if self._can_serve():
                    st.idle -= 1
                    st.busy += 1
                    status = ServerStatus.BUSY
                    self._record("service_start")
                else:
                    yield self._work_signal
                continue

            if status is ServerStatus.BUSY:
                yield self.env.timeout(self._exponential(p.mu))
                self._advance()
                self.events += 1
                st.busy -= 1
                st.hall -= 1
                st.inventory -= 1
                self._count("services")
                if st.inventory == p.s and not st.outstanding_order:
                    st.outstanding_order = True
                    self._count("reorders")
                    self.env.process(self._replenishment())
                others = st.busy + st.idle
                residual_queue = max(st.hall - others, 0)
                residual_stock = max(st.inventory - others, 0)
                if residual_queue > 0 and residual_stock > 0:
                    st.busy += 1
                    event = "service_next"
                elif residual_queue > 0 or residual_stock > 0:
                    st.idle += 1
                    status = ServerStatus.IDLE
                    event = "service_idle"
                else:
                    if self._can_serve():
                        raise SimulationError(f"Server leaves for vacation with work available at t={self.env.now}",
                                              trace=[TRACE_HEADER] + list(self._trace))
                    st.vacationing += 1
                    status = ServerStatus.VACATION
                    event = "service_vacation"
                self._record(event)
                continue

            yield self.env.timeout(self._exponential(p.eta))
            self._advance()
            self.events += 1
            active = st.busy + st.idle
            residual_queue = max(st.hall - active, 0)
            residual_stock = max(st.inventory - active, 0)
            if residual_queue > 0 or residual_stock > 0:
                st.vacationing -= 1
                st.idle += 1
                status = ServerStatus.IDLE
                self._record("vacation_end")
            else:
                self._record("vacation_again")

    def run(self, horizon):
        """
        Runs the simulation up to time ``horizon``.

        :rtype: RunResult
        """
        self._record("start")
        self.env.run(until=horizon)
        self._advance()
        return RunResult(duration=horizon - self.warmup, integrals=dict(self.integrals), counts=dict(self.counts),
                         events=self.events)


def simulate(params, horizon, warmup=0.0, seed=None, trace_sink=None):
    """
    A single simulation run.

    :param params: Validated model parameters.
    :type params: ModelParams
    :param horizon: Simulated time at which the run stops.
    :param warmup: Time before which nothing is accumulated.
    :param seed: Anything :func:`numpy.random.default_rng` accepts (an int or a SeedSequence).
    :param trace_sink: Optional callable receiving the event trace lines.
    :rtype: RunResult
    :raises SimulationError: If the run catches itself in an impossible state.
    """
    if not horizon > warmup >= 0:
        raise ValueError(f"Expected horizon > warmup >= 0, received horizon={horizon}, warmup={warmup}")
    result = Simulation(params, numpy.random.default_rng(seed), warmup, trace_sink).run(horizon)
    result.seed = seed
    logging.info(f"Simulated {result.events} events over {horizon} time units")
    return result


@dataclasses.dataclass
class SimEstimate:
    """
    Replication means and standard errors of the measures, in report columns.
    """
    mean: dict
    se: dict
    reps: int
    counts: dict
    replications: pandas.DataFrame

    def as_dict(self):
        """
        Means followed by ``_se`` columns.

        :rtype: dict
        """
        values = dict(self.mean)
        values.update({f"{a_column}_se": self.se[a_column] for a_column in REPORT_COLUMNS})
        return values


def _replication(args):
    params, horizon, warmup, seed, index = args
    try:
        result = simulate(params, horizon, warmup, seed)
    except SimulationError as e:
        raise SimulationError(f"Replication {index}: {e.message}", trace=e.trace, replication=index)
    return result.measures(params), result.counts, result.events


def replication_seeds(base_seed, reps):
    """
    Independent seeds for the replications, spawned from ``SeedSequence(base_seed)``.
    """
    return numpy.random.SeedSequence(base_seed).spawn(reps)


def _as_value(x):
    return None if x is None or (isinstance(x, float) and numpy.isnan(x)) else float(x)


def replicate(params, reps, horizon, warmup=0.0, base_seed=0, seeds=None, workers=None):
    """
    Independent replications of the simulation and their summary.

    :param params: Validated model parameters.
    :param reps: Number of replications, at least 2.
    :param horizon: Simulated time of each replication.
    :param warmup: Warm-up time of each replication.
    :param base_seed: Root of the seed tree the replication streams are spawned from.
    :param seeds: Explicit seeds, one per replication (must be distinct).
    :param workers: Worker pool size.
    :rtype: SimEstimate
    """
    if reps < 2:
        raise ValueError(f"At least 2 replications are needed for standard errors, received {reps}")
    if seeds is None:
        seeds = replication_seeds(base_seed, reps)
    else:
        seeds = list(seeds)
        if len(seeds) != reps:
            raise ValueError(f"Expected {reps} seeds, received {len(seeds)}")
        if len(set(seeds)) != len(seeds):
            raise ValueError("Replications must use distinct seeds")
    outcomes = map_in_pool(_replication, [(params, horizon, warmup, a_seed, k) for k, a_seed in enumerate(seeds)],
                           workers)
    replications = pandas.DataFrame([outcome[0] for outcome in outcomes], columns=list(REPORT_COLUMNS), dtype=float)
    counts = {a_counter: sum(outcome[1][a_counter] for outcome in outcomes) for a_counter in COUNTERS}
    counts["events"] = sum(outcome[2] for outcome in outcomes)
    mean = replications.mean(skipna=True)
    se = replications.std(ddof=1, skipna=True) / numpy.sqrt(replications.count())
    logging.info(f"{reps} replications, {counts['events']} events in total")
    return SimEstimate(mean={k: _as_value(mean[k]) for k in REPORT_COLUMNS},
                       se={k: _as_value(se[k]) for k in REPORT_COLUMNS},
                       reps=reps, counts=counts, replications=replications)
