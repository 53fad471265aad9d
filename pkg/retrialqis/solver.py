"""
Truncated level-dependent QBD solver.

From orbit level M onwards the retrial rate is frozen at ``M*theta``, which makes the chain
level independent there. The solver then

1. aggregates ``H_M = H0 + Hdiag(M) + Hlower(M)`` and finds its stationary vector ``phi``;
2. decides stability by comparing the upward drift ``phi H0 1`` with the downward drift
   ``phi Hlower(M) 1``;
3. finds the minimal nonnegative solution ``R`` of ``H0 + R Hdiag(M) + R^2 Hlower(M) = 0``;
4. solves the levels ``0..M`` by a backward recursion of matrices ``K_j`` and forward products
   ``Omega_j``, with ``Phi(M + k) = Phi(M) R^k`` beyond M.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import logging
import warnings

import networkx
import numpy
import pandas
import scipy.linalg

from .exceptions import (ConditioningError, ConditioningWarning, DivergentTailError, NumericalError,
                         RDivergenceError, ReducibleGeneratorError, UnstableModelError)
from .generator import GeneratorBlocks
from .statespace import enumerate_states

CONDITION_LIMIT = 1e12

StabilityVerdict = collections.namedtuple("StabilityVerdict", ["stable", "z1", "z2", "drift_up", "drift_down"])
AggregateSolution = collections.namedtuple("AggregateSolution", ["phi", "z1", "z2", "stable"])
RateMatrixR = collections.namedtuple("RateMatrixR", ["R", "iterations", "residual", "spectral_radius", "change"])
TailMoments = collections.namedtuple("TailMoments", ["mass0", "mass1"])


def _warn_conditioning(matrix, what):
    condition = numpy.linalg.cond(matrix)
    if not numpy.isfinite(condition) or condition > CONDITION_LIMIT:
        warnings.warn(f"{what} is badly conditioned (condition number {condition:.3e})", ConditioningWarning)
    return condition


def _clip_probabilities(vector, tol=1e-12):
    """
    Zeroes round-off negatives of a probability vector; genuine negatives are left for the caller to see.
    """
    vector = numpy.array(vector, dtype=float)
    vector[(vector < 0) & (vector > -tol)] = 0.0
    return vector


def aggregate_HM(blocks, params):
    """
    The generator ``H0 + Hdiag(M) + Hlower(M)`` of the orbit-free chain at the frozen level.

    :param blocks: Generator blocks.
    :type blocks: GeneratorBlocks
    :param params: Parameters (``M`` is taken from here).
    :type params: ModelParams
    :rtype: numpy.ndarray
    """
    return blocks.H0 + blocks.modified_diag(params.M) + blocks.H_lower(params.M)


def check_irreducible(HM, space=None):
    """
    Raises if the directed graph of the positive off-diagonal rates of ``HM`` is not strongly connected.

    :param HM: A conservative generator.
    :param space: If given, used to name the offending state.
    :type space: StateSpace
    :raises ReducibleGeneratorError: Naming a state that cannot be reached from (or cannot reach) state 0.
    """
    rates_graph = networkx.DiGraph()
    rates_graph.add_nodes_from(range(HM.shape[0]))
    rows, cols = numpy.nonzero(HM > 0)
    rates_graph.add_edges_from((int(r), int(c)) for r, c in zip(rows, cols) if r != c)
    if networkx.is_strongly_connected(rates_graph):
        return
    everything = set(rates_graph.nodes())
    stranded = sorted(everything - networkx.descendants(rates_graph, 0) - {0})
    direction = "reached from"
    if not stranded:
        stranded = sorted(everything - networkx.ancestors(rates_graph, 0) - {0})
        direction = "reach"
    culprit = space.state_of(stranded[0]) if space is not None else stranded[0]
    label = f"{culprit[0].label},{tuple(culprit[1])}" if space is not None else str(culprit)
    raise ReducibleGeneratorError(f"Reducible generator: state {label} cannot {direction} the first state "
                                  f"({len(stranded)} states affected)", state=culprit)


def solve_phi(HM, space=None):
    """
    Stationary vector of a conservative, irreducible generator.

    One balance equation is replaced by the normalisation ``phi 1 = 1`` and the resulting dense
    system is solved directly.

    :rtype: numpy.ndarray
    """
    check_irreducible(HM, space)
    system = numpy.array(HM, dtype=float)
    system[:, -1] = 1.0
    rhs = numpy.zeros(system.shape[0])
    rhs[-1] = 1.0
    _warn_conditioning(system, "The aggregated balance system")
    try:
        phi = scipy.linalg.solve(system.T, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise ReducibleGeneratorError(f"Singular aggregated balance system: {e}")
    phi = _clip_probabilities(phi)
    return phi / phi.sum()


def check_stability(phi, params, blocks=None, space=None):
    """
    Decides whether the truncated chain is stable, ``z1*p*lambda < z2*M*theta``.

    ``z1`` is the mass of the full-hall states and ``z2`` that of the states that admit a retrial.
    When ``blocks`` are given, the same drifts are also computed as ``phi H0 1`` and
    ``phi Hlower(M) 1`` and the two forms are required to agree.

    :param phi: Stationary vector of the aggregated generator.
    :param params: Model parameters.
    :param blocks: Optional generator blocks (also supplies the state space).
    :param space: The state space, if ``blocks`` are not given.
    :rtype: StabilityVerdict
    :raises NumericalError: If the two forms of the drift disagree.
    """
    space = blocks.space if blocks is not None else space
    full = space.hall == params.N
    z1 = float(phi[full].sum())
    z2 = float(phi[~full].sum())
    orbit_entry = blocks.effective_rate("orbit_entry") if blocks is not None else params.p * params.lam
    retrial = blocks.effective_rate("retrial") if blocks is not None else params.theta
    drift_up = z1 * orbit_entry
    drift_down = z2 * params.M * retrial
    if blocks is not None:
        matrix_up = float(phi @ blocks.H0.sum(axis=1))
        matrix_down = float(phi @ blocks.H_lower(params.M).sum(axis=1))
        mismatch = abs((drift_up - drift_down) - (matrix_up - matrix_down))
        if mismatch > 1e-10:
            raise NumericalError(f"Stability sums and matrix drifts disagree by {mismatch:.3e}")
    stable = drift_up < drift_down
    logging.info(f"Stability: z1*p*lambda={drift_up:.6g} {'<' if stable else '>='} z2*M*theta={drift_down:.6g}")
    return StabilityVerdict(stable, z1, z2, drift_up, drift_down)


def spectral_radius(matrix):
    if not numpy.any(matrix):
        return 0.0
    return float(numpy.max(numpy.abs(numpy.linalg.eigvals(matrix))))


def r_residual(R, H0, HM1, HM0):
    return R @ R @ HM0 + R @ HM1 + H0


def solve_R(H0, HM1, HM0, tol=1e-10, max_iter=100000):
    """
    Minimal nonnegative solution of ``H0 + R HM1 + R^2 HM0 = 0`` by successive substitution.

    Starting from ``R = 0``, iterates ``R <- -(H0 + R^2 HM0) HM1^-1`` until the max-norm residual
    of the quadratic equation drops to ``tol``.

    :param H0: Upward block.
    :param HM1: Within-level block at the frozen level.
    :param HM0: Downward block at the frozen level.
    :param tol: Max-norm residual at which to stop.
    :param max_iter: Iteration budget.
    :rtype: RateMatrixR
    :raises RDivergenceError: If the budget runs out or the iterates stop being finite.
    """
    try:
        factors = scipy.linalg.lu_factor(HM1.T, check_finite=True)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Cannot factorise the frozen within-level block: {e}")
    if numpy.any(numpy.diag(factors[0]) == 0.0):
        raise NumericalError("The frozen within-level block is singular")

    R = numpy.zeros_like(H0)
    residual = numpy.inf
    change = numpy.inf
    for iteration in range(1, max_iter + 1):
        R_next = -scipy.linalg.lu_solve(factors, (H0 + R @ R @ HM0).T).T
        if not numpy.all(numpy.isfinite(R_next)):
            raise RDivergenceError(f"R iteration diverged at iteration {iteration}", residual,
                                   spectral_radius(R), iteration)
        change = float(numpy.max(numpy.abs(R_next - R)))
        R = R_next
        residual = float(numpy.max(numpy.abs(r_residual(R, H0, HM1, HM0))))
        logging.debug(f"R iteration {iteration}: change {change:.3e}, residual {residual:.3e}")
        if residual <= tol:
            break
    else:
        raise RDivergenceError(f"R iteration did not converge within {max_iter} iterations "
                               f"(residual {residual:.3e})", residual, spectral_radius(R), max_iter)
    R = numpy.maximum(R, 0.0)
    sp = spectral_radius(R)
    logging.info(f"R converged in {iteration} iterations, residual {residual:.3e}, sp(R)={sp:.6f}")
    return RateMatrixR(R, iteration, residual, sp, change)


def r_column_residuals(rate_matrix, blocks, params):
    """
    Max-norm residual of the R equation restricted to the columns of each macro-level.

    :rtype: dict[str, float]
    """
    residual = numpy.abs(r_residual(rate_matrix.R, blocks.H0, blocks.modified_diag(params.M),
                                    blocks.H_lower(params.M)))
    return {a_level.label: float(residual[:, blocks.space.level_mask(a_level)].max(initial=0.0))
            for a_level in blocks.space.levels}


class StationaryDistribution:
    """
    Stationary distribution of the truncated chain.

    Levels ``0..M`` are stored explicitly, the rest follow ``Phi(M + k) = Phi(M) R^k``.

    :param levels: Vectors ``Phi(0)..Phi(M)``.
    :param rate_matrix: The R matrix.
    :type rate_matrix: RateMatrixR
    """
    def __init__(self, levels, rate_matrix, space):
        self._levels = [numpy.asarray(a_level) for a_level in levels]
        self._rate_matrix = rate_matrix
        self._space = space

    @property
    def levels(self):
        return self._levels

    @property
    def M(self):
        return len(self._levels) - 1

    @property
    def R(self):
        return self._rate_matrix

    @property
    def space(self):
        return self._space

    def level(self, iota1):
        """
        The vector of orbit level ``iota1`` (any level, including those beyond M).
        """
        if iota1 < 0:
            raise ValueError(f"Orbit levels are >= 0, received {iota1}")
        if iota1 <= self.M:
            return self._levels[iota1]
        return self._levels[-1] @ numpy.linalg.matrix_power(self._rate_matrix.R, iota1 - self.M)

    @property
    def tail_mass(self):
        return float(tail_moments(self).mass0.sum())

    def total_mass(self):
        """
        Total probability, explicit levels plus the geometric tail.
        """
        return float(sum(a_level.sum() for a_level in self._levels) + self.tail_mass)


def _inverse(matrix, level):
    _warn_conditioning(matrix, f"The K matrix of orbit level {level}")
    try:
        return scipy.linalg.inv(matrix)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise ConditioningError(f"Cannot invert the K matrix of orbit level {level}: {e}", level)


def stationary_distribution(blocks, rate_matrix, params):
    """
    Solves the truncated chain for its stationary distribution.

    :param blocks: Generator blocks.
    :type blocks: GeneratorBlocks
    :param rate_matrix: Solution of the quadratic matrix equation at level M.
    :type rate_matrix: RateMatrixR
    :param params: Parameters (``M`` is taken from here).
    :rtype: StationaryDistribution
    """
    M = params.M
    R = rate_matrix.R
    H0 = blocks.H0
    dim = H0.shape[0]
    identity = numpy.eye(dim)

    K = {M: _inverse(-(blocks.modified_diag(M) + R @ blocks.H_lower(M)), M)}
    for j in range(M - 1, 0, -1):
        K[j] = _inverse(-(blocks.H_diag(j) + H0 @ K[j + 1] @ blocks.H_lower(j + 1)), j)

    omega = [identity]
    for j in range(1, M + 1):
        omega.append(omega[-1] @ H0 @ K[j])

    try:
        tail_factor = scipy.linalg.solve(identity - R, identity)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise DivergentTailError(f"I - R is singular: {e}")
    weights = (sum(omega[:M]) + omega[M] @ tail_factor) @ numpy.ones(dim)

    system = blocks.H_diag(0) + H0 @ K[1] @ blocks.H_lower(1)
    system[:, -1] = weights
    rhs = numpy.zeros(dim)
    rhs[-1] = 1.0
    _warn_conditioning(system, "The boundary balance system")
    try:
        phi0 = scipy.linalg.solve(system.T, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise ConditioningError(f"Cannot solve the boundary balance system: {e}", 0)
    phi0 = _clip_probabilities(phi0)
    levels = [_clip_probabilities(phi0 @ omega[j]) for j in range(M + 1)]
    return StationaryDistribution(levels, rate_matrix, blocks.space)


def tail_moments(dist):
    """
    Mass and first orbit moment of the levels beyond M, per state of the block.

    ``mass0 = Phi(M) R (I-R)^-1`` and ``mass1 = Phi(M) [M R (I-R)^-1 + R (I-R)^-2]``.

    :type dist: StationaryDistribution
    :rtype: TailMoments
    :raises DivergentTailError: If ``sp(R) >= 1``.
    """
    R = dist.R.R
    if dist.R.spectral_radius >= 1.0:
        raise DivergentTailError(f"Geometric tail diverges, sp(R)={dist.R.spectral_radius}")
    phi_M = dist.levels[-1]
    if not numpy.any(R):
        return TailMoments(numpy.zeros_like(phi_M), numpy.zeros_like(phi_M))
    identity = numpy.eye(R.shape[0])
    resolvent = scipy.linalg.solve(identity - R, identity)
    first = R @ resolvent
    mass0 = phi_M @ first
    mass1 = phi_M @ (dist.M * first + first @ resolvent)
    return TailMoments(_clip_probabilities(mass0), _clip_probabilities(mass1))


def balance_residuals(dist, blocks):
    """
    Max-norm residual of the balance equations of each level ``0..M``.

    :rtype: dict[int, float]
    """
    M = dist.M
    levels = dist.levels
    R = dist.R.R
    residuals = {}
    for j in range(M + 1):
        flow = levels[j] @ (blocks.H_diag(j) if j < M else blocks.modified_diag(M))
        if j > 0:
            flow = flow + levels[j - 1] @ blocks.H0
        if j < M:
            flow = flow + levels[j + 1] @ blocks.H_lower(j + 1)
        else:
            flow = flow + levels[M] @ R @ blocks.H_lower(M)
        residuals[j] = float(numpy.max(numpy.abs(flow)))
    return residuals


class QbdSolution:
    """
    Everything the solver produces for one parameter point.
    """
    def __init__(self, params, space, blocks, aggregate, verdict, rate_matrix, distribution):
        self.params = params
        self.space = space
        self.blocks = blocks
        self.aggregate = aggregate
        self.verdict = verdict
        self.rate_matrix = rate_matrix
        self.distribution = distribution

    def diagnostics(self):
        """
        Numerical health of the solution.

        :rtype: dict
        """
        residuals = balance_residuals(self.distribution, self.blocks)
        return {"block_dim": self.space.block_dim,
                "M": self.params.M,
                "drift_up": self.verdict.drift_up,
                "drift_down": self.verdict.drift_down,
                "stable": self.verdict.stable,
                "R_iterations": self.rate_matrix.iterations,
                "R_residual": self.rate_matrix.residual,
                "spectral_radius": self.rate_matrix.spectral_radius,
                "tail_mass": self.distribution.tail_mass,
                "normalisation_error": abs(self.distribution.total_mass() - 1.0),
                "balance_residual": max(residuals.values())}


def solve(params, tol=1e-10, max_iter=100000, auto_M=False, tail_tol=1e-6, perturbation=None, max_M=1024):
    """
    Runs the whole analytic pipeline for one parameter point.

    :param params: Validated parameters.
    :type params: ModelParams
    :param tol: Residual tolerance of the R iteration.
    :param max_iter: Iteration budget of the R iteration.
    :param auto_M: Double M until the tail mass drops below ``tail_tol``.
    :param perturbation: Optional rate multipliers per transition class or single entry (mutation checks).
    :rtype: QbdSolution
    :raises UnstableModelError: If the truncated chain is unstable at the (final) M.
    """
    space = enumerate_states(params)
    space.dimension_mismatch()
    blocks = GeneratorBlocks(space, params, perturbation)
    while True:
        HM = aggregate_HM(blocks, params)
        phi = solve_phi(HM, space)
        verdict = check_stability(phi, params, blocks)
        if not verdict.stable:
            raise UnstableModelError(f"Unstable at M={params.M}: z1*p*lambda={verdict.drift_up:.6g} >= "
                                     f"z2*M*theta={verdict.drift_down:.6g}", verdict.drift_up, verdict.drift_down)
        aggregate = AggregateSolution(phi, verdict.z1, verdict.z2, verdict.stable)
        rate_matrix = solve_R(blocks.H0, blocks.modified_diag(params.M), blocks.H_lower(params.M), tol, max_iter)
        distribution = stationary_distribution(blocks, rate_matrix, params)
        tail = distribution.tail_mass
        if not auto_M or tail < tail_tol or params.M * 2 > max_M:
            if auto_M and tail >= tail_tol:
                logging.warning(f"Tail mass {tail:.3e} still above {tail_tol:.1e} at M={params.M}")
            break
        logging.info(f"Tail mass {tail:.3e} at M={params.M}, doubling M")
        params = params.replace(M=params.M * 2)
    return QbdSolution(params, space, blocks, aggregate, verdict, rate_matrix, distribution)


def dump_solution(dist):
    """
    Long format table ``level,index,probability`` of the explicit levels.

    :rtype: pandas.DataFrame
    """
    dim = len(dist.levels[0])
    return pandas.DataFrame({"level": numpy.repeat(numpy.arange(dist.M + 1), dim),
                             "index": numpy.tile(numpy.arange(dim), dist.M + 1),
                             "probability": numpy.concatenate(dist.levels)})
