from retrialqis.model import ModelParams
from retrialqis.statespace import StateSpace
from retrialqis.generator import GeneratorBlocks
from retrialqis.solver import (aggregate_HM, check_irreducible, solve_phi, check_stability, solve_R, r_residual,
                               r_column_residuals, spectral_radius, stationary_distribution, tail_moments,
                               balance_residuals, solve, dump_solution)
from retrialqis.metrics import solution_metrics
from retrialqis.exceptions import ReducibleGeneratorError, RDivergenceError, UnstableModelError, NumericalError
import numpy
import pytest

DESK = dict(S=6, s=2, c=2, N=3, M=4)


@pytest.fixture(scope="module")
def desk_solution():
    return solve(ModelParams(**DESK))


@pytest.fixture(scope="module")
def baseline_solution():
    return solve(ModelParams())


def _blocks(params):
    return GeneratorBlocks(StateSpace(params), params)


def test_phi():
    """
    The stationary vector of the aggregated generator is a probability vector in its null space
    """
    params = ModelParams(**DESK)
    blocks = _blocks(params)
    HM = aggregate_HM(blocks, params)
    phi = solve_phi(HM, blocks.space)

    assert numpy.max(numpy.abs(HM.sum(axis=1))) < 1e-12
    assert phi.sum() == pytest.approx(1.0, abs=1e-12)
    assert numpy.all(phi >= 0)
    assert numpy.max(numpy.abs(phi @ HM)) < 1e-10


def test_irreducibility():
    """
    A generator with an unreachable state is rejected, naming the state
    """
    HM = numpy.array([[-1.0, 1.0, 0.0],
                      [1.0, -1.0, 0.0],
                      [0.0, 0.0, 0.0]])
    with pytest.raises(ReducibleGeneratorError) as e:
        check_irreducible(HM)
    assert e.value.state == 2

    # The aggregated generator of a regular model is irreducible
    params = ModelParams(**DESK)
    blocks = _blocks(params)
    assert check_irreducible(aggregate_HM(blocks, params), blocks.space) is None


def test_stability_drifts():
    """
    The state sums z1*p*lambda and z2*M*theta agree with the matrix drifts on random parameter sets
    """
    rng = numpy.random.default_rng(2026)
    verdicts = set()
    for _ in range(25):
        params = ModelParams(S=6, s=2, c=2, N=3, M=int(rng.integers(1, 6)), lam=rng.uniform(0.5, 8.0),
                             mu=rng.uniform(0.5, 8.0), theta=rng.uniform(0.05, 2.0), eta=rng.uniform(0.5, 4.0),
                             beta=rng.uniform(0.5, 4.0), p=rng.uniform(0.0, 1.0))
        blocks = _blocks(params)
        phi = solve_phi(aggregate_HM(blocks, params), blocks.space)
        verdict = check_stability(phi, params, blocks)
        matrix_drift = float(phi @ blocks.H0.sum(axis=1) - phi @ blocks.H_lower(params.M).sum(axis=1))

        assert abs((verdict.drift_up - verdict.drift_down) - matrix_drift) < 1e-10
        assert verdict.z1 + verdict.z2 == pytest.approx(1.0)
        assert verdict.stable == (matrix_drift < 0)
        verdicts.add(verdict.stable)
    assert verdicts == {True, False}


def test_stability_without_retrials():
    """
    Without retrials nothing leaves the orbit and the model is unstable
    """
    with pytest.raises(UnstableModelError) as e:
        solve(ModelParams(**DESK, theta=0.0))
    assert e.value.drift_down == 0.0
    assert e.value.drift_up > 0.0


def test_stability_without_joining():
    """
    Without joining nothing enters the orbit and the model is stable
    """
    solution = solve(ModelParams(**DESK, p=0.0))
    assert solution.verdict.stable
    assert solution.verdict.drift_up == 0.0


def test_R_desk(desk_solution):
    """
    R solves the quadratic matrix equation, is nonnegative and has spectral radius below one
    """
    blocks = desk_solution.blocks
    M = desk_solution.params.M
    rate_matrix = desk_solution.rate_matrix
    residual = r_residual(rate_matrix.R, blocks.H0, blocks.modified_diag(M), blocks.H_lower(M))

    assert numpy.max(numpy.abs(residual)) <= 1e-10
    assert numpy.all(rate_matrix.R >= 0)
    assert 0.0 < rate_matrix.spectral_radius < 1.0
    assert max(r_column_residuals(rate_matrix, blocks, desk_solution.params).values()) <= 1e-10


def test_R_baseline(baseline_solution):
    """
    R at the baseline configuration
    """
    assert baseline_solution.space.block_dim == 491
    assert baseline_solution.rate_matrix.residual <= 1e-10
    assert baseline_solution.rate_matrix.spectral_radius < 1.0


def test_R_without_joining():
    """
    Without joining R is exactly zero
    """
    solution = solve(ModelParams(**DESK, p=0.0))
    assert not numpy.any(solution.rate_matrix.R)
    assert solution.rate_matrix.spectral_radius == 0.0
    assert solution.distribution.tail_mass == 0.0


def test_R_iteration_budget():
    """
    Running out of iterations is reported with the state of the iteration
    """
    params = ModelParams(**DESK)
    blocks = _blocks(params)
    with pytest.raises(RDivergenceError) as e:
        solve_R(blocks.H0, blocks.modified_diag(), blocks.H_lower(params.M), tol=1e-10, max_iter=1)
    assert e.value.iterations == 1
    assert e.value.residual > 1e-10


def test_R_singular_block():
    """
    A singular within-level block cannot be factorised
    """
    with pytest.raises(NumericalError):
        solve_R(numpy.eye(2), numpy.zeros((2, 2)), numpy.eye(2))


def test_spectral_radius():
    assert spectral_radius(numpy.zeros((3, 3))) == 0.0
    assert spectral_radius(numpy.diag([0.5, -0.75])) == pytest.approx(0.75)


@pytest.mark.parametrize("solution_name", ["desk_solution", "baseline_solution"])
def test_normalisation_and_balance(solution_name, request):
    """
    The distribution sums to one and satisfies the balance equations of every level
    """
    solution = request.getfixturevalue(solution_name)
    dist = solution.distribution

    assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert all(numpy.all(a_level >= 0) for a_level in dist.levels)
    assert max(balance_residuals(dist, solution.blocks).values()) <= 1e-8


def test_geometric_tail(desk_solution):
    """
    The closed-form tail equals the explicit sum of the levels beyond M
    """
    dist = desk_solution.distribution
    R = dist.R.R
    vector = dist.levels[-1]
    mass0 = numpy.zeros_like(vector)
    mass1 = numpy.zeros_like(vector)
    level = dist.M
    while vector.sum() > 1e-18 and level < 100000:
        vector = vector @ R
        level += 1
        mass0 += vector
        mass1 += level * vector

    tail = tail_moments(dist)
    assert numpy.allclose(tail.mass0, mass0, atol=1e-12)
    assert numpy.allclose(tail.mass1, mass1, atol=1e-10)
    assert numpy.allclose(dist.level(dist.M + 2), dist.levels[-1] @ R @ R)


def test_tail_mass_truncation():
    """
    Raising M thins the tail, and the measures settle, at the baseline configuration
    """
    tails = []
    reports = {}
    for M in (3, 5, 8, 12):
        solution = solve(ModelParams(M=M))
        tails.append(solution.distribution.tail_mass)
        reports[M] = solution_metrics(solution).as_dict()

    assert all(a > b for a, b in zip(tails, tails[1:]))
    for a_measure, a_value in reports[12].items():
        if a_value is not None and abs(a_value) > 1e-12:
            assert reports[8][a_measure] == pytest.approx(a_value, rel=1e-3), a_measure


def test_auto_M():
    """
    Automatic truncation doubles M until the tail mass is negligible
    """
    solution = solve(ModelParams(**DESK), auto_M=True, tail_tol=1e-9)

    assert solution.params.M in (4, 8, 16, 32, 64)
    assert solution.distribution.tail_mass < 1e-9
    assert solution.distribution.M == solution.params.M


def test_time_scaling(desk_solution):
    """
    Changing the unit of time leaves the stationary distribution unchanged
    """
    scaled = solve(ModelParams(**DESK).scaled(3.0))

    for a_level, another_level in zip(desk_solution.distribution.levels, scaled.distribution.levels):
        assert numpy.allclose(a_level, another_level, atol=1e-8)
    assert numpy.allclose(desk_solution.rate_matrix.R, scaled.rate_matrix.R, atol=1e-8)


def test_stationary_distribution_direct():
    """
    The pipeline can be driven step by step
    """
    params = ModelParams(**DESK)
    blocks = _blocks(params)
    rate_matrix = solve_R(blocks.H0, blocks.modified_diag(), blocks.H_lower(params.M))
    dist = stationary_distribution(blocks, rate_matrix, params)

    assert len(dist.levels) == params.M + 1
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)


def test_diagnostics(desk_solution):
    """
    Diagnostics summarise the numerical health of a solution
    """
    diagnostics = desk_solution.diagnostics()

    assert diagnostics["block_dim"] == 59
    assert diagnostics["M"] == 4
    assert diagnostics["stable"] is True
    assert diagnostics["drift_up"] < diagnostics["drift_down"]
    assert diagnostics["normalisation_error"] < 1e-9
    assert diagnostics["balance_residual"] < 1e-8
    assert diagnostics["R_iterations"] >= 1


def test_dump_solution(desk_solution):
    """
    The distribution dump lists every state of levels 0..M
    """
    table = dump_solution(desk_solution.distribution)

    assert list(table.columns) == ["level", "index", "probability"]
    assert len(table) == 5 * 59
    assert table["probability"].sum() == pytest.approx(1.0 - desk_solution.distribution.tail_mass, abs=1e-9)
