import numpy as np
import pytest

from conftest import rel_err
from proxvs.dispersion import (
    PROJECTOR_SEED_XOR,
    DispersionInstance,
    build_dispersion_problem,
    dispersion_cost,
    dispersion_start,
    random_dispersion_instance,
)
from proxvs.errors import DimensionError, ParameterError
from proxvs.mathkit import SubspaceProjector, random_subspace_projector
from proxvs.rng import make_rng
from proxvs.solver import SolverConfig, solve


def test_instance_generation():
    inst = random_dispersion_instance(10, 10, 5, 1)
    assert inst.points.shape == (10, 10) and np.all(np.abs(inst.points) <= 2)
    np.testing.assert_array_equal(inst.weights, np.ones(10))
    again = random_dispersion_instance(10, 10, 5, 1)
    np.testing.assert_array_equal(inst.points, again.points)
    np.testing.assert_array_equal(inst.projector.matrix, again.projector.matrix)
    one = random_dispersion_instance(1, 1, 1, 9)
    assert one.points.shape == (1, 1) and abs(one.points[0, 0]) <= 2
    expect = random_subspace_projector(10, 5, make_rng(1 ^ PROJECTOR_SEED_XOR))
    np.testing.assert_array_equal(inst.projector.matrix, expect.matrix)
    for bad in ((10, 10, 11, 0), (0, 3, 1, 0), (3, 3, 0, 0)):
        with pytest.raises(ParameterError):
            random_dispersion_instance(*bad)


def test_instance_validation():
    P = SubspaceProjector.identity(2)
    with pytest.raises(DimensionError):
        DispersionInstance(np.zeros((3, 2)), np.ones(2), P)
    with pytest.raises(ParameterError):
        DispersionInstance(np.zeros((1, 2)), np.zeros(1), P)
    with pytest.raises(DimensionError):
        DispersionInstance(np.zeros((1, 3)), np.ones(1), P)


def test_map_examples():
    inst = DispersionInstance(np.zeros((1, 2)), np.ones(1), SubspaceProjector.identity(2))
    S = build_dispersion_problem(inst).S
    np.testing.assert_array_equal(S.value(np.array([1.0, 1.0])), [-2.0])
    np.testing.assert_array_equal(S.jacobian_adjoint(np.array([1.0, 1.0]), np.array([1.0])), [-2.0, -2.0])
    rand = random_dispersion_instance(4, 3, 2, 5)
    Sr = build_dispersion_problem(rand).S
    assert Sr.value(rand.points[0])[0] == 0.0


def test_map_adjoint_fd(rng):
    inst = random_dispersion_instance(6, 5, 3, 2)
    inst = DispersionInstance(inst.points, rng.uniform(0.5, 2, 5), inst.projector)
    S = build_dispersion_problem(inst).S
    for _ in range(100):
        x, v = rng.normal(size=(2, 6))
        y = rng.normal(size=5)
        h = 1e-6 * (1 + np.linalg.norm(x))
        fd = (S.value(x + h * v) - S.value(x - h * v)) @ y / (2 * h)
        got = S.jacobian_adjoint(x, y) @ v
        assert rel_err(got, fd) <= 1e-5


def test_cost_examples(rng):
    u = np.array([[1.0, 0.0], [-1.0, 0.0]])
    inst = DispersionInstance(u, np.ones(2), SubspaceProjector.identity(2))
    assert dispersion_cost(inst, np.zeros(2)) == -1.0
    single = DispersionInstance(u[:1], np.ones(1), SubspaceProjector.identity(2))
    assert dispersion_cost(single, u[0]) == 0.0
    r = random_dispersion_instance(5, 7, 3, 0)
    p = build_dispersion_problem(r)
    for _ in range(10):
        x = rng.normal(size=5)
        assert dispersion_cost(r, x) == p.g.evaluate(p.S.value(x))
    with pytest.raises(DimensionError):
        dispersion_cost(r, np.zeros(4))


def test_lipschitz_bound_dominates_fd(rng):
    # the analytic L(mu) must bound the observed gradient variation on C
    inst = random_dispersion_instance(6, 5, 4, 8)
    p = build_dispersion_problem(inst)
    from proxvs.solver import smoothed_gradient

    for mu in (0.5, 0.1, 0.01):
        L = p.grad_lipschitz(mu)
        for _ in range(50):
            a, b = (p.phi.prox(1.0, rng.normal(size=6)) for _ in range(2))
            ga, gb = smoothed_gradient(p, mu, a), smoothed_gradient(p, mu, b)
            assert np.linalg.norm(ga - gb) <= L * np.linalg.norm(a - b) + 1e-9


@pytest.mark.parametrize("shape", [(10, 10, 5), (10, 10, 9), (30, 20, 10)])
def test_solver_output_feasible(shape):
    for seed in range(5):
        inst = random_dispersion_instance(*shape, seed)
        res = solve(build_dispersion_problem(inst), dispersion_start(inst), SolverConfig(time_limit_sec=5))
        x = res.x_final
        assert np.linalg.norm(inst.projector(x) - x) <= 1e-8
        assert np.linalg.norm(x) <= 1 + 1e-12
        assert res.final_cost == dispersion_cost(inst, x)
