import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_gradient, rel_err
from proxvs.errors import DimensionError, ParameterError
from proxvs.prox import (
    BoxIndicator,
    CompositeProblem,
    IdentityMap,
    LinearMap,
    MaxCoordinate,
    Quadratic,
    ScaledL1,
    SetIndicator,
    ZeroFunction,
    ZeroSmooth,
    effective_eta,
    indicator_box,
    moreau_gradient,
    moreau_value,
    prox_max,
    prox_scaled_l1,
    smoothing_schedule,
)
from proxvs.mathkit import project_ball

ABS = ScaledL1(1.0, 1)
FUNCS = [ScaledL1(0.7, 4), MaxCoordinate(), ZeroFunction()]

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_moreau_value_abs(frozen):
    for z, want in frozen["moreau_abs"].items():
        assert moreau_value(ABS, 1.0, np.array([float(z)])) == pytest.approx(want, abs=1e-9)


def test_moreau_gradient_examples(frozen):
    assert moreau_gradient(ABS, 1.0, np.array([0.0]))[0] == 0.0
    assert moreau_gradient(ABS, 1.0, np.array([2.0]))[0] == pytest.approx(frozen["moreau_abs_grad_at_2"], abs=1e-8)
    g = moreau_gradient(MaxCoordinate(), 1.0, np.zeros(2))
    np.testing.assert_allclose(g, frozen["moreau_max_grad_at_00"], atol=1e-8)


def test_mu_range_checked():
    with pytest.raises(ParameterError):
        moreau_value(ABS, 0.0, np.ones(1))
    with pytest.raises(ParameterError):
        moreau_gradient(ABS, -1.0, np.ones(1))


def test_schedule_examples():
    assert smoothing_schedule(1, 1.0, 3) == 0.5
    assert smoothing_schedule(8, 1.0, 3) == pytest.approx(0.25, rel=1e-15)
    assert smoothing_schedule(1, 0.5, 1) == 1.0
    for bad in ((1, 1.0, 0.5), (1, 0.0, 3), (0, 1.0, 3)):
        with pytest.raises(ParameterError):
            smoothing_schedule(*bad)


@given(st.integers(1, 10**6), st.floats(0.01, 100), st.floats(1, 10))
def test_schedule_ratio(n, eta, alpha):
    mu0, mu1 = smoothing_schedule(n, eta, alpha), smoothing_schedule(n + 1, eta, alpha)
    assert 0 < mu1 <= mu0 <= 1 / (2 * eta)
    assert mu1 / mu0 >= 2 ** (-1 / alpha) - 1e-15


def test_convex_eta_substitution():
    assert effective_eta(MaxCoordinate()) == 1.0
    assert effective_eta(ScaledL1(3, 2)) == 1.0
    assert effective_eta(MaxCoordinate(), 0.25) == 0.25


def test_prox_l1_examples(frozen):
    want = frozen["prox_l1_half"]
    assert prox_scaled_l1(1, 0.5, [2.0])[0] == pytest.approx(want["2.0"], abs=1e-6)
    assert prox_scaled_l1(1, 0.5, [0.3])[0] == pytest.approx(want["0.3"], abs=1e-6)
    np.testing.assert_array_equal(prox_scaled_l1(0, 1, [-4.0, 7.0]), [-4.0, 7.0])


def test_prox_max_examples(frozen):
    want = frozen["prox_max_mu1"]
    np.testing.assert_allclose(prox_max(1, [0.0, 0.0]), want["[0.0, 0.0]"], atol=1e-6)
    np.testing.assert_allclose(prox_max(1, [10.0, 0.0]), want["[10.0, 0.0]"], atol=1e-6)
    np.testing.assert_allclose(prox_max(2, [5.0]), [3.0])
    with pytest.raises(DimensionError):
        prox_max(1, [])


@pytest.mark.parametrize("g", FUNCS, ids=repr)
def test_prox_beats_random_probes(g, rng):
    for _ in range(50):
        z = rng.normal(scale=3, size=4)
        mu = float(np.exp(rng.uniform(-4, 2)))
        p = g.prox(mu, z)
        best = g.evaluate(p) + np.sum((p - z) ** 2) / (2 * mu)
        probes = p + rng.normal(scale=rng.uniform(1e-3, 2), size=(100, 4))
        vals = [g.evaluate(w) + np.sum((w - z) ** 2) / (2 * mu) for w in probes]
        assert best <= min(vals) + 1e-12


@pytest.mark.parametrize("g", FUNCS, ids=repr)
def test_lipschitz_constant(g, rng):
    for _ in range(200):
        a, b = rng.normal(scale=5, size=(2, 4))
        assert abs(g.evaluate(a) - g.evaluate(b)) <= g.lipschitz * np.linalg.norm(a - b) + 1e-12


@pytest.mark.parametrize("g", FUNCS[:2], ids=repr)
def test_envelope_monotone_in_mu(g, rng):
    L = g.lipschitz
    for _ in range(300):
        z = rng.normal(scale=3, size=4)
        mu2, mu1 = np.sort(np.exp(rng.uniform(-5, 1, size=2)))
        e1, e2 = moreau_value(g, mu1, z), moreau_value(g, mu2, z)
        assert e1 <= e2 + 1e-10
        assert e2 <= e1 + 0.5 * ((mu1 - mu2) / mu2) * mu1 * L**2 + 1e-10


@pytest.mark.parametrize("g", FUNCS[:2], ids=repr)
def test_moreau_gradient_matches_fd(g, rng):
    for _ in range(100):
        z = rng.normal(scale=3, size=4)
        mu = float(np.exp(rng.uniform(-3, 1)))
        fd = fd_gradient(lambda w: moreau_value(g, mu, w), z)
        assert rel_err(moreau_gradient(g, mu, z), fd) <= 1e-5


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6), st.floats(1e-3, 10))
def test_prox_max_is_fixed_point_of_decomposition(z, mu):
    z = np.array(z)
    p = prox_max(mu, z)
    # optimality: (z - p)/mu lies in the simplex and is supported on argmax(p)
    v = (z - p) / mu
    assert v.min() >= -1e-9 and abs(v.sum() - 1) <= 1e-9
    top = p.max()
    assert np.all(v[p < top - 1e-7 * (1 + abs(top))] <= 1e-9)


def test_box_examples():
    box = indicator_box([0.1, 0.1], [1, 1])
    np.testing.assert_array_equal(box.prox(1.0, [0.5, 2]), [0.5, 1])
    half = indicator_box([0.1, -np.inf], [1, np.inf])
    np.testing.assert_array_equal(half.prox(3.0, [0, 9]), [0.1, 9])
    np.testing.assert_array_equal(indicator_box([0], [0]).prox(1.0, [7]), [0])
    with pytest.raises(ParameterError):
        indicator_box([1.0], [0.0])
    assert box.evaluate([2, 0.5]) == np.inf and box.evaluate([0.5, 0.5]) == 0


def test_convex_terms_nonexpansive(rng):
    box = BoxIndicator(-np.ones(3), np.ones(3))
    ball = SetIndicator(project_ball, name="ball")
    for term in (box, ball):
        for _ in range(100):
            a, b = rng.normal(scale=3, size=(2, 3))
            pa, pb = term.prox(1.0, a), term.prox(1.0, b)
            assert term.in_domain(pa)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12


def test_smooth_pieces_fd(rng):
    A = rng.normal(size=(3, 3))
    q = Quadratic(A, b=rng.normal(size=3), c=1.0)
    lin = LinearMap(rng.normal(size=(2, 3)), offset=rng.normal(size=2))
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=2)
        assert rel_err(q.gradient(x), fd_gradient(q.value, x)) <= 1e-5
        assert rel_err(lin.jacobian_adjoint(x, y), fd_gradient(lambda w: lin.value(w) @ y, x)) <= 1e-5
    assert q.lipschitz_grad == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(q.A))))


def test_composite_problem_value():
    p = CompositeProblem(h=ZeroSmooth(), g=ABS, S=IdentityMap(1), phi=indicator_box([0], [np.inf]))
    assert p.value(np.array([2.0])) == 2.0
    assert p.value(np.array([-1.0])) == np.inf
    assert p.smoothed_value(1.0, np.array([2.0])) == pytest.approx(1.5)
    with pytest.raises(DimensionError):
        p.check_point(np.zeros(2))
