import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfdm.errors import (
    DegenerateStencilError,
    InvalidArgumentError,
    SimulationOverflowError,
    StabilityError,
)
from sgfdm.geometry import Domain, PointCloud, generate_regular_grid
from sgfdm.problems import AnalyticSolution
from sgfdm.sde import (
    FieldState,
    ProblemSpec,
    auto_dt,
    check_stability,
    discretize,
    draw_increments,
    fit_dt,
    initial_field,
    integrate,
    max_stable_dt,
    realization_rng,
    run_realization,
    sample_wiener_increment,
    step,
)
from sgfdm.stencil import LaplacianStencil


@pytest.fixture(scope="module")
def grid_h01():
    return discretize(generate_regular_grid(Domain.unit(1), 11), 2)


def const_spec(c, rho=0.01, mu=0.0, T=1.0, dt=1.0):
    return ProblemSpec(rho, mu, lambda x: np.full(len(x), c), lambda x, t: np.full(len(x), c), T, dt)


def test_problem_spec_validation():
    for kw in ({"rho": 0}, {"mu": -1}, {"T": 0}, {"dt": 2.0}, {"dt": 0}):
        args = dict(rho=1.0, mu=0.0, T=1.0, dt=0.5) | kw
        with pytest.raises(InvalidArgumentError):
            ProblemSpec(args["rho"], args["mu"], None, None, args["T"], args["dt"])


def test_non_integer_step_count():
    spec = const_spec(1.0, dt=0.3)
    with pytest.raises(InvalidArgumentError, match="integer"):
        spec.n_steps
    assert const_spec(1.0, dt=0.1).n_steps == 10


def test_check_stability_examples(grid_h01):
    assert grid_h01.max_theta_c == pytest.approx(200.0, rel=1e-12)
    ok = check_stability(0.005, 1.0, grid_h01)
    assert ok.passed and ok.product == pytest.approx(1.0, rel=1e-12)
    bad = check_stability(0.01, 1.0, grid_h01)
    assert not bad.passed and bad.product == pytest.approx(2.0, rel=1e-12)
    largest = check_stability(0.01, bad.max_stable_dt, grid_h01)
    assert largest.passed and largest.product == pytest.approx(1.0, rel=1e-14)
    assert "FAIL" in str(bad) and "PASS" in str(ok)


def test_max_stable_dt_arithmetic():
    grid = discretize(generate_regular_grid(Domain.unit(3), 4), 26)
    theta = grid.max_theta_c
    assert max_stable_dt(1.0, grid) == pytest.approx(1 / theta, rel=1e-15)
    assert max_stable_dt(1.0, grid, 0.5) == pytest.approx(0.5 / theta, rel=1e-15)
    fake = [LaplacianStencil(None, np.array([27.0, 27.0]), 54.0)]
    assert max_stable_dt(1.0, fake) == pytest.approx(1 / 54, rel=1e-15)
    assert max_stable_dt(1.0, fake, 0.5) == pytest.approx(1 / 108, rel=1e-15)
    with pytest.raises(DegenerateStencilError):
        max_stable_dt(1.0, [LaplacianStencil(None, np.zeros(2), 0.0)])
    with pytest.raises(InvalidArgumentError):
        max_stable_dt(1.0, fake, 1.5)


def test_max_stable_dt_self_consistent(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[2], 4)
    dt = max_stable_dt(0.005, disc)
    assert check_stability(0.005, dt, disc).passed
    assert not check_stability(0.005, dt * (1 + 1e-9), disc).passed
    dt_auto = auto_dt(0.005, disc, 1.0)
    assert dt_auto <= 0.5 * dt and round(1 / dt_auto) == pytest.approx(1 / dt_auto, abs=1e-9)


def test_fit_dt():
    assert fit_dt(1.0, 0.3) == pytest.approx(0.25)
    assert fit_dt(1.0, 0.25) == 0.25
    assert fit_dt(1.0, 5.0) == 1.0


def test_wiener_statistics():
    dt = 0.01
    x = sample_wiener_increment(realization_rng(0, 0), dt, 10**6)
    assert abs(x.mean()) <= 4 * math.sqrt(dt / 10**6)
    assert abs(x.var(ddof=1) / dt - 1) <= 0.01
    y = sample_wiener_increment(realization_rng(1, 0), 4 * dt, 10**6)
    assert abs(y.var(ddof=1) / x.var(ddof=1) / 4 - 1) <= 0.02


def test_wiener_determinism():
    a = sample_wiener_increment(realization_rng(5, 3), 0.1, 100)
    b = sample_wiener_increment(realization_rng(5, 3), 0.1, 100)
    c = sample_wiener_increment(realization_rng(5, 4), 0.1, 100)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    rng = realization_rng(5, 3)
    seq = [sample_wiener_increment(rng, 0.1) for _ in range(100)]
    assert np.array_equal(a, seq)
    with pytest.raises(InvalidArgumentError):
        sample_wiener_increment(rng, 0.0)


def test_draw_increments_shapes():
    rng = realization_rng(0, 0)
    assert draw_increments(rng, 0.1, 7, 3).shape == (7,)
    assert draw_increments(rng, 0.1, 7, 3, "per-node").shape == (7, 3)
    with pytest.raises(InvalidArgumentError):
        draw_increments(rng, 0.1, 7, 3, "colored")


def three_node():
    cloud = PointCloud(np.array([[0.0], [0.5], [1.0]]), np.array([True, False, True]))
    return discretize(cloud, 2)


def test_step_single_stencil():
    disc = three_node()
    np.testing.assert_allclose(disc.stencils[0].theta, [4.0, 4.0], rtol=1e-14)
    spec = ProblemSpec(0.01, 0.0, lambda x: np.array([0.0, 1.0, 0.0]),
                       lambda x, t: np.zeros(len(x)), 1.0, 1.0)
    s1 = step(FieldState(0, 0.0, initial_field(disc, spec)), disc, spec, 0.0)
    assert s1.k == 1 and s1.t == 1.0
    assert s1.u[1] == pytest.approx(0.92, rel=1e-14)
    assert s1.u[0] == 0.0 and s1.u[2] == 0.0


def test_step_constant_field(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[1], 4)
    spec = const_spec(2.5, rho=0.005, dt=auto_dt(0.005, disc, 1.0))
    s = step(FieldState(0, 0.0, initial_field(disc, spec)), disc, spec, 0.0)
    np.testing.assert_allclose(s.u, 2.5, rtol=1e-10)


def test_zero_increment_equals_noiseless(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[1], 4)
    ex = AnalyticSolution("diffusion1d", 0.005)
    dt = auto_dt(0.005, disc, 1.0)
    a = ex.problem_spec(0.0, 1.0, dt)
    b = ex.problem_spec(0.3, 1.0, dt)
    u0 = initial_field(disc, a)
    ua = step(FieldState(0, 0.0, u0), disc, a, 0.0).u
    ub = step(FieldState(0, 0.0, u0), disc, b, 0.0).u
    assert np.array_equal(ua, ub)


def test_step_boundary_refresh():
    disc = three_node()
    spec = ProblemSpec(0.01, 0.0, lambda x: np.ones(len(x)), lambda x, t: np.full(len(x), 1 + t),
                       2.0, 1.0)
    s = step(FieldState(0, 0.0, initial_field(disc, spec)), disc, spec, 0.0)
    assert s.u[0] == 2.0 and s.u[2] == 2.0


def test_single_noise_contract():
    cloud = PointCloud(np.array([[0.0], [0.3], [0.7], [1.0]]), np.array([True, False, False, True]))
    disc = discretize(cloud, 2)
    mu, rho, dt = 0.4, 0.01, 0.1
    spec = ProblemSpec(rho, mu, lambda x: 1 + x[:, 0], lambda x, t: 1 + x[:, 0], 1.0, dt)
    seen = []
    integrate(disc, spec, draw_increments(realization_rng(3, 0), dt, 10, 4)[None],
              lambda k, u: seen.append(u[0].copy()))
    drift_op = disc.operator
    for k in range(10):
        u, v = seen[k], seen[k + 1]
        implied = (v - u - rho * dt * (drift_op @ u)) / (mu * u)
        assert implied[1] == pytest.approx(implied[2], rel=1e-9, abs=1e-12)


def test_seed_independent_without_noise(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[0], 4)
    ex = AnalyticSolution("diffusion1d", 0.005)
    spec = ex.problem_spec(0.0, 1.0, auto_dt(0.005, disc, 1.0))
    a = run_realization(disc, spec, 1, record=True)
    b = run_realization(disc, spec, 99, record=True)
    assert np.array_equal(a.history, b.history)


def test_run_realization_seeded(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[0], 4)
    ex = AnalyticSolution("diffusion1d", 0.005)
    spec = ex.problem_spec(0.1, 1.0, auto_dt(0.005, disc, 1.0))
    a = run_realization(disc, spec, 4, snapshots=(0.0, 1.0))
    b = run_realization(disc, spec, 4)
    c = run_realization(disc, spec, 5)
    assert np.array_equal(a.final.u, b.final.u) and not np.array_equal(a.final.u, c.final.u)
    assert a.final.k == spec.n_steps
    np.testing.assert_array_equal(a.snapshots[0.0], initial_field(disc, spec))
    np.testing.assert_array_equal(a.snapshots[1.0], a.final.u)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10.0))
def test_linear_in_data(seed, scale):
    cloud = PointCloud(np.linspace(0, 1, 7)[:, None], np.array([1, 0, 0, 0, 0, 0, 1], bool))
    disc = discretize(cloud, 2)
    f = lambda x, t: np.sin(3 * x[:, 0]) + t
    inc = draw_increments(realization_rng(seed, 0), 0.01, 20, 7)[None]
    one = ProblemSpec(0.1, 0.5, lambda x: f(x, 0), f, 0.2, 0.01)
    two = ProblemSpec(0.1, 0.5, lambda x: scale * f(x, 0), lambda x, t: scale * f(x, t), 0.2, 0.01)
    u1 = integrate(disc, one, inc)
    u2 = integrate(disc, two, inc)
    np.testing.assert_allclose(u2, scale * u1, rtol=1e-12, atol=1e-14)


def test_stability_refusal(grid_h01):
    spec = const_spec(1.0, rho=0.01, dt=1.0)
    with pytest.raises(StabilityError) as info:
        run_realization(grid_h01, spec, 0)
    assert info.value.report.product == pytest.approx(2.0)


def test_overflow_reports_step(grid_h01):
    spec = ProblemSpec(0.01, 0.0, lambda x: 1e307 * np.cos(10 * np.pi * x[:, 0]),
                       lambda x, t: np.zeros(len(x)), 1.0, 1.0)
    with pytest.raises(SimulationOverflowError) as info:
        run_realization(grid_h01, spec, 0, force=True)
    assert info.value.step == 1 and info.value.report is not None


def test_unstable_growth(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[2], 4)
    dt = 2.0 / (0.01 * disc.max_theta_c)
    spec = AnalyticSolution("diffusion1d", 0.01).problem_spec(0.1, math.floor(1 / dt) * dt, dt)
    try:
        hist = run_realization(disc, spec, 0, record=True, force=True).history
    except SimulationOverflowError:
        return
    sup = np.abs(hist).max(axis=1)
    assert sup.max() > 10 * sup[0]


def test_per_node_noise_runs(cloud_1d_levels):
    disc = discretize(cloud_1d_levels[0], 4)
    spec = AnalyticSolution("diffusion1d", 0.005).problem_spec(0.1, 1.0, auto_dt(0.005, disc, 1.0))
    r = run_realization(disc, spec, 0, noise="per-node")
    assert np.all(np.isfinite(r.final.u))
