import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axieuler.biot_savart import hill_velocity
from axieuler.grid import PolarGrid, ScalarFieldRZ, Symmetry, VelocityField
from axieuler.transport import (CFLError, FixedVelocity, Integrator, NumericalFailure,
                                OperatorSolver, ProviderGapError, SimState, TimeStepSpec,
                                VelocityHistory, advect_step, cfl_number, integrate_trajectory,
                                simulate, stable_dt)


def hill_psi(r, z):
    return r * r * (1 - r * r - z * z) / 10.0


def hill_field(grid):
    r, z = grid.nodes
    ur, uz = hill_velocity(r, z)
    return VelocityField(grid, ur, uz)


@pytest.fixture(scope="module")
def full24():
    return PolarGrid(24, 24, Symmetry.NONE)


@pytest.fixture(scope="module")
def odd20():
    return PolarGrid(20, 20, Symmetry.ODD)


def bump_odd(r, z):
    return np.tanh(6 * z) * np.exp(-6 * (r - 0.5) ** 2)


def test_time_step_spec_validation():
    spec = TimeStepSpec(0.1, "RK4")
    assert spec.integrator is Integrator.RK4 and Integrator.RK4.order == 4
    for bad in (dict(dt=0.0), dict(dt=math.inf), dict(dt=0.1, cfl_limit=0.0),
                dict(dt=0.1, interpolation="spline")):
        with pytest.raises(ValueError):
            TimeStepSpec(**bad)
    with pytest.raises(ValueError):
        TimeStepSpec(0.1, "Euler")


def test_zero_field_only_advances_time(odd20):
    state = SimState.initial(ScalarFieldRZ.zeros(odd20))
    out = advect_step(state, TimeStepSpec(0.25))
    assert out.t == 0.25 and not np.any(out.w.values)


def test_hill_trajectories_conserve_stream_function():
    hist = VelocityHistory.steady(hill_field(PolarGrid(48, 48, Symmetry.NONE)))
    x0 = (0.5, 0.2)
    ts, rs, zs = integrate_trajectory(x0, (0.0, 3.0), hist, 0.05)
    assert ts[-1] == pytest.approx(3.0)
    psi = hill_psi(rs, zs)
    assert np.max(np.abs(psi - psi[0])) < 1e-5 * abs(psi[0])


def test_integrator_orders():
    hist = VelocityHistory.steady(hill_field(PolarGrid(64, 64, Symmetry.NONE)))

    def end(h, integ):
        _, rs, zs = integrate_trajectory((0.5, 0.2), (0.0, 2.0), hist, h, integ)
        return np.array([rs[-1], zs[-1]])

    ref = end(0.005, Integrator.RK4)
    for integ, lo in ((Integrator.RK2, 1.7), (Integrator.RK4, 3.5)):
        e1 = np.linalg.norm(end(0.4, integ) - ref)
        e2 = np.linalg.norm(end(0.2, integ) - ref)
        assert math.log2(e1 / e2) > lo


def test_backward_trajectory_returns():
    hist = VelocityHistory([0.0, 1.0], [hill_field(PolarGrid(32, 32, "None"))] * 2)
    _, rs, zs = integrate_trajectory((0.4, -0.3), (0.0, 1.0), hist, 0.01)
    _, rb, zb = integrate_trajectory((rs[-1], zs[-1]), (1.0, 0.0), hist, 0.01)
    assert (rb[-1], zb[-1]) == pytest.approx((0.4, -0.3), abs=1e-8)


def test_velocity_history_errors(full24):
    u = hill_field(full24)
    with pytest.raises(ValueError):
        VelocityHistory([0.0, 1.0], [u])
    with pytest.raises(ValueError):
        VelocityHistory([1.0, 0.0], [u, u])
    hist = VelocityHistory([0.0, 1.0], [u, u])
    with pytest.raises(ProviderGapError):
        integrate_trajectory((0.3, 0.1), (0.0, 2.0), hist, 0.1)
    ua, ub, th = hist.bracket(0.25)
    assert th == pytest.approx(0.25)


def test_steady_state_of_hill_flow(full24):
    # any function of the Hill stream function is transported unchanged
    w0 = ScalarFieldRZ.from_function(full24, lambda r, z: np.sin(40 * hill_psi(r, z)))
    solver = FixedVelocity(hill_field(full24))
    state = simulate(SimState.initial(w0), TimeStepSpec(0.1, cfl_limit=4), 1.0, solver)
    assert state.t == 1.0
    assert np.max(np.abs(state.w.values - w0.values)) < 0.02 * w0.sup_norm


def test_transport_matches_characteristics(full24):
    # w(x, T) = w0(X(0; x, T)) for a prescribed steady flow
    def w0f(r, z):
        return np.exp(-8 * ((r - 0.5) ** 2 + (z - 0.1) ** 2))

    u = hill_field(full24)
    w0 = ScalarFieldRZ.from_function(full24, w0f)
    T = 1.0
    state = simulate(SimState.initial(w0), TimeStepSpec(0.05, interpolation="cubic"), T,
                     FixedVelocity(u))
    hist = VelocityHistory.steady(u)
    r, z = full24.nodes
    errs = []
    for i, j in [(10, 8), (14, 12), (18, 15), (8, 4)]:
        _, rs, zs = integrate_trajectory((r[i, j], z[i, j]), (T, 0.0), hist, 0.01)
        errs.append(abs(state.w.values[i, j] - w0f(rs[-1], zs[-1])))
    assert max(errs) < 0.02


def test_cfl_error_and_stable_dt(odd20):
    w = ScalarFieldRZ.from_function(odd20, bump_odd)
    solver = OperatorSolver(odd20)
    u = solver(w)
    spec = TimeStepSpec(10.0, cfl_limit=2.0)
    dt = stable_dt(u, spec)
    assert cfl_number(u, dt) == pytest.approx(2.0)
    with pytest.raises(CFLError) as err:
        advect_step(SimState.initial(w), spec, solver=solver, u0=u)
    assert err.value.suggested_dt == pytest.approx(dt)


def test_self_induced_step_properties(odd20):
    w = ScalarFieldRZ.from_function(odd20, bump_odd)
    solver = OperatorSolver(odd20)
    seen = []
    state = simulate(SimState.initial(w, [(0.5, 0.3), (0.2, 0.6)]), TimeStepSpec(0.1), 0.5,
                     solver, observer=lambda s, u: seen.append(s.t))
    assert state.t == 0.5 and seen[0] == 0.0 and seen[-1] == 0.5
    assert np.all(np.diff(seen) > 0)
    assert state.w.sup_norm <= w.sup_norm
    assert np.all(state.w.values[:, 0] == 0.0)
    assert len(state.particles) == 2
    assert state.particles[0].initial == (0.5, 0.3)
    assert state.particles[0].current != (0.5, 0.3)


def test_particles_follow_trajectories(odd20):
    w = ScalarFieldRZ.from_function(odd20, bump_odd)
    solver = OperatorSolver(odd20)
    times, fields = [], []

    def obs(s, u):
        times.append(s.t)
        fields.append(u)

    state = simulate(SimState.initial(w, [(0.5, 0.3)]), TimeStepSpec(0.05), 0.4, solver,
                     observer=obs)
    hist = VelocityHistory(times, fields)
    _, rs, zs = integrate_trajectory((0.5, 0.3), (0.0, 0.4), hist, 0.01)
    p = state.particles[0].current
    assert math.hypot(p.r - rs[-1], p.z - zs[-1]) < 1e-3


def test_step_budget(odd20):
    w = ScalarFieldRZ.from_function(odd20, bump_odd)
    with pytest.raises(NumericalFailure):
        simulate(SimState.initial(w), TimeStepSpec(0.01), 1.0, OperatorSolver(odd20),
                 max_steps=3)


@settings(max_examples=10)
@given(st.floats(0.02, 0.3), st.sampled_from(["cubic_clipped", "linear"]))
def test_step_cannot_create_extrema(dt, method):
    g = PolarGrid(16, 16, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, lambda r, z: np.sign(z) * (r * r + z * z < 0.5))
    solver = OperatorSolver(g)
    state = advect_step(SimState.initial(w), TimeStepSpec(dt, cfl_limit=100,
                                                          interpolation=method), solver=solver)
    assert state.w.values.max() <= w.values.max() + 1e-15
    assert state.w.values.min() >= w.values.min() - 1e-15
