import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axieuler.biot_savart import (VelocityOperator, VelocityQuadrature, VelocitySample,
                                  hill_velocity, hill_velocity_gradient, stream_function_at,
                                  velocity_at, velocity_field, velocity_gradient_at,
                                  velocity_rows)
from axieuler.grid import PolarGrid, ScalarFieldRZ, Symmetry

# u(x) at x = (0.5, 0.2) for w = z exp(-2((r-0.4)^2 + z^2)) over the whole
# disk, from scipy dblquad of the analytic kernels against the analytic w
# (tolerance 1e-10, integration split at the target).
ORACLE_X = (0.5, 0.2)
ORACLE_U = (-0.013964290831366091, 0.008633714830548693)


def w_odd(r, z):
    return z * np.exp(-2 * ((r - 0.4) ** 2 + z * z))


@pytest.fixture(scope="module")
def full16():
    g = PolarGrid(16, 16, Symmetry.NONE)
    return g, ScalarFieldRZ.from_function(g, lambda r, z: np.ones_like(r))


def test_quadrature_spec():
    q = VelocityQuadrature()
    assert q.orders() == (4, 2, 8)
    assert VelocityQuadrature(refine=True).orders() == (8, 4, 16)
    assert q.as_dict()["far_ratio"] == 4.0
    with pytest.raises(ValueError):
        VelocityQuadrature(gauss_order=0)
    with pytest.raises(ValueError):
        VelocityQuadrature(near_ratio=0.0)


def test_hill_vortex_is_divergence_free_and_tangent():
    r, z = 0.3, -0.4
    grad = hill_velocity_gradient(r, z)
    ur, uz = hill_velocity(r, z)
    # weighted divergence d(r ur)/dr + d(r uz)/dz = 0
    assert ur + r * grad[0, 0] + r * grad[1, 1] == pytest.approx(0.0, abs=1e-15)
    th = np.linspace(-1.5, 1.5, 7)
    ur, uz = hill_velocity(np.cos(th), np.sin(th))
    assert np.allclose(ur * np.cos(th) + uz * np.sin(th), 0.0, atol=1e-15)


def test_constant_w_gives_hill_vortex(full16):
    _, w = full16
    pts = [(0.3, 0.2), (0.7, -0.5), (0.05, 0.9), (0.95, 0.0), (0.5, 0.5)]
    ur, uz = velocity_field(pts, w)
    hr, hz = hill_velocity(*np.array(pts).T)
    assert np.max(np.hypot(ur - hr, uz - hz)) < 1e-6


def test_converges_to_quadrature_oracle():
    errs = []
    for n in (32, 64):
        g = PolarGrid(n, n, Symmetry.NONE)
        u = velocity_at(ORACLE_X, ScalarFieldRZ.from_function(g, w_odd))
        errs.append(math.hypot(u.ur - ORACLE_U[0], u.uz - ORACLE_U[1]))
    assert errs[1] < 2e-5
    assert 3.0 < errs[0] / errs[1] < 5.5


def test_odd_grid_matches_full_grid():
    odd = PolarGrid(33, 33, Symmetry.ODD)
    full = PolarGrid(33, 65, Symmetry.NONE)
    # the odd grid's nodes are the upper half of the full grid's nodes
    assert np.allclose(full.phi[32:], odd.phi, atol=1e-15)
    pts = [(0.45, 0.3), (0.2, 0.7), (0.8, 0.1)]
    a = velocity_field(pts, ScalarFieldRZ.from_function(odd, w_odd))
    b = velocity_field(pts, ScalarFieldRZ.from_function(full, w_odd))
    assert np.max(np.abs(np.array(a) - np.array(b))) < 1e-7


def test_exact_axis_and_plane_conditions():
    g = PolarGrid(12, 12, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    assert velocity_at((0.0, 0.3), w).ur == 0.0
    assert velocity_at((0.4, 0.0), w).uz == 0.0
    u = VelocityOperator(g).apply(w)
    assert np.all(u.ur[:, -1] == 0.0)
    assert np.all(u.uz[:, 0] == 0.0)


def test_zero_field():
    g = PolarGrid(8, 8)
    z = ScalarFieldRZ.zeros(g)
    assert velocity_at((0.3, 0.2), z) == VelocitySample(0.0, 0.0)
    assert np.all(velocity_gradient_at((0.3, 0.2), z) == 0.0)


def test_velocity_from_stream_function():
    g = PolarGrid(24, 24, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    q = VelocityQuadrature(refine=True)
    x = (0.5, 0.3)
    h = 1e-3

    def psi(r, z):
        return stream_function_at((r, z), w, q)

    psi_z = (psi(0.5, 0.3 + h) - psi(0.5, 0.3 - h)) / (2 * h)
    psi_r = (psi(0.5 + h, 0.3) - psi(0.5 - h, 0.3)) / (2 * h)
    u = velocity_at(x, w, q)
    assert u.ur == pytest.approx(-psi_z / 0.5, rel=1e-5)
    assert u.uz == pytest.approx(psi_r / 0.5, rel=1e-5)
    assert stream_function_at((0.0, 0.2), w) == 0.0


def test_stream_function_vanishes_on_boundary():
    g = PolarGrid(16, 16, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    assert abs(stream_function_at((0.6, 0.8), w)) < 1e-12


def test_velocity_tangent_on_boundary():
    g = PolarGrid(24, 24, Symmetry.NONE)
    w = ScalarFieldRZ.from_function(g, w_odd)
    th = np.linspace(-1.4, 1.4, 9)
    ur, uz = velocity_field((np.cos(th), np.sin(th)), w)
    assert np.max(np.abs(ur * np.cos(th) + uz * np.sin(th))) < 1e-3 * w.sup_norm


def test_gradient_constant_field_is_hill(full16):
    _, w = full16
    x = (0.4, 0.3)
    assert np.allclose(velocity_gradient_at(x, w), hill_velocity_gradient(*x), atol=1e-6)


def test_gradient_matches_difference_of_velocity():
    g = PolarGrid(24, 24, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    x = (0.45, 0.35)
    h = 1e-3
    fd = np.empty((2, 2))
    for c, (dr, dz) in enumerate(((h, 0), (0, h))):
        up = velocity_at((x[0] + dr, x[1] + dz), w)
        dn = velocity_at((x[0] - dr, x[1] - dz), w)
        fd[0, c] = (up.ur - dn.ur) / (2 * h)
        fd[1, c] = (up.uz - dn.uz) / (2 * h)
    assert np.allclose(velocity_gradient_at(x, w), fd, atol=2e-3 * np.abs(fd).max())


def test_weighted_divergence_small():
    g = PolarGrid(24, 24, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    x = (0.45, 0.35)
    grad = velocity_gradient_at(x, w)
    ur = velocity_at(x, w).ur
    div = ur / x[0] + grad[0, 0] + grad[1, 1]
    assert abs(div) < 1e-3 * np.abs(grad).max()


def test_rows_and_operator_agree_with_direct_evaluation():
    g = PolarGrid(10, 10, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, w_odd)
    r, z = g.nodes
    ti = [(3, 4), (7, 2), (9, 5)]
    tr = np.array([r[i, j] for i, j in ti])
    tz = np.array([z[i, j] for i, j in ti])
    rows = velocity_rows((tr, tz), g)
    direct = velocity_field((tr, tz), w)
    assert np.allclose(rows @ w.values.ravel(), np.array(direct), rtol=1e-12, atol=1e-15)
    op = VelocityOperator(g, dtype=np.float64)
    u = op.apply(w)
    assert np.allclose([u.ur[i, j] for i, j in ti], direct[0], rtol=1e-12, atol=1e-15)
    assert op.nbytes == 2 * g.size ** 2 * 8
    op32 = VelocityOperator(g, dtype=np.float32)
    assert np.allclose(op32.apply(w).uz, u.uz, rtol=1e-5, atol=1e-8)


@settings(max_examples=15)
@given(st.floats(0.05, 0.95), st.floats(0.0, 1.4))
def test_linearity_and_odd_parity(rho, phi):
    g = PolarGrid(10, 10, Symmetry.ODD)
    a = ScalarFieldRZ.from_function(g, w_odd)
    b = ScalarFieldRZ.from_function(g, lambda r, z: z * (1 - r))
    x = (rho * math.cos(phi), rho * math.sin(phi))
    ua, ub = velocity_at(x, a), velocity_at(x, b)
    uab = velocity_at(x, a.with_values(2 * a.values - 3 * b.values))
    assert uab.ur == pytest.approx(2 * ua.ur - 3 * ub.ur, rel=1e-10, abs=1e-14)
    assert uab.uz == pytest.approx(2 * ua.uz - 3 * ub.uz, rel=1e-10, abs=1e-14)
    # odd data: psi is odd in z, so u^r is even and u^z odd
    below = velocity_at((x[0], -x[1]), a)
    assert below.ur == ua.ur
    assert below.uz == -ua.uz
    assert stream_function_at((x[0], -x[1]), a) == -stream_function_at(x, a)


def test_target_validation():
    g = PolarGrid(8, 8)
    w = ScalarFieldRZ.zeros(g)
    with pytest.raises(ValueError):
        velocity_at((0.9, 0.9), w)
    with pytest.raises(ValueError):
        velocity_at((-0.1, 0.0), w)
    with pytest.raises(ValueError):
        velocity_gradient_at((0.0, 0.3), ScalarFieldRZ.from_function(g, w_odd))
    with pytest.raises(TypeError):
        velocity_at((0.3, 0.1), w, quad={"gauss_order": 4})
