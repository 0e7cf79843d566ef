import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from axieuler.greens import (PointRZ, SingularityError, corrector_h, greens_g,
                             hessian_g_over_rb, image_point, inversion_identities_check,
                             kernel_gradients, kernel_j, kernel_k, symmetrized_kernel)

# G, K = -(r/rb) dG/dzb, J = (r/rb) dG/drb from 30-digit mpmath quadrature of
# the defining F integral, composed with the image formula, derivatives by
# mpmath numerical differentiation.
GOLDEN = [
    ((0.5, 0.1), (0.4, -0.2),
     0.034576683405076310825, 0.11744524964533518479, 0.0053025040173591360591),
    ((0.3, 0.6), (0.7, 0.2),
     0.0085776791528114177994, 0.088705285066731829504, 0.12253144849840552137),
    ((0.8, -0.1), (0.2, 0.5),
     0.0018124096404567266866, -0.0014661599936714093006, -0.0020098811922502751404),
]


def interior_point():
    return st.tuples(st.floats(0.05, 0.95), st.floats(-0.95, 0.95)).filter(
        lambda p: p[0] ** 2 + p[1] ** 2 < 0.9)


def random_disk(rng, n, rmax=0.95):
    rad = np.sqrt(rng.uniform(0.01, rmax ** 2, n))
    th = rng.uniform(-np.pi / 2, np.pi / 2, n)
    return rad * np.cos(th), rad * np.sin(th)


@pytest.mark.parametrize("x, y, g, k, j", GOLDEN)
def test_golden_values(x, y, g, k, j):
    assert greens_g(x, y) == pytest.approx(g, rel=1e-12)
    assert kernel_k(x, y) == pytest.approx(k, rel=1e-11)
    assert kernel_j(x, y) == pytest.approx(j, rel=1e-11)


def test_point_rz_and_image():
    p = PointRZ.checked(0.6, 0.8, in_ball=True)
    assert image_point(p) == pytest.approx((0.6, 0.8))
    assert image_point((0.5, 0.0)) == pytest.approx((2.0, 0.0))
    with pytest.raises(ValueError):
        PointRZ.checked(-0.1, 0.0)
    with pytest.raises(ValueError):
        PointRZ.checked(0.9, 0.9, in_ball=True)
    with pytest.raises(SingularityError):
        image_point((0.0, 0.0))


def test_boundary_vanishing(rng):
    ang = rng.uniform(-np.pi / 2, np.pi / 2, 200)
    bd = (np.cos(ang), np.sin(ang))
    inner = random_disk(rng, 200, 0.9)
    assert np.max(np.abs(greens_g(inner, bd))) <= 1e-12
    assert np.max(np.abs(greens_g(bd, inner))) <= 1e-10
    assert greens_g((0.3, 0.2), (0.6, 0.8)) == pytest.approx(0.0, abs=1e-12)


def test_kernels_vanish_as_source_reaches_boundary():
    x = (0.4, 0.1)
    vals = [abs(kernel_k(x, (t * 0.6, t * 0.8))) + abs(kernel_j(x, (t * 0.6, t * 0.8)))
            for t in (0.9, 0.99, 0.999)]
    assert vals[2] < vals[1] < vals[0]
    assert vals[2] < 1e-3


def test_inversion_identities(rng):
    res = inversion_identities_check(random_disk(rng, 1000))
    assert max(float(np.max(np.abs(v))) for v in res) <= 1e-10
    with pytest.raises(SingularityError):
        inversion_identities_check((1.0, 0.0))


@given(interior_point(), interior_point())
def test_symmetry_in_target_and_source(x, y):
    if math.dist(x, y) < 1e-3:
        return
    assert greens_g(x, y) == pytest.approx(greens_g(y, x), rel=1e-10, abs=1e-14)


@given(interior_point(), interior_point())
def test_velocity_kernels_match_differences(x, y):
    if math.dist(x, y) < 0.1:
        return
    (rb, zb), (r, _) = x, y
    h = 1e-6
    k_fd = -(r / rb) * (greens_g((rb, zb + h), y) - greens_g((rb, zb - h), y)) / (2 * h)
    j_fd = (r / rb) * (greens_g((rb + h, zb), y) - greens_g((rb - h, zb), y)) / (2 * h)
    assert abs(kernel_k(x, y) - k_fd) <= 1e-6
    assert abs(kernel_j(x, y) - j_fd) <= 1e-6


def test_kernel_gradients_match_differences(rng):
    rb, zb = random_disk(rng, 300, 0.9)
    r, z = random_disk(rng, 300, 0.9)
    keep = (np.hypot(rb - r, zb - z) > 0.2) & (rb > 0.05) & (r > 0.05)
    rb, zb, r, z = rb[keep], zb[keep], r[keep], z[keep]
    ev = kernel_gradients((rb, zb), (r, z))
    h = 1e-5
    pairs = [(ev.grad_k[0], kernel_k, (h, 0)), (ev.grad_k[1], kernel_k, (0, h)),
             (ev.grad_j[0], kernel_j, (h, 0)), (ev.grad_j[1], kernel_j, (0, h))]
    for an, fn, (dr, dz) in pairs:
        fd = (fn((rb + dr, zb + dz), (r, z)) - fn((rb - dr, zb - dz), (r, z))) / (2 * h)
        scale = np.maximum(np.abs(an), 1e-3 * np.max(np.abs(an)))
        assert np.max(np.abs(an - fd) / scale) <= 1e-5
    assert np.allclose(ev.g, greens_g((rb, zb), (r, z)), rtol=1e-14)
    assert np.allclose(ev.k, kernel_k((rb, zb), (r, z)), rtol=1e-14)


def test_same_height_gradient_reduces():
    # with z = zb the (z - zb) terms drop; compare with a direct difference
    x, y = (0.4, 0.25), (0.7, 0.25)
    ev = kernel_gradients(x, y)
    h = 1e-5
    fd = (kernel_k((0.4, 0.25 + h), y) - kernel_k((0.4, 0.25 - h), y)) / (2 * h)
    assert ev.grad_k[1] == pytest.approx(fd, rel=1e-6)


def test_hessian_matches_differences():
    x, y = (0.45, 0.2), (0.6, -0.3)

    def g_over(p):
        return greens_g(p, y) / p[0]

    h = 1e-4
    rr = (g_over((0.45 + h, 0.2)) - 2 * g_over(x) + g_over((0.45 - h, 0.2))) / h ** 2
    zz = (g_over((0.45, 0.2 + h)) - 2 * g_over(x) + g_over((0.45, 0.2 - h))) / h ** 2
    rz = (g_over((0.45 + h, 0.2 + h)) - g_over((0.45 + h, 0.2 - h))
          - g_over((0.45 - h, 0.2 + h)) + g_over((0.45 - h, 0.2 - h))) / (4 * h * h)
    an = hessian_g_over_rb(x, y)
    assert an == pytest.approx((rr, rz, zz), rel=1e-5)


def test_hessian_bound_constant_finite(rng):
    rb, zb = random_disk(rng, 400, 0.9)
    r, z = random_disk(rng, 400, 0.9)
    keep = (np.hypot(rb - r, zb - z) > 1e-3) & (rb > 1e-3) & (r > 1e-3)
    rb, zb, r, z = rb[keep], zb[keep], r[keep], z[keep]
    hrr, hrz, hzz = hessian_g_over_rb((rb, zb), (r, z))
    mag = np.sqrt(hrr ** 2 + 2 * hrz ** 2 + hzz ** 2)
    d = np.hypot(rb - r, zb - z)
    c = np.max(mag / np.minimum(r / d ** 3, np.sqrt(r / rb) / d ** 2))
    assert np.isfinite(c) and c < 10


def _corrector_residual(h, x=(0.5, 0.1), y=(0.4, -0.2)):
    r, z = y

    def H(dr=0.0, dz=0.0):
        return corrector_h(x, (r + dr, z + dz))

    hrr = (H(h) - 2 * H() + H(-h)) / h ** 2
    hzz = (H(dz=h) - 2 * H() + H(dz=-h)) / h ** 2
    hr = (H(h) - H(-h)) / (2 * h)
    return -hzz / r + hr / r ** 2 - hrr / r


def test_corrector_equation_second_order():
    res = [abs(_corrector_residual(h)) for h in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)
    assert res[-1] < 1e-6


def test_corrector_matches_image_formula():
    x, y = (0.5, 0.1), (0.4, -0.2)
    g_free = greens_g(x, y) - corrector_h(x, y)
    # free-space part is sqrt(r rb)/(2 pi) F(s); H is what the image removes
    assert corrector_h(x, y) < 0 < g_free


def test_symmetrized_kernel_properties():
    x, y = (0.4, 0.3), (0.6, 0.2)
    ks, js = symmetrized_kernel(x, y)
    ref = (0.4, -0.3)
    assert ks == pytest.approx(kernel_k(x, y) - kernel_k(x, (0.6, -0.2)), rel=1e-12)
    assert js == pytest.approx(kernel_j(x, y) - kernel_j(x, (0.6, -0.2)), rel=1e-12)
    # reflecting the target instead of the source
    assert ks == pytest.approx(kernel_k(x, y) + kernel_k(ref, y), rel=1e-12)
    assert js == pytest.approx(kernel_j(x, y) - kernel_j(ref, y), rel=1e-12)
    # sources on the symmetry plane cancel exactly
    assert symmetrized_kernel(x, (0.6, 0.0)) == (0.0, 0.0)
    # targets on the plane: the axial kernel vanishes, the radial one doubles
    ks0, js0 = symmetrized_kernel((0.4, 0.0), y)
    assert js0 == 0.0
    assert ks0 == pytest.approx(2 * kernel_k((0.4, 0.0), y), rel=1e-12)


def test_axis_targets():
    y = (0.5, 0.3)
    assert kernel_k((0.0, 0.1), y) == 0.0
    assert greens_g((0.0, 0.1), y) == 0.0
    assert kernel_j((0.0, 0.1), y) == pytest.approx(kernel_j((1e-6, 0.1), y), rel=1e-5)


def test_errors():
    with pytest.raises(SingularityError):
        greens_g((0.3, 0.2), (0.3, 0.2))
    with pytest.raises(SingularityError):
        symmetrized_kernel((0.3, 0.2), (0.3, -0.2))
    with pytest.raises(ValueError):
        kernel_k((-0.1, 0.0), (0.3, 0.2))
    with pytest.raises(ValueError):
        kernel_gradients((0.0, 0.1), (0.3, 0.2))


def test_broadcasting():
    r = np.linspace(0.1, 0.8, 6).reshape(2, 3)
    out = greens_g((r, 0.1), PointRZ(0.5, -0.3))
    assert out.shape == (2, 3)
    assert out[1, 2] == greens_g((r[1, 2], 0.1), (0.5, -0.3))
