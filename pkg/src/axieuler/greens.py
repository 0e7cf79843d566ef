"""Green's function of the meridian operator on the unit ball and its kernels.

With target x = (rb, zb) and source y = (r, z),

    G(x, y) = sqrt(r rb) / (2 pi) * [F(s) - F(s*)],
    s  = ((r  - rb)^2 + (z  - zb)^2) / (r  rb),
    s* = ((r* - rb)^2 + (z* - zb)^2) / (r* rb),   (r*, z*) = y / |y|^2.

The velocity kernels are K = -(r/rb) dG/dzb and J = (r/rb) dG/drb, so that
u^r(x) = int K w dr dz and u^z(x) = int J w dr dz.  For data odd in z the
integral over the upper half-disk uses K(x, y) - K(x, y~) with
y~ = (r, -z), which equals reflecting the target.

All scalar kernels are numba functions; the public functions accept
`PointRZ` instances or ``(r, z)`` pairs of broadcastable arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .specfun import f01, f012

__all__ = [
    "PointRZ",
    "KernelEval",
    "SingularityError",
    "image_point",
    "inversion_identities_check",
    "greens_g",
    "corrector_h",
    "kernel_k",
    "kernel_j",
    "kernel_gradients",
    "symmetrized_kernel",
    "hessian_g_over_rb",
]

COINCIDENCE_S = 1e-26
_INV2PI = 1.0 / (2.0 * math.pi)


class SingularityError(ValueError):
    """Target and source coincide (or the source is the origin for images)."""


class PointRZ(NamedTuple):
    """A point of the meridian half-plane, r >= 0."""

    r: float
    z: float

    @classmethod
    def checked(cls, r: float, z: float, in_ball: bool = False) -> "PointRZ":
        if not r >= 0:
            raise ValueError(f"r must be nonnegative, got {r}")
        if in_ball and r * r + z * z > 1.0 + 1e-12:
            raise ValueError(f"({r}, {z}) lies outside the unit ball")
        return cls(float(r), float(z))


@dataclass(frozen=True)
class KernelEval:
    """Green's function, velocity kernels and their target gradients."""

    g: float
    k: float
    j: float
    grad_k: tuple[float, float]
    grad_j: tuple[float, float]


# ---------------------------------------------------------------------------
# numba scalar kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _term1(rb, zb, a, b, c, p):
    """p F(S) and its first target derivatives, S = |(a,b)-x|^2/(c rb)."""
    da = a - rb
    db = b - zb
    crb = c * rb
    s = (da * da + db * db) / crb
    if s < COINCIDENCE_S:
        raise ValueError("coincident target and source")
    f0, f1 = f01(s)
    s_r = -2.0 * da / crb - s / rb
    s_z = -2.0 * db / crb
    dp = p / (2.0 * rb)
    g = p * f0
    g_r = dp * f0 + p * f1 * s_r
    g_z = p * f1 * s_z
    return g, g_r, g_z


@numba.njit(cache=True)
def _term2(rb, zb, a, b, c, p):
    """As `_term1` plus the second derivatives (rr, rz, zz)."""
    da = a - rb
    db = b - zb
    crb = c * rb
    s = (da * da + db * db) / crb
    if s < COINCIDENCE_S:
        raise ValueError("coincident target and source")
    f0, f1, f2 = f012(s)
    s_r = -2.0 * da / crb - s / rb
    s_z = -2.0 * db / crb
    s_rr = 2.0 / crb + 2.0 * da / (crb * rb) - s_r / rb + s / (rb * rb)
    s_rz = -s_z / rb
    s_zz = 2.0 / crb
    dp = p / (2.0 * rb)
    ddp = -p / (4.0 * rb * rb)
    g = p * f0
    g_r = dp * f0 + p * f1 * s_r
    g_z = p * f1 * s_z
    g_rr = ddp * f0 + 2.0 * dp * f1 * s_r + p * (f2 * s_r * s_r + f1 * s_rr)
    g_rz = dp * f1 * s_z + p * (f2 * s_r * s_z + f1 * s_rz)
    g_zz = p * (f2 * s_z * s_z + f1 * s_zz)
    return g, g_r, g_z, g_rr, g_rz, g_zz


@numba.njit(cache=True)
def g_derivs1(rb, zb, r, z):
    """G and (dG/drb, dG/dzb) for rb > 0, r > 0."""
    p = math.sqrt(r * rb) * _INV2PI
    g, g_r, g_z = _term1(rb, zb, r, z, r, p)
    q = r * r + z * z
    rs = r / q
    zs = z / q
    h, h_r, h_z = _term1(rb, zb, rs, zs, rs, p)
    return g - h, g_r - h_r, g_z - h_z


@numba.njit(cache=True)
def g_derivs2(rb, zb, r, z):
    """G with first and second target derivatives (g, r, z, rr, rz, zz)."""
    p = math.sqrt(r * rb) * _INV2PI
    a = _term2(rb, zb, r, z, r, p)
    q = r * r + z * z
    rs = r / q
    zs = z / q
    b = _term2(rb, zb, rs, zs, rs, p)
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2],
            a[3] - b[3], a[4] - b[4], a[5] - b[5])


@numba.njit(cache=True)
def axis_j(zb, r, z):
    """Limit of J(x, y) as rb -> 0 (K vanishes there)."""
    dz = z - zb
    d2 = r * r + dz * dz
    q = r * r + z * z
    rs = r / q
    dzs = z / q - zb
    d2s = rs * rs + dzs * dzs
    return 0.5 * r * r * r * (1.0 / (d2 * math.sqrt(d2))
                              - 1.0 / (q * math.sqrt(q) * d2s * math.sqrt(d2s)))


@numba.njit(cache=True)
def kj(rb, zb, r, z):
    """(K, J) for one target/source pair; rb = 0 uses the axis limit."""
    if r <= 0.0:
        return 0.0, 0.0
    if rb <= 0.0:
        return 0.0, axis_j(zb, r, z)
    _, g_r, g_z = g_derivs1(rb, zb, r, z)
    f = r / rb
    return -f * g_z, f * g_r


@numba.njit(cache=True)
def kj_sym(rb, zb, r, z):
    """(K, J) of the odd-in-z symmetrization, source in the upper half."""
    k1, j1 = kj(rb, zb, r, z)
    k2, j2 = kj(rb, zb, r, -z)
    return k1 - k2, j1 - j2


@numba.njit(cache=True)
def kj_grad(rb, zb, r, z):
    """(dK/drb, dK/dzb, dJ/drb, dJ/dzb) for rb > 0."""
    if r <= 0.0:
        return 0.0, 0.0, 0.0, 0.0
    _, g_r, g_z, g_rr, g_rz, g_zz = g_derivs2(rb, zb, r, z)
    f = r / rb
    dk_r = -r * (g_rz / rb - g_z / (rb * rb))
    dk_z = -f * g_zz
    dj_r = r * (g_rr / rb - g_r / (rb * rb))
    dj_z = f * g_rz
    return dk_r, dk_z, dj_r, dj_z


@numba.njit(cache=True)
def psi_kernel(rb, zb, r, z):
    """G(x, y) * r, the stream-function kernel against w."""
    if r <= 0.0 or rb <= 0.0:
        return 0.0
    p = math.sqrt(r * rb) * _INV2PI
    g = p * f01(((r - rb) ** 2 + (z - zb) ** 2) / (r * rb))[0]
    q = r * r + z * z
    rs = r / q
    zs = z / q
    h = p * f01(((rs - rb) ** 2 + (zs - zb) ** 2) / (rs * rb))[0]
    return (g - h) * r


# ---------------------------------------------------------------------------
# Public vectorized API
# ---------------------------------------------------------------------------

def _split(p):
    if isinstance(p, PointRZ):
        return np.asarray(p.r, float), np.asarray(p.z, float)
    r, z = p
    return np.asarray(r, float), np.asarray(z, float)


def _pairs(x, y):
    rb, zb = _split(x)
    r, z = _split(y)
    rb, zb, r, z = np.broadcast_arrays(rb, zb, r, z)
    if np.any(rb < 0) or np.any(r < 0):
        raise ValueError("r coordinates must be nonnegative")
    shape = rb.shape
    flat = [np.ascontiguousarray(a, dtype=float).ravel() for a in (rb, zb, r, z)]
    both = (flat[0] > 0) & (flat[2] > 0)
    s = np.full(flat[0].shape, np.inf)
    s[both] = ((flat[2][both] - flat[0][both]) ** 2
               + (flat[3][both] - flat[1][both]) ** 2) / (flat[0][both] * flat[2][both])
    if np.any(s < COINCIDENCE_S):
        raise SingularityError("target and source coincide")
    return shape, flat


def _shape_out(shape, *arrays):
    out = tuple(a.reshape(shape) if shape else float(a[0]) for a in arrays)
    return out if len(out) > 1 else out[0]


def image_point(y):
    """Sphere inversion y -> y / |y|^2.

    Parameters
    ----------
    y : PointRZ or (r, z) arrays

    Returns
    -------
    PointRZ
        With array fields when given arrays.

    Raises
    ------
    SingularityError
        If any point is the origin.
    """
    r, z = _split(y)
    q = r * r + z * z
    if np.any(q == 0):
        raise SingularityError("the origin has no finite image")
    return PointRZ(r / q, z / q) if np.ndim(q) else PointRZ(float(r / q), float(z / q))


def inversion_identities_check(y):
    """Residuals of the three inversion identities about e1 = (1, 0).

    Returns
    -------
    tuple of three floats or arrays
        ``|y*-e1|^2 - |y-e1|^2/|y|^2``,
        ``z*/|y*-e1|^2 - z/|y-e1|^2`` and
        ``(r*-1)/|y*-e1|^2 + 1 + (r-1)/|y-e1|^2``.
    """
    r, z = _split(y)
    rs, zs = image_point((r, z))
    q = r * r + z * z
    ds = (rs - 1.0) ** 2 + zs ** 2
    d = (r - 1.0) ** 2 + z ** 2
    if np.any(d == 0):
        raise SingularityError("identities are singular at e1")
    return (ds - d / q, zs / ds - z / d, (rs - 1.0) / ds + 1.0 + (r - 1.0) / d)


@numba.njit(cache=True)
def _greens_loop(rb, zb, r, z, out):
    for i in range(rb.shape[0]):
        if rb[i] <= 0.0 or r[i] <= 0.0:
            out[i] = 0.0
        else:
            out[i] = g_derivs1(rb[i], zb[i], r[i], z[i])[0]


@numba.njit(cache=True)
def _corrector_loop(rb, zb, r, z, out):
    for i in range(rb.shape[0]):
        if rb[i] <= 0.0 or r[i] <= 0.0:
            out[i] = 0.0
            continue
        p = math.sqrt(r[i] * rb[i]) * _INV2PI
        q = r[i] * r[i] + z[i] * z[i]
        rs = r[i] / q
        zs = z[i] / q
        out[i] = -p * f01(((rs - rb[i]) ** 2 + (zs - zb[i]) ** 2) / (rs * rb[i]))[0]


@numba.njit(cache=True)
def _kj_loop(rb, zb, r, z, sym, k, j):
    for i in range(rb.shape[0]):
        if sym:
            k[i], j[i] = kj_sym(rb[i], zb[i], r[i], z[i])
        else:
            k[i], j[i] = kj(rb[i], zb[i], r[i], z[i])


@numba.njit(cache=True)
def _grad_loop(rb, zb, r, z, out):
    for i in range(rb.shape[0]):
        if rb[i] <= 0.0 or r[i] <= 0.0:
            for c in range(9):
                out[c, i] = 0.0
            continue
        g, g_r, g_z, g_rr, g_rz, g_zz = g_derivs2(rb[i], zb[i], r[i], z[i])
        dk_r, dk_z, dj_r, dj_z = kj_grad(rb[i], zb[i], r[i], z[i])
        f = r[i] / rb[i]
        out[0, i] = g
        out[1, i] = -f * g_z
        out[2, i] = f * g_r
        out[3, i] = dk_r
        out[4, i] = dk_z
        out[5, i] = dj_r
        out[6, i] = dj_z
        out[7, i] = g_r
        out[8, i] = g_z


def greens_g(x, y):
    """Green's function G(x, y) of the ball.

    Parameters
    ----------
    x : PointRZ or (rb, zb) arrays
        Target(s).
    y : PointRZ or (r, z) arrays
        Source(s).

    Returns
    -------
    float or ndarray
        Zero where ``rb = 0`` or ``r = 0``.

    Raises
    ------
    SingularityError
        If a target coincides with its source.
    """
    shape, (rb, zb, r, z) = _pairs(x, y)
    out = np.empty_like(rb)
    _greens_loop(rb, zb, r, z, out)
    return _shape_out(shape, out)


def corrector_h(x, y):
    """Regular part H(x, y) = -sqrt(r rb)/(2 pi) F(s*) of the Green's function."""
    shape, (rb, zb, r, z) = _pairs(x, y)
    out = np.empty_like(rb)
    _corrector_loop(rb, zb, r, z, out)
    return _shape_out(shape, out)


def kernel_k(x, y):
    """Radial velocity kernel K = -(r/rb) dG/dzb (zero on the axis rb = 0)."""
    shape, (rb, zb, r, z) = _pairs(x, y)
    k = np.empty_like(rb)
    j = np.empty_like(rb)
    _kj_loop(rb, zb, r, z, False, k, j)
    return _shape_out(shape, k)


def kernel_j(x, y):
    """Axial velocity kernel J = (r/rb) dG/drb.

    At ``rb = 0`` the finite axis limit is returned.
    """
    shape, (rb, zb, r, z) = _pairs(x, y)
    k = np.empty_like(rb)
    j = np.empty_like(rb)
    _kj_loop(rb, zb, r, z, False, k, j)
    return _shape_out(shape, j)


def symmetrized_kernel(x, y):
    """(K_sym, J_sym) for odd-in-z data with sources in the upper half-disk.

    ``K_sym(x, y) = K(x, y) - K(x, y~)`` with ``y~ = (r, -z)``, likewise for
    J.  Integrating against w over the upper half equals integrating the
    plain kernels against the odd extension of w over the whole disk.
    """
    shape, (rb, zb, r, z) = _pairs(x, y)
    if np.any((rb > 0) & (r > 0) & ((rb - r) ** 2 + (zb + z) ** 2 < COINCIDENCE_S * rb * r)):
        raise SingularityError("target coincides with a reflected source")
    k = np.empty_like(rb)
    j = np.empty_like(rb)
    _kj_loop(rb, zb, r, z, True, k, j)
    return _shape_out(shape, k, j)


def kernel_gradients(x, y):
    """Green's function, kernels and target gradients of K and J.

    Returns
    -------
    KernelEval
        Scalar fields for scalar input, arrays otherwise.
    """
    shape, (rb, zb, r, z) = _pairs(x, y)
    if np.any(rb <= 0):
        raise ValueError("kernel gradients need rb > 0")
    out = np.empty((9, rb.size))
    _grad_loop(rb, zb, r, z, out)
    v = [out[c].reshape(shape) if shape else float(out[c, 0]) for c in range(9)]
    return KernelEval(g=v[0], k=v[1], j=v[2], grad_k=(v[3], v[4]), grad_j=(v[5], v[6]))


@numba.njit(cache=True)
def _hess_loop(rb, zb, r, z, out):
    for i in range(rb.shape[0]):
        g, g_r, g_z, g_rr, g_rz, g_zz = g_derivs2(rb[i], zb[i], r[i], z[i])
        x = rb[i]
        out[0, i] = g_rr / x - 2.0 * g_r / (x * x) + 2.0 * g / (x * x * x)
        out[1, i] = g_rz / x - g_z / (x * x)
        out[2, i] = g_zz / x


def hessian_g_over_rb(x, y):
    """Second target derivatives of G/rb as ``(rr, rz, zz)``."""
    shape, (rb, zb, r, z) = _pairs(x, y)
    if np.any(rb <= 0) or np.any(r <= 0):
        raise ValueError("the Hessian needs rb > 0 and r > 0")
    out = np.empty((3, rb.size))
    _hess_loop(rb, zb, r, z, out)
    return _shape_out(shape, out[0], out[1], out[2])
