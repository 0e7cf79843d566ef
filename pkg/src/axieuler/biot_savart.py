"""Velocity, stream function and velocity gradient from a nodal w field.

The field is bilinear in (rho, phi) on every grid cell.  For a target x the
integral over each cell is evaluated with one of three rules:

* far cells (distance to every singular point at least ``far_ratio`` cell
  diameters): tensor Gauss with ``far_order`` points per direction;
* near cells: recursive quadtree subdivision toward the nearest singular
  point, then tensor Gauss with ``gauss_order`` points;
* the cell(s) containing x: split at x into sub-rectangles having x as a
  corner, each integrated with a Duffy transform that removes the 1/|x-y|
  singularity.

Singular points are x itself, its sphere image x* and, for odd data, the
reflections (rb, -zb) and their images.  Velocity gradients use the
subtraction w(y) - w(x) over the whole disk, with the constant-density
velocity known in closed form (Hill's spherical vortex).

Every integral is linear in the nodal values, so the routines assemble
weight rows; `VelocityOperator` stacks the rows of all grid nodes into dense
matrices and turns each subsequent solve into a matrix-vector product.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from .greens import kj, kj_grad, psi_kernel
from .grid import PolarGrid, ScalarFieldRZ, VelocityField

__all__ = [
    "VelocityQuadrature",
    "VelocitySample",
    "RefinementError",
    "velocity_at",
    "velocity_field",
    "stream_function_at",
    "velocity_gradient_at",
    "velocity_rows",
    "VelocityOperator",
    "hill_velocity",
    "hill_velocity_gradient",
]

MODE_VEL = 0
MODE_PSI = 1
MODE_GRAD = 2
_NCOMP = (2, 1, 4)


class RefinementError(RuntimeError):
    """The target sits too close to a cell for the subdivision depth."""


@dataclass(frozen=True)
class VelocityQuadrature:
    """Quadrature parameters for the Biot-Savart integrals.

    Attributes
    ----------
    gauss_order : int
        Gauss points per direction on near (subdivided) cells.
    far_order : int
        Gauss points per direction on far cells.
    duffy_order : int
        Gauss points per direction on each Duffy triangle.
    far_ratio, near_ratio : float
        Distance-to-diameter ratios separating far / near / refined cells.
    max_depth : int
        Maximum quadtree depth of the near-cell subdivision.
    refine : bool
        Double all three orders.
    """

    gauss_order: int = 4
    far_order: int = 2
    duffy_order: int = 8
    far_ratio: float = 4.0
    near_ratio: float = 1.0
    max_depth: int = 10
    refine: bool = False

    def __post_init__(self):
        for name in ("gauss_order", "far_order", "duffy_order", "max_depth"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (self.far_ratio > 0 and self.near_ratio > 0):
            raise ValueError("distance ratios must be positive")

    def orders(self) -> tuple[int, int, int]:
        m = 2 if self.refine else 1
        return m * self.gauss_order, m * self.far_order, m * self.duffy_order

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


DEFAULT_QUAD = VelocityQuadrature()


@dataclass(frozen=True)
class VelocitySample:
    ur: float
    uz: float


# ---------------------------------------------------------------------------
# Closed-form reference: constant w over the whole ball
# ---------------------------------------------------------------------------

def hill_velocity(r, z, c: float = 1.0):
    """Velocity of w = c on the unit ball (Hill's spherical vortex)."""
    r = np.asarray(r, float)
    z = np.asarray(z, float)
    return c * r * z / 5.0, c * (1.0 - 2.0 * r * r - z * z) / 5.0


def hill_velocity_gradient(r, z, c: float = 1.0):
    """Gradient [[dur/dr, dur/dz], [duz/dr, duz/dz]] of `hill_velocity`."""
    r = np.asarray(r, float)
    z = np.asarray(z, float)
    return np.array([[c * z / 5.0, c * r / 5.0], [-4.0 * c * r / 5.0, -2.0 * c * z / 5.0]])


# ---------------------------------------------------------------------------
# numba core
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _kernel(mode, sym, rb, zb, r, z, vals):
    """Kernel values at a source point; returns the number of components."""
    if mode == MODE_VEL:
        k1, j1 = kj(rb, zb, r, z)
        if sym:
            k2, j2 = kj(rb, zb, r, -z)
            k1 -= k2
            j1 -= j2
        vals[0] = k1
        vals[1] = j1
    elif mode == MODE_PSI:
        v = psi_kernel(rb, zb, r, z)
        if sym:
            v -= psi_kernel(rb, zb, r, -z)
        vals[0] = v
    else:
        a0, a1, a2, a3 = kj_grad(rb, zb, r, z)
        if sym:
            b0, b1, b2, b3 = kj_grad(rb, zb, r, -z)
            vals[0] = a0 - b0
            vals[1] = a1 - b1
            vals[2] = a2 - b2
            vals[3] = a3 - b3
            vals[4] = a0 + b0
            vals[5] = a1 + b1
            vals[6] = a2 + b2
            vals[7] = a3 + b3
        else:
            vals[0] = a0
            vals[1] = a1
            vals[2] = a2
            vals[3] = a3
            vals[4] = a0
            vals[5] = a1
            vals[6] = a2
            vals[7] = a3


@numba.njit(cache=True)
def _add_point(mode, sym, rb, zb, rho_i, drho, phi_j, dphi, alpha, beta,
               weight, node00, n_phi, ncomp, out, extra, vals):
    rho = rho_i + alpha * drho
    phi = phi_j + beta * dphi
    r = rho * math.cos(phi)
    if r < 0.0:
        r = 0.0
    z = rho * math.sin(phi)
    wgt = weight * rho * drho * dphi
    _kernel(mode, sym, rb, zb, r, z, vals)
    b00 = (1.0 - alpha) * (1.0 - beta) * wgt
    b10 = alpha * (1.0 - beta) * wgt
    b01 = (1.0 - alpha) * beta * wgt
    b11 = alpha * beta * wgt
    for c in range(ncomp):
        v = vals[c]
        out[c, node00] += v * b00
        out[c, node00 + n_phi] += v * b10
        out[c, node00 + 1] += v * b01
        out[c, node00 + n_phi + 1] += v * b11
    if mode == MODE_GRAD:
        for c in range(4):
            extra[c] += vals[4 + c] * wgt


@numba.njit(cache=True)
def _rect_geometry(rho_i, drho, phi_j, dphi, a0, a1, b0, b1):
    am = 0.5 * (a0 + a1)
    bm = 0.5 * (b0 + b1)
    rc = rho_i + am * drho
    pc = phi_j + bm * dphi
    cr = rc * math.cos(pc)
    cz = rc * math.sin(pc)
    # diameter from the two diagonals
    r0 = rho_i + a0 * drho
    r1 = rho_i + a1 * drho
    p0 = phi_j + b0 * dphi
    p1 = phi_j + b1 * dphi
    d1 = math.hypot(r1 * math.cos(p1) - r0 * math.cos(p0), r1 * math.sin(p1) - r0 * math.sin(p0))
    d2 = math.hypot(r1 * math.cos(p0) - r0 * math.cos(p1), r1 * math.sin(p0) - r0 * math.sin(p1))
    return cr, cz, max(d1, d2)


@numba.njit(cache=True)
def _nearest(cr, cz, sp_r, sp_z, nsp, skip_first):
    d = 1e300
    for k in range(1 if skip_first else 0, nsp):
        dd = math.hypot(cr - sp_r[k], cz - sp_z[k])
        if dd < d:
            d = dd
    return d


@numba.njit(cache=True)
def _process_cell(mode, sym, rb, zb, i, j, rho_i, drho, phi_j, dphi, node00, n_phi,
                  ncomp, contains, ax, bx, sp_r, sp_z, nsp,
                  gx, gw, dx, dw, near_ratio, max_depth, out, extra, vals, stack):
    """Adaptive integration over one cell; returns 1 if depth ran out near x."""
    top = 0
    if contains:
        # split at the target so that it is a corner of every piece
        cuts_a = (0.0, ax, 1.0)
        cuts_b = (0.0, bx, 1.0)
        for p in range(2):
            for q in range(2):
                a0 = cuts_a[p]
                a1 = cuts_a[p + 1]
                b0 = cuts_b[q]
                b1 = cuts_b[q + 1]
                if a1 - a0 > 0.0 and b1 - b0 > 0.0:
                    stack[top, 0] = a0
                    stack[top, 1] = a1
                    stack[top, 2] = b0
                    stack[top, 3] = b1
                    stack[top, 4] = 0.0
                    top += 1
    else:
        stack[0, 0] = 0.0
        stack[0, 1] = 1.0
        stack[0, 2] = 0.0
        stack[0, 3] = 1.0
        stack[0, 4] = 0.0
        top = 1
    flag = 0
    ng = gx.shape[0]
    nd = dx.shape[0]
    while top > 0:
        top -= 1
        a0 = stack[top, 0]
        a1 = stack[top, 1]
        b0 = stack[top, 2]
        b1 = stack[top, 3]
        depth = int(stack[top, 4])
        cr, cz, diam = _rect_geometry(rho_i, drho, phi_j, dphi, a0, a1, b0, b1)
        corner = contains and (a0 == ax or a1 == ax) and (b0 == bx or b1 == bx)
        dist = _nearest(cr, cz, sp_r, sp_z, nsp, corner)
        if dist < near_ratio * diam and depth < max_depth:
            am = 0.5 * (a0 + a1)
            bm = 0.5 * (b0 + b1)
            for p in range(2):
                for q in range(2):
                    stack[top, 0] = a0 if p == 0 else am
                    stack[top, 1] = am if p == 0 else a1
                    stack[top, 2] = b0 if q == 0 else bm
                    stack[top, 3] = bm if q == 0 else b1
                    stack[top, 4] = depth + 1.0
                    top += 1
            continue
        if corner:
            # keep Duffy pieces close to square: bisect the long side
            la = (a1 - a0) * drho
            lb = (b1 - b0) * dphi * max(rho_i + 0.5 * (a0 + a1) * drho, 0.5 * drho)
            if la > 2.0 * lb or lb > 2.0 * la:
                split_a = la > lb
                am = 0.5 * (a0 + a1)
                bm = 0.5 * (b0 + b1)
                for p in range(2):
                    stack[top, 0] = a0 if (not split_a or p == 0) else am
                    stack[top, 1] = a1 if (not split_a or p == 1) else am
                    stack[top, 2] = b0 if (split_a or p == 0) else bm
                    stack[top, 3] = b1 if (split_a or p == 1) else bm
                    stack[top, 4] = depth
                    top += 1
                continue
            # Duffy: x at (ax, bx), opposite corner (ao, bo)
            ao = a1 if a0 == ax else a0
            bo = b1 if b0 == bx else b0
            ea = ao - ax
            eb = bo - bx
            jac = abs(ea * eb)
            for u in range(nd):
                s = dx[u]
                for v in range(nd):
                    t = dx[v]
                    wq = dw[u] * dw[v] * s * jac
                    # triangle below the diagonal, then above it
                    _add_point(mode, sym, rb, zb, rho_i, drho, phi_j, dphi,
                               ax + s * ea, bx + s * t * eb, wq, node00, n_phi,
                               ncomp, out, extra, vals)
                    _add_point(mode, sym, rb, zb, rho_i, drho, phi_j, dphi,
                               ax + s * t * ea, bx + s * eb, wq, node00, n_phi,
                               ncomp, out, extra, vals)
            continue
        if dist < near_ratio * diam and _nearest(cr, cz, sp_r, sp_z, 1, False) < 1e-3 * diam:
            flag = 1
        la = a1 - a0
        lb = b1 - b0
        for u in range(ng):
            for v in range(ng):
                _add_point(mode, sym, rb, zb, rho_i, drho, phi_j, dphi,
                           a0 + la * gx[u], b0 + lb * gx[v], gw[u] * gw[v] * la * lb,
                           node00, n_phi, ncomp, out, extra, vals)
    return flag


@numba.njit(cache=True)
def _snap(t):
    if t < 1e-9:
        return 0.0
    if t > 1.0 - 1e-9:
        return 1.0
    return t


@numba.njit(cache=True)
def _assemble_row(mode, sym, rb, zb, rho, phi, cell_cr, cell_cz, cell_d,
                  far_r, far_z, far_w, far_a, far_b,
                  gx, gw, dx, dw, far_ratio, near_ratio, max_depth, out, extra):
    """Accumulate the quadrature weights of one target into ``out``.

    ``out`` has shape (ncomp, n_nodes) and must be zeroed by the caller.
    Returns a refinement-failure flag.
    """
    n_rho = rho.shape[0]
    n_phi = phi.shape[0]
    ncomp = out.shape[0]
    vals = np.zeros(8)
    stack = np.zeros((4 * max_depth + 256, 5))
    sp_r = np.zeros(4)
    sp_z = np.zeros(4)
    nsp = 0
    sp_r[0] = rb
    sp_z[0] = zb
    nsp = 1
    q = rb * rb + zb * zb
    if q > 0.0:
        sp_r[nsp] = rb / q
        sp_z[nsp] = zb / q
        nsp += 1
    if sym:
        sp_r[nsp] = rb
        sp_z[nsp] = -zb
        nsp += 1
        if q > 0.0:
            sp_r[nsp] = rb / q
            sp_z[nsp] = -zb / q
            nsp += 1
    rho_x = math.sqrt(q)
    phi_x = math.atan2(zb, rb) if q > 0.0 else 0.0
    singular = rb > 0.0
    nfar = far_r.shape[1]
    flag = 0
    tol = 1e-12
    for i in range(n_rho - 1):
        drho = rho[i + 1] - rho[i]
        ax = (rho_x - rho[i]) / drho
        for j in range(n_phi - 1):
            c = i * (n_phi - 1) + j
            dphi = phi[j + 1] - phi[j]
            node00 = i * n_phi + j
            bx = (phi_x - phi[j]) / dphi
            contains = (singular and ax >= -tol and ax <= 1.0 + tol
                        and bx >= -tol and bx <= 1.0 + tol)
            if not contains:
                dist = _nearest(cell_cr[c], cell_cz[c], sp_r, sp_z, nsp, False)
                if dist >= far_ratio * cell_d[c]:
                    for k in range(nfar):
                        _kernel(mode, sym, rb, zb, far_r[c, k], far_z[c, k], vals)
                        wgt = far_w[c, k]
                        al = far_a[k]
                        be = far_b[k]
                        b00 = (1.0 - al) * (1.0 - be) * wgt
                        b10 = al * (1.0 - be) * wgt
                        b01 = (1.0 - al) * be * wgt
                        b11 = al * be * wgt
                        for cc in range(ncomp):
                            v = vals[cc]
                            out[cc, node00] += v * b00
                            out[cc, node00 + n_phi] += v * b10
                            out[cc, node00 + 1] += v * b01
                            out[cc, node00 + n_phi + 1] += v * b11
                        if mode == MODE_GRAD:
                            for cc in range(4):
                                extra[cc] += vals[4 + cc] * wgt
                    continue
            # snap rounding-level offsets onto the cell edges so that no
            # degenerate slivers reach the Duffy split
            axc = _snap(ax)
            bxc = _snap(bx)
            flag |= _process_cell(mode, sym, rb, zb, i, j, rho[i], drho, phi[j], dphi,
                                  node00, n_phi, ncomp, contains, axc, bxc,
                                  sp_r, sp_z, nsp, gx, gw, dx, dw, near_ratio,
                                  max_depth, out, extra, vals, stack)
    return flag


@numba.njit(cache=True)
def _assemble_velocity_matrix(targets_r, targets_z, rows_idx, sym, rho, phi,
                              cell_cr, cell_cz, cell_d, far_r, far_z, far_w, far_a, far_b,
                              gx, gw, dx, dw, far_ratio, near_ratio, max_depth, mat_k, mat_j):
    n = rho.shape[0] * phi.shape[0]
    out = np.zeros((2, n))
    extra = np.zeros(4)
    flag = 0
    for t in range(targets_r.shape[0]):
        out[:, :] = 0.0
        flag |= _assemble_row(MODE_VEL, sym, targets_r[t], targets_z[t], rho, phi,
                              cell_cr, cell_cz, cell_d, far_r, far_z, far_w, far_a, far_b,
                              gx, gw, dx, dw, far_ratio, near_ratio, max_depth, out, extra)
        row = rows_idx[t]
        for k in range(n):
            mat_k[row, k] = out[0, k]
            mat_j[row, k] = out[1, k]
    return flag


@numba.njit(cache=True)
def _matvec(a, x, out):
    n, m = a.shape
    for i in range(n):
        acc = 0.0
        for k in range(m):
            acc += a[i, k] * x[k]
        out[i] = acc


@numba.njit(cache=True)
def _rowdot(row, x):
    acc = 0.0
    for k in range(x.shape[0]):
        acc += row[k] * x[k]
    return acc


# ---------------------------------------------------------------------------
# Geometry cache
# ---------------------------------------------------------------------------

def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


class _Geometry:
    """Per-(grid, quadrature) arrays used by the numba assembly."""

    def __init__(self, grid: PolarGrid, quad: VelocityQuadrature):
        self.grid = grid
        self.quad = quad
        near, far, duffy = quad.orders()
        self.gx, self.gw = _gauss01(near)
        self.dx, self.dw = _gauss01(duffy)
        fx, fw = _gauss01(far)
        rho = np.ascontiguousarray(grid.rho)
        phi = np.ascontiguousarray(grid.phi)
        self.rho, self.phi = rho, phi
        A, B = np.meshgrid(fx, fx, indexing="ij")
        WA, WB = np.meshgrid(fw, fw, indexing="ij")
        self.far_a = A.ravel().copy()
        self.far_b = B.ravel().copy()
        wref = (WA * WB).ravel()
        r0 = rho[:-1, None, None]
        dr = np.diff(rho)[:, None, None]
        p0 = phi[None, :-1, None]
        dp = np.diff(phi)[None, :, None]
        rr = r0 + self.far_a[None, None, :] * dr
        pp = p0 + self.far_b[None, None, :] * dp
        ncell = (grid.n_rho - 1) * (grid.n_phi - 1)
        self.far_r = np.maximum(rr * np.cos(pp), 0.0).reshape(ncell, -1)
        self.far_z = (rr * np.sin(pp)).reshape(ncell, -1)
        self.far_w = (wref[None, None, :] * rr * dr * dp).reshape(ncell, -1)
        rc = 0.5 * (rho[:-1] + rho[1:])[:, None]
        pc = 0.5 * (phi[:-1] + phi[1:])[None, :]
        self.cell_cr = (rc * np.cos(pc)).ravel()
        self.cell_cz = (rc * np.sin(pc)).ravel()
        r0, r1 = rho[:-1, None], rho[1:, None]
        p0, p1 = phi[None, :-1], phi[None, 1:]
        d1 = np.hypot(r1 * np.cos(p1) - r0 * np.cos(p0), r1 * np.sin(p1) - r0 * np.sin(p0))
        d2 = np.hypot(r1 * np.cos(p0) - r0 * np.cos(p1), r1 * np.sin(p0) - r0 * np.sin(p1))
        self.cell_d = np.maximum(d1, d2).ravel()

    def row(self, mode: int, rb: float, zb: float):
        rb, zb = _settle_target(float(rb), float(zb), self.grid.odd)
        ncomp = _NCOMP[mode]
        out = np.zeros((ncomp, self.grid.size))
        extra = np.zeros(4)
        q = self.quad
        flag = _assemble_row(mode, self.grid.odd, float(rb), float(zb), self.rho, self.phi,
                             self.cell_cr, self.cell_cz, self.cell_d,
                             self.far_r, self.far_z, self.far_w, self.far_a, self.far_b,
                             self.gx, self.gw, self.dx, self.dw,
                             float(q.far_ratio), float(q.near_ratio), int(q.max_depth),
                             out, extra)
        if flag:
            raise RefinementError(
                f"target ({rb:.17g}, {zb:.17g}) is too close to a cell edge for "
                f"max_depth={q.max_depth}")
        return out, extra


# Targets closer than this to a partner singular point (the reflection
# (rb, -zb) for odd data, the sphere image near the circle) are moved onto the
# symmetry plane or the circle.  Two singularities a few 1e-9 apart cannot be
# separated by the subdivision, and the shift changes u by O(1e-7 |grad u|).
TARGET_SNAP = 1e-7


def _settle_target(rb: float, zb: float, odd: bool):
    if odd and abs(zb) < TARGET_SNAP:
        zb = 0.0
    rho = math.hypot(rb, zb)
    if 1.0 - TARGET_SNAP < rho and rho != 1.0:
        rb, zb = rb / rho, zb / rho
    return rb, zb


_GEOMETRY_CACHE: dict = {}


def _geometry(grid: PolarGrid, quad: VelocityQuadrature) -> _Geometry:
    key = (grid, quad)
    geo = _GEOMETRY_CACHE.get(key)
    if geo is None:
        if len(_GEOMETRY_CACHE) > 8:
            _GEOMETRY_CACHE.clear()
        geo = _GEOMETRY_CACHE[key] = _Geometry(grid, quad)
    return geo


def _as_quad(quad) -> VelocityQuadrature:
    if quad is None:
        return DEFAULT_QUAD
    if isinstance(quad, VelocityQuadrature):
        return quad
    raise TypeError(f"expected VelocityQuadrature, got {type(quad).__name__}")


def _check_target(rb, zb):
    if rb < 0:
        raise ValueError("targets must have r >= 0")
    if rb * rb + zb * zb > 1.0 + 1e-12:
        raise ValueError(f"target ({rb}, {zb}) lies outside the closed disk")


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def velocity_rows(targets, grid: PolarGrid, quad=None):
    """Quadrature weight rows mapping nodal w to (u^r, u^z) at targets.

    Parameters
    ----------
    targets : (r, z) pair of 1-d arrays
    grid : PolarGrid
    quad : VelocityQuadrature, optional

    Returns
    -------
    ndarray, shape (2, n_targets, grid.size)
    """
    quad = _as_quad(quad)
    geo = _geometry(grid, quad)
    tr, tz = (np.atleast_1d(np.asarray(a, float)) for a in targets)
    rows = np.empty((2, tr.size, grid.size))
    for t in range(tr.size):
        _check_target(tr[t], tz[t])
        flip = grid.odd and tz[t] < 0
        out, _ = geo.row(MODE_VEL, tr[t], -tz[t] if flip else tz[t])
        rows[:, t] = out
        if flip:
            rows[1, t] *= -1.0
    return rows


def velocity_field(targets, w: ScalarFieldRZ, quad=None):
    """Velocity at many targets.

    Parameters
    ----------
    targets : sequence of PointRZ or an (r, z) pair of arrays
    w : ScalarFieldRZ
    quad : VelocityQuadrature, optional

    Returns
    -------
    (ur, uz) : tuple of ndarray
        Results are identical to calling `velocity_at` on each target.
    """
    quad = _as_quad(quad)
    geo = _geometry(w.grid, quad)
    tr, tz = _targets(targets)
    vals = np.ascontiguousarray(w.values.ravel())
    ur = np.empty(tr.size)
    uz = np.empty(tr.size)
    for t in range(tr.size):
        _check_target(tr[t], tz[t])
        if not vals.any():
            ur[t] = uz[t] = 0.0
            continue
        # odd data: u^r is even and u^z odd in z, so fold onto z >= 0
        sign = -1.0 if (w.grid.odd and tz[t] < 0) else 1.0
        out, _ = geo.row(MODE_VEL, tr[t], sign * tz[t])
        ur[t] = 0.0 if tr[t] == 0.0 else _rowdot(out[0], vals)
        uz[t] = 0.0 if (w.grid.odd and tz[t] == 0.0) else sign * _rowdot(out[1], vals)
    return ur, uz


def _targets(targets):
    if isinstance(targets, tuple) and len(targets) == 2 and np.ndim(targets[0]) >= 1:
        tr, tz = targets
    else:
        pts = list(targets)
        tr = [p[0] for p in pts]
        tz = [p[1] for p in pts]
    return np.atleast_1d(np.asarray(tr, float)), np.atleast_1d(np.asarray(tz, float))


def velocity_at(x, w: ScalarFieldRZ, quad=None) -> VelocitySample:
    """Velocity (u^r, u^z) at one point of the closed disk.

    Parameters
    ----------
    x : PointRZ or (r, z)
    w : ScalarFieldRZ
        For odd fields the symmetrized kernel is integrated over the upper
        half-disk.
    quad : VelocityQuadrature, optional

    Returns
    -------
    VelocitySample
        ``ur`` is exactly 0 on the axis; for odd fields ``uz`` is exactly 0
        on the symmetry plane.

    Raises
    ------
    RefinementError
        If x is too close to a cell edge for the subdivision depth.
    """
    ur, uz = velocity_field(([float(x[0])], [float(x[1])]), w, quad)
    return VelocitySample(float(ur[0]), float(uz[0]))


def stream_function_at(x, w: ScalarFieldRZ, quad=None) -> float:
    """Stream function psi(x) = int G(x, y) r w(y) dr dz."""
    quad = _as_quad(quad)
    rb, zb = float(x[0]), float(x[1])
    _check_target(rb, zb)
    if rb == 0.0:
        return 0.0
    sign = -1.0 if (w.grid.odd and zb < 0) else 1.0
    out, _ = _geometry(w.grid, quad).row(MODE_PSI, rb, sign * zb)
    return sign * _rowdot(out[0], np.ascontiguousarray(w.values.ravel()))


def velocity_gradient_at(x, w: ScalarFieldRZ, quad=None) -> np.ndarray:
    """Velocity gradient [[dur/dr, dur/dz], [duz/dr, duz/dz]] at x.

    The singular integral is regularized by subtracting w(x): with Hill's
    vortex u_H (velocity of w = 1 on the ball),

        grad u(x) = int_D grad_x K(x, y) (w(y) - w(x)) dy + w(x) grad u_H(x),

    which is absolutely convergent.  For odd fields the whole-disk integral
    is folded onto the upper half.

    Parameters
    ----------
    x : PointRZ or (r, z)
        Interior point with r > 0.
    """
    quad = _as_quad(quad)
    rb, zb = float(x[0]), float(x[1])
    _check_target(rb, zb)
    if rb <= 0:
        raise ValueError("velocity_gradient_at needs an off-axis target")
    if w.grid.odd and zb < 0:
        # d(ur)/dz and d(uz)/dr are odd in z, the diagonal entries even
        return velocity_gradient_at((rb, -zb), w, quad) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    vals = np.ascontiguousarray(w.values.ravel())
    if not vals.any():
        return np.zeros((2, 2))
    out, extra = _geometry(w.grid, quad).row(MODE_GRAD, rb, zb)
    wx = bilinear_rho_phi(w, rb, zb)
    # kernel component order (dK/dr, dK/dz, dJ/dr, dJ/dz) matches the
    # row-major flattening of the gradient matrix
    hill = hill_velocity_gradient(rb, zb).ravel()
    g = np.array([_rowdot(out[c], vals) for c in range(4)])
    g += wx * (hill - extra)
    return g.reshape(2, 2)


def bilinear_rho_phi(w: ScalarFieldRZ, r: float, z: float) -> float:
    """Value at (r, z) of the (rho, phi)-bilinear interpolant used by the quadrature."""
    grid = w.grid
    rho = min(math.hypot(r, z), 1.0)
    phi = math.atan2(z, r)
    i = int(np.clip(np.searchsorted(grid.rho, rho) - 1, 0, grid.n_rho - 2))
    j = int(np.clip(np.searchsorted(grid.phi, phi) - 1, 0, grid.n_phi - 2))
    a = (rho - grid.rho[i]) / (grid.rho[i + 1] - grid.rho[i])
    b = (phi - grid.phi[j]) / (grid.phi[j + 1] - grid.phi[j])
    v = w.values
    return float((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
                 + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1])


class VelocityOperator:
    """Dense node-to-node Biot-Savart operator for a fixed grid.

    Parameters
    ----------
    grid : PolarGrid
    quad : VelocityQuadrature, optional
    dtype : numpy dtype, optional
        Storage type of the two matrices.  Defaults to float64 when both
        fit in ``float64_budget`` bytes and float32 otherwise; products are
        always accumulated in float64.
    """

    float64_budget = 1.2e9

    def __init__(self, grid: PolarGrid, quad=None, dtype=None):
        self.grid = grid
        self.quad = _as_quad(quad)
        n = grid.size
        if dtype is None:
            dtype = np.float64 if 2 * n * n * 8 <= self.float64_budget else np.float32
        self.dtype = np.dtype(dtype)
        geo = _geometry(grid, self.quad)
        r, z = grid.nodes
        tr = np.ascontiguousarray(r.ravel())
        tz = np.ascontiguousarray(z.ravel())
        # all pole nodes are one physical point: assemble once, copy
        pole = np.arange(grid.n_phi)
        todo = np.setdiff1d(np.arange(n), pole[1:])
        self.k = np.zeros((n, n), dtype=self.dtype)
        self.j = np.zeros((n, n), dtype=self.dtype)
        q = self.quad
        flag = _assemble_velocity_matrix(
            tr[todo], tz[todo], todo, grid.odd, geo.rho, geo.phi,
            geo.cell_cr, geo.cell_cz, geo.cell_d,
            geo.far_r, geo.far_z, geo.far_w, geo.far_a, geo.far_b,
            geo.gx, geo.gw, geo.dx, geo.dw,
            float(q.far_ratio), float(q.near_ratio), int(q.max_depth), self.k, self.j)
        if flag:
            raise RefinementError("grid node too close to a cell edge")
        self.k[pole[1:]] = self.k[0]
        self.j[pole[1:]] = self.j[0]
        # exact axis and symmetry-plane conditions
        axis = (tr == 0.0)
        self.k[axis] = 0.0
        if grid.odd:
            self.j[tz == 0.0] = 0.0

    @property
    def nbytes(self) -> int:
        return self.k.nbytes + self.j.nbytes

    def apply(self, w) -> VelocityField:
        """Nodal velocity of a field (ScalarFieldRZ or raw nodal array)."""
        vals = w.values if isinstance(w, ScalarFieldRZ) else np.asarray(w, float)
        x = np.ascontiguousarray(vals.ravel(), dtype=float)
        ur = np.empty(x.size)
        uz = np.empty(x.size)
        _matvec(self.k, x, ur)
        _matvec(self.j, x, uz)
        return VelocityField(self.grid, ur.reshape(self.grid.shape), uz.reshape(self.grid.shape))


def set_thread_count_from_env():
    """Honour AXIEULER_THREADS for numba's thread pool (if set)."""
    n = os.environ.get("AXIEULER_THREADS")
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
