"""Polar meridian grid and nodal fields on the half-disk.

Nodes sit at (rho_i, phi_j) with r = rho cos(phi), z = rho sin(phi).  The
radial map clusters nodes toward the boundary circle and the angular map
clusters them toward phi = 0, so both accumulate near e1 = (1, 0):

    rho(xi)  = tanh(b_r xi) / tanh(b_r),            xi in [0, 1]
    phi(eta) = (pi/2) sinh(b_p eta) / sinh(b_p),    eta in [0, 1] (odd grids)
                                                    or [-1, 1] (full grids)

Odd-in-z fields store only phi >= 0.  Interpolation works in fractional
index space on arrays padded with ghost nodes that encode the parity of the
field across the axis, the symmetry plane and the pole.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["Symmetry", "PolarGrid", "ScalarFieldRZ", "VelocityField",
           "pad_field", "interp_linear", "interp_cubic"]

PAD = 2
MAX_CLUSTER = 50.0


class Symmetry(enum.Enum):
    NONE = "None"
    ODD = "OddInZ"

    @classmethod
    def parse(cls, value) -> "Symmetry":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("none", "full"):
            return cls.NONE
        if key in ("odd", "oddinz", "odd_in_z"):
            return cls.ODD
        raise ValueError(f"unknown symmetry {value!r}")


@dataclass(frozen=True)
class PolarGrid:
    """Structured (rho, phi) grid covering the meridian half-disk.

    Parameters
    ----------
    n_rho, n_phi : int
        Number of nodes in each direction (including both ends).
    symmetry : Symmetry
        ``ODD`` stores phi in [0, pi/2]; ``NONE`` stores [-pi/2, pi/2].
    rho_cluster, phi_cluster : float
        Clustering strengths (0 gives uniform spacing).
    """

    n_rho: int
    n_phi: int
    symmetry: Symmetry = Symmetry.ODD
    rho_cluster: float = 0.0
    phi_cluster: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "symmetry", Symmetry.parse(self.symmetry))
        if self.n_rho < 4 or self.n_phi < 4:
            raise ValueError("the grid needs at least 4 nodes per direction")
        for name in ("rho_cluster", "phi_cluster"):
            b = float(getattr(self, name))
            if not 0 <= b <= MAX_CLUSTER:
                raise ValueError(f"{name} must lie in [0, {MAX_CLUSTER}], got {b}")
            # the stretched maps lose accuracy as b -> 0; below this they
            # agree with the uniform map to rounding
            object.__setattr__(self, name, 0.0 if b < 1e-7 else b)

    # -- coordinate maps ---------------------------------------------------
    @property
    def odd(self) -> bool:
        return self.symmetry is Symmetry.ODD

    def rho_of_xi(self, xi):
        b = self.rho_cluster
        xi = np.asarray(xi, float)
        return xi if b == 0 else np.tanh(b * xi) / math.tanh(b)

    def xi_of_rho(self, rho):
        b = self.rho_cluster
        rho = np.asarray(rho, float)
        return rho if b == 0 else np.arctanh(np.clip(rho, -1, 1) * math.tanh(b)) / b

    def drho_dxi(self, xi):
        b = self.rho_cluster
        xi = np.asarray(xi, float)
        return np.ones_like(xi) if b == 0 else b / np.cosh(b * xi) ** 2 / math.tanh(b)

    def phi_of_eta(self, eta):
        b = self.phi_cluster
        eta = np.asarray(eta, float)
        return 0.5 * np.pi * (eta if b == 0 else np.sinh(b * eta) / math.sinh(b))

    def eta_of_phi(self, phi):
        b = self.phi_cluster
        x = np.asarray(phi, float) / (0.5 * np.pi)
        return x if b == 0 else np.arcsinh(x * math.sinh(b)) / b

    def dphi_deta(self, eta):
        b = self.phi_cluster
        eta = np.asarray(eta, float)
        base = np.ones_like(eta) if b == 0 else b * np.cosh(b * eta) / math.sinh(b)
        return 0.5 * np.pi * base

    @property
    def eta_lo(self) -> float:
        return 0.0 if self.odd else -1.0

    # -- nodes -------------------------------------------------------------
    @cached_property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_rho)

    @cached_property
    def eta(self) -> np.ndarray:
        return np.linspace(self.eta_lo, 1.0, self.n_phi)

    @cached_property
    def rho(self) -> np.ndarray:
        v = self.rho_of_xi(self.xi)
        v[0], v[-1] = 0.0, 1.0
        return v

    @cached_property
    def phi(self) -> np.ndarray:
        v = self.phi_of_eta(self.eta)
        v[-1] = 0.5 * np.pi
        v[0] = 0.0 if self.odd else -0.5 * np.pi
        if not self.odd:
            v = 0.5 * (v - v[::-1])     # exact mirror symmetry
        return v

    @cached_property
    def axis_columns(self) -> tuple[int, ...]:
        return (self.n_phi - 1,) if self.odd else (0, self.n_phi - 1)

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(r, z)`` of shape ``(n_rho, n_phi)``."""
        rho = self.rho[:, None]
        r = rho * np.cos(self.phi)[None, :]
        z = rho * np.sin(self.phi)[None, :]
        for j in self.axis_columns:
            r[:, j] = 0.0
        if self.odd:
            z[:, 0] = 0.0
        z[:, self.n_phi - 1] = self.rho
        if not self.odd:
            z[:, 0] = -self.rho
        r[-1] = np.cos(self.phi)
        for j in self.axis_columns:
            r[-1, j] = 0.0
        return r, z

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rho, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_rho * self.n_phi

    @cached_property
    def d_xi(self) -> float:
        return 1.0 / (self.n_rho - 1)

    @cached_property
    def d_eta(self) -> float:
        return (1.0 - self.eta_lo) / (self.n_phi - 1)

    @cached_property
    def cell_size(self) -> np.ndarray:
        """Physical node spacing ``min(d rho, rho d phi)``.

        Arc lengths shorter than the first radial spacing are floored to it:
        near the pole the angular spacing is a coordinate artifact and the
        polar cap behaves as a single cell of size ``d rho``.
        """
        drho = np.gradient(self.rho)
        dphi = np.gradient(self.phi)
        arc = np.maximum(self.rho[:, None] * dphi[None, :], drho[0])
        return np.minimum(drho[:, None], arc)

    def cells_across(self, z_width: float, r: float = 1.0) -> int:
        """Number of angular cells at radius ``r`` spanning ``0 < z < z_width``."""
        phi_max = math.asin(min(z_width / r, 1.0))
        return int(np.count_nonzero((self.phi > 0) & (self.phi <= phi_max + 1e-15)))

    # -- locating points ---------------------------------------------------
    def frac_index(self, r, z):
        """Fractional node indices of physical points.

        Points outside the disk are projected radially onto the circle; for
        odd grids the caller must pass ``z >= 0``.
        """
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        rho = np.minimum(np.hypot(r, z), 1.0)
        phi = np.arctan2(z, np.maximum(r, 0.0))
        fi = self.xi_of_rho(rho) / self.d_xi
        fj = (self.eta_of_phi(phi) - self.eta_lo) / self.d_eta
        fi = np.clip(fi, 0.0, self.n_rho - 1.0)
        fj = np.clip(fj, 0.0, self.n_phi - 1.0)
        return fi, fj

    def descriptor(self) -> dict:
        return {"n_rho": self.n_rho, "n_phi": self.n_phi,
                "symmetry": self.symmetry.value,
                "rho_cluster": self.rho_cluster, "phi_cluster": self.phi_cluster}

    @classmethod
    def from_descriptor(cls, d: dict) -> "PolarGrid":
        return cls(int(d["n_rho"]), int(d["n_phi"]), Symmetry.parse(d["symmetry"]),
                   float(d["rho_cluster"]), float(d["phi_cluster"]))


# ---------------------------------------------------------------------------
# Ghost padding and interpolation
# ---------------------------------------------------------------------------

def pad_field(values: np.ndarray, grid: PolarGrid, r_parity: int = 1,
              z_parity: int = 1, width: int = PAD) -> np.ndarray:
    """Pad nodal values with ghost layers encoding the field's parities.

    Parameters
    ----------
    values : ndarray, shape (n_rho, n_phi)
    r_parity : {1, -1}
        Parity under r -> -r (1 for w and u^z, -1 for u^r).
    z_parity : {1, -1}
        Parity under z -> -z (used by odd grids only; -1 for w and u^z).
    """
    v = np.asarray(values, float)
    n_rho, n_phi = v.shape
    k = width
    # angular ghosts
    out = np.empty((n_rho, n_phi + 2 * k))
    out[:, k:k + n_phi] = v
    for m in range(1, k + 1):
        out[:, k + n_phi - 1 + m] = r_parity * v[:, n_phi - 1 - m]
        if grid.odd:
            out[:, k - m] = z_parity * v[:, m]
        else:
            out[:, k - m] = r_parity * v[:, m]
    # radial ghosts; the pole ghost at rho_m in direction phi + pi equals the
    # value at (rho_m, -phi) times the r-parity
    full = np.empty((n_rho + 2 * k, n_phi + 2 * k))
    full[k:k + n_rho] = out
    for m in range(1, k + 1):
        if grid.odd:
            full[k - m] = r_parity * z_parity * out[m]
        else:
            full[k - m] = r_parity * out[m, ::-1]
        base = full[k + n_rho - 1]
        full[k + n_rho - 1 + m] = (base + m * (base - full[k + n_rho - 2])
                                   + 0.5 * m * (m + 1) * (base - 2 * full[k + n_rho - 2]
                                                          + full[k + n_rho - 3]))
    return full


def _base(f, n):
    i0 = np.minimum(np.floor(f).astype(np.int64), n - 2)
    return i0, f - i0


def interp_linear(values: np.ndarray, fi, fj):
    """Bilinear interpolation in fractional index space (no padding needed)."""
    n_rho, n_phi = values.shape
    i0, t = _base(np.asarray(fi, float), n_rho)
    j0, s = _base(np.asarray(fj, float), n_phi)
    return ((1 - t) * (1 - s) * values[i0, j0] + t * (1 - s) * values[i0 + 1, j0]
            + (1 - t) * s * values[i0, j0 + 1] + t * s * values[i0 + 1, j0 + 1])


def _cubic_weights(t):
    return np.stack([
        -t * (t - 1) * (t - 2) / 6.0,
        (t + 1) * (t - 1) * (t - 2) / 2.0,
        -(t + 1) * t * (t - 2) / 2.0,
        (t + 1) * t * (t - 1) / 6.0,
    ])


def interp_cubic(padded: np.ndarray, shape, fi, fj, clip: bool = False):
    """Tensor cubic Lagrange interpolation on a padded array.

    With ``clip`` the result is limited to the range of the four nodes of
    the enclosing cell, which removes overshoot.
    """
    n_rho, n_phi = shape
    fi = np.asarray(fi, float)
    fj = np.asarray(fj, float)
    i0, t = _base(fi, n_rho)
    j0, s = _base(fj, n_phi)
    wi = _cubic_weights(t)
    wj = _cubic_weights(s)
    ii = i0 + PAD
    jj = j0 + PAD
    out = np.zeros(np.broadcast(fi, fj).shape)
    for a in range(4):
        row = np.zeros_like(out)
        for b in range(4):
            row += wj[b] * padded[ii + a - 1, jj + b - 1]
        out += wi[a] * row
    if clip:
        c = [padded[ii, jj], padded[ii + 1, jj], padded[ii, jj + 1], padded[ii + 1, jj + 1]]
        out = np.clip(out, np.minimum.reduce(c), np.maximum.reduce(c))
    return out


# ---------------------------------------------------------------------------
# Field types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarFieldRZ:
    """Nodal values of w = omega^theta / r on a `PolarGrid`.

    Attributes
    ----------
    grid : PolarGrid
    values : ndarray, shape ``grid.shape`` (read-only copy)
    """

    grid: PolarGrid
    values: np.ndarray
    _padded: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.grid.odd:
            v[:, 0] = 0.0
            v[0, :] = 0.0
        else:
            v[0, :] = v[0].mean()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: PolarGrid, func) -> "ScalarFieldRZ":
        """Sample ``func(r, z)`` at the nodes."""
        r, z = grid.nodes
        return cls(grid, np.broadcast_to(func(r, z), grid.shape))

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "ScalarFieldRZ":
        return cls(grid, np.zeros(grid.shape))

    @property
    def symmetry(self) -> Symmetry:
        return self.grid.symmetry

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "ScalarFieldRZ":
        return ScalarFieldRZ(self.grid, values)

    def padded(self) -> np.ndarray:
        if "w" not in self._padded:
            self._padded["w"] = pad_field(self.values, self.grid, 1, -1)
        return self._padded["w"]

    def __call__(self, r, z, method: str = "linear"):
        """Interpolate at physical points.

        Parameters
        ----------
        r, z : array_like
        method : {"linear", "cubic", "cubic_clipped"}
        """
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        sign = 1.0
        if self.grid.odd:
            sign = np.where(z < 0, -1.0, 1.0)
            z = np.abs(z)
        fi, fj = self.grid.frac_index(r, z)
        if method == "linear":
            val = interp_linear(self.values, fi, fj)
        elif method in ("cubic", "cubic_clipped"):
            val = interp_cubic(self.padded(), self.grid.shape, fi, fj,
                               clip=method == "cubic_clipped")
        else:
            raise ValueError(f"unknown interpolation method {method!r}")
        return sign * val

    def gradient(self):
        """Finite-difference (dw/dr, dw/dz) at the nodes (NaN at the pole)."""
        return grid_gradient(self.padded(), self.grid)


def grid_gradient(padded: np.ndarray, grid: PolarGrid):
    """Central differences of a padded nodal array, returned as (d/dr, d/dz)."""
    k = PAD
    n_rho, n_phi = grid.shape
    d_i = 0.5 * (padded[k + 1:k + 1 + n_rho, k:k + n_phi] - padded[k - 1:k - 1 + n_rho, k:k + n_phi])
    d_j = 0.5 * (padded[k:k + n_rho, k + 1:k + 1 + n_phi] - padded[k:k + n_rho, k - 1:k - 1 + n_phi])
    w_rho = d_i / (grid.drho_dxi(grid.xi) * grid.d_xi)[:, None]
    w_phi = d_j / (grid.dphi_deta(grid.eta) * grid.d_eta)[None, :]
    rho = grid.rho[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        w_t = np.where(rho > 0, w_phi / rho, np.nan)
    cp = np.cos(grid.phi)[None, :]
    sp = np.sin(grid.phi)[None, :]
    dr = cp * w_rho - sp * w_t
    dz = sp * w_rho + cp * w_t
    return dr, dz


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Nodal velocity (u^r, u^z) on a grid with parity-aware interpolation."""

    grid: PolarGrid
    ur: np.ndarray
    uz: np.ndarray
    _padded: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("ur", "uz"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {v.shape}, grid is {self.grid.shape}")
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    def padded(self):
        if not self._padded:
            self._padded["ur"] = pad_field(self.ur, self.grid, -1, 1)
            self._padded["uz"] = pad_field(self.uz, self.grid, 1, -1)
        return self._padded["ur"], self._padded["uz"]

    def __call__(self, r, z):
        """Cubic interpolation of (u^r, u^z) at physical points."""
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        sign = 1.0
        if self.grid.odd:
            sign = np.where(z < 0, -1.0, 1.0)
            z = np.abs(z)
        fi, fj = self.grid.frac_index(r, z)
        pr, pz = self.padded()
        ur = interp_cubic(pr, self.grid.shape, fi, fj)
        uz = interp_cubic(pz, self.grid.shape, fi, fj)
        ur = np.where(np.asarray(r) <= 0, 0.0, ur)
        return ur, sign * uz

    @property
    def max_speed(self) -> float:
        return float(np.max(np.hypot(self.ur, self.uz)))

    def gradient(self):
        """Finite-difference gradients ((dur/dr, dur/dz), (duz/dr, duz/dz))."""
        pr, pz = self.padded()
        return grid_gradient(pr, self.grid), grid_gradient(pz, self.grid)
