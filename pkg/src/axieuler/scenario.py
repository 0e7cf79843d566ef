"""Hyperbolic-point scenario near e1 = (1, 0): initial data and regions.

The initial field is odd in z.  On the upper half-disk it equals 1 except in
the strip 0 < z < delta, where it ramps up from 0; in addition it equals 1 on
the thin diagonal set O(a0, b0) = {z > 1 - r, a0 < z < b0} next to e1, with
a0 = eps**k and b0 = eps.  All ramps use the quintic smoothstep

    S(t) = 10 t^3 - 15 t^4 + 6 t^5   (0 <= t <= 1),

which is C^2 at both ends.  With f(z) = S(z/delta) and g the bump that is 1
on O(a0, b0), the field is the smooth union w0 = f + g - f g, so 0 <= w0 <= 1
and max |grad w0| is about (15/8) eps**-k.

Angles around e1 are measured from the upward tangent r = 1:
phi(x) = atan2(1 - r, z), so phi = 0 along the boundary and phi = pi/2
along the symmetry plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .greens import PointRZ
from .grid import PolarGrid, ScalarFieldRZ, Symmetry
from .specfun import EXPANSION_RADIUS

__all__ = [
    "ScenarioError",
    "GridResolutionError",
    "ScenarioParams",
    "SectorGeometry",
    "smoothstep",
    "ks_value",
    "ks_gradient",
    "ks_initial_data",
    "resolution_report",
    "scenario_grid",
    "region_membership",
    "sample_sector",
    "ABTrack",
    "track_a_b",
]

E1 = PointRZ(1.0, 0.0)


class ScenarioError(ValueError):
    """Invalid scenario parameters."""


class GridResolutionError(ValueError):
    """The grid cannot represent the strip of width delta."""


@dataclass(frozen=True)
class ScenarioParams:
    """Scenario parameters.

    Attributes
    ----------
    eps : float
        Inner scale; b(0) = eps and a(0) = eps**inner_exponent.
    delta : float
        Width of the strip around z = 0 where w0 < 1.
    bigN : float
        Size of the box S_N next to e1.
    gamma : float
        Sector half-opening used by D1 and D2, in (0, pi/2).
    inner_exponent : float
        k in a(0) = eps**k (the analysis uses k = 10).
    cutoff_width : float or None
        Width of the cutoff below the diagonal z = 1 - r (default eps).
    """

    eps: float
    delta: float
    bigN: float
    gamma: float = math.pi / 6
    inner_exponent: float = 10.0
    cutoff_width: float | None = None

    def __post_init__(self):
        if not (0.0 < self.eps < self.delta):
            raise ScenarioError(f"need 0 < eps < delta (got eps={self.eps}, delta={self.delta})")
        if not self.delta < 1.0:
            raise ScenarioError("delta must be below 1")
        if not (0.0 < self.bigN < min(0.5, EXPANSION_RADIUS / 8.0)):
            raise ScenarioError(
                f"need 0 < bigN < min(1/2, {EXPANSION_RADIUS}/8) (got {self.bigN})")
        if not (0.0 < self.gamma < math.pi / 2):
            raise ScenarioError("gamma must lie in (0, pi/2)")
        if not self.inner_exponent > 1.0:
            raise ScenarioError("inner_exponent must exceed 1 so that a(0) < b(0)")
        if self.cutoff_width is not None and not self.cutoff_width > 0:
            raise ScenarioError("cutoff_width must be positive")

    @property
    def a0(self) -> float:
        return self.eps ** self.inner_exponent

    @property
    def b0(self) -> float:
        return self.eps

    @property
    def width(self) -> float:
        return self.eps if self.cutoff_width is None else self.cutoff_width

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioParams":
        known = {"eps", "delta", "bigN", "gamma", "inner_exponent", "cutoff_width"}
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario keys: {sorted(extra)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in d.items()})

    def as_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "bigN": self.bigN, "gamma": self.gamma,
                "inner_exponent": self.inner_exponent, "cutoff_width": self.cutoff_width}


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def smoothstep(t):
    """Quintic smoothstep and its derivative, clamped to [0, 1]."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    ds = 30.0 * t * t * (1.0 - t) ** 2
    return s, ds


def _parts(params: ScenarioParams, r, z):
    """f, g and their gradients on the upper half (z >= 0)."""
    d, a0, b0, c = params.delta, params.a0, params.b0, params.width
    f, fz = smoothstep(z / d)
    fz = fz / d
    s1, s1z = smoothstep(z / a0)
    s1z = s1z / a0
    s2, s2z = smoothstep((z - b0) / (d - b0))
    s2z = s2z / (d - b0)
    # cutoff: 1 above the diagonal z = 1 - r, 0 below z = 1 - r - c
    s3, s3d = smoothstep((z - (1.0 - r)) / c + 1.0)
    s3d = s3d / c
    g = s1 * (1.0 - s2) * s3
    g_z = s1z * (1.0 - s2) * s3 - s1 * s2z * s3 + s1 * (1.0 - s2) * s3d
    g_r = s1 * (1.0 - s2) * s3d
    return f, fz, g, g_r, g_z


def ks_value(params: ScenarioParams, r, z):
    """Analytic initial field w0(r, z) (odd in z)."""
    r = np.asarray(r, float)
    z = np.asarray(z, float)
    sign = np.where(z < 0, -1.0, 1.0)
    f, _, g, _, _ = _parts(params, r, np.abs(z))
    return sign * (f + g - f * g)


def ks_gradient(params: ScenarioParams, r, z):
    """Analytic gradient (dw0/dr, dw0/dz)."""
    r = np.asarray(r, float)
    z = np.asarray(z, float)
    f, fz, g, g_r, g_z = _parts(params, r, np.abs(z))
    dr = g_r * (1.0 - f)
    dz = fz * (1.0 - g) + g_z * (1.0 - f)
    # odd in z: dr flips sign, dz keeps it
    return np.where(z < 0, -dr, dr), dz


def resolution_report(params: ScenarioParams, grid: PolarGrid) -> dict:
    """Angular cells next to e1 across the three vertical scales."""
    return {
        "cells_across_delta": grid.cells_across(params.delta),
        "cells_across_b0": grid.cells_across(params.b0),
        "cells_across_a0": grid.cells_across(params.a0),
    }


def ks_initial_data(params: ScenarioParams, grid: PolarGrid,
                    min_cells: int = 4) -> ScalarFieldRZ:
    """Sample the scenario initial field on a grid.

    Raises
    ------
    GridResolutionError
        If fewer than ``min_cells`` angular cells span the strip at e1.
    """
    n = grid.cells_across(params.delta)
    if n < min_cells:
        raise GridResolutionError(
            f"only {n} cells across the strip of width delta={params.delta}; need {min_cells}")
    return ScalarFieldRZ.from_function(grid, lambda r, z: ks_value(params, r, z))


def scenario_grid(n_rho: int, n_phi: int, rho_cluster: float = 2.0,
                  phi_cluster: float = 6.0) -> PolarGrid:
    """Odd grid clustered toward the boundary circle and the plane z = 0."""
    return PolarGrid(n_rho, n_phi, Symmetry.ODD, rho_cluster, phi_cluster)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

def _in_disk(r, z):
    return (r >= 0.0) and (r * r + z * z <= 1.0)


@dataclass(frozen=True)
class SectorGeometry:
    """Angular sectors at e1 of half-opening gamma."""

    gamma: float
    e1: PointRZ = E1

    @staticmethod
    def phi(x) -> float:
        """Angle at e1 between the upward tangent and x - e1."""
        return math.atan2(1.0 - x[0], x[1])

    def in_d1(self, x) -> bool:
        """D1: 0 <= phi <= pi/2 - gamma within the disk."""
        r, z = float(x[0]), float(x[1])
        if not _in_disk(r, z) or (r == 1.0 and z == 0.0):
            return False
        p = self.phi((r, z))
        return 0.0 <= p <= math.pi / 2 - self.gamma

    def in_d2(self, x) -> bool:
        """D2: gamma <= phi <= pi/2 within the upper half-disk."""
        r, z = float(x[0]), float(x[1])
        if not _in_disk(r, z) or z < 0.0 or (r == 1.0 and z == 0.0):
            return False
        p = self.phi((r, z))
        return self.gamma <= p <= math.pi / 2


def region_membership(x, which, params: ScenarioParams) -> bool:
    """Exact membership predicates.

    Parameters
    ----------
    x : PointRZ or (r, z)
    which : str or tuple
        ``"S_N"``, ``"D1"``, ``"D2"``, ``("Q", xbar)`` or ``("O", a, b)``.
    params : ScenarioParams
    """
    r, z = float(x[0]), float(x[1])
    N = params.bigN
    tag = which[0] if isinstance(which, tuple) else which
    if tag == "S_N":
        return _in_disk(r, z) and 1.0 - N < r < 1.0 and 0.0 < z < N
    if tag == "Q":
        rb, zb = float(which[1][0]), float(which[1][1])
        return _in_disk(r, z) and 1.0 - N < r < rb and zb < z < N
    if tag == "D1":
        return SectorGeometry(params.gamma).in_d1((r, z))
    if tag == "D2":
        return SectorGeometry(params.gamma).in_d2((r, z))
    if tag == "O":
        a, b = float(which[1]), float(which[2])
        return _in_disk(r, z) and z > 0.0 and z > 1.0 - r and a < z < b
    raise ValueError(f"unknown region tag {which!r}")


def sample_sector(params: ScenarioParams, n: int, which: str = "D1",
                  radius: float | None = None, seed: int = 0,
                  min_distance: float = 0.0) -> np.ndarray:
    """Random points of D1 or D2 inside the ball |x - e1| < radius.

    Distances are drawn log-uniformly in [max(min_distance, radius/100), radius)
    and angles uniformly across the sector, so small scales are represented.

    Returns
    -------
    ndarray, shape (n, 2)
    """
    radius = params.delta if radius is None else radius
    rng = np.random.default_rng(seed)
    geo = SectorGeometry(params.gamma)
    lo_p, hi_p = ((0.0, math.pi / 2 - params.gamma) if which == "D1"
                  else (params.gamma, math.pi / 2))
    dmin = max(min_distance, radius / 100.0)
    out = []
    while len(out) < n:
        d = math.exp(rng.uniform(math.log(dmin), math.log(radius)))
        p = rng.uniform(lo_p, hi_p)
        x = (1.0 - d * math.sin(p), d * math.cos(p))
        ok = geo.in_d1(x) if which == "D1" else geo.in_d2(x)
        if ok and x[1] > 0.0:
            out.append(x)
    return np.array(out)


# ---------------------------------------------------------------------------
# a(t), b(t)
# ---------------------------------------------------------------------------

class ABTrack(NamedTuple):
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    broken: bool
    break_time: float


def _extreme_uz(u, t_theta, h: float, n: int, mode: str) -> float:
    """max or min of u^z over {z = h, z > 1 - r} inside the disk."""
    if not (0.0 < h < 1.0):
        return float("nan")
    lo = 1.0 - h
    hi = math.sqrt(1.0 - h * h)
    r = lo + (hi - lo) * np.arange(1, n + 1) / n
    z = np.full_like(r, h)
    uz = u(t_theta, r, z)[1]
    return float(np.max(uz) if mode == "max" else np.min(uz))


def track_a_b(history, params: ScenarioParams, n_samples: int = 64,
              substeps: int = 4) -> ABTrack:
    """Integrate da/dt = max u^z(., a) and db/dt = min u^z(., b).

    Parameters
    ----------
    history : VelocityHistory or object with ``velocity_history()``
        Velocity snapshots; between them the velocity is linear in time.
    params : ScenarioParams
        Supplies a(0) = eps**k and b(0) = eps.
    n_samples : int
        Points sampled on each horizontal segment.
    substeps : int
        Heun steps per snapshot interval (in log a, log b).

    Returns
    -------
    ABTrack
        ``broken`` is set when a(t) reaches b(t) (the scenario breaks down);
        the series are then truncated at the breakdown time.
    """
    if hasattr(history, "velocity_history"):
        history = history.velocity_history()
    times = np.asarray(history.times, float)
    a, b = params.a0, params.b0
    ts, as_, bs_ = [times[0]], [a], [b]

    def rates(t, ya, yb):
        ha, hb = math.exp(ya), math.exp(yb)
        return (_extreme_uz(history, t, ha, n_samples, "max") / ha,
                _extreme_uz(history, t, hb, n_samples, "min") / hb)

    ya, yb = math.log(a), math.log(b)
    for k in range(len(times) - 1):
        h = (times[k + 1] - times[k]) / substeps
        for m in range(substeps):
            t = times[k] + m * h
            ka = rates(t, ya, yb)
            kb = rates(t + h, ya + h * ka[0], yb + h * ka[1])
            ya += 0.5 * h * (ka[0] + kb[0])
            yb += 0.5 * h * (ka[1] + kb[1])
        if not (math.isfinite(ya) and math.isfinite(yb)) or ya >= yb:
            return ABTrack(np.array(ts), np.array(as_), np.array(bs_), True, float(times[k + 1]))
        ts.append(times[k + 1])
        as_.append(math.exp(ya))
        bs_.append(math.exp(yb))
    return ABTrack(np.array(ts), np.array(as_), np.array(bs_), False, float("nan"))
