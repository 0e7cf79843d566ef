"""Diagnostics of simulation output.

Everything here is a pure function of fields, velocity histories or stored
series: gradient sups, the near-boundary integral appearing in the velocity
expansion at e1, expansion residuals, the radially weighted Kato-type bound,
axis-approach rates and double-exponential growth fits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .biot_savart import VelocityQuadrature, velocity_at, velocity_gradient_at
from .greens import PointRZ
from .grid import PolarGrid, ScalarFieldRZ, VelocityField
from .scenario import ScenarioParams, region_membership

__all__ = [
    "grad_w_sup",
    "velocity_gradient_sup",
    "level_set_measures",
    "holder_seminorm",
    "key_integral_q",
    "key_integral_rectangle",
    "ExpansionDomainError",
    "ExpansionResidual",
    "expansion_main_term",
    "lemma41_residual",
    "KatoReport",
    "kato_check",
    "kato_samples",
    "AxisRateReport",
    "axis_rate_check",
    "axis_quotient",
    "exp_rate_fit",
    "GrowthSeries",
    "DoubleExpFit",
    "double_exp_fit",
    "linear_fit",
]


# ---------------------------------------------------------------------------
# Field norms
# ---------------------------------------------------------------------------

def grad_w_sup(w: ScalarFieldRZ) -> float:
    """Max over nodes of the finite-difference |grad w|.

    Interior nodes use central differences; nodes on the circle use the
    ghost layer extrapolated from inside (one-sided in effect).  The pole
    node, where polar differences are undefined, is skipped.
    """
    dr, dz = w.gradient()
    mag = np.hypot(dr, dz)
    return float(np.nanmax(mag)) if np.any(np.isfinite(mag)) else 0.0


def velocity_gradient_sup(u: VelocityField, R: float = math.inf) -> float:
    """Max over nodes with r < R of the Frobenius norm of grad u."""
    (a, b), (c, d) = u.gradient()
    mag = np.sqrt(a * a + b * b + c * c + d * d)
    r, _ = u.grid.nodes
    mask = (r < R) & np.isfinite(mag)
    return float(mag[mask].max()) if mask.any() else 0.0


def _cell_samples(grid: PolarGrid, m: int):
    """Midpoint sub-samples of every cell: (i, j, alpha, beta, weight r dr dz)."""
    t = (np.arange(m) + 0.5) / m
    rho, phi = grid.rho, grid.phi
    i = np.arange(grid.n_rho - 1)[:, None, None, None]
    j = np.arange(grid.n_phi - 1)[None, :, None, None]
    al = t[None, None, :, None]
    be = t[None, None, None, :]
    dr = (rho[1:] - rho[:-1])[:, None, None, None]
    dp = (phi[1:] - phi[:-1])[None, :, None, None]
    rr = rho[:-1][:, None, None, None] + al * dr
    pp = phi[:-1][None, :, None, None] + be * dp
    weight = rr * np.cos(pp) * rr * dr * dp / (m * m)
    return i, j, al, be, np.maximum(weight, 0.0)


def level_set_measures(w: ScalarFieldRZ, thresholds: Sequence[float], m: int = 4) -> np.ndarray:
    """Measures of {w > lambda} with respect to r dr dz over the stored domain.

    The field is the bilinear (rho, phi) interpolant, sampled at m x m
    midpoints per cell.
    """
    i, j, al, be, wt = _cell_samples(w.grid, m)
    v = w.values
    val = ((1 - al) * (1 - be) * v[i, j] + al * (1 - be) * v[i + 1, j]
           + (1 - al) * be * v[i, j + 1] + al * be * v[i + 1, j + 1])
    wt = np.broadcast_to(wt, val.shape)
    return np.array([float(wt[val > lam].sum()) for lam in thresholds])


def holder_seminorm(w: ScalarFieldRZ, alpha: float = 0.5) -> float:
    """Discrete Hoelder seminorm over node pairs at dyadic index offsets."""
    r, z = w.grid.nodes
    v = w.values
    best = 0.0
    n_rho, n_phi = w.grid.shape
    for axis, n in ((0, n_rho), (1, n_phi)):
        k = 1
        while k < n:
            sl_a = [slice(None)] * 2
            sl_b = [slice(None)] * 2
            sl_a[axis] = slice(0, n - k)
            sl_b[axis] = slice(k, n)
            dv = np.abs(v[tuple(sl_a)] - v[tuple(sl_b)])
            d = np.hypot(r[tuple(sl_a)] - r[tuple(sl_b)], z[tuple(sl_a)] - z[tuple(sl_b)])
            ok = d > 0
            if ok.any():
                best = max(best, float(np.max(dv[ok] / d[ok] ** alpha)))
            k *= 2
    return best


# ---------------------------------------------------------------------------
# The integral over Q(x) near e1
# ---------------------------------------------------------------------------

def key_integral_rectangle(a1: float, a2: float, z1: float, z2: float) -> float:
    """Closed form of int int a z / (a^2 + z^2)^2 da dz over a rectangle.

    An antiderivative is -log(a^2 + z^2) / 4.
    """
    def F(a, z):
        return -0.25 * math.log(a * a + z * z)

    return F(a2, z2) - F(a1, z2) - F(a2, z1) + F(a1, z1)


def _graded_nodes(lo: float, hi: float, order: int = 8, ratio: float = 2.0):
    """Gauss nodes on panels that grow geometrically away from ``lo``."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    x, wq = np.polynomial.legendre.leggauss(order)
    h0 = max(lo, (hi - lo) * 1e-12)
    edges = [lo]
    h = h0
    while edges[-1] < hi:
        edges.append(min(hi, edges[-1] + h))
        h = max(h * ratio, edges[-1] - lo)
    e = np.array(edges)
    a, b = e[:-1, None], e[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    wts = 0.5 * (b - a) * wq[None, :]
    return pts.ravel(), wts.ravel()


def key_integral_q(x, w, params: ScenarioParams, order: int = 8) -> float:
    """int over Q(x) of (1-r) z / ((1-r)^2 + z^2)^2 w(r, z) dr dz.

    Q(x) = {1 - N < r < rb, zb < z < N} within the disk.  In a = 1 - r the
    integrand is a z / (a^2 + z^2)^2, singular only at e1, which Q avoids;
    the quadrature uses panels graded toward a = 1 - rb and z = zb.

    Parameters
    ----------
    x : PointRZ or (r, z)
    w : ScalarFieldRZ, callable (r, z) -> values, or a constant
    params : ScenarioParams

    Returns
    -------
    float
        0 when Q(x) is empty.
    """
    rb, zb = float(x[0]), float(x[1])
    N = params.bigN
    a_lo = 1.0 - rb
    if not (rb < 1.0 and rb > 1.0 - N and zb < N and zb >= 0.0):
        return 0.0
    # the disk constraint takes over at z = sqrt(1 - rb^2): break panels there
    zc = math.sqrt(max(1.0 - rb * rb, 0.0))
    if zb < zc < N:
        z1, w1 = _graded_nodes(max(zb, 0.0), zc, order)
        z2, w2 = _graded_nodes(zc, N, order)
        zs, zw = np.concatenate([z1, z2]), np.concatenate([w1, w2])
    else:
        zs, zw = _graded_nodes(max(zb, 0.0), N, order)
    R_list, Z_list, W_list = [], [], []
    for zk, wk in zip(zs, zw):
        # disk: (1 - a)^2 + z^2 <= 1  <=>  a >= 1 - sqrt(1 - z^2)
        lo = max(a_lo, 1.0 - math.sqrt(1.0 - zk * zk))
        if lo >= N:
            continue
        a, wa = _graded_nodes(lo, N, order)
        R_list.append(1.0 - a)
        Z_list.append(np.full_like(a, zk))
        W_list.append(wk * wa * a * zk / (a * a + zk * zk) ** 2)
    if not R_list:
        return 0.0
    R = np.concatenate(R_list)
    Z = np.concatenate(Z_list)
    W = np.concatenate(W_list)
    if isinstance(w, ScalarFieldRZ):
        vals = w(R, Z, "cubic")
    elif callable(w):
        vals = np.asarray(w(R, Z), float)
    else:
        vals = float(w)
    return float(np.sum(W * vals))


# ---------------------------------------------------------------------------
# Velocity expansion at e1
# ---------------------------------------------------------------------------

class ExpansionDomainError(ValueError):
    """The point lies outside the sector or the ball around e1."""


@dataclass(frozen=True)
class ExpansionResidual:
    x: PointRZ
    component: str
    main_term: float
    full_value: float
    residual_scaled: float
    q_integral: float


UR_SIGN = -1.0


def expansion_main_term(x, q: float, component: str, ur_sign: float = UR_SIGN) -> float:
    """Leading term of u^z (component "uz") or u^r ("ur") near e1.

    u^z ~ -(4/pi) zb Q and u^r ~ ur_sign (4/pi) (1 - rb) Q.  The default
    ``ur_sign = -1`` is the sign compatible with incompressibility at e1.
    """
    rb, zb = float(x[0]), float(x[1])
    if component == "uz":
        return -4.0 / math.pi * zb * q
    if component == "ur":
        return ur_sign * 4.0 / math.pi * (1.0 - rb) * q
    raise ValueError("component must be 'uz' or 'ur'")


def lemma41_residual(x, w: ScalarFieldRZ, params: ScenarioParams, component: str = "uz",
                     quad: VelocityQuadrature | None = None, ur_sign: float = UR_SIGN,
                     radius: float | None = None, full_value: float | None = None
                     ) -> ExpansionResidual:
    """Compare a velocity component with its leading term near e1.

    Parameters
    ----------
    x : point in D1 (for "uz") or D2 (for "ur") with |x - e1| < radius
    w : ScalarFieldRZ
    params : ScenarioParams
    component : {"uz", "ur"}
    radius : float, optional
        Ball radius (default ``params.delta``).
    full_value : float, optional
        Precomputed velocity component (skips the Biot-Savart evaluation).

    Raises
    ------
    ExpansionDomainError
        If x is outside the sector or the ball.
    """
    rb, zb = float(x[0]), float(x[1])
    radius = params.delta if radius is None else radius
    tag = "D1" if component == "uz" else "D2"
    if math.hypot(rb - 1.0, zb) >= radius or not region_membership((rb, zb), tag, params):
        raise ExpansionDomainError(f"x = ({rb}, {zb}) is not in {tag} within {radius} of e1")
    q = key_integral_q((rb, zb), w, params)
    main = expansion_main_term((rb, zb), q, component, ur_sign)
    if full_value is None:
        v = velocity_at((rb, zb), w, quad)
        full_value = v.uz if component == "uz" else v.ur
    scale = zb if component == "uz" else (1.0 - rb)
    return ExpansionResidual(PointRZ(rb, zb), component, float(main), float(full_value),
                             float((full_value - main) / scale), float(q))


# ---------------------------------------------------------------------------
# Kato-type bound
# ---------------------------------------------------------------------------

@dataclass
class KatoReport:
    radii: np.ndarray
    left: np.ndarray
    holder: float
    w_sup: float
    log_term: float
    ratio_shape: np.ndarray
    ratio_linear: np.ndarray
    c_fit: float
    trend: float
    monotone: bool

    @property
    def passed(self) -> bool:
        return bool(self.monotone and np.all(np.isfinite(self.ratio_shape)))

    def as_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "left": self.left.tolist(),
                "holder": self.holder, "w_sup": self.w_sup, "log_term": self.log_term,
                "ratio_shape": self.ratio_shape.tolist(),
                "ratio_linear": self.ratio_linear.tolist(), "c_fit": self.c_fit,
                "trend": self.trend, "monotone": self.monotone, "passed": self.passed}


def kato_samples(grid: PolarGrid, radii: Sequence[float], per_band: int = 24,
                 seed: int = 0, margin_cells: float = 1.5) -> np.ndarray:
    """Interior sample points stratified in r by the bands of ``radii``.

    Points keep a distance of ``margin_cells`` boundary cells from the circle.
    """
    rng = np.random.default_rng(seed)
    edges = [0.0] + sorted(float(R) for R in radii)
    if edges[-1] < 1.0:
        edges.append(1.0)
    margin = margin_cells * float(grid.rho[-1] - grid.rho[-2])
    zmin = 0.0 if grid.odd else -1.0
    pts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = 0
        while k < per_band:
            r = rng.uniform(max(lo, 1e-3), hi)
            zmax = math.sqrt(max((1.0 - margin) ** 2 - r * r, 0.0))
            if zmax <= 0:
                continue
            z = rng.uniform(max(zmin, -zmax), zmax)
            pts.append((r, z))
            k += 1
    return np.array(pts)


def kato_check(w: ScalarFieldRZ, radii: Sequence[float], w0_sup: float | None = None,
               samples: np.ndarray | None = None, quad: VelocityQuadrature | None = None,
               alpha: float = 0.5, gradients: np.ndarray | None = None) -> KatoReport:
    """Measured sup |grad u| on D_R = {r < R} against the Kato-type shape.

    left(R) is the max of the Frobenius norm of `velocity_gradient_at` over
    the sample points with r < R, so it is monotone in R by construction.
    The bound shape is (1 + (R + R^3) L) |w0|, with
    L = log(1 + |w|_{C^alpha} / |w0|); the reported constant is the
    smallest C making the bound hold at every R.

    Returns
    -------
    KatoReport
        ``trend`` is left(min R) / left(max R).
    """
    radii = np.asarray(sorted(radii), float)
    w_sup = w.sup_norm if w0_sup is None else float(w0_sup)
    if samples is None:
        samples = kato_samples(w.grid, radii)
    if gradients is None:
        gradients = np.array([np.linalg.norm(velocity_gradient_at((r, z), w, quad))
                              for r, z in samples])
    holder = holder_seminorm(w, alpha)
    left = np.array([float(gradients[samples[:, 0] < R].max()) if np.any(samples[:, 0] < R)
                     else 0.0 for R in radii])
    if w_sup == 0.0:
        zero = np.zeros_like(radii)
        return KatoReport(radii, left, holder, 0.0, 0.0, zero, zero, 0.0, 0.0,
                          bool(np.all(np.diff(left) >= 0)))
    L = math.log(1.0 + (w_sup + holder) / w_sup)
    shape = (1.0 + (radii + radii ** 3) * L) * w_sup
    ratio_t = left / shape
    ratio_l = left / (radii * (1.0 + L) * w_sup)
    trend = float(left[0] / left[-1]) if left[-1] > 0 else 0.0
    return KatoReport(radii, left, holder, w_sup, L, ratio_t, ratio_l,
                      float(np.max(ratio_t)), trend, bool(np.all(np.diff(left) >= 0)))


# ---------------------------------------------------------------------------
# Trajectories near the axis
# ---------------------------------------------------------------------------

@dataclass
class AxisRateReport:
    rates: np.ndarray
    max_rate: float
    touched_axis: list

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rate) and not self.touched_axis)


def axis_rate_check(trajectories) -> AxisRateReport:
    """Smallest C with r(t) >= r(0) exp(-C t) along each path.

    Parameters
    ----------
    trajectories : iterable of (times, r, z)
        Paths with r(0) > 0 and increasing times starting at t0.
    """
    rates, touched = [], []
    for k, (t, r, _z) in enumerate(trajectories):
        t = np.asarray(t, float)
        r = np.asarray(r, float)
        if r[0] <= 0:
            raise ValueError("paths must start off the axis")
        if np.any(r <= 0):
            touched.append(k)
            rates.append(math.inf)
            continue
        dt = t[1:] - t[0]
        c = (math.log(r[0]) - np.log(r[1:])) / dt
        rates.append(max(0.0, float(np.max(c))) if c.size else 0.0)
    rates = np.array(rates)
    return AxisRateReport(rates, float(rates.max()) if rates.size else 0.0, touched)


def axis_quotient(w: ScalarFieldRZ) -> float:
    """sup over off-axis nodes of |w(r, z) - w(0, z)| / r."""
    r, z = w.grid.nodes
    axis_vals = w(np.zeros_like(z), z, "cubic")
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.abs(w.values - axis_vals) / r
    q = q[r > 0]
    return float(q.max()) if q.size else 0.0


def linear_fit(x, y):
    """Least-squares line; returns (slope, intercept, R^2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # constant data: ss_tot is rounding noise and R^2 is meaningless
    if ss_tot <= 1e-24 * max(float(np.sum(y * y)), 1e-300):
        return float(slope), float(icpt), 1.0
    r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(icpt), r2


def exp_rate_fit(times, series):
    """Exponential rate: slope of log(series) against t, with R^2."""
    s = np.asarray(series, float)
    if np.any(s <= 0):
        raise ValueError("series must be positive")
    return linear_fit(times, np.log(s))


# ---------------------------------------------------------------------------
# Growth series
# ---------------------------------------------------------------------------

@dataclass
class GrowthSeries:
    """Raw gradient series; fits are recomputed from these arrays."""

    times: np.ndarray
    grad_w_sup: np.ndarray
    w0_sup: float
    grad_u_sup_by_R: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.grad_w_sup = np.asarray(self.grad_w_sup, float)
        if self.times.shape != self.grad_w_sup.shape:
            raise ValueError("times and grad_w_sup lengths differ")
        for R, v in self.grad_u_sup_by_R.items():
            if len(v) != len(self.times):
                raise ValueError(f"grad_u_sup series for R={R} has the wrong length")

    @property
    def loglog(self) -> np.ndarray:
        return np.log1p(np.log1p(self.grad_w_sup / self.w0_sup))

    @property
    def loglog_fit(self):
        return linear_fit(self.times, self.loglog)


@dataclass
class DoubleExpFit:
    slope: float
    intercept: float
    r2: float
    n: int
    monotone: bool
    upper_slope: float
    upper_r2: float
    warning: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def double_exp_fit(series: GrowthSeries) -> DoubleExpFit:
    """Fit log log(|grad w| / |w0|) linearly in t.

    The slope is the inner exponential rate of a double-exponential law.
    The same fit applied to log(1 + log(1 + |grad w| / |w0|)), the shape of
    the upper bound, is reported alongside.

    Raises
    ------
    ValueError
        With fewer than 5 samples or when |grad w| <= |w0| somewhere.
    """
    g = series.grad_w_sup / series.w0_sup
    if g.size < 5:
        raise ValueError("need at least 5 samples")
    if np.any(g <= 1.0):
        raise ValueError("log log needs |grad w| > |w0| at every sample")
    monotone = bool(np.all(np.diff(series.grad_w_sup) >= 0))
    warning = "" if monotone else "series is not monotone"
    if warning:
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    s, c, r2 = linear_fit(series.times, np.log(np.log(g)))
    su, _, r2u = series.loglog_fit
    return DoubleExpFit(s, c, r2, int(g.size), monotone, su, r2u, warning)
