"""Transport of w by its own velocity and particle trajectories.

One step of length dt from t_n uses two Biot-Savart solves:

1. u0 = u[w^n];
2. predictor w* by a semi-Lagrangian step with u0 frozen;
3. u1 = u[w*] approximates the velocity at t_n + dt;
4. w^{n+1}(x) = w^n(X(t_n; x, t_n + dt)), where the departure point X is
   traced backward with the velocity linear in time between u0 and u1.

The departure values are interpolated with clipped bicubic interpolation,
which keeps the new values inside the range of the surrounding nodes, so the
sup norm cannot grow.  The scheme is second order in time.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .biot_savart import VelocityOperator, VelocityQuadrature, velocity_field
from .greens import PointRZ
from .grid import PolarGrid, ScalarFieldRZ, VelocityField

__all__ = [
    "Integrator",
    "TimeStepSpec",
    "Particle",
    "SimState",
    "CFLError",
    "NumericalFailure",
    "ProviderGapError",
    "OperatorSolver",
    "DirectSolver",
    "FixedVelocity",
    "VelocityHistory",
    "cfl_number",
    "stable_dt",
    "advect_step",
    "simulate",
    "integrate_trajectory",
    "run",
]


class Integrator(str, Enum):
    RK2 = "RK2"
    RK4 = "RK4"

    @property
    def order(self) -> int:
        return 2 if self is Integrator.RK2 else 4


class CFLError(ValueError):
    """The step is longer than the CFL limit allows."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class NumericalFailure(RuntimeError):
    """Non-finite values appeared during a step."""


class ProviderGapError(LookupError):
    """A trajectory needs a velocity at a time the history does not cover."""


@dataclass(frozen=True)
class TimeStepSpec:
    """Time-step parameters.

    Attributes
    ----------
    dt : float
        Requested (maximum) step.
    integrator : Integrator
        Rule for tracing characteristics and particles.
    cfl_limit : float
        Largest allowed displacement per step, in local cells.
    interpolation : {"cubic_clipped", "cubic", "linear"}
        Departure-point interpolation.  The clipped default cannot create
        new extrema; plain cubic is smoother (used for order studies).
    """

    dt: float
    integrator: Integrator = Integrator.RK2
    cfl_limit: float = 4.0
    interpolation: str = "cubic_clipped"

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not self.cfl_limit > 0:
            raise ValueError("cfl_limit must be positive")
        if self.interpolation not in ("cubic_clipped", "cubic", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")


@dataclass(frozen=True)
class Particle:
    id: int
    initial: PointRZ
    current: PointRZ


@dataclass(frozen=True)
class SimState:
    """Immutable simulation state."""

    t: float
    w: ScalarFieldRZ
    particles: tuple = ()

    @classmethod
    def initial(cls, w: ScalarFieldRZ, points: Sequence = (), t: float = 0.0) -> "SimState":
        parts = []
        for k, p in enumerate(points):
            p = PointRZ.checked(p[0], p[1])
            parts.append(Particle(k, p, p))
        return cls(float(t), w, tuple(parts))


# ---------------------------------------------------------------------------
# Velocity solvers
# ---------------------------------------------------------------------------

_OPERATORS: "OrderedDict[tuple, VelocityOperator]" = OrderedDict()
_OPERATOR_BUDGET = 2.5e9


def _cached_operator(grid: PolarGrid, quad: VelocityQuadrature) -> VelocityOperator:
    key = (grid, quad)
    op = _OPERATORS.get(key)
    if op is not None:
        _OPERATORS.move_to_end(key)
        return op
    n = grid.size
    need = 2 * n * n * (8 if 16 * n * n <= VelocityOperator.float64_budget else 4)
    while _OPERATORS and sum(o.nbytes for o in _OPERATORS.values()) + need > _OPERATOR_BUDGET:
        _OPERATORS.popitem(last=False)
    op = VelocityOperator(grid, quad)
    _OPERATORS[key] = op
    return op


class OperatorSolver:
    """Nodal velocity through a cached dense `VelocityOperator`."""

    def __init__(self, grid: PolarGrid, quad: VelocityQuadrature | None = None):
        self.grid = grid
        self.quad = quad or VelocityQuadrature()
        self._op = None

    @property
    def operator(self) -> VelocityOperator:
        if self._op is None:
            self._op = _cached_operator(self.grid, self.quad)
        return self._op

    def __call__(self, w: ScalarFieldRZ) -> VelocityField:
        if not np.any(w.values):
            z = np.zeros(self.grid.shape)
            return VelocityField(self.grid, z, z)
        return self.operator.apply(w)


class DirectSolver:
    """Nodal velocity by per-node quadrature (no stored matrix)."""

    def __init__(self, grid: PolarGrid, quad: VelocityQuadrature | None = None):
        self.grid = grid
        self.quad = quad or VelocityQuadrature()

    def __call__(self, w: ScalarFieldRZ) -> VelocityField:
        r, z = self.grid.nodes
        ur, uz = velocity_field((r.ravel(), z.ravel()), w, self.quad)
        return VelocityField(self.grid, ur.reshape(self.grid.shape), uz.reshape(self.grid.shape))


class FixedVelocity:
    """Prescribed velocity, independent of w (kinematic transport)."""

    def __init__(self, u: VelocityField):
        self.u = u

    def __call__(self, w: ScalarFieldRZ) -> VelocityField:
        return self.u


# ---------------------------------------------------------------------------
# Characteristics
# ---------------------------------------------------------------------------

def _fold(r, z, odd):
    """Map points back into the stored closed domain.

    r < 0 is reflected through the axis; points beyond the unit circle are
    projected radially.  Odd grids keep z < 0 (the interpolants reflect).
    """
    r = np.abs(r)
    rho = np.hypot(r, z)
    scale = np.where(rho > 1.0, 1.0 / np.where(rho > 0, rho, 1.0), 1.0)
    return r * scale, z * scale


def _vel_at(u0: VelocityField, u1: VelocityField | None, theta: float, r, z):
    r, z = _fold(r, z, u0.grid.odd)
    a_r, a_z = u0(r, z)
    if u1 is None or theta == 0.0:
        return a_r, a_z
    b_r, b_z = u1(r, z)
    return (1.0 - theta) * a_r + theta * b_r, (1.0 - theta) * a_z + theta * b_z


def _trace(r, z, dt, u0, u1, integrator, forward):
    """One RK step of dx/dt = u over [t_n, t_n + dt].

    Velocity is linear in time from u0 (t_n) to u1 (t_n + dt); u1 = None
    freezes it.  ``forward=False`` traces from t_n + dt back to t_n.
    """
    sgn = 1.0 if forward else -1.0
    th0, th1 = (0.0, 1.0) if forward else (1.0, 0.0)
    thm = 0.5
    if integrator is Integrator.RK2:
        k1 = _vel_at(u0, u1, th0, r, z)
        rm = r + sgn * 0.5 * dt * k1[0]
        zm = z + sgn * 0.5 * dt * k1[1]
        k2 = _vel_at(u0, u1, thm, rm, zm)
        return r + sgn * dt * k2[0], z + sgn * dt * k2[1]
    k1 = _vel_at(u0, u1, th0, r, z)
    k2 = _vel_at(u0, u1, thm, r + sgn * 0.5 * dt * k1[0], z + sgn * 0.5 * dt * k1[1])
    k3 = _vel_at(u0, u1, thm, r + sgn * 0.5 * dt * k2[0], z + sgn * 0.5 * dt * k2[1])
    k4 = _vel_at(u0, u1, th1, r + sgn * dt * k3[0], z + sgn * dt * k3[1])
    dr = (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
    dz = (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
    return r + sgn * dt * dr, z + sgn * dt * dz


def _departure_values(w: ScalarFieldRZ, dt, u0, u1, integrator, method) -> np.ndarray:
    r, z = w.grid.nodes
    rd, zd = _trace(r, z, dt, u0, u1, integrator, forward=False)
    rd, zd = _fold(rd, zd, w.grid.odd)
    if not (np.all(np.isfinite(rd)) and np.all(np.isfinite(zd))):
        raise NumericalFailure("non-finite departure points")
    vals = w(rd, zd, method)
    if w.grid.odd:
        # nodes on the symmetry plane stay there exactly
        vals[:, 0] = 0.0
    if not np.all(np.isfinite(vals)):
        raise NumericalFailure("non-finite interpolated values")
    return vals


def cfl_number(u: VelocityField, dt: float) -> float:
    """Largest displacement per step measured in local cells."""
    return float(dt * np.max(np.hypot(u.ur, u.uz) / u.grid.cell_size))


def stable_dt(u: VelocityField, spec: TimeStepSpec) -> float:
    """``spec.dt`` reduced so that the CFL number does not exceed the limit."""
    rate = float(np.max(np.hypot(u.ur, u.uz) / u.grid.cell_size))
    if rate <= 0.0:
        return spec.dt
    return min(spec.dt, spec.cfl_limit / rate)


def _advance_particles(particles, dt, u0, u1, integrator, odd):
    if not particles:
        return particles
    r = np.array([p.current.r for p in particles])
    z = np.array([p.current.z for p in particles])
    rn, zn = _trace(r, z, dt, u0, u1, integrator, forward=True)
    rn, zn = _fold(rn, zn, odd)
    return tuple(replace(p, current=PointRZ(float(a), float(b)))
                 for p, a, b in zip(particles, rn, zn))


def advect_step(state: SimState, spec: TimeStepSpec, quad: VelocityQuadrature | None = None,
                solver: Callable | None = None, u0: VelocityField | None = None,
                dt: float | None = None) -> SimState:
    """Advance the state by one step.

    Parameters
    ----------
    state : SimState
    spec : TimeStepSpec
    quad : VelocityQuadrature, optional
        Used to build the default solver.
    solver : callable, optional
        Maps a ScalarFieldRZ to its nodal VelocityField; defaults to a
        cached `OperatorSolver`.
    u0 : VelocityField, optional
        Velocity of ``state.w`` if already known.
    dt : float, optional
        Step length (defaults to ``spec.dt``).

    Raises
    ------
    CFLError
        If the step exceeds the CFL limit (carries a suggested dt).
    NumericalFailure
        If non-finite values appear.
    """
    w = state.w
    dt = spec.dt if dt is None else float(dt)
    if not np.any(w.values) and not state.particles:
        return replace(state, t=state.t + dt)
    solver = solver or OperatorSolver(w.grid, quad)
    if u0 is None:
        u0 = solver(w)
    limit = stable_dt(u0, replace(spec, dt=max(dt, spec.dt)))
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"dt={dt:.3g} exceeds the CFL limit; use dt <= {limit:.3g}", limit)
    w_star = w.with_values(_departure_values(w, dt, u0, None, spec.integrator,
                                                   spec.interpolation))
    u1 = solver(w_star)
    w_new = w.with_values(_departure_values(w, dt, u0, u1, spec.integrator,
                                                  spec.interpolation))
    parts = _advance_particles(state.particles, dt, u0, u1, spec.integrator, w.grid.odd)
    return SimState(state.t + dt, w_new, parts)


def simulate(state: SimState, spec: TimeStepSpec, t_end: float, solver: Callable,
             observer: Callable | None = None, max_steps: int = 100000):
    """Advance until ``t_end`` with CFL-limited steps.

    ``observer(state, u)`` is called before every step and once at the end,
    with ``u`` the velocity of ``state.w``.  Returns the final state.
    """
    eps = 1e-12 * max(1.0, abs(t_end))
    steps = 0
    while True:
        u = solver(state.w)
        if observer is not None:
            observer(state, u)
        if state.t >= t_end - eps:
            return state
        if steps >= max_steps:
            raise NumericalFailure(f"step budget of {max_steps} exhausted at t={state.t}")
        dt = min(stable_dt(u, spec), t_end - state.t)
        state = advect_step(state, spec, solver=solver, u0=u, dt=dt)
        if abs(state.t - t_end) <= eps:
            state = replace(state, t=float(t_end))
        steps += 1


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

class VelocityHistory:
    """Velocity snapshots at increasing times, linear in between."""

    def __init__(self, times: Sequence[float], fields: Sequence[VelocityField]):
        if len(times) != len(fields) or not len(times):
            raise ValueError("need matching, nonempty times and fields")
        t = np.asarray(times, float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("snapshot times must increase")
        self.times = t
        self.fields = list(fields)

    @classmethod
    def steady(cls, u: VelocityField) -> "VelocityHistory":
        return cls([-math.inf], [u])

    def bracket(self, t: float):
        """(u_a, u_b, theta) with u(t) = (1-theta) u_a + theta u_b."""
        if len(self.times) == 1 and self.times[0] == -math.inf:
            return self.fields[0], None, 0.0
        tol = 1e-12 * max(1.0, abs(t))
        if t < self.times[0] - tol or t > self.times[-1] + tol:
            raise ProviderGapError(f"no velocity snapshot covers t={t}")
        k = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2)) \
            if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return self.fields[0], None, 0.0
        ta, tb = self.times[k], self.times[k + 1]
        return self.fields[k], self.fields[k + 1], float(np.clip((t - ta) / (tb - ta), 0, 1))

    def __call__(self, t, r, z):
        ua, ub, th = self.bracket(t)
        return _vel_at(ua, ub, th, r, z)


def integrate_trajectory(x0, t_span, provider: VelocityHistory, dt: float,
                         integrator: Integrator = Integrator.RK4):
    """Integrate dPhi/dt = u(Phi, t) from ``t_span[0]`` to ``t_span[1]``.

    Parameters
    ----------
    x0 : PointRZ or (r, z)
    t_span : (t0, t1)
        ``t1 < t0`` integrates backward.
    provider : VelocityHistory
    dt : float
        Maximum step size.
    integrator : Integrator

    Returns
    -------
    times, r, z : ndarray

    Raises
    ------
    ProviderGapError
        If the history does not cover the requested time span.
    """
    x0 = PointRZ.checked(x0[0], x0[1])
    integrator = Integrator(integrator)
    t0, t1 = float(t_span[0]), float(t_span[1])
    n = max(1, int(math.ceil(abs(t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / n
    odd = provider.fields[0].grid.odd
    ts = t0 + h * np.arange(n + 1)
    rs = np.empty(n + 1)
    zs = np.empty(n + 1)
    r, z = x0.r, x0.z
    rs[0], zs[0] = r, z
    for k in range(n):
        t = ts[k]

        def vel(theta, rr, zz):
            return provider(t + theta * h, rr, zz)

        if integrator is Integrator.RK2:
            k1 = vel(0.0, r, z)
            k2 = vel(0.5, r + 0.5 * h * k1[0], z + 0.5 * h * k1[1])
            dr, dz = k2
        else:
            k1 = vel(0.0, r, z)
            k2 = vel(0.5, r + 0.5 * h * k1[0], z + 0.5 * h * k1[1])
            k3 = vel(0.5, r + 0.5 * h * k2[0], z + 0.5 * h * k2[1])
            k4 = vel(1.0, r + h * k3[0], z + h * k3[1])
            dr = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
            dz = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
        r, z = _fold(np.asarray(r + h * dr), np.asarray(z + h * dz), odd)
        r, z = float(r), float(z)
        rs[k + 1], zs[k + 1] = r, z
    return ts, rs, zs


def run(config, out_dir=None):
    """Execute a configured run; see `axieuler.harness.runner.run_config`."""
    from .harness.runner import run_config

    return run_config(config, out_dir)
