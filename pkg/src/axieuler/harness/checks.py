"""Verification suites behind ``axieuler check <suite>``.

Each suite returns a JSON-ready report ``{"suite", "passed", "gates",
...}``; a gate is one measured quantity compared with its limit.  The
suites are small versions of the test-suite properties, sized to finish in
well under a minute each.
"""

from __future__ import annotations

import math
import time

import numpy as np

__all__ = ["SUITES", "run_suite", "UnknownSuiteError"]


class UnknownSuiteError(KeyError):
    pass


def _gate(name: str, value: float, limit: float, kind: str = "<=") -> dict:
    value = float(value)
    ok = (value <= limit) if kind == "<=" else (value >= limit) if kind == ">=" else \
        (value > limit)
    return {"name": name, "value": value, "limit": float(limit), "op": kind,
            "passed": bool(ok and math.isfinite(value))}


def _random_pairs(rng, n: int, min_sep: float = 0.2, margin: float = 0.05):
    """Interior target/source pairs in the disk, at least min_sep apart."""
    out = []
    while len(out) < n:
        p = rng.uniform([0.05, -0.95], [0.95, 0.95], size=(2, 2))
        if np.all(np.hypot(p[:, 0], p[:, 1]) < 1 - margin) and \
                np.hypot(*(p[0] - p[1])) > min_sep:
            out.append(p)
    a = np.array(out)
    return a[:, 0, 0], a[:, 0, 1], a[:, 1, 0], a[:, 1, 1]


# ---------------------------------------------------------------------------

def check_specfun(seed: int = 0) -> dict:
    from ..specfun import (asymptotic_table, f_all, f_oracle, f_prime_oracle,
                           f_second_oracle, verify_f_bounds)

    gates = []
    table = asymptotic_table()
    for name, row in table.items():
        gates.append(_gate(f"asymptotic {name}", row["rel_err"], 1e-3))
    s = np.logspace(-8, 8, 121)
    fast = f_all(s)
    ora = [f_oracle(s), f_prime_oracle(s), f_second_oracle(s)]
    gates.append(_gate("max |F_fast - F_oracle|", np.max(np.abs(fast[0] - ora[0])), 1e-8))
    for k in (1, 2):
        err = np.max(np.abs(fast[k] - ora[k]) / np.maximum(1.0, np.abs(ora[k])))
        gates.append(_gate(f"max rel |F^({k}) fast - oracle|", err, 1e-6))
    bounds = verify_f_bounds(np.logspace(-8, 8, 401))
    for k, c in enumerate(bounds["C"]):
        gates.append(_gate(f"fitted bound constant C{k}", c, 1e3))
    return {"asymptotics": table, "bounds": bounds, "gates": gates}


def check_kernels(seed: int = 0) -> dict:
    from ..greens import (hessian_g_over_rb, inversion_identities_check, kernel_gradients,
                          kernel_j, kernel_k, greens_g)

    rng = np.random.default_rng(seed)
    gates = []
    # inversion identities
    rad = np.sqrt(rng.uniform(0.01, 0.98, 1000))
    th = rng.uniform(-np.pi / 2, np.pi / 2, 1000)
    y = (rad * np.cos(th), rad * np.sin(th))
    res = inversion_identities_check(y)
    gates.append(_gate("inversion identities max residual",
                       max(float(np.max(np.abs(v))) for v in res), 1e-10))
    # boundary vanishing in both arguments
    ang = rng.uniform(-np.pi / 2, np.pi / 2, 200)
    bd = (np.cos(ang), np.sin(ang))
    rr = np.sqrt(rng.uniform(0.01, 0.8, 200))
    ta = rng.uniform(-np.pi / 2, np.pi / 2, 200)
    inner = (rr * np.cos(ta), rr * np.sin(ta))
    gates.append(_gate("|G(x, y on circle)|", np.max(np.abs(greens_g(inner, bd))), 1e-10))
    gates.append(_gate("|G(x on circle, y)|", np.max(np.abs(greens_g(bd, inner))), 1e-10))
    # analytic target gradients against centered differences
    rb, zb, r, z = _random_pairs(rng, 100)
    ev = kernel_gradients((rb, zb), (r, z))
    h = 1e-5
    fd = {
        "dK/drb": (kernel_k((rb + h, zb), (r, z)) - kernel_k((rb - h, zb), (r, z))) / (2 * h),
        "dK/dzb": (kernel_k((rb, zb + h), (r, z)) - kernel_k((rb, zb - h), (r, z))) / (2 * h),
        "dJ/drb": (kernel_j((rb + h, zb), (r, z)) - kernel_j((rb - h, zb), (r, z))) / (2 * h),
        "dJ/dzb": (kernel_j((rb, zb + h), (r, z)) - kernel_j((rb, zb - h), (r, z))) / (2 * h),
    }
    an = {"dK/drb": ev.grad_k[0], "dK/dzb": ev.grad_k[1],
          "dJ/drb": ev.grad_j[0], "dJ/dzb": ev.grad_j[1]}
    for key in fd:
        scale = np.maximum(np.abs(an[key]), 1e-3 * np.max(np.abs(an[key])))
        gates.append(_gate(f"{key} relative FD error", np.max(np.abs(an[key] - fd[key]) / scale),
                           1e-5))
    # fitted constant of the second-derivative bound
    hrr, hrz, hzz = hessian_g_over_rb((rb, zb), (r, z))
    mag = np.sqrt(hrr ** 2 + 2 * hrz ** 2 + hzz ** 2)
    d = np.hypot(rb - r, zb - z)
    bound = np.minimum(r / d ** 3, np.sqrt(r / rb) / d ** 2)
    c_fit = float(np.max(mag / bound))
    gates.append(_gate("second-derivative bound constant", c_fit, 1e3))
    return {"hessian_bound_constant": c_fit, "gates": gates}


def check_velocity(seed: int = 0) -> dict:
    from ..biot_savart import hill_velocity, velocity_field
    from ..grid import PolarGrid, ScalarFieldRZ, Symmetry
    from ..transport import OperatorSolver

    gates = []
    grid = PolarGrid(20, 20, Symmetry.NONE)
    w1 = ScalarFieldRZ.from_function(grid, lambda r, z: np.ones_like(r))
    pts = (np.array([0.3, 0.6, 0.9, 0.5]), np.array([0.2, -0.4, 0.1, 0.0]))
    ur, uz = velocity_field(pts, w1)
    hr, hz = hill_velocity(*pts)
    gates.append(_gate("w = 1 against the exact spherical-vortex velocity",
                       np.max(np.hypot(ur - hr, uz - hz)), 1e-5))
    # smooth odd field on both grid types
    odd = PolarGrid(20, 20, Symmetry.ODD)

    def f(r, z):
        return z * np.exp(-4 * ((r - 0.5) ** 2 + z * z))

    u_odd = OperatorSolver(odd)(ScalarFieldRZ.from_function(odd, f))
    u_none = OperatorSolver(grid)(ScalarFieldRZ.from_function(grid, f))
    gates.append(_gate("u^r exactly zero on the axis", np.max(np.abs(u_odd.ur[0])), 0.0))
    gates.append(_gate("u^z exactly zero on z = 0 (odd grid)", np.max(np.abs(u_odd.uz[:, 0])),
                       0.0))
    un = u_none.ur[-1] * np.cos(grid.phi) + u_none.uz[-1] * np.sin(grid.phi)
    wsup = float(np.max(np.abs(ScalarFieldRZ.from_function(grid, f).values)))
    gates.append(_gate("|u.n| on the circle / |w|", np.max(np.abs(un)) / wsup, 1e-3))
    t = (np.array([0.4, 0.7, 0.2]), np.array([0.3, 0.5, 0.1]))
    a = np.array(u_odd(*t))
    b = np.array(u_none(*t))
    gates.append(_gate("odd-grid vs full-grid velocity", np.max(np.abs(a - b)), 2e-3))
    return {"gates": gates}


def check_transport(seed: int = 0) -> dict:
    from ..diagnostics import level_set_measures
    from ..grid import PolarGrid, ScalarFieldRZ, Symmetry
    from ..transport import OperatorSolver, SimState, TimeStepSpec, simulate

    grid = PolarGrid(24, 24, Symmetry.ODD, 1.0, 1.0)

    def f(r, z):
        return np.tanh(6 * z) * np.exp(-6 * (r - 0.5) ** 2)

    w0 = ScalarFieldRZ.from_function(grid, f)
    solver = OperatorSolver(grid)
    state = simulate(SimState.initial(w0), TimeStepSpec(0.05), 0.3, solver)
    lam = [0.2 * w0.sup_norm, 0.5 * w0.sup_norm, 0.8 * w0.sup_norm]
    m0 = level_set_measures(w0, lam)
    m1 = level_set_measures(state.w, lam)
    gates = [
        _gate("sup |w| growth", state.w.sup_norm / w0.sup_norm - 1.0, 1e-12),
        _gate("odd symmetry: |w| on z = 0", np.max(np.abs(state.w.values[:, 0])), 0.0),
        _gate("level-set measure drift", np.max(np.abs(m1 - m0) / m0), 0.02),
    ]
    return {"t_end": state.t, "gates": gates}


def check_lemma41(seed: int = 0) -> dict:
    from ..diagnostics import key_integral_q, key_integral_rectangle, linear_fit, lemma41_residual
    from ..scenario import ScenarioParams, ks_initial_data, sample_sector, scenario_grid

    gates = []
    vals, logs = [], []
    for d in (1e-2, 1e-3, 1e-4):
        p = ScenarioParams(eps=d / 2, delta=d, bigN=0.1)
        x = (1.0 - d * math.sin(0.3), d * math.cos(0.3))
        vals.append(key_integral_q(x, 1.0, p))
        logs.append(math.log(1 / d))
    slope, _, r2 = linear_fit(logs, vals)
    gates.append(_gate("w = 1 integral slope in log(1/delta)", slope, 0.0, ">"))
    gates.append(_gate("w = 1 integral R^2", r2, 0.98, ">="))
    # Q(x) inside the disk is a rectangle in (1 - r, z): closed form
    p = ScenarioParams(eps=0.01, delta=0.02, bigN=0.1)
    q = key_integral_q((0.98, 0.02), 1.0, p)
    gates.append(_gate("w = 1 integral against the closed form",
                       abs(q - key_integral_rectangle(0.02, 0.1, 0.02, 0.1)), 1e-6))
    # bounded scaled residuals on a coarse scenario field
    sp = ScenarioParams(eps=0.02, delta=0.05, bigN=0.1, inner_exponent=2)
    w = ks_initial_data(sp, scenario_grid(32, 32))
    res = []
    for comp, tag in (("uz", "D1"), ("ur", "D2")):
        for xx in sample_sector(sp, 4, tag, radius=0.05, seed=seed):
            res.append(lemma41_residual(xx, w, sp, comp).residual_scaled)
    c = float(np.max(np.abs(res)))
    gates.append(_gate("max |scaled residual| / |w0|", c / w.sup_norm, 50.0))
    return {"q_values": vals, "log_inv_delta": logs, "residual_constant": c, "gates": gates}


def check_kato(seed: int = 0) -> dict:
    from ..diagnostics import kato_check
    from ..grid import PolarGrid, ScalarFieldRZ, Symmetry

    grid = PolarGrid(24, 24, Symmetry.ODD, 1.0, 1.0)
    w = ScalarFieldRZ.from_function(grid, lambda r, z: np.tanh(8 * z) * np.exp(
        -20 * (r - 0.8) ** 2))
    rep = kato_check(w, [0.1, 0.2, 0.4, 0.8])
    gates = [_gate("left side monotone in R", float(rep.monotone), 1.0, ">="),
             _gate("fitted constant", rep.c_fit, 1e3),
             _gate("left(0.1) / left(0.8)", rep.trend, 0.5)]
    return {"report": rep.as_dict(), "gates": gates}


SUITES = {
    "specfun": check_specfun,
    "kernels": check_kernels,
    "velocity": check_velocity,
    "transport": check_transport,
    "lemma41": check_lemma41,
    "kato": check_kato,
}


def run_suite(name: str, seed: int = 0) -> dict:
    """Run one suite; raises UnknownSuiteError for an unknown name."""
    if name not in SUITES:
        raise UnknownSuiteError(name)
    t0 = time.perf_counter()
    rep = SUITES[name](seed)
    rep["suite"] = name
    rep["passed"] = all(g["passed"] for g in rep["gates"])
    rep["seconds"] = round(time.perf_counter() - t0, 3)
    return rep
