"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (visible without -s)
and then asserts.  The heavy cases (6 and 8) run for several minutes.
"""

import math
import time

import numpy as np
import pytest

from axieuler.biot_savart import velocity_field
from axieuler.diagnostics import (GrowthSeries, double_exp_fit, kato_check, key_integral_q,
                                  lemma41_residual, level_set_measures, linear_fit)
from axieuler.greens import (corrector_h, greens_g, hessian_g_over_rb,
                             inversion_identities_check, kernel_gradients, kernel_j, kernel_k)
from axieuler.grid import PolarGrid, ScalarFieldRZ, Symmetry
from axieuler.harness.config import parse_config
from axieuler.harness.io import read_snapshot, write_snapshot
from axieuler.harness.postprocess import ab_report, growth_report, load_diagnostics
from axieuler.harness.runner import run_config
from axieuler.scenario import (ScenarioParams, ks_initial_data, sample_sector,
                               scenario_grid)
from axieuler.specfun import LOG8_MINUS_2, f_all, f_oracle, f_prime_oracle, f_second_oracle
from axieuler.transport import OperatorSolver, SimState, TimeStepSpec, simulate


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; "
                  f"{time.perf_counter() - t0:.1f} s)")
    return emit


def _disk_points(rng, n, rmin=0.1, rmax=0.98):
    rad = np.sqrt(rng.uniform(rmin ** 2, rmax ** 2, n))
    th = rng.uniform(-np.pi / 2, np.pi / 2, n)
    return rad * np.cos(th), rad * np.sin(th)


def _separated_pairs(rng, n, min_sep=0.2, margin=0.05):
    out = []
    while len(out) < n:
        p = rng.uniform([0.05, -0.95], [0.95, 0.95], size=(2, 2))
        if np.all(np.hypot(p[:, 0], p[:, 1]) < 1 - margin) and \
                np.hypot(*(p[0] - p[1])) > min_sep:
            out.append(p)
    a = np.array(out)
    return (a[:, 0, 0], a[:, 0, 1]), (a[:, 1, 0], a[:, 1, 1])


# ---------------------------------------------------------------------------
# 1. special-function asymptotics
# ---------------------------------------------------------------------------

def test_criterion_1_specfun_asymptotics(report):
    t0 = time.perf_counter()
    small = np.logspace(-8, -4, 5)
    err = np.abs(f_all(small)[0] + 0.5 * np.log(small) - LOG8_MINUS_2)
    scale = small * np.log(1 / small)
    rate, _, _ = linear_fit(np.log(scale), np.log(err))
    big = np.logspace(4, 8, 5)
    f0, f1, f2 = f_all(np.array([1e-8, 1e8]))
    lim = {
        "F s^1.5": np.max(np.abs(f_all(big)[0] * big ** 1.5 / (math.pi / 2) - 1)),
        "F' s": abs(f1[0] * 1e-8 / -0.5 - 1),
        "F' s^2.5": abs(f1[1] * 1e8 ** 2.5 / (-3 * math.pi / 4) - 1),
        "F'' s^2": abs(f2[0] * 1e-16 / 0.5 - 1),
        "F'' s^3.5": abs(f2[1] * 1e8 ** 3.5 / (15 * math.pi / 8) - 1),
    }
    ok_rate = bool(np.all(np.diff(err) > 0) and 0.9 < rate < 1.1 and np.all(err <= scale))
    ok = ok_rate and max(lim.values()) <= 1e-3 and time.perf_counter() - t0 < 10
    report(1, ok, f"remainder rate {rate:.3f} in s log(1/s), worst limit rel err "
           f"{max(lim.values()):.1e}", t0)
    assert ok_rate, (err, rate)
    assert all(v <= 1e-3 for v in lim.values()), lim


# ---------------------------------------------------------------------------
# 2. fast / oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_2_fast_oracle(report):
    t0 = time.perf_counter()
    s = np.logspace(-8, 8, 1000)
    fast = f_all(s)
    ora = (f_oracle(s), f_prime_oracle(s), f_second_oracle(s))
    e0 = float(np.max(np.abs(fast[0] - ora[0])))
    # derivative tolerance relative to max(1, |F^(k)|)
    e1, e2 = (float(np.max(np.abs(fast[k] - ora[k]) / np.maximum(1.0, np.abs(ora[k]))))
              for k in (1, 2))
    dt = time.perf_counter() - t0
    ok = e0 <= 1e-8 and e1 <= 1e-6 and e2 <= 1e-6 and dt < 60
    report(2, ok, f"F {e0:.1e}, F' {e1:.1e}, F'' {e2:.1e}", t0)
    assert e0 <= 1e-8 and e1 <= 1e-6 and e2 <= 1e-6
    assert dt < 60


# ---------------------------------------------------------------------------
# 3. Green's function
# ---------------------------------------------------------------------------

def _corrector_residual(x, y, h):
    r, z = y

    def H(dr=0.0, dz=0.0):
        return corrector_h(x, (r + dr, z + dz))

    hrr = (H(h) - 2 * H() + H(-h)) / h ** 2
    hzz = (H(dz=h) - 2 * H() + H(dz=-h)) / h ** 2
    hr = (H(h) - H(-h)) / (2 * h)
    return -hzz / r + hr / r ** 2 - hrr / r


def test_criterion_3_greens(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    ang = rng.uniform(-np.pi / 2, np.pi / 2, 200)
    bd = (np.cos(ang), np.sin(ang))
    inner = _disk_points(rng, 200, 0.1, 0.9)
    b_err = max(float(np.max(np.abs(greens_g(inner, bd)))),
                float(np.max(np.abs(greens_g(bd, inner)))))
    inv = max(float(np.max(np.abs(v))) for v in inversion_identities_check(
        _disk_points(rng, 1000, 0.1, 0.99)))
    orders = []
    xs, ys = _separated_pairs(rng, 10, min_sep=0.3)
    for k in range(10):
        res = [abs(_corrector_residual((xs[0][k], xs[1][k]), (ys[0][k], ys[1][k]), h))
               for h in (1e-2, 5e-3, 2.5e-3)]
        orders.extend(np.log2(np.array(res[:-1]) / np.array(res[1:])))
    orders = np.array(orders)
    ok = b_err <= 1e-10 and inv <= 1e-10 and np.all(np.abs(orders - 2) < 0.3)
    report(3, ok, f"boundary {b_err:.1e}, identities {inv:.1e}, corrector orders "
           f"{orders.min():.2f}..{orders.max():.2f}", t0)
    assert b_err <= 1e-10 and inv <= 1e-10
    assert np.all(np.abs(orders - 2) < 0.3), orders


# ---------------------------------------------------------------------------
# 4. kernel derivatives and the second-derivative bound
# ---------------------------------------------------------------------------

def test_criterion_4_kernel_derivatives(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    (rb, zb), (r, z) = _separated_pairs(rng, 100)
    ev = kernel_gradients((rb, zb), (r, z))
    h = 1e-5
    fd = [(kernel_k((rb + h, zb), (r, z)) - kernel_k((rb - h, zb), (r, z))) / (2 * h),
          (kernel_k((rb, zb + h), (r, z)) - kernel_k((rb, zb - h), (r, z))) / (2 * h),
          (kernel_j((rb + h, zb), (r, z)) - kernel_j((rb - h, zb), (r, z))) / (2 * h),
          (kernel_j((rb, zb + h), (r, z)) - kernel_j((rb, zb - h), (r, z))) / (2 * h)]
    an = [ev.grad_k[0], ev.grad_k[1], ev.grad_j[0], ev.grad_j[1]]
    rel = max(float(np.max(np.abs(a - f) / np.maximum(np.abs(a), 1e-3 * np.abs(a).max())))
              for a, f in zip(an, fd))

    def ratio(x, y):
        hrr, hrz, hzz = hessian_g_over_rb(x, y)
        mag = np.sqrt(hrr ** 2 + 2 * hrz ** 2 + hzz ** 2)
        d = np.hypot(x[0] - y[0], x[1] - y[1])
        return mag / np.minimum(y[0] / d ** 3, np.sqrt(y[0] / x[0]) / d ** 2)

    c_fit = float(np.max(ratio((rb, zb), (r, z))))
    # the same constant on pairs approaching coincidence, the axis and the circle
    x = _disk_points(rng, 60, 0.05, 0.95)
    d = 10.0 ** rng.uniform(-4, -1, 60)
    a = rng.uniform(0, 2 * np.pi, 60)
    y = (np.abs(x[0] + d * np.cos(a)) + 1e-3, x[1] + d * np.sin(a))
    keep = np.hypot(*y) < 1
    c_close = float(np.max(ratio((x[0][keep], x[1][keep]), (y[0][keep], y[1][keep]))))
    ok = rel <= 1e-5 and c_close <= 2 * c_fit
    report(4, ok, f"max rel FD error {rel:.1e}, fitted C {c_fit:.3g}, "
           f"close-pair ratio {c_close:.3g}", t0)
    assert rel <= 1e-5
    assert c_close <= 2 * c_fit


# ---------------------------------------------------------------------------
# 5. velocity field
# ---------------------------------------------------------------------------

def _w_smooth(r, z):
    return z * np.exp(-4 * ((r - 0.5) ** 2 + z * z))


def _weighted_divergence(x, w, h):
    tr = np.array([x[0] + h, x[0] - h, x[0], x[0]])
    tz = np.array([x[1], x[1], x[1] + h, x[1] - h])
    ur, uz = velocity_field((tr, tz), w)
    return ((tr[0] * ur[0] - tr[1] * ur[1]) + (tr[2] * uz[2] - tr[3] * uz[3])) / (2 * h)


def test_criterion_5_velocity(report):
    t0 = time.perf_counter()
    g = PolarGrid(128, 128, Symmetry.ODD)
    w = ScalarFieldRZ.from_function(g, _w_smooth)
    wsup = w.sup_norm
    th = np.linspace(0, np.pi / 2, 33)
    ur, uz = velocity_field((np.cos(th), np.sin(th)), w)
    normal = float(np.max(np.abs(ur * np.cos(th) + uz * np.sin(th)))) / wsup
    zs = np.linspace(-0.9, 0.9, 19)
    axis_ur = np.asarray(velocity_field((np.zeros_like(zs), zs), w)[0])
    # symmetrized odd kernel against the odd-extended field on the full grid
    full = PolarGrid(128, 255, Symmetry.NONE)
    wf = ScalarFieldRZ.from_function(full, _w_smooth)
    pts = (np.array([0.3, 0.6, 0.85, 0.5, 0.1]), np.array([0.2, -0.4, 0.3, 0.0, -0.7]))
    sym = np.array(velocity_field(pts, w))
    ext = np.array(velocity_field(pts, wf))
    equiv = float(np.max(np.abs(sym - ext))) / wsup
    # weighted divergence d(r ur)/dr + d(r uz)/dz by centered differences at
    # the grid spacing, RMS over interior points, under refinement
    xs = [(0.45, 0.35), (0.25, 0.6), (0.7, 0.2), (0.6, 0.5), (0.15, 0.3), (0.8, 0.4),
          (0.35, 0.1), (0.5, 0.75)]
    ns = np.array([32, 64, 128])
    res = []
    for n in ns:
        gn = PolarGrid(int(n), int(n), Symmetry.ODD)
        wn = ScalarFieldRZ.from_function(gn, _w_smooth)
        d = np.array([_weighted_divergence(x, wn, 1.0 / (n - 1)) for x in xs])
        res.append(float(np.sqrt(np.mean(d * d))))
    order = linear_fit(np.log(1.0 / (ns - 1)), np.log(res))[0]
    dt = time.perf_counter() - t0
    ok = (normal <= 1e-3 and np.all(axis_ur == 0.0) and equiv <= 1e-6
          and 1.4 <= order <= 2.6 and dt < 300)
    report(5, ok, f"|u.n|/|w| {normal:.1e}, axis u^r max {np.abs(axis_ur).max():.1e}, "
           f"odd vs extended {equiv:.1e}, divergence residuals "
           f"{', '.join(f'{v:.1e}' for v in res)} (order {order:.2f})", t0)
    assert normal <= 1e-3
    assert np.all(axis_ur == 0.0)
    assert equiv <= 1e-6
    assert 1.4 <= order <= 2.6, res
    assert dt < 300


# ---------------------------------------------------------------------------
# 6. transport
# ---------------------------------------------------------------------------

def _bump(r, z, cr, cz, R):
    s2 = ((r - cr) ** 2 + (z - cz) ** 2) / R ** 2
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(s2 < 1, np.exp(1 - 1 / np.maximum(1 - s2, 1e-300)), 0.0)


def _bump_pair(r, z):
    return 20.0 * (_bump(r, z, 0.45, 0.3, 0.35) - _bump(r, z, 0.45, -0.3, 0.35))


def test_criterion_6_transport(report):
    t0 = time.perf_counter()
    g = PolarGrid(128, 128, Symmetry.ODD)
    w0 = ScalarFieldRZ.from_function(g, _bump_pair)
    solver = OperatorSolver(g)
    # desk run: dt capped by the CFL limit
    state = simulate(SimState.initial(w0), TimeStepSpec(0.2, "RK2", cfl_limit=1.0), 1.0,
                     solver)
    sup_drift = abs(state.w.sup_norm / w0.sup_norm - 1.0)
    lam = np.linspace(0.1, 0.9, 9) * w0.sup_norm
    m0 = level_set_measures(w0, lam)
    lvl_drift = float(np.max(np.abs(level_set_measures(state.w, lam) - m0) / m0))
    odd = float(np.max(np.abs(state.w.values[:, 0])))
    # Richardson order in dt at fixed grid (second-order scheme)
    wt = (g.rho[:, None] ** 2 * np.cos(g.phi[None, :])
          * np.gradient(g.rho)[:, None] * np.gradient(g.phi)[None, :])
    runs = [simulate(SimState.initial(w0), TimeStepSpec(dt, "RK2", cfl_limit=50.0), 0.8,
                     solver).w.values for dt in (0.2, 0.1, 0.05)]
    d1 = math.sqrt(float(np.sum(wt * (runs[0] - runs[1]) ** 2)))
    d2 = math.sqrt(float(np.sum(wt * (runs[1] - runs[2]) ** 2)))
    order = math.log2(d1 / d2)
    dt = time.perf_counter() - t0
    ok = (sup_drift <= 5e-3 and lvl_drift <= 0.02 and odd == 0.0
          and 0.7 * 2 <= order <= 1.3 * 2 and dt < 1800)
    report(6, ok, f"sup drift {sup_drift:.1e}, level drift {lvl_drift:.1e}, "
           f"odd residue {odd:.1e}, Richardson order {order:.2f}", t0)
    assert sup_drift <= 5e-3
    assert lvl_drift <= 0.02
    assert odd == 0.0
    assert 1.4 <= order <= 2.6
    assert dt < 1800


# ---------------------------------------------------------------------------
# 7. velocity expansion at e1
# ---------------------------------------------------------------------------

def test_criterion_7_expansion(report):
    t0 = time.perf_counter()
    sp = ScenarioParams(eps=0.05, delta=0.2, bigN=0.1, gamma=math.pi / 6, inner_exponent=2)
    consts = []
    for n in (64, 128):
        w = ks_initial_data(sp, scenario_grid(n, n))
        res = []
        for comp, tag in (("uz", "D1"), ("ur", "D2")):
            for x in sample_sector(sp, 50, tag, radius=sp.delta, seed=7):
                res.append(lemma41_residual(x, w, sp, comp).residual_scaled)
        consts.append(float(np.max(np.abs(res))) / w.sup_norm)
    change = abs(consts[1] - consts[0]) / consts[0]
    vals, logs = [], []
    for d in (1e-2, 1e-3, 1e-4):
        p = ScenarioParams(eps=d / 2, delta=d, bigN=0.1)
        vals.append(key_integral_q((1.0 - d * math.sin(0.3), d * math.cos(0.3)), 1.0, p))
        logs.append(math.log(1 / d))
    slope, _, r2 = linear_fit(logs, vals)
    dt = time.perf_counter() - t0
    ok = change < 0.25 and slope > 0 and r2 > 0.98 and dt < 600
    report(7, ok, f"C(gamma) {consts[0]:.4g} -> {consts[1]:.4g} ({100 * change:.2f}%), "
           f"Q slope {slope:.4g} R^2 {r2:.6f}", t0)
    assert change < 0.25
    assert slope > 0 and r2 > 0.98
    assert dt < 600


# ---------------------------------------------------------------------------
# 8. growth scenario
# ---------------------------------------------------------------------------

def _scenario_run(tmp_path, n, dt):
    cfg = parse_config({
        "grid": {"n_rho": n, "n_phi": n, "rho_cluster": 2.0, "phi_cluster": 7.0},
        "time": {"dt": dt, "T": 1.0},
        "scenario": {"eps": 0.05, "delta": 0.2, "inner_exponent": 2.0},
        "diagnostics": {"interval": 0.1, "probes": 0, "particles": []},
        "output": {"directory": str(tmp_path / f"run_{n}_{dt}")}})
    rec = run_config(cfg)
    return load_diagnostics(rec), cfg.data["diagnostics"]["max_jump"]


def test_criterion_8_growth(report, tmp_path):
    t0 = time.perf_counter()
    # calibration of the double-exponential fit on synthetic series
    t = np.linspace(0, 2, 21)
    cal_dd = double_exp_fit(GrowthSeries(t, np.exp(np.exp(t)), 1.0)).slope
    cal_e = double_exp_fit(GrowthSeries(t, np.exp(20 + t), 1.0)).slope
    runs = {key: _scenario_run(tmp_path, *key) for key in ((48, 0.05), (64, 0.05),
                                                           (48, 0.025))}
    max_jump = runs[(48, 0.05)][1]
    # common window where every run is resolved
    n_common = min(growth_report(tab, mj)["n_resolved"] for tab, mj in runs.values())
    slopes, r2s = {}, {}
    for key, (tab, _) in runs.items():
        cut = {k: v[:n_common] for k, v in tab.items()}
        fit = growth_report(cut)["double_exp"]
        slopes[key], r2s[key] = fit["slope"], fit["r2"]
    ab = ab_report(runs[(64, 0.05)][0], eps=0.05)
    grid_drift = abs(slopes[(64, 0.05)] / slopes[(48, 0.05)] - 1)
    dt_drift = abs(slopes[(48, 0.025)] / slopes[(48, 0.05)] - 1)
    dt = time.perf_counter() - t0
    ok = (abs(cal_dd - 1) <= 0.05 and abs(cal_e) < 0.1 and min(slopes.values()) > 0
          and ab["a_decreasing"] and ab["neg_log_a_convex"] and grid_drift < 0.25
          and dt_drift < 0.25 and dt < 7200)
    report(8, ok, f"calibration {cal_dd:.3f} / {cal_e:.3f}, slopes "
           + ", ".join(f"{n}^2 dt {h}: {s:.3f} (R^2 {r2s[(n, h)]:.3f})"
                       for (n, h), s in slopes.items())
           + f" over t <= {0.1 * (n_common - 1):.1f} (max jump {max_jump}), "
           f"drift grid {100 * grid_drift:.1f}% dt {100 * dt_drift:.1f}%, "
           f"a decreasing {ab['a_decreasing']}, -log a convex {ab['neg_log_a_convex']}", t0)
    assert abs(cal_dd - 1) <= 0.05 and abs(cal_e) < 0.1
    assert n_common >= 5
    assert min(slopes.values()) > 0
    assert ab["a_decreasing"] and ab["neg_log_a_convex"]
    assert grid_drift < 0.25 and dt_drift < 0.25
    assert dt < 7200


# ---------------------------------------------------------------------------
# 9. radially weighted velocity-gradient bound
# ---------------------------------------------------------------------------

def test_criterion_9_kato(report):
    t0 = time.perf_counter()
    g = PolarGrid(48, 48, Symmetry.ODD)
    fields = {
        "ring": (lambda r, z: np.tanh(8 * z) * np.exp(-20 * (r - 0.8) ** 2), True),
        "blob": (lambda r, z: np.sign(z) * np.exp(-30 * ((r - 0.6) ** 2 + (np.abs(z) - 0.3) ** 2))
                 * (1 - np.exp(-200 * z * z)), True),
        "axis": (lambda r, z: np.sin(np.pi * z) * (1 - r * r - z * z), False),
    }
    radii = [0.1, 0.2, 0.4, 0.8]
    reps = {k: kato_check(ScalarFieldRZ.from_function(g, f), radii)
            for k, (f, _) in fields.items()}
    c1 = max(rep.c_fit for rep in reps.values())
    bounded = all(np.all(rep.ratio_shape <= c1) and rep.monotone for rep in reps.values())
    spread = c1 / min(rep.c_fit for rep in reps.values())
    trends = {k: reps[k].trend for k, (_, away) in fields.items() if away}
    dt = time.perf_counter() - t0
    ok = bounded and np.isfinite(c1) and spread < 10 and max(trends.values()) <= 0.5 \
        and dt < 1200
    report(9, ok, f"C1 {c1:.3g} (per-field spread x{spread:.2f}), trends "
           + ", ".join(f"{k} {v:.3f}" for k, v in trends.items()), t0)
    assert bounded and np.isfinite(c1) and spread < 10
    assert max(trends.values()) <= 0.5
    assert dt < 1200


# ---------------------------------------------------------------------------
# 10. determinism and persistence
# ---------------------------------------------------------------------------

def test_criterion_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    g = PolarGrid(16, 16, Symmetry.ODD)
    w0 = ScalarFieldRZ.from_function(g, _w_smooth)
    init = write_snapshot(tmp_path / "init.snap", g, 0.0, {"w": w0.values})
    raw = {"grid": {"n_rho": 16, "n_phi": 16, "rho_cluster": 0.0, "phi_cluster": 0.0},
           "time": {"dt": 0.05, "T": 0.2},
           "initial": {"kind": "file", "path": str(init)},
           "diagnostics": {"interval": 0.05, "probes": 0, "particles": [[0.4, 0.3]]}}
    csv = []
    for k in range(2):
        rec = run_config(parse_config({**raw, "output": {"directory": str(tmp_path / f"r{k}")}}))
        csv.append((rec.directory / "diagnostics.csv").read_bytes())
    rng = np.random.default_rng(10)
    arrays = {"w": rng.standard_normal(g.shape), "ur": rng.standard_normal(g.shape) * 1e-300}
    t_snap = 0.1 + 1e-17 * math.pi
    snap = read_snapshot(write_snapshot(tmp_path / "x.snap", g, t_snap, arrays))
    round_trip = snap.t == t_snap and all(snap.arrays[k].tobytes() == arrays[k].tobytes()
                                          for k in arrays)
    ok = csv[0] == csv[1] and round_trip
    report(10, ok, f"diagnostics CSV identical {csv[0] == csv[1]}, "
           f"snapshot round trip bitwise {round_trip}", t0)
    assert csv[0] == csv[1]
    assert round_trip
