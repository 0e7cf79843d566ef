"""Diagnostics regenerated from a run directory.

Nothing here looks at in-memory simulation state: every number is computed
from the persisted snapshots and the config echo, so `regenerate` can be
rerun on any finished (or partial) record.

diagnostics.csv columns
-----------------------
t              snapshot time
w_sup          max |w|
grad_w_sup     max |grad w| (finite differences)
jump           largest neighbour difference of w over max |w0|
gradu_R<R>     max |grad u| (Frobenius) over nodes with r <= R
level_<f>      measure (r dr dz) of {w > f max|w0|}
a, b           boundary-layer heights (scenario runs; NaN otherwise)
q<k>           near-boundary integral at probe point k (scenario runs)
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..diagnostics import (GrowthSeries, axis_rate_check, double_exp_fit, exp_rate_fit,
                           grad_w_sup, key_integral_q, level_set_measures, linear_fit,
                           velocity_gradient_sup)
from ..scenario import ScenarioParams, sample_sector, track_a_b
from ..transport import Integrator, integrate_trajectory
from .io import read_table, write_json, write_table

__all__ = ["jump_indicator", "diagnostic_rows", "probe_points", "regenerate",
           "growth_report", "resolved_prefix", "ab_report", "load_diagnostics"]

DIAG_CSV = "diagnostics.csv"


def jump_indicator(values: np.ndarray, scale: float) -> float:
    """Largest difference between neighbouring nodes, relative to ``scale``."""
    if scale <= 0:
        return 0.0
    d1 = np.abs(np.diff(values, axis=0)).max(initial=0.0)
    d2 = np.abs(np.diff(values, axis=1)).max(initial=0.0)
    return float(max(d1, d2) / scale)


def _scenario(cfg: dict) -> ScenarioParams | None:
    if cfg["initial"]["kind"] != "scenario":
        return None
    s = dict(cfg["scenario"])
    if not s["cutoff_width"]:
        s["cutoff_width"] = None
    return ScenarioParams.from_dict(s)


def probe_points(cfg: dict) -> np.ndarray:
    """Sample points in D1 at which the near-boundary integral is tracked."""
    params = _scenario(cfg)
    dg = cfg["diagnostics"]
    if params is None or dg["probes"] == 0:
        return np.zeros((0, 2))
    radius = dg["probe_radius"] or params.delta
    return sample_sector(params, dg["probes"], "D1", radius=radius, seed=cfg["seed"])


def diagnostic_rows(record):
    """Columns and rows of the diagnostics table for a run record."""
    cfg = record.config
    dg = cfg["diagnostics"]
    snaps = record.snapshots()
    if not snaps:
        return [], []
    w0_sup = snaps[0].field().sup_norm
    params = _scenario(cfg)
    probes = probe_points(cfg)
    radii = dg["radii"]
    fracs = dg["level_fractions"]
    a = b = np.full(len(snaps), np.nan)
    if params is not None and len(snaps) > 1:
        track = track_a_b(record.velocity_history(), params, n_samples=dg["ab_samples"])
        a = np.full(len(snaps), np.nan)
        b = np.full(len(snaps), np.nan)
        a[:track.a.size] = track.a
        b[:track.b.size] = track.b
    elif params is not None:
        a = np.array([params.a0])
        b = np.array([params.b0])

    columns = (["t", "w_sup", "grad_w_sup", "jump"]
               + [f"gradu_R{R:g}" for R in radii]
               + [f"level_{f:g}" for f in fracs]
               + ["a", "b"] + [f"q{k}" for k in range(len(probes))])
    rows = []
    for n, snap in enumerate(snaps):
        w = snap.field()
        u = snap.velocity()
        row = [snap.t, w.sup_norm, grad_w_sup(w), jump_indicator(w.values, w0_sup)]
        row += [velocity_gradient_sup(u, R) for R in radii]
        row += list(level_set_measures(w, [f * w0_sup for f in fracs]))
        row += [a[n], b[n]]
        row += [key_integral_q(x, w, params) for x in probes]
        rows.append(row)
    return columns, rows


def load_diagnostics(record) -> dict:
    return read_table(record.directory / record.manifest["diagnostics_csv"])


def _finite(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def resolved_prefix(table: dict, max_jump: float) -> int:
    """Number of leading snapshots whose nodal jump stays within max_jump."""
    ok = np.cumprod(table["jump"] <= max_jump).astype(bool)
    return int(ok.sum())


def growth_report(table: dict, max_jump: float = math.inf) -> dict:
    """Double-exponential and exponential fits of the gradient series.

    Only the leading snapshots that pass the resolution check enter the
    fits: once the grid stops resolving the layer, the finite-difference
    gradient saturates at about one jump per cell and says nothing about
    the true growth.
    """
    n = resolved_prefix(table, max_jump)
    t = table["t"][:n]
    g = table["grad_w_sup"][:n]
    w0 = float(table["w_sup"][0])
    rep = {"n": int(table["t"].size), "n_resolved": n,
           "t_resolved": float(t[-1]) if n else None,
           "w0_sup": w0, "grad_w0_sup": float(table["grad_w_sup"][0])}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = double_exp_fit(GrowthSeries(t, g, w0))
        rep["double_exp"] = fit.as_dict()
    except ValueError as exc:
        rep["double_exp"] = {"error": str(exc)}
    if t.size >= 2 and np.all(g > 0):
        s, c, r2 = exp_rate_fit(t, g)
        rep["exp_rate"] = {"slope": s, "intercept": c, "r2": r2}
    return rep


def ab_report(table: dict, eps: float | None = None) -> dict:
    """Shape of the tracked a(t): decrease, convexity of -log a, fitted rate.

    A bound a(t) <= eps**(C exp(C t)) makes -log a(t) grow at least like
    C |log eps| exp(C t); the reported ``inner_rate`` is the slope of
    log(log a / log eps) against t.
    """
    t, a, b = table["t"], table["a"], table["b"]
    ok = np.isfinite(a) & np.isfinite(b)
    rep = {"tracked": int(ok.sum()), "broken": bool(ok.sum() < t.size)}
    ta, la = t[ok], np.log(a[ok])
    if ta.size >= 2:
        rep["a_decreasing"] = bool(np.all(np.diff(la) < 0))
        rep["b_final_over_b0"] = float(b[ok][-1] / b[ok][0])
    if ta.size >= 3:
        slopes = np.diff(-la) / np.diff(ta)
        second = np.diff(slopes) / (0.5 * (ta[2:] - ta[:-2]))
        rep["neg_log_a_second_diff_min"] = float(second.min())
        rep["neg_log_a_convex"] = bool(np.all(second >= -1e-9 * max(1.0, np.abs(second).max())))
    if eps is not None and ta.size >= 2:
        s, c, r2 = linear_fit(ta, np.log(la / math.log(eps)))
        rep["inner_rate"] = {"slope": s, "intercept": c, "r2": r2}
    return rep


def _conservation_report(table: dict, fracs) -> dict:
    w = table["w_sup"]
    rep = {"w_sup_rel_drift": float(np.max(np.abs(w - w[0])) / w[0]) if w[0] > 0 else 0.0,
           "w_sup_max_over_w0": float(np.max(w) / w[0]) if w[0] > 0 else 0.0,
           "levels": {}}
    for f in fracs:
        m = table[f"level_{f:g}"]
        rep["levels"][f"{f:g}"] = (float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0
                                   else None)
    return rep


def _trajectory_report(record, dg: dict) -> dict:
    points = dg["particles"]
    times = record.times
    if not points or len(times) < 2:
        return {"paths": []}
    hist = record.velocity_history()
    h = dg["interval"] / 8.0
    paths, trajs = [], []
    for p in points:
        ts, rs, zs = integrate_trajectory(tuple(p), (times[0], times[-1]), hist, h,
                                          Integrator.RK4)
        trajs.append((ts, rs, zs))
        paths.append({"start": list(p), "end": [float(rs[-1]), float(zs[-1])],
                      "r_min": float(rs.min())})
    rep = {"paths": paths}
    off_axis = [tr for tr, p in zip(trajs, points) if p[0] > 0]
    if off_axis:
        ar = axis_rate_check(off_axis)
        rep["axis_rate"] = {"rates": [_finite(x) for x in ar.rates],
                            "max_rate": _finite(ar.max_rate),
                            "touched_axis": ar.touched_axis, "passed": ar.passed}
    return rep


def regenerate(record) -> None:
    """Recompute diagnostics.csv and reports/*.json from the snapshots."""
    cfg = record.config
    params = _scenario(cfg)
    columns, rows = diagnostic_rows(record)
    write_table(record.directory / DIAG_CSV, columns, rows)
    record.manifest["diagnostics_csv"] = DIAG_CSV
    reports = []
    if rows:
        table = read_table(record.directory / DIAG_CSV)
        out = {
            "growth": growth_report(table, cfg["diagnostics"]["max_jump"]),
            "conservation": _conservation_report(table, cfg["diagnostics"]["level_fractions"]),
            "ab": ab_report(table, None if params is None else params.eps),
            "trajectories": _trajectory_report(record, cfg["diagnostics"]),
        }
        for name, rep in out.items():
            rel = f"reports/{name}.json"
            write_json(record.directory / rel, rep)
            reports.append(rel)
    record.manifest["reports"] = reports
    record.flush()
