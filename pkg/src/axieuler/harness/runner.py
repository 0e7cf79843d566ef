"""Run orchestration: initial data, time stepping, snapshots, diagnostics."""

from __future__ import annotations

import math
from pathlib import Path


from ..biot_savart import RefinementError
from ..grid import ScalarFieldRZ
from ..scenario import GridResolutionError, ks_initial_data
from ..transport import CFLError, NumericalFailure, OperatorSolver, SimState, simulate
from .config import ConfigError, SimConfig
from .io import SnapshotError, read_snapshot, write_snapshot
from .postprocess import jump_indicator, regenerate
from .record import (STATUS_COMPLETE, STATUS_INCOMPLETE, STATUS_UNDER_RESOLVED,
                     RunRecord)

__all__ = ["RunFailure", "snapshot_times", "initial_field", "run_config"]


class RunFailure(RuntimeError):
    """A step failed; the partial record has been flushed and marked incomplete."""

    def __init__(self, message: str, record: RunRecord):
        super().__init__(message)
        self.record = record


def snapshot_times(t_end: float, interval: float) -> list:
    """0, interval, 2 interval, ... and t_end (always included)."""
    if t_end <= 0:
        return [0.0]
    n = int(math.floor(t_end / interval + 1e-9))
    ts = [k * interval for k in range(n + 1)]
    if t_end - ts[-1] > 1e-9 * max(1.0, t_end):
        ts.append(t_end)
    else:
        ts[-1] = t_end
    return ts


def initial_field(config: SimConfig) -> ScalarFieldRZ:
    """Initial w from the scenario section or a snapshot file.

    Raises
    ------
    ConfigError
        When the grid cannot resolve the data or the file is unusable.
    """
    grid = config.grid
    ini = config.section("initial")
    if ini["kind"] == "scenario":
        try:
            return ks_initial_data(config.scenario, grid)
        except GridResolutionError as exc:
            raise ConfigError(f"grid: {exc}") from exc
    path = Path(ini["path"])
    if not path.is_absolute() and config.source:
        path = Path(config.source).parent / path
    try:
        snap = read_snapshot(path)
    except (OSError, SnapshotError) as exc:
        raise ConfigError(f"initial.path: {exc}") from exc
    if snap.grid != grid:
        raise ConfigError(f"initial.path: snapshot grid {snap.grid.descriptor()} "
                          f"differs from the configured grid {grid.descriptor()}")
    return snap.field("w")


def run_config(config: SimConfig, out_dir=None) -> RunRecord:
    """Execute a run and write its record.

    Snapshots (w, ur, uz) are written at the diagnostic interval and at T;
    the diagnostics CSV and reports are then regenerated from those files.

    Raises
    ------
    ConfigError
        Before anything is written.
    RunFailure
        After flushing a partial record marked incomplete.
    """
    w0 = initial_field(config)
    grid = w0.grid
    out = Path(out_dir) if out_dir is not None else config.output_dir
    record = RunRecord.create(out, config.data, config.source)
    spec = config.time_spec
    solver = OperatorSolver(grid, config.quadrature)
    dg = config.section("diagnostics")
    max_steps = config.section("time")["max_steps"]
    w0_sup = w0.sup_norm
    state = SimState.initial(w0)
    try:
        for k, t in enumerate(snapshot_times(config.t_end, dg["interval"])):
            if k > 0:
                state = simulate(state, spec, t, solver, max_steps=max_steps)
            u = solver(state.w)
            rel = f"snapshots/{k:04d}.snap"
            write_snapshot(record.directory / rel, grid, state.t,
                           {"w": state.w.values, "ur": u.ur, "uz": u.uz})
            record.add_snapshot(rel, state.t)
            jump = jump_indicator(state.w.values, w0_sup)
            if jump > dg["max_jump"]:
                record.flag(f"under-resolved at t={state.t:.6g}: "
                            f"nodal jump {jump:.3g} > {dg['max_jump']}")
    except (NumericalFailure, CFLError, RefinementError, FloatingPointError) as exc:
        record.finish(STATUS_INCOMPLETE, f"{type(exc).__name__}: {exc}")
        raise RunFailure(str(exc), record) from exc
    regenerate(record)
    record.finish(STATUS_UNDER_RESOLVED if record.manifest["flags"] else STATUS_COMPLETE)
    return record
