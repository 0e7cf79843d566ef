"""Run configuration: TOML file -> validated `SimConfig`.

Every numerical and physical parameter of a run lives in the config file.
Missing keys take the defaults below; unknown keys are rejected so a typo
cannot silently fall back to a default.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..biot_savart import VelocityQuadrature
from ..grid import PolarGrid, Symmetry
from ..scenario import ScenarioError, ScenarioParams
from ..transport import Integrator, TimeStepSpec

__all__ = ["ConfigError", "SimConfig", "DEFAULTS", "load_config", "parse_config"]

DEFAULTS = {
    "grid": {"n_rho": 48, "n_phi": 48, "symmetry": "OddInZ",
             "rho_cluster": 2.0, "phi_cluster": 6.0},
    "time": {"dt": 0.05, "T": 0.5, "integrator": "RK2", "cfl_limit": 4.0,
             "interpolation": "cubic_clipped", "max_steps": 10000},
    "quadrature": {"gauss_order": 4, "far_order": 2, "duffy_order": 8, "far_ratio": 4.0,
                   "near_ratio": 1.0, "max_depth": 10, "refine": False},
    "initial": {"kind": "scenario", "path": ""},
    "scenario": {"eps": 0.05, "delta": 0.1, "bigN": 0.1, "gamma": math.pi / 6,
                 "inner_exponent": 2.0, "cutoff_width": 0.0},
    "diagnostics": {"interval": 0.1, "radii": [0.1, 0.2, 0.4, 0.8],
                    "level_fractions": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                    "probes": 4, "probe_radius": 0.0, "ab_samples": 64,
                    "particles": [], "max_jump": 0.9},
    "output": {"directory": "runs/scenario"},
    "seed": 0,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class SimConfig:
    """Resolved configuration.

    Attributes
    ----------
    data : dict
        Full nested mapping with defaults filled in (the config echo).
    source : str
        Path of the file it came from ("" for in-memory configs).
    """

    data: dict
    source: str = ""

    def section(self, name: str) -> dict:
        return self.data[name]

    @property
    def grid(self) -> PolarGrid:
        g = self.data["grid"]
        return PolarGrid(g["n_rho"], g["n_phi"], Symmetry.parse(g["symmetry"]),
                         g["rho_cluster"], g["phi_cluster"])

    @property
    def quadrature(self) -> VelocityQuadrature:
        return VelocityQuadrature(**self.data["quadrature"])

    @property
    def time_spec(self) -> TimeStepSpec:
        t = self.data["time"]
        return TimeStepSpec(t["dt"], Integrator(t["integrator"]), t["cfl_limit"],
                            t["interpolation"])

    @property
    def t_end(self) -> float:
        return self.data["time"]["T"]

    @property
    def scenario(self) -> ScenarioParams:
        s = dict(self.data["scenario"])
        if not s["cutoff_width"]:
            s["cutoff_width"] = None
        return ScenarioParams.from_dict(s)

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output"]["directory"])

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)

    def with_overrides(self, **sections) -> "SimConfig":
        """Copy with some keys replaced, e.g. ``time={"T": 0.0}``."""
        raw = copy.deepcopy(self.data)
        for name, values in sections.items():
            if isinstance(values, dict):
                raw[name].update(values)
            else:
                raw[name] = values
        return parse_config(raw, self.source)


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _coerce(path: str, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            _fail(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            _fail(path, "must be finite")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            _fail(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            _fail(path, f"expected a list, got {value!r}")
        return copy.deepcopy(value)
    return value


def _merge(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a table at the top level")
    out = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key not in DEFAULTS:
            _fail(key, "unknown key")
        default = DEFAULTS[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                _fail(key, "expected a table")
            for sub, v in value.items():
                if sub not in default:
                    _fail(f"{key}.{sub}", "unknown key")
                out[key][sub] = _coerce(f"{key}.{sub}", default[sub], v)
        else:
            out[key] = _coerce(key, default, value)
    return out


def _positive(d: dict, section: str, *keys):
    for k in keys:
        if not d[section][k] > 0:
            _fail(f"{section}.{k}", f"must be positive (got {d[section][k]})")


def _validate(d: dict):
    g = d["grid"]
    for k in ("n_rho", "n_phi"):
        if g[k] < 4:
            _fail(f"grid.{k}", f"needs at least 4 nodes (got {g[k]})")
    try:
        Symmetry.parse(g["symmetry"])
    except ValueError as exc:
        _fail("grid.symmetry", str(exc))
    for k in ("rho_cluster", "phi_cluster"):
        if g[k] < 0:
            _fail(f"grid.{k}", "must be nonnegative")

    t = d["time"]
    _positive(d, "time", "dt", "cfl_limit", "max_steps")
    if t["T"] < 0:
        _fail("time.T", "must be nonnegative")
    try:
        Integrator(t["integrator"])
    except ValueError:
        _fail("time.integrator", f"expected one of {[i.value for i in Integrator]}")
    if t["interpolation"] not in ("cubic_clipped", "cubic", "linear"):
        _fail("time.interpolation", "expected cubic_clipped, cubic or linear")

    try:
        VelocityQuadrature(**d["quadrature"])
    except (TypeError, ValueError) as exc:
        _fail("quadrature", str(exc))

    ini = d["initial"]
    if ini["kind"] not in ("scenario", "file"):
        _fail("initial.kind", "expected 'scenario' or 'file'")
    if ini["kind"] == "file" and not ini["path"]:
        _fail("initial.path", "required when initial.kind = 'file'")
    if ini["kind"] == "scenario":
        s = dict(d["scenario"])
        if not s["cutoff_width"]:
            s["cutoff_width"] = None
        try:
            ScenarioParams.from_dict(s)
        except ScenarioError as exc:
            _fail("scenario", str(exc))

    dg = d["diagnostics"]
    _positive(d, "diagnostics", "interval", "ab_samples", "max_jump")
    if dg["probes"] < 0:
        _fail("diagnostics.probes", "must be nonnegative")
    if dg["probe_radius"] < 0:
        _fail("diagnostics.probe_radius", "must be nonnegative")
    radii = dg["radii"]
    if not all(isinstance(x, (int, float)) and 0 < x <= 1 for x in radii):
        _fail("diagnostics.radii", "entries must lie in (0, 1]")
    dg["radii"] = [float(x) for x in radii]
    fr = dg["level_fractions"]
    if not all(isinstance(x, (int, float)) and 0 < x < 1 for x in fr):
        _fail("diagnostics.level_fractions", "entries must lie in (0, 1)")
    dg["level_fractions"] = [float(x) for x in fr]
    for i, p in enumerate(dg["particles"]):
        ok = (isinstance(p, list) and len(p) == 2
              and all(isinstance(c, (int, float)) for c in p)
              and p[0] >= 0 and p[0] ** 2 + p[1] ** 2 <= 1)
        if not ok:
            _fail(f"diagnostics.particles[{i}]", "expected [r, z] with r >= 0 inside the disk")
    dg["particles"] = [[float(a), float(b)] for a, b in dg["particles"]]

    if not d["output"]["directory"]:
        _fail("output.directory", "must not be empty")


def parse_config(raw: dict, source: str = "") -> SimConfig:
    """Fill defaults into ``raw`` and validate.

    Raises
    ------
    ConfigError
        With a ``section.key: reason`` message.
    """
    data = _merge(raw)
    _validate(data)
    return SimConfig(data, str(source))


def load_config(path) -> SimConfig:
    """Read and validate a TOML config file."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        raw = tomllib.loads(text.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: malformed TOML ({exc})") from exc
    return parse_config(raw, str(path))
