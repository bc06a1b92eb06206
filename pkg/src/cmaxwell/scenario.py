"""Scenario configuration: parsing, validation, construction and execution.

A scenario is a TOML file. Only ``[grid] n``, ``[initial] kind`` and one
of ``[integrator] steps`` / ``[integrator] t_end`` are required; everything
else falls back on :mod:`cmaxwell.defaults`. Example::

    name = "vacuum_wave"

    [grid]
    n = [16, 16, 16]
    length = [1.0, 1.0, 1.0]

    [initial]
    kind = "plane_wave"
    mode = [1, 1, 0]
    polarization = [1.0, -1.0, 0.0]

    [integrator]
    scheme = "leapfrog"
    t_end = 0.25
"""

from __future__ import annotations

import copy
import json
import os
import re
import subprocess
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import cmaxwell
from cmaxwell import defaults as dflt
from cmaxwell import initial_conditions as ic
from cmaxwell import integrate as it
from cmaxwell import maxwell_field as mf
from cmaxwell.errors import ConfigError
from cmaxwell.geometry import GridSpec, SpacetimeMetric

OUTPUT_ROOT_ENV = "CMAXWELL_OUTPUT_ROOT"

SECTIONS = ("grid", "metric", "initial", "source", "integrator", "gauge", "monitor", "output", "units")
TOP_LEVEL = ("name",)

_ALLOWED = {
    "grid": {"n", "length", "dx"},
    "metric": {"family", "g", "scale", "g00", "amplitude"},
    "initial": {"kind", "mode", "amplitude", "polarization", "phase", "center", "width", "discrete"},
    "source": {"kind", "amplitude", "center", "width", "direction", "duration", "start", "omega"},
    "integrator": {"scheme", "cfl", "dt", "steps", "t_end"},
    "gauge": {"mode", "lambda"},
    "monitor": {"cadence", "snapshot_every"},
    "output": {"dir"},
    "units": {"system"},
}


# locating keys for diagnostics ----------------------------------------------------

def _key_line(text: Optional[str], dotted: str) -> Optional[int]:
    """1-based line where ``dotted`` (``section.key`` or ``key``) is set, if found."""
    if not text:
        return None
    parts = dotted.split(".")
    section, key = (parts[0], parts[1]) if len(parts) > 1 else (None, parts[0])
    current = None
    header = re.compile(r"^\s*\[([^\]]+)\]\s*(#.*)?$")
    for i, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if section is not None and current == section and key is None:
                return i
            continue
        if current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return i
    if section is not None:
        for i, line in enumerate(text.splitlines(), start=1):
            m = header.match(line)
            if m and m.group(1).strip() == section:
                return i
    return None


# the scenario -----------------------------------------------------------------------

@dataclass
class Scenario:
    """A fully resolved scenario: ``config`` holds every effective parameter."""

    config: dict
    source_path: Optional[Path] = None
    text: Optional[str] = None

    @property
    def name(self) -> str:
        return self.config["name"]

    def error(self, message, key=None) -> ConfigError:
        return ConfigError(message, key, _key_line(self.text, key) if key else None)

    # construction -----------------------------------------------------------

    @property
    def c(self) -> float:
        return mf.C_CGS if self.config["units"]["system"] == "cgs" else mf.C_DESK

    def grid(self) -> GridSpec:
        g = self.config["grid"]
        return GridSpec(tuple(g["n"]), tuple(L / n for L, n in zip(g["length"], g["n"])))

    def metric(self, grid: Optional[GridSpec] = None) -> SpacetimeMetric:
        m = self.config["metric"]
        fam = m["family"]
        grid = grid or self.grid()
        if fam == "minkowski":
            return SpacetimeMetric.minkowski()
        if fam == "diagonal":
            return SpacetimeMetric.diagonal(*m["g"])
        if fam == "stretch":
            return SpacetimeMetric.stretch(m["scale"], m["g00"])
        return SpacetimeMetric.sinusoidal(grid, m["amplitude"], m["g00"])

    def build(self):
        """``(grid, metric, state, source, gauge)`` ready for :func:`integrate.run`."""
        grid = self.grid()
        metric = self.metric(grid)
        c = self.c
        ini = self.config["initial"]
        kind = ini["kind"]
        static = None
        if kind == "zero":
            state = mf.FieldState.zeros(grid, c)
        elif kind == "plane_wave":
            state = ic.plane_wave(grid, metric, ini["mode"], ini["amplitude"], ini["polarization"], c, ini["phase"])
        elif kind == "gaussian_pulse":
            state = ic.gaussian_pulse(grid, metric, ini["center"], ini["width"], ini["amplitude"],
                                      ini["polarization"], c)
        else:
            state, static = ic.manufactured_charge(grid, metric, ini["center"], ini["width"], ini["amplitude"], c,
                                                   ini["discrete"])
        src = self.config["source"]
        if src["kind"] == "none":
            source = mf.CurrentSource.vacuum()
        elif src["kind"] == "static_charge":
            source = static
        else:
            p = {k: v for k, v in src.items() if k != "kind"}
            source = ic.dipole_current(grid, metric, "pulse" if src["kind"] == "pulse_dipole" else "oscillating", **p)
        g = self.config["gauge"]
        if g["mode"] == "lambda_zero":
            gauge = it.GaugePolicy()
        else:
            lam = float(g["lambda"])
            gauge = it.GaugePolicy("prescribed", lambda t: lam)
        return grid, metric, state, source, gauge

    def timestep(self, state, metric):
        """``(dt, steps)``: explicit ``dt`` or the CFL bound, fitted to ``t_end`` when given."""
        integ = self.config["integrator"]
        limit = it.max_stable_dt(state, metric, integ["cfl"])
        if integ.get("dt") is not None:
            dt = float(integ["dt"])
            steps = integ.get("steps")
            if steps is None:
                steps = int(round(integ["t_end"] / dt))
            return dt, int(steps)
        if integ.get("t_end") is not None:
            steps = int(np.ceil(integ["t_end"] / limit * (1 - 1e-12)))
            return integ["t_end"] / steps, steps
        return limit, int(integ["steps"])


# parsing and validation ---------------------------------------------------------------

def _vec3(value, key, sc, kind=float):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value] * 3
    if not isinstance(value, list) or len(value) != 3:
        raise sc.error("expected a number or a list of three numbers", key)
    try:
        return [kind(v) for v in value]
    except (TypeError, ValueError):
        raise sc.error("expected numeric entries", key) from None


def _number(value, key, sc, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise sc.error("expected a number", key)
    if positive and not value > 0:
        raise sc.error("must be positive", key)
    return float(value)


def _choice(value, key, sc, options):
    if value not in options:
        raise sc.error(f"must be one of {sorted(options)}, got {value!r}", key)
    return value


def parse_config(text: str, path: Optional[Path] = None) -> Scenario:
    """Parse TOML text and return a validated :class:`Scenario` with defaults filled in."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"cannot parse config: {exc}", line=int(m.group(1)) if m else None) from None
    sc = Scenario({}, path, text)

    for key, value in raw.items():
        if key in TOP_LEVEL:
            continue
        if key not in SECTIONS:
            raise sc.error("unknown key or section", key)
        if not isinstance(value, dict):
            raise sc.error("expected a table", key)
        for sub in value:
            if sub not in _ALLOWED[key]:
                raise sc.error("unknown key", f"{key}.{sub}")

    cfg = copy.deepcopy(dflt.SCENARIO)
    for sec in SECTIONS:
        cfg.setdefault(sec, {})
        cfg[sec].update(raw.get(sec, {}))
    name = raw.get("name", path.stem if path else "scenario")
    if not isinstance(name, str) or not name:
        raise sc.error("expected a non-empty string", "name")
    cfg["name"] = name

    # grid
    if "n" not in cfg["grid"]:
        raise sc.error("missing required key", "grid.n")
    n = _vec3(cfg["grid"]["n"], "grid.n", sc, int)
    if min(n) < 4:
        raise sc.error("every axis needs at least 4 cells", "grid.n")
    if "dx" in cfg["grid"]:
        if "length" in raw.get("grid", {}):
            raise sc.error("give either length or dx, not both", "grid.dx")
        dx = _vec3(cfg["grid"].pop("dx"), "grid.dx", sc)
        length = [d * k for d, k in zip(dx, n)]
    else:
        length = _vec3(cfg["grid"]["length"], "grid.length", sc)
    if min(length) <= 0:
        raise sc.error("lengths must be positive", "grid.length")
    cfg["grid"] = {"n": n, "length": length}

    # metric
    m = cfg["metric"]
    fam = _choice(m["family"], "metric.family", sc, set(dflt.METRIC_DEFAULTS))
    cfg["metric"] = _with_defaults(m, dflt.METRIC_DEFAULTS[fam], "metric", sc)
    if fam == "diagonal":
        g = cfg["metric"]["g"]
        if not isinstance(g, list) or len(g) != 4:
            raise sc.error("expected four diagonal entries", "metric.g")
        cfg["metric"]["g"] = [_number(v, "metric.g", sc) for v in g]
    if fam == "stretch":
        cfg["metric"]["scale"] = _vec3(cfg["metric"]["scale"], "metric.scale", sc)
        cfg["metric"]["g00"] = _number(cfg["metric"]["g00"], "metric.g00", sc, positive=True)
    if fam == "sinusoidal":
        amp = _vec3(cfg["metric"]["amplitude"], "metric.amplitude", sc)
        if max(abs(a) for a in amp) >= 1:
            raise sc.error("amplitudes must satisfy |eps| < 1", "metric.amplitude")
        cfg["metric"]["amplitude"] = amp
        cfg["metric"]["g00"] = _number(cfg["metric"]["g00"], "metric.g00", sc, positive=True)

    # initial condition
    if "kind" not in cfg["initial"]:
        raise sc.error("missing required key", "initial.kind")
    kind = _choice(cfg["initial"]["kind"], "initial.kind", sc, set(dflt.INITIAL_DEFAULTS))
    ini = _with_defaults(cfg["initial"], dflt.INITIAL_DEFAULTS[kind], "initial", sc)
    for vec in ("mode", "polarization", "center"):
        if vec in ini:
            ini[vec] = _vec3(ini[vec], f"initial.{vec}", sc, int if vec == "mode" else float)
    for num in ("amplitude", "phase"):
        if num in ini:
            ini[num] = _number(ini[num], f"initial.{num}", sc)
    if "width" in ini:
        ini["width"] = _number(ini["width"], "initial.width", sc, positive=True)
    if "discrete" in ini and not isinstance(ini["discrete"], bool):
        raise sc.error("expected true or false", "initial.discrete")
    if kind == "plane_wave":
        k = np.array([2 * np.pi * mm / L for mm, L in zip(ini["mode"], length)])
        e = np.array(ini["polarization"])
        if not np.any(k) or not np.any(e):
            raise sc.error("mode and polarization must be non-zero", "initial.mode")
        if abs(k @ e) > dflt.POLARIZATION_TOL * np.linalg.norm(k) * np.linalg.norm(e):
            raise sc.error("polarization must be perpendicular to the wavevector", "initial.polarization")
    cfg["initial"] = ini

    # source
    skind = _choice(cfg["source"]["kind"], "source.kind", sc, set(dflt.SOURCE_DEFAULTS))
    src = _with_defaults(cfg["source"], dflt.SOURCE_DEFAULTS[skind], "source", sc)
    if skind == "static_charge" and kind != "manufactured_charge":
        raise sc.error("static_charge needs initial.kind = 'manufactured_charge'", "source.kind")
    if kind == "manufactured_charge" and skind == "none":
        src = {"kind": "static_charge"}
    for vec in ("center", "direction"):
        if vec in src:
            src[vec] = _vec3(src[vec], f"source.{vec}", sc)
    for num in ("amplitude", "start"):
        if num in src:
            src[num] = _number(src[num], f"source.{num}", sc)
    for num in ("width", "duration", "omega"):
        if num in src:
            src[num] = _number(src[num], f"source.{num}", sc, positive=True)
    cfg["source"] = src

    # integrator
    integ = cfg["integrator"]
    _choice(integ["scheme"], "integrator.scheme", sc, set(it.STEPPERS))
    integ["cfl"] = _number(integ["cfl"], "integrator.cfl", sc, positive=True)
    if "steps" not in integ and "t_end" not in integ:
        raise sc.error("missing required key (or give integrator.t_end)", "integrator.steps")
    if "steps" in integ and "t_end" in integ and "dt" not in integ:
        raise sc.error("give either steps or t_end", "integrator.t_end")
    if "steps" in integ:
        if isinstance(integ["steps"], bool) or not isinstance(integ["steps"], int) or integ["steps"] < 0:
            raise sc.error("expected a non-negative integer", "integrator.steps")
    if "t_end" in integ:
        integ["t_end"] = _number(integ["t_end"], "integrator.t_end", sc, positive=True)
    integ.setdefault("dt", None)
    if integ["dt"] is not None:
        integ["dt"] = _number(integ["dt"], "integrator.dt", sc, positive=True)
    integ.setdefault("steps", None)
    integ.setdefault("t_end", None)

    _choice(cfg["gauge"]["mode"], "gauge.mode", sc, {"lambda_zero", "prescribed"})
    cfg["gauge"]["lambda"] = _number(cfg["gauge"]["lambda"], "gauge.lambda", sc)
    for key in ("cadence", "snapshot_every"):
        v = cfg["monitor"][key]
        if isinstance(v, bool) or not isinstance(v, int) or v < (1 if key == "cadence" else 0):
            raise sc.error("expected a positive integer" if key == "cadence" else "expected an integer >= 0",
                           f"monitor.{key}")
    _choice(cfg["units"]["system"], "units.system", sc, {"desk", "cgs"})
    cfg["output"].setdefault("dir", f"runs/{name}")
    if not isinstance(cfg["output"]["dir"], str):
        raise sc.error("expected a path string", "output.dir")

    sc.config = cfg
    return sc


def _with_defaults(given: dict, defaults: dict, section: str, sc: Scenario) -> dict:
    out = {"kind": given["kind"]} if "kind" in given else {"family": given["family"]}
    allowed = set(defaults) | set(out)
    for k in given:
        if k not in allowed:
            raise sc.error(f"not used by {next(iter(out.values()))!r}", f"{section}.{k}")
    out.update(copy.deepcopy(defaults))
    out.update({k: v for k, v in given.items() if k in defaults})
    return out


def bundled_scenarios() -> list[str]:
    files = resources.files("cmaxwell").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".toml"))


def resolve_config_path(name_or_path: str) -> Path:
    """A path to a config file, or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = resources.files("cmaxwell").joinpath("scenarios", f"{name_or_path}.toml")
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"no config file or bundled scenario named {name_or_path!r}")


def load_config(name_or_path) -> Scenario:
    path = resolve_config_path(str(name_or_path))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, path)


# running --------------------------------------------------------------------------------

def version_string() -> str:
    """``git describe``-style version of the code, falling back on the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        desc = out.stdout.strip()
        if out.returncode == 0 and desc:
            return desc if desc.startswith("v") else f"v{cmaxwell.__version__}-g{desc}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{cmaxwell.__version__}"


def output_dir(sc: Scenario, override=None) -> Path:
    """Output directory: ``override``, else ``output.dir`` under ``$CMAXWELL_OUTPUT_ROOT`` (or cwd)."""
    if override is not None:
        return Path(override)
    d = Path(sc.config["output"]["dir"])
    if d.is_absolute():
        return d
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return (Path(root) if root else Path.cwd()) / d


def _exact_plane_wave_error(sc: Scenario, grid, metric, state):
    ini = sc.config["initial"]
    if ini["kind"] != "plane_wave" or sc.config["metric"]["family"] != "minkowski" \
            or sc.config["source"]["kind"] != "none":
        return None
    E, B = ic.plane_wave_fields(grid, ini["mode"], ini["amplitude"], ini["polarization"], state.c, state.time,
                                ini["phase"])
    D, H = mf.displacement_and_magnetic(state, metric)
    return float(max(np.max(np.abs(D - E)), np.max(np.abs(H - B))))


def run_scenario(sc: Scenario, out_dir=None) -> dict:
    """Execute ``sc``; write ``monitor.csv``, snapshots and ``manifest.json``. Returns the manifest."""
    out = output_dir(sc, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid, metric, state, source, gauge = sc.build()
    dt, steps = sc.timestep(state, metric)
    integ = sc.config["integrator"]
    mon = sc.config["monitor"]
    t0 = time.perf_counter()
    result = it.run(state, metric, source, gauge, dt, steps, integ["scheme"], mon["cadence"], integ["cfl"],
                    mon["snapshot_every"], out, snapshot_meta={"scenario": sc.name})
    wall = time.perf_counter() - t0
    csv_path = result.log.to_csv(out / "monitor.csv")
    last = result.log.records[-1]
    first = result.log.records[0]
    manifest = {
        "scenario": sc.name,
        "config": sc.config,
        "config_file": str(sc.source_path) if sc.source_path else None,
        "version": version_string(),
        "wall_time_s": wall,
        "dt": dt,
        "steps": steps,
        "c": sc.c,
        "dx": list(grid.dx),
        "initial_monitors": _record_dict(first),
        "final_monitors": _record_dict(last),
        "final_gauss_residual": last.gauss_max,
        "final_ampere_residual": last.ampere_max,
        "exact_error": _exact_plane_wave_error(sc, grid, metric, result.final_state),
        "monitor_csv": csv_path.name,
        "snapshots": [str(p.relative_to(out)) for p in result.snapshots],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def _record_dict(rec) -> dict:
    return {c: getattr(rec, c) for c in it.MONITOR_COLUMNS}
