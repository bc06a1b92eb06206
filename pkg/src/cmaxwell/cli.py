"""Command-line entry point: ``cmaxwell run | validate | report``.

Exit status: 0 on success, 2 for configuration or usage errors, 3 when a
run fails at runtime (instability, non-finite fields, I/O).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from cmaxwell import verify
from cmaxwell.errors import CMaxwellError, ConfigError, ManifestMissing
from cmaxwell.integrate import MonitorLog
from cmaxwell.scenario import OUTPUT_ROOT_ENV, bundled_scenarios, load_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CONVERGENCE_METRICS = ("exact_error", "final_gauss_residual", "final_ampere_residual")
ROUNDOFF_FLOOR = 1e-10  # metrics this small on both runs carry no order information


# report ---------------------------------------------------------------------------

@dataclass
class RunSummary:
    """Digest of one run directory."""

    path: Path
    scenario: str
    group: str
    dx: float
    dt: float
    steps: int
    h_initial: float
    h_final: float
    energy_max_rel_dev: float
    energy_trend: float
    p0_max_initial: float
    p0_max_final: float
    p0_max_over_run: float
    gauss_max_over_run: float
    final_gauss_residual: float
    final_ampere_residual: Optional[float]
    exact_error: Optional[float]


def load_run(path) -> RunSummary:
    """Read ``manifest.json`` and ``monitor.csv`` from a run directory."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise ManifestMissing(f"no manifest.json in {path}")
    man = json.loads(manifest_path.read_text())
    log = MonitorLog.from_csv(path / man.get("monitor_csv", "monitor.csv"))
    H = log.column("hamiltonian")
    t = log.column("time")
    p0 = log.column("p0_max")
    scale = max(abs(H[0]), np.finfo(float).tiny)
    dev = (H - H[0]) / scale
    trend = float(np.polyfit(t, dev, 1)[0] * (t[-1] - t[0])) if len(t) > 2 and t[-1] != t[0] else 0.0
    cfg = man["config"]
    group = "/".join([cfg["initial"]["kind"], cfg["metric"]["family"], cfg["source"]["kind"],
                      cfg["integrator"]["scheme"]])
    return RunSummary(
        path=path, scenario=man["scenario"], group=group, dx=float(min(man["dx"])), dt=float(man["dt"]),
        steps=int(man["steps"]), h_initial=float(H[0]), h_final=float(H[-1]),
        energy_max_rel_dev=float(np.max(np.abs(dev))), energy_trend=trend,
        p0_max_initial=float(p0[0]), p0_max_final=float(p0[-1]), p0_max_over_run=float(np.max(p0)),
        gauss_max_over_run=float(np.max(log.column("gauss_max"))),
        final_gauss_residual=float(man["final_gauss_residual"]),
        final_ampere_residual=man.get("final_ampere_residual"),
        exact_error=man.get("exact_error"),
    )


SUMMARY_COLUMNS = ("path", "scenario", "group", "dx", "dt", "steps", "h_initial", "h_final", "energy_max_rel_dev",
                   "energy_trend", "p0_max_initial", "p0_max_final", "p0_max_over_run", "gauss_max_over_run",
                   "final_gauss_residual", "final_ampere_residual", "exact_error")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def convergence_rows(runs: list[RunSummary]) -> list[dict]:
    """Observed orders between consecutive resolutions of each group.

    Every group with at least two distinct ``dx`` gets one row per refined
    run: pairwise orders for each residual/error metric, and with three or
    more runs the Richardson order of the final Hamiltonian.
    """
    rows = []
    groups = {}
    for r in runs:
        groups.setdefault(r.group, []).append(r)
    for group, members in sorted(groups.items()):
        members = sorted(members, key=lambda r: -r.dx)
        if len({m.dx for m in members}) < 2:
            continue
        for i in range(1, len(members)):
            a, b = members[i - 1], members[i]
            row = {"group": group, "dx_coarse": a.dx, "dx_fine": b.dx}
            for metric in CONVERGENCE_METRICS:
                ea, eb = getattr(a, metric), getattr(b, metric)
                ok = (ea is not None and eb is not None and ea > 0 and eb > 0
                      and max(ea, eb) > ROUNDOFF_FLOOR)
                row[f"order_{metric}"] = float(verify.observed_orders([ea, eb], [a.dx, b.dx])[0]) if ok else None
            row["richardson_order_hamiltonian"] = None
            if i >= 2:
                c0 = members[i - 2]
                ratio = c0.dx / a.dx
                if np.isclose(ratio, a.dx / b.dx) and (a.h_final - b.h_final) != 0:
                    row["richardson_order_hamiltonian"] = verify.richardson_order(
                        c0.h_final, a.h_final, b.h_final, ratio)
            rows.append(row)
    return rows


CONVERGENCE_COLUMNS = ("group", "dx_coarse", "dx_fine") + tuple(f"order_{m}" for m in CONVERGENCE_METRICS) + (
    "richardson_order_hamiltonian",)


def digest(runs: list[RunSummary], conv: list[dict]) -> str:
    lines = [f"{len(runs)} run(s)"]
    for r in runs:
        lines.append(f"- {r.scenario} [{r.group}] dx={r.dx:.6g} dt={r.dt:.6g} steps={r.steps}")
        lines.append(f"    H: {r.h_initial:.10g} -> {r.h_final:.10g}, max rel dev {r.energy_max_rel_dev:.3e}, "
                     f"trend {r.energy_trend:+.3e}")
        lines.append(f"    p0 max: initial {r.p0_max_initial:.3e}, final {r.p0_max_final:.3e}, "
                     f"over run {r.p0_max_over_run:.3e}")
        amp = "n/a" if r.final_ampere_residual is None else f"{r.final_ampere_residual:.3e}"
        lines.append(f"    gauss residual max over run {r.gauss_max_over_run:.3e}, final {r.final_gauss_residual:.3e}; "
                     f"final ampere residual {amp}")
        if r.exact_error is not None:
            lines.append(f"    error vs analytic solution {r.exact_error:.3e}")
    if conv:
        lines.append("observed orders:")
        for row in conv:
            parts = [f"{k[6:]}={row[k]:.3f}" for k in row if k.startswith("order_") and row[k] is not None]
            if row["richardson_order_hamiltonian"] is not None:
                parts.append(f"richardson(H)={row['richardson_order_hamiltonian']:.3f}")
            lines.append(f"- {row['group']} dx {row['dx_coarse']:.6g} -> {row['dx_fine']:.6g}: " + ", ".join(parts))
    return "\n".join(lines) + "\n"


def report(dirs, out_dir) -> Path:
    """Write ``summary.csv``, ``convergence.csv`` and ``digest.txt`` to ``out_dir``."""
    runs = [load_run(d) for d in dirs]
    conv = convergence_rows(runs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in runs:
            w.writerow([_cell(getattr(r, c)) for c in SUMMARY_COLUMNS])
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for row in conv:
            w.writerow([_cell(row[c]) for c in CONVERGENCE_COLUMNS])
    text = digest(runs, conv)
    (out / "digest.txt").write_text(text)
    return out


# argument handling ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cmaxwell",
        description="Canonical Maxwell field runs from scenario files.",
        epilog=f"Relative output directories are resolved under ${OUTPUT_ROOT_ENV} when it is set. "
               f"Bundled scenarios: {', '.join(bundled_scenarios())}.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("config", help="scenario file or bundled scenario name")
    r.add_argument("--out", help="output directory (overrides the config and the output root)")
    v = sub.add_parser("validate", help="parse and validate a scenario, print the effective config")
    v.add_argument("config")
    rep = sub.add_parser("report", help="summarize run directories")
    rep.add_argument("dirs", nargs="+")
    rep.add_argument("--out", default="report", help="directory for the report files (default: ./report)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "validate":
            sc = load_config(args.config)
            sc.build()
            print(json.dumps(sc.config, indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "run":
            sc = load_config(args.config)
            manifest = run_scenario(sc, args.out)
            fin = manifest["final_monitors"]
            print(f"{sc.name}: {manifest['steps']} steps, dt={manifest['dt']:.6g}, "
                  f"H={fin['hamiltonian']:.10g}, gauss={fin['gauss_max']:.3e}, "
                  f"wall {manifest['wall_time_s']:.2f}s")
            return EXIT_OK
        out = report(args.dirs, args.out)
        print((out / "digest.txt").read_text(), end="")
        return EXIT_OK
    except (ConfigError, ManifestMissing) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CMaxwellError, OSError, ArithmeticError, ValueError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
