"""Command-line frontend.

    hsflow COMMAND --datum PATH [--n INT] [--times T0:T1:COUNT | t,t,...]
                   [--out PATH] [--format csv|json] [--auto-normalize]
                   [--eps FLOAT] [--h FLOAT] [--dt FLOAT] [--steps INT]

``--datum`` takes a datum JSON file or one of the built-in fixture names
(stat, smooth, pw).  Exit status is 0 on success, 1 on validation failures
(bad datum, bad arguments, failed checks) and 2 when a numerical guard trips.
Every failure writes one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circle import PeriodicGrid
from .datum import FIXTURES, DatumError, breakdown_time, load_datum, to_original_time
from .geodesic import (
    DEFAULT_MODES,
    DefectTimeError,
    OracleGuardError,
    field_distance,
    geodesic_residual,
    oracle_solve,
    residual_bound,
    weak_solution_audit,
)
from .lagrangian import BlowUpError, breakdown_set
from .weak_flow import (
    DEFECT_EXCLUSION,
    energy_report,
    eulerian_fields,
    is_near_defect,
    state_membership,
)

COMMANDS = ("simulate", "breakdown", "energy-audit", "validate-geodesic",
            "oracle-compare", "audit-weak")
ENERGY_AUDIT_TOL = 1e-6


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


@dataclass
class RunConfig:
    command: str
    datum_path: str
    n: int | None = None
    times: list = field(default_factory=lambda: [0.0])
    output_path: str | None = None
    format: str = "csv"
    auto_normalize: bool = False
    eps: float = 1e-9
    h: float = 1e-4
    dt: float = 1e-4
    steps: int = 256

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise CliError(1, "config", f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise CliError(1, "config", f"format must be csv or json, got {self.format!r}")
        if not self.times:
            raise CliError(1, "config", "times must be nonempty")
        if self.n is not None:
            try:
                PeriodicGrid(self.n)
            except ValueError as e:
                raise CliError(1, "config", str(e)) from None
        self.times = sorted(float(t) for t in self.times)

    def as_dict(self) -> dict:
        return {"command": self.command, "datum": self.datum_path, "n": self.n,
                "times": self.times, "format": self.format,
                "auto_normalize": self.auto_normalize, "eps": self.eps, "h": self.h,
                "dt": self.dt, "steps": self.steps}


def parse_times(text: str) -> list:
    """``T0:T1:COUNT`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            t0, t1, count = text.split(":")
            t0, t1, count = float(t0), float(t1), int(count)
            if count < 1:
                raise ValueError("count must be positive")
            if not (math.isfinite(t0) and math.isfinite(t1)):
                raise ValueError("non-finite endpoint")
            times = np.linspace(t0, t1, count).tolist()
        else:
            times = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise CliError(1, "config", f"bad --times {text!r}: {e}") from None
    if any(not math.isfinite(t) for t in times):
        raise CliError(1, "config", f"bad --times {text!r}: non-finite value")
    return times


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _text(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _load(cfg: RunConfig):
    if cfg.datum_path in FIXTURES and not Path(cfg.datum_path).exists():
        return FIXTURES[cfg.datum_path](cfg.n or 256), 1.0
    try:
        return load_datum(cfg.datum_path, n=cfg.n, auto_normalize=cfg.auto_normalize)
    except FileNotFoundError:
        raise CliError(1, "datum", f"no such datum file {cfg.datum_path!r}") from None
    except (DatumError, ValueError) as e:
        raise CliError(1, "datum", str(e)) from None


# -- commands -----------------------------------------------------------------

def _simulate(cfg, datum, alpha):
    columns = ["t", "x", "u", "ux", "rho", "mask"]
    rows = []
    for t in cfg.times:
        ef = eulerian_fields(datum, t)
        for j, x in enumerate(ef.x):
            rows.append([t, x, ef.u.values[j], ef.u_x.values[j], ef.rho.values[j],
                         bool(ef.mask[j])])
    return columns, rows, True


def _breakdown(cfg, datum, alpha):
    columns = ["t_star", "t_star_original", "set_start", "set_end"]
    t_star = breakdown_time(datum, cfg.eps if datum.structured is None else 0.0)
    t_orig = to_original_time(t_star, alpha)
    sets = breakdown_set(datum, t_star, cfg.eps) if math.isfinite(t_star) else []
    if not sets:
        return columns, [[t_star, t_orig, math.nan, math.nan]], True
    return columns, [[t_star, t_orig, a, b] for a, b in sets], True


def _energy_audit(cfg, datum, alpha):
    columns = ["t", "measured_E", "predicted_E", "defect_measure", "is_defect"]
    rows, ok = [], True
    for t in cfg.times:
        r = energy_report(datum, t, cfg.eps)
        ok &= abs(r.measured_E - r.predicted_E) <= ENERGY_AUDIT_TOL
        rows.append([t, r.measured_E, r.predicted_E, r.defect_measure, r.is_defect_time])
    return columns, rows, ok


def _validate_geodesic(cfg, datum, alpha):
    columns = ["t", "h", "r1_max", "r2_max", "bound", "passed", "skipped"]
    rows, ok = [], True
    bound = residual_bound(cfg.h)
    for t in cfg.times:
        try:
            r = geodesic_residual(datum, t, h=cfg.h, modes=DEFAULT_MODES)
        except DefectTimeError:
            rows.append([t, cfg.h, math.nan, math.nan, bound, True, True])
            continue
        except ValueError as e:
            raise CliError(1, "config", str(e)) from None
        passed = r.max_weak <= bound
        ok &= passed
        rows.append([t, cfg.h, float(r.r1_weak.max()), float(r.r2_weak.max()), bound,
                     passed, False])
    return columns, rows, ok


def _oracle_compare(cfg, datum, alpha):
    columns = ["t", "n", "dt", "l2_error"]
    t_star = breakdown_time(datum)
    if cfg.times[-1] >= t_star:
        raise CliError(1, "breakdown", f"t_end={cfg.times[-1]!r} is not below the "
                       f"breakdown time", T_star=_num(t_star))
    rows = []
    for t in cfg.times:
        try:
            oracle = oracle_solve(datum, t, dt=cfg.dt)
        except OracleGuardError as e:
            raise CliError(2, "guard", str(e), t=t) from None
        except ValueError as e:
            raise CliError(1, "config", str(e)) from None
        rows.append([t, datum.n, cfg.dt, field_distance(eulerian_fields(datum, t), oracle)])
    return columns, rows, True


def _audit_weak(cfg, datum, alpha):
    columns = ["condition", "passed", "value", "detail"]
    try:
        report = weak_solution_audit(datum, cfg.times, h=cfg.h)
    except ValueError as e:
        raise CliError(1, "config", str(e)) from None
    rows = [[name, c.passed, c.value, c.detail] for name, c in sorted(report.conditions.items())]
    for base in ("zero", "varrho"):
        worst, good = 0.0, True
        for t in cfg.times:
            if is_near_defect(datum, t, DEFECT_EXCLUSION):
                continue
            m = state_membership(datum, t, base=base, steps=cfg.steps)
            good &= m.ok
            worst = max(worst, m.integral)
        rows.append([f"tangent_{base}", good, worst, "max tangent-space integral"])
    return columns, rows, report.passed


HANDLERS = {
    "simulate": _simulate,
    "breakdown": _breakdown,
    "energy-audit": _energy_audit,
    "validate-geodesic": _validate_geodesic,
    "oracle-compare": _oracle_compare,
    "audit-weak": _audit_weak,
}


# -- output -------------------------------------------------------------------

def render(cfg: RunConfig, columns, rows) -> str:
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_text(v) for v in row])
        return buf.getvalue()
    results = []
    for row in rows:
        entry = {}
        for c, v in zip(columns, row):
            if isinstance(v, (bool, np.bool_)):
                entry[c] = bool(v)
            elif isinstance(v, (int, np.integer)):
                entry[c] = int(v)
            elif isinstance(v, (float, np.floating)):
                entry[c] = _num(v)
            else:
                entry[c] = v
        results.append(entry)
    doc = {"command": cfg.command, "config": cfg.as_dict(), "results": results}
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def fields_document(results: list, t: float) -> dict:
    """Datum JSON built from the ``simulate`` JSON rows at time t.

    u_x is left out so the loader differentiates u spectrally, which keeps
    int u_x = 0 exact.
    """
    sel = [r for r in results if r["t"] == t]
    return {"samples": {"n": len(sel), "u": [r["u"] for r in sel],
                        "rho": [r["rho"] for r in sel]}}


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    datum, alpha = _load(cfg)
    try:
        columns, rows, ok = HANDLERS[cfg.command](cfg, datum, alpha)
    except BlowUpError as e:
        raise CliError(2, "guard", str(e)) from None
    text = render(cfg, columns, rows)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        stdout.write(text)
    if not ok:
        raise CliError(1, "check", f"{cfg.command} checks failed")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(1, "usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hsflow", description="Explicit and weak solutions of the periodic "
                "two-component Hunter-Saxton system.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--datum", required=True, help="datum JSON file or fixture name (stat, smooth, pw)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--times", default="0", help="T0:T1:COUNT or a comma-separated list")
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--auto-normalize", action="store_true")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=256)
    return p


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        cfg = RunConfig(a.command, a.datum, a.n, parse_times(a.times), a.out, a.format,
                        a.auto_normalize, a.eps, a.h, a.dt, a.steps)
        return run(cfg)
    except CliError as e:
        sys.stderr.write(json.dumps({"error": e.kind, "exit": e.code, "message": str(e),
                                     **e.extra}) + "\n")
        return e.code


if __name__ == "__main__":
    sys.exit(main())
