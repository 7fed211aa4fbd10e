"""Command-line front end: config files, runs, convergence, comparisons."""

from __future__ import annotations

import argparse
import csv
import configparser
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import List, Optional

import numpy as np

from . import driver
from .core import SolverParams
from .driver import ScenarioConfig
from .geometry import intersect_barrier
from .mapped import run_mapped

DEFAULT_SAMPLE_TIMES = [round(0.1 * k, 10) for k in range(15)]  # 0.0 .. 1.4


class CliError(Exception):
    pass


class ParseError(CliError):
    """Malformed config file; message carries file/line information."""


class ValidationError(CliError):
    """A config value failed validation; message names the field."""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_SCHEMA = {
    "grid": {"nx", "ny"},
    "barrier": {"vertices", "beta"},
    "initial": {"depth", "dam_height", "dam_side", "dam_y"},
    "bathymetry": {"kind", "island_center", "island_radius", "island_peak"},
    "boundary": {"left", "right", "bottom", "top"},
    "numerics": {"order", "cfl", "gravity", "drytol", "average"},
    "output": {"t_end", "gauges", "snapshot_times"},
}


def _find_line(path, needle):
    try:
        with open(path) as f:
            for ln, line in enumerate(f, 1):
                stripped = line.strip()
                if stripped.startswith(needle):
                    return ln
    except OSError:
        pass
    return 0


def _parse_points(text, fieldname):
    """Parse 'x,y; x,y; ...' into a list of float pairs."""
    pts = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(",")
        if len(bits) != 2:
            raise ValidationError(f"{fieldname}: expected 'x,y' pairs, got {part!r}")
        try:
            pts.append((float(bits[0]), float(bits[1])))
        except ValueError:
            raise ValidationError(f"{fieldname}: non-numeric coordinate in {part!r}")
    return pts


def _parse_floats(text, fieldname):
    try:
        return [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"{fieldname}: expected a list of numbers")


def parse_config(path) -> ScenarioConfig:
    """Read a key = value scenario file into a validated ScenarioConfig."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as f:
            cp.read_file(f, source=str(path))
    except OSError as e:
        raise ParseError(f"{path}: {e}")
    except configparser.Error as e:
        raise ParseError(f"{path}: {e}")

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ParseError(f"{path}:{_find_line(path, '[' + section)}: "
                             f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ParseError(f"{path}:{_find_line(path, key)}: "
                                 f"unknown key {key!r} in [{section}]")

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return default

    def getnum(section, key, conv, default=None):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ValidationError(f"{key}: expected a number, got {raw!r}")

    kwargs = {}
    kwargs["nx"] = getnum("grid", "nx", int, 50)
    kwargs["ny"] = getnum("grid", "ny", int, 50)

    verts_raw = get("barrier", "vertices")
    if verts_raw is not None:
        kwargs["barrier_vertices"] = _parse_points(verts_raw, "vertices")
        beta = getnum("barrier", "beta", float)
        if beta is None:
            raise ValidationError("beta: required when a barrier is configured")
        kwargs["beta"] = beta

    kwargs["depth"] = getnum("initial", "depth", float, 1.2)
    dam_h = getnum("initial", "dam_height", float)
    if dam_h is not None:
        kwargs["dam_height"] = dam_h
    kwargs["dam_side"] = get("initial", "dam_side", "none")
    kwargs["dam_y"] = getnum("initial", "dam_y", float, 0.2)

    kwargs["bathymetry"] = get("bathymetry", "kind", "flat")
    center_raw = get("bathymetry", "island_center")
    if center_raw is not None:
        pts = _parse_points(center_raw, "island_center")
        if len(pts) != 1:
            raise ValidationError("island_center: expected one point")
        kwargs["island_center"] = pts[0]
    kwargs["island_radius"] = getnum("bathymetry", "island_radius", float, 0.25)
    kwargs["island_peak"] = getnum("bathymetry", "island_peak", float, 1.3)

    for side in ("left", "right", "bottom", "top"):
        kwargs[f"bc_{side}"] = get("boundary", side, "wall")

    try:
        kwargs["params"] = SolverParams(
            gravity=getnum("numerics", "gravity", float, SolverParams().gravity),
            cfl=getnum("numerics", "cfl", float, SolverParams().cfl),
            order=getnum("numerics", "order", int, SolverParams().order),
            average=get("numerics", "average", SolverParams().average),
            drytol=getnum("numerics", "drytol", float, SolverParams().drytol),
        )
    except ValueError as e:
        raise ValidationError(str(e))

    kwargs["t_end"] = getnum("output", "t_end", float, 1.0)
    gauges_raw = get("output", "gauges")
    if gauges_raw is not None:
        kwargs["gauges"] = _parse_points(gauges_raw, "gauges")
    snaps_raw = get("output", "snapshot_times")
    if snaps_raw is not None:
        kwargs["snapshot_times"] = _parse_floats(snaps_raw, "snapshot_times")

    for (gx, gy) in kwargs.get("gauges", []):
        if not (0.0 <= gx <= 1.0 and 0.0 <= gy <= 1.0):
            raise ValidationError(f"gauge: point ({gx}, {gy}) outside the unit square")

    try:
        cfg = ScenarioConfig(**kwargs)
        cfg.barrier()  # triggers barrier geometry validation
    except ValueError as e:
        raise ValidationError(str(e))
    return cfg


# ---------------------------------------------------------------------------
# output helpers (atomic writes)
# ---------------------------------------------------------------------------

def atomic_write(path, text):
    """Write text to path via a temp file + rename in the same directory."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _gauge_csv(series):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["t", "h", "hu", "hv"])
    for row in series.as_array():
        w.writerow([f"{v:.16e}" for v in row])
    return buf.getvalue()


def _snapshot_csv(h):
    buf = io.StringIO()
    np.savetxt(buf, h, delimiter=",", fmt="%.16e")
    return buf.getvalue()


def write_run_outputs(res, outdir):
    os.makedirs(outdir, exist_ok=True)
    for k, gs in enumerate(res.gauges):
        atomic_write(os.path.join(outdir, f"gauge_{k:02d}.csv"), _gauge_csv(gs))
    for (t, h) in res.snapshots:
        atomic_write(os.path.join(outdir, f"snapshot_t{t:.4f}.csv"),
                     _snapshot_csv(h))
    stats = (
        f"steps = {res.steps}\n"
        f"min_dt = {res.min_dt:.16e}\n"
        f"mean_dt = {res.mean_dt:.16e}\n"
        f"mass_initial = {res.mass_initial:.16e}\n"
        f"mass_final = {res.mass_final:.16e}\n"
        f"mass_created = {res.mass_created:.16e}\n"
    )
    atomic_write(os.path.join(outdir, "stats.txt"), stats)


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Gauge-wise L1 errors against a fine mapped-grid reference."""

    grids: List[int]
    gauges: List[tuple]
    errors: np.ndarray          # (n_grids, n_gauges)
    ratios: np.ndarray          # (n_grids, n_gauges); nan on the first row
    orders: np.ndarray          # (n_grids, n_gauges); nan on the first row
    reference_kind: str = ""
    reference_n: int = 0
    sample_times: List[float] = dc_field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["grid", "dx", "gauge", "l1_error", "ratio", "order"])
        for a, n in enumerate(self.grids):
            for k in range(len(self.gauges)):
                ratio = "" if np.isnan(self.ratios[a, k]) else f"{self.ratios[a, k]:.6f}"
                order = "" if np.isnan(self.orders[a, k]) else f"{self.orders[a, k]:.6f}"
                w.writerow([n, f"{1.0 / n:.8e}", k,
                            f"{self.errors[a, k]:.10e}", ratio, order])
        return buf.getvalue()


def convergence_study(cfg: ScenarioConfig, grids, ref_n,
                      sample_times=None, reference=None) -> ConvergenceReport:
    """L1 gauge errors of the cut-cell solver against a mapped reference.

    The reference runs once on the barrier-fitted grid at ``ref_n``; each
    study grid runs the cut-cell solver. The error per gauge is the mean
    absolute height difference over the sample times.  A precomputed
    reference run (same scenario and gauges at ``ref_n``) may be passed
    to share it between studies.
    """
    if sample_times is None:
        sample_times = DEFAULT_SAMPLE_TIMES
    grids = sorted(int(n) for n in grids)
    if ref_n <= max(grids):
        raise ValidationError("ref: reference resolution must exceed all grids")
    if not cfg.gauges:
        raise ValidationError("gauges: convergence study needs gauges")
    t_end = max(max(sample_times), cfg.t_end)

    if reference is not None:
        ref = reference
    else:
        ref_cfg = replace(cfg, nx=ref_n, ny=ref_n, t_end=t_end,
                          snapshot_times=[])
        ref = run_mapped(ref_cfg)
    href = [gs.at_times(sample_times) for gs in ref.gauges]

    def one(n):
        c = replace(cfg, nx=n, ny=n, t_end=t_end, snapshot_times=[])
        return driver.run(c)

    with ThreadPoolExecutor(max_workers=len(grids)) as ex:
        results = list(ex.map(one, grids))

    errors = np.zeros((len(grids), len(cfg.gauges)))
    for a, res in enumerate(results):
        for k, gs in enumerate(res.gauges):
            errors[a, k] = float(np.mean(np.abs(gs.at_times(sample_times) - href[k])))

    ratios = np.full_like(errors, np.nan)
    orders = np.full_like(errors, np.nan)
    for a in range(1, len(grids)):
        ratios[a] = errors[a - 1] / errors[a]
        fac = math.log(grids[a] / grids[a - 1])
        orders[a] = np.log(ratios[a]) / fac
    return ConvergenceReport(grids=grids, gauges=list(cfg.gauges),
                             errors=errors, ratios=ratios, orders=orders,
                             reference_kind="mapped", reference_n=ref_n,
                             sample_times=list(sample_times))


# ---------------------------------------------------------------------------
# barrier effectiveness comparison
# ---------------------------------------------------------------------------

def vee_from_linear(vertices):
    """V-shaped barrier from a two-vertex one: two copies of its upper
    half bent at the midpoint, keeping the higher endpoint elevation."""
    (x0, y0), (x1, y1) = vertices
    ymid = 0.5 * (y0 + y1)
    ytop = max(y0, y1)
    return [(0.0, ytop), (0.5, ymid), (1.0, ytop)]


def compare_effectiveness(cfg: ScenarioConfig):
    """Peak inundation at the island peak: no barrier vs linear vs V."""
    if cfg.bathymetry != "island":
        raise ValidationError("bathymetry: comparison needs the island scenario")
    if cfg.barrier_vertices is None or len(cfg.barrier_vertices) != 2:
        raise ValidationError("vertices: comparison needs a two-vertex barrier")
    gauges = [tuple(cfg.island_center)]
    base = replace(cfg, gauges=gauges, snapshot_times=[])
    variants = {
        "none": replace(base, barrier_vertices=None, beta=None),
        "linear": base,
        "vee": replace(base, barrier_vertices=vee_from_linear(cfg.barrier_vertices)),
    }
    summary = {}
    for name, vcfg in variants.items():
        res = driver.run(vcfg)
        summary[name] = float(np.max(res.gauges[0].h))
    for name in ("linear", "vee"):
        peak0 = summary["none"]
        summary[f"reduction_{name}"] = (
            1.0 - summary[name] / peak0 if peak0 > 0 else 0.0)
    return summary


def _summary_text(summary):
    lines = [
        f"peak_none = {summary['none']:.10e}",
        f"peak_linear = {summary['linear']:.10e}",
        f"peak_vee = {summary['vee']:.10e}",
        f"reduction_linear = {summary['reduction_linear']:.6f}",
        f"reduction_vee = {summary['reduction_vee']:.6f}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _cmd_run(args):
    cfg = parse_config(args.config)
    if args.solver == "mapped":
        res = run_mapped(cfg)
    else:
        res = driver.run(cfg)
    write_run_outputs(res, args.out)
    print(f"run complete: {res.steps} steps, outputs in {args.out}")
    return 0


def _cmd_converge(args):
    cfg = parse_config(args.config)
    rep = convergence_study(cfg, args.grids, args.ref)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "convergence.csv"), rep.to_csv())
    meta = (f"reference = {rep.reference_kind} {rep.reference_n}x{rep.reference_n}\n"
            f"grids = {' '.join(str(n) for n in rep.grids)}\n"
            f"sample_times = {' '.join(str(t) for t in rep.sample_times)}\n")
    atomic_write(os.path.join(args.out, "convergence_meta.txt"), meta)
    print(rep.to_csv(), end="")
    return 0


def _cmd_compare(args):
    cfg = parse_config(args.config)
    summary = compare_effectiveness(cfg)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "effectiveness.txt"),
                 _summary_text(summary))
    print(_summary_text(summary), end="")
    return 0


def _cmd_geometry(args):
    cfg = parse_config(args.config)
    geom = cfg.barrier()
    if geom is None:
        raise ValidationError("vertices: geometry dump needs a barrier")
    tab = intersect_barrier(geom, cfg.nx, cfg.ny)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "cut_cells.txt"), tab.dump_text())
    print(f"{tab.count} cut cells written to {args.out}/cut_cells.txt")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="barrierflow",
        description="Shallow-water solver with an embedded permeable barrier")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config")
    p.add_argument("--solver", choices=("cutcell", "mapped"), default="cutcell")
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("converge", help="convergence study vs mapped reference")
    p.add_argument("config")
    p.add_argument("--grids", type=int, nargs="+", default=[25, 50, 100])
    p.add_argument("--ref", type=int, default=300)
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("compare", help="barrier effectiveness comparison")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("geometry", help="dump the cut-cell geometry table")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_geometry)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
