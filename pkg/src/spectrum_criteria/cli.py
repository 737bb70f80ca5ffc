"""Command-line scans: configuration, orchestration and report files.

The report (``report.json``) is deterministic for a fixed configuration. Wall-clock
times go to ``timings.json`` beside it, and every verdict also gets a flat CSV series.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from . import criteria as cr
from . import potential as pot
from . import riccati_lab as rl
from . import spectral as spc
from . import transport as tr
from .geometry import Ball, LatticeCovering, covering_centers, is_rho_covering

SCHEMA = "spectrum-criteria-report/1"
SUFFICIENT = ("negative_part", "uniform_tail", "rearrangement", "expectation_deviation",
              "trimmed_integral", "transport")
NECESSARY = ("necessary_measures", "molchanov")
KNOWN_CRITERIA = SUFFICIENT + NECESSARY
POTENTIALS = ("example1", "example2", "example3", "zero", "constant", "quadratic", "sqrt", "grid")
CENTER_MODES = ("lattice", "axis", "explicit", "example2-windows")


@dataclass
class ScanConfig:
    dimension: int = 3
    potential: str = "example3"
    params: dict = field(default_factory=dict)
    spacing: float = 1.0
    r0: float = 0.9
    index_bound: int = 4
    center_mode: str = "axis"
    centers: list = field(default_factory=list)
    window_range: list = field(default_factory=lambda: [3, 8])
    r_list: list = field(default_factory=lambda: [0.9])
    h: Optional[float] = None
    transport_h: Optional[float] = None
    A_list: list = field(default_factory=lambda: [1.0, 10.0, 100.0])
    N_list: list = field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0])
    gamma: Optional[float] = None
    signed_trimmed: bool = False
    necessary_m: int = 100
    criteria: list = field(default_factory=lambda: ["transport", "negative_part"])
    spectral: bool = True
    eigen_radius: Optional[float] = None
    eigen_h: Optional[float] = None
    eigen_domain: str = "ball"
    margin_factor: float = 2.0
    seed: int = 0
    output: str = "scan-output"

    @classmethod
    def from_dict(cls, data: dict) -> "ScanConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def validate(self) -> list[str]:
        return validate(self)


def validate(cfg: ScanConfig) -> list[str]:
    """Every problem that would stop run_scan, checked before any computation."""
    bad = []
    if cfg.dimension < 3:
        bad.append(f"dimension={cfg.dimension}: the criteria need d >= 3")
    if cfg.potential not in POTENTIALS:
        bad.append(f"potential {cfg.potential!r} unknown (choose from {', '.join(POTENTIALS)})")
    if not cfg.r_list:
        bad.append("r_list is empty")
    elif any(not (isinstance(r, (int, float)) and r > 0) for r in cfg.r_list):
        bad.append("r_list entries must be positive")
    if not cfg.A_list:
        bad.append("A_list is empty")
    for name in ("h", "transport_h", "eigen_h", "eigen_radius"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            bad.append(f"{name} must be positive")
    if not cfg.spacing > 0 or not cfg.r0 > 0:
        bad.append("spacing and r0 must be positive")
    if cfg.index_bound < 0:
        bad.append("index_bound must be nonnegative")
    if cfg.gamma is not None and not 0 < cfg.gamma < 1:
        bad.append(f"gamma={cfg.gamma} must lie in (0, 1)")
    if cfg.necessary_m < 4:
        bad.append("necessary_m must be at least 4")
    unknown = [c for c in cfg.criteria if c not in KNOWN_CRITERIA]
    if unknown:
        bad.append(f"unknown criteria: {', '.join(unknown)}")
    if cfg.center_mode not in CENTER_MODES:
        bad.append(f"center_mode {cfg.center_mode!r} unknown")
    if cfg.center_mode == "explicit":
        if not cfg.centers:
            bad.append("center_mode 'explicit' needs centers")
        elif any(len(c) != cfg.dimension for c in cfg.centers):
            bad.append("every center needs dimension coordinates")
    if cfg.center_mode == "example2-windows" and cfg.potential != "example2":
        bad.append("center_mode 'example2-windows' needs the example2 potential")
    if cfg.eigen_domain not in ("ball", "cube"):
        bad.append(f"eigen_domain {cfg.eigen_domain!r} unknown")
    needs_cover = any(c in SUFFICIENT for c in cfg.criteria) and cfg.center_mode in ("lattice", "axis")
    if needs_cover and cfg.spacing > 0 and cfg.r0 > 0:
        ok, _ = is_rho_covering(LatticeCovering(max(cfg.dimension, 1), cfg.spacing, cfg.r0, 0))
        if not ok:
            bad.append(f"r0={cfg.r0} <= sqrt(d)/2 * spacing: the lattice balls are not a rho-covering")
    p = cfg.params
    if cfg.potential == "example1" and not 0 < p.get("r0", cfg.r0) < 0.5:
        bad.append("example1 needs 0 < r0 < 1/2")
    if cfg.potential == "example3":
        if cfg.dimension != 3:
            bad.append("example3 is defined for d = 3")
        bad += pot.Example3Params(r0=cfg.r0, rho0=p.get("rho0", 0.1)).violations()
    if cfg.potential == "example2":
        count, power = p.get("count", 10), p.get("alpha_power", 2.0)
        if count < 2 or not power > 0:
            bad.append("example2 needs count >= 2 and alpha_power > 0")
        lo, hi = cfg.window_range
        if cfg.center_mode == "example2-windows" and not 1 <= lo <= hi <= count - 1:
            bad.append(f"window_range {cfg.window_range} outside 1..{count - 1}")
    if cfg.potential == "grid":
        path = p.get("path")
        if not path or not Path(path).is_file():
            bad.append(f"grid potential file {path!r} does not exist")
    return bad


def build_potential(cfg: ScanConfig):
    d, p = cfg.dimension, cfg.params
    if cfg.potential == "example1":
        return pot.example1_potential(p.get("r0", cfg.r0), d)
    if cfg.potential == "example2":
        alpha = [float(k) ** p.get("alpha_power", 2.0) for k in range(1, p.get("count", 10) + 1)]
        return pot.example2_potential(p.get("a", 1.0), alpha, d=d)[1]
    if cfg.potential == "example3":
        return pot.example3_potential(pot.Example3Params(r0=cfg.r0, rho0=p.get("rho0", 0.1)))
    if cfg.potential == "zero":
        return pot.constant_potential(0.0, d)
    if cfg.potential == "constant":
        return pot.constant_potential(p.get("value", 1.0), d)
    if cfg.potential == "quadratic":
        return pot.quadratic_potential(d)
    if cfg.potential == "sqrt":
        return pot.sqrt_norm_potential(d)
    return pot.load_grid_potential(p["path"], d)


def scan_centers(cfg: ScanConfig) -> list[np.ndarray]:
    d = cfg.dimension
    if cfg.center_mode == "explicit":
        return [np.asarray(c, dtype=float) for c in cfg.centers]
    if cfg.center_mode == "axis":
        return [np.array([cfg.spacing * k] + [0.0] * (d - 1)) for k in range(cfg.index_bound + 1)]
    if cfg.center_mode == "example2-windows":
        p = cfg.params
        alpha = [float(k) ** p.get("alpha_power", 2.0) for k in range(1, p.get("count", 10) + 1)]
        lay = pot.example2_layout(p.get("a", 1.0), alpha)
        lo, hi = cfg.window_range
        return [np.array([0.5 * sum(lay.window(k))] + [0.0] * (d - 1)) for k in range(lo, hi + 1)]
    return covering_centers(LatticeCovering(d, cfg.spacing, cfg.r0, cfg.index_bound))


def _finite(obj):
    """JSON-safe copy: NaN and infinities become None."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _run_criterion(name: str, V, centers, cfg: ScanConfig):
    r_list = [float(r) for r in cfg.r_list]
    mf = cfg.margin_factor
    g = cfg.gamma
    if name == "negative_part":
        return cr.check_negative_part(V, centers, cfg.r0, cfg.h, margin_factor=mf).as_dict()
    if name == "uniform_tail":
        return cr.check_uniform_tail(V, centers, cfg.r0, cfg.N_list, cfg.h).as_dict()
    if name == "rearrangement":
        return cr.check_rearrangement(V, centers, r_list, g, cfg.h, margin_factor=mf).as_dict()
    if name == "expectation_deviation":
        return cr.check_expectation_deviation(V, centers, r_list, g, cfg.h, margin_factor=mf).as_dict()
    if name == "trimmed_integral":
        return cr.check_trimmed_integral(V, centers, r_list, g, cfg.h, margin_factor=mf,
                                         signed=cfg.signed_trimmed).as_dict()
    if name == "transport":
        return cr.check_transport(V, centers, cfg.r0, cfg.transport_h, margin_factor=mf).as_dict()
    if name == "molchanov":
        return cr.necessary_molchanov(V, centers, r_list, cfg.h, margin_factor=mf).as_dict()
    nm = cr.necessary_measure_conditions(V, centers, r_list[0], cfg.A_list, cfg.necessary_m, mf)
    out = nm.as_dict()
    out["name"] = "necessary_measures"
    out["resolution"] = {"r": nm.r, "m": nm.m, "triangle_cell": nm.r / nm.m}
    return out


def _spectral(V, centers, cfg: ScanConfig) -> dict:
    r = cfg.eigen_radius if cfg.eigen_radius is not None else cfg.r0
    h = cfg.eigen_h if cfg.eigen_h is not None else r / 8
    sc = spc.localization_scan(V, centers, r, h, margin_factor=cfg.margin_factor, domain=cfg.eigen_domain)
    return {"name": "localization", "centers": [list(map(float, c)) for c in sc.centers],
            "labels": ["lambda0"], "values": [list(sc.values)], "trend": sc.trend,
            "errors": {str(k): v for k, v in sc.errors.items()},
            "resolution": {"radius": r, "h": sc.h, "tolerance": sc.tolerance, "domain": cfg.eigen_domain},
            "caveats": [cr.EVIDENCE_NOTE]}


def _series_rows(payload: dict):
    """(header, rows) for a flat CSV: |y|, coordinates, one column per series label."""
    centers = payload["centers"]
    d = len(centers[0]) if centers else 0
    if "mes1" in payload:
        labels = [f"mes1_A={a:g}" for a in payload["A_list"]] + [f"mes2_A={a:g}" for a in payload["A_list"]]
        cols = list(payload["mes1"]) + list(payload["mes2"])
    else:
        labels, cols = list(payload["labels"]), list(payload["values"])
    header = ["norm"] + [f"x{i + 1}" for i in range(d)] + labels
    rows = []
    for j, c in enumerate(centers):
        rows.append([math.sqrt(sum(x * x for x in c))] + list(c) + [col[j] for col in cols])
    return header, rows


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(float(v))
                        for v in row])


def run_scan(cfg: ScanConfig, write: bool = True) -> dict:
    """Runs the selected criteria and the spectral scan; failures are isolated per criterion."""
    bad = validate(cfg)
    if bad:
        raise ValueError("invalid configuration: " + "; ".join(bad))
    timings = {}
    t0 = time.perf_counter()
    V = build_potential(cfg)
    centers = scan_centers(cfg)
    consts = cr.sobolev_constants(cfg.dimension)
    results, failures = {}, {}
    for name in cfg.criteria:
        t = time.perf_counter()
        try:
            results[name] = _run_criterion(name, V, centers, cfg)
        except Exception as exc:  # isolate, keep scanning
            failures[name] = f"{type(exc).__name__}: {exc}"
        timings[name] = time.perf_counter() - t
    spectral = None
    if cfg.spectral:
        t = time.perf_counter()
        try:
            spectral = _spectral(V, centers, cfg)
        except Exception as exc:
            failures["localization"] = f"{type(exc).__name__}: {exc}"
        timings["localization"] = time.perf_counter() - t
    caveats = [cr.EVIDENCE_NOTE,
               "all quantities are dimensionless reals",
               "transport bounds use the no-flux minimizer and are upper estimates of the infimum"]
    report = _finite({
        "schema": SCHEMA,
        "version": __version__,
        "units": "dimensionless",
        "config": {k: v for k, v in dataclasses.asdict(cfg).items() if k != "output"},
        "constants": {"d": consts.d, "C": consts.C, "K": consts.K, "c_iso": consts.c_iso},
        "potential": V.description,
        "criteria": results,
        "spectral": spectral,
        "failures": failures,
        "partial": bool(failures),
        "caveats": caveats,
    })
    timings["total"] = time.perf_counter() - t0
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        (out / "timings.json").write_text(json.dumps(timings, sort_keys=True, indent=2) + "\n")
        payloads = dict(results)
        if spectral is not None:
            payloads["localization"] = spectral
        for name, payload in sorted(payloads.items()):
            _write_csv(out / f"series_{name}.csv", *_series_rows(payload))
    return report


# ---------------------------------------------------------------- canned configurations


def example_config(which: int, output: Optional[str] = None) -> ScanConfig:
    if which == 1:
        cfg = ScanConfig(potential="example1", params={"r0": 0.4}, r0=0.4, index_bound=20, center_mode="axis",
                         r_list=[0.4], A_list=[0.0, 1.0], criteria=["necessary_measures"], spectral=False)
    elif which == 2:
        cfg = ScanConfig(potential="example2", params={"a": 1.0, "alpha_power": 2.0, "count": 10}, r0=1.0,
                         center_mode="example2-windows", window_range=[3, 8], r_list=[1.0], h=1 / 24,
                         gamma=0.25, signed_trimmed=True, criteria=["trimmed_integral", "molchanov"],
                         spectral=True, eigen_radius=1.0, eigen_h=1 / 16, eigen_domain="cube")
    elif which == 3:
        cfg = ScanConfig(potential="example3", params={"rho0": 0.1}, r0=0.9, index_bound=12, center_mode="axis",
                         r_list=[0.9], criteria=["transport", "negative_part", "expectation_deviation",
                                                 "necessary_measures"],
                         spectral=True, eigen_radius=0.9, eigen_h=0.9 / 16)
    else:
        raise ValueError("examples are 1, 2 and 3")
    cfg.output = output or f"example{which}-output"
    return cfg


# ---------------------------------------------------------------- command line

_U_FAMILY = rl.TEST_FAMILY


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ScanConfig fields")
    for f in dataclasses.fields(ScanConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, type=_parse_value,
                       metavar="VALUE", help=f"override {f.name} (JSON literal)")


def _config_from_args(args) -> ScanConfig:
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    for f in dataclasses.fields(ScanConfig):
        v = getattr(args, "cfg_" + f.name, None)
        if v is not None:
            data[f.name] = v
    return ScanConfig.from_dict(data)


def _vector(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",")])


def _scan_cmd(args, only_criteria: bool = False) -> int:
    cfg = _config_from_args(args)
    if only_criteria:
        cfg.spectral = False
    bad = validate(cfg)
    if bad:
        for b in bad:
            print(f"config error: {b}", file=sys.stderr)
        return 2
    rep = run_scan(cfg)
    _summary(rep)
    print(f"report written to {Path(cfg.output) / 'report.json'}")
    return 1 if rep["partial"] else 0


def _summary(rep: dict):
    for name, payload in sorted(rep["criteria"].items()):
        if "trends1" in payload:
            print(f"{name}: mes1 {','.join(payload['trends1'])}; mes2 {','.join(payload['trends2'])}")
        else:
            print(f"{name}: {payload['trend']}")
    if rep.get("spectral"):
        print(f"localization: {rep['spectral']['trend']}")
    for name, msg in sorted(rep["failures"].items()):
        print(f"{name}: FAILED ({msg})")


def _potential_from_args(args):
    cfg = ScanConfig(dimension=args.dimension, potential=args.potential,
                     params=json.loads(args.params) if args.params else {}, r0=args.r0)
    bad = [b for b in validate(cfg) if "covering" not in b]
    if bad:
        raise SystemExit("config error: " + "; ".join(bad))
    return build_potential(cfg)


def _eigen_cmd(args) -> int:
    V = _potential_from_args(args)
    c = _vector(args.center) if args.center else np.zeros(args.dimension)
    res = spc.dirichlet_lambda0(V, Ball(c, args.radius), args.h)
    print(json.dumps({"lambda0": res.lambda0, "residual": res.residual, "h": res.h,
                      "iterations": res.iterations}, sort_keys=True))
    return 0


def _transport_cmd(args) -> int:
    V = _potential_from_args(args)
    c = _vector(args.center) if args.center else np.zeros(args.dimension)
    ball = Ball(c, args.radius)
    vals = cr.check_transport(V, [c], args.radius, args.h)
    out = {"bound": float(vals.values[0][0]), "expectation": float(vals.values[1][0]),
           "threshold": vals.threshold, "passes": vals.trend == "bounded", "mesh_h": vals.resolution["mesh_h"]}
    if args.residual:
        mesh = tr.simplex_mesh(ball, vals.resolution["mesh_h"])
        _, F = tr.grid_plaplace_minimize(V, float(args.dimension), mesh, center_mean=True)
        out["divergence_residual"] = tr.divergence_residual(F, center=True)
    print(json.dumps(out, sort_keys=True))
    return 0


def _riccati_cmd(args) -> int:
    u = _U_FAMILY[args.u]
    lams = [float(x) for x in args.lam.split(",")]
    rows = []
    for lam in lams:
        e = rl.en_measure(u, lam, args.r, args.m)
        x = rl.xn_measure(u, lam, 0.0, args.r, 4 * args.m)
        row = {"lambda": lam, "mes2_E": e.measure, "resolution": e.m, "mes1_X": x}
        if lam > 0:
            row["z_blowup"] = rl.blowup_comparator(lam)[1]
        rows.append(row)
    print(json.dumps(rows, sort_keys=True, indent=1))
    return 0


def _example_cmd(args) -> int:
    cfg = example_config(args.which, args.out)
    rep = run_scan(cfg)
    _summary(rep)
    print(f"report written to {Path(cfg.output) / 'report.json'}")
    return 1 if rep["partial"] else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectrum-criteria",
                                 description="Spectral criteria scans for -Laplace + V on R^d")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="full run: selected criteria and the lambda0 scan")
    _add_config_flags(p)
    p.set_defaults(fn=lambda a: _scan_cmd(a))
    p = sub.add_parser("criteria", help="criteria only (no eigenvalue scan)")
    _add_config_flags(p)
    p.set_defaults(fn=lambda a: _scan_cmd(a, only_criteria=True))

    for name, helptext in (("eigen", "Dirichlet lambda0 on one ball"),
                           ("transport", "transport bound on one ball")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--potential", default="sqrt", choices=POTENTIALS)
        p.add_argument("--params", help="JSON object of potential parameters")
        p.add_argument("--dimension", type=int, default=3)
        p.add_argument("--r0", type=float, default=0.9, help="example parameter r0")
        p.add_argument("--center", help="comma separated coordinates (default origin)")
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--h", type=float, default=None if name == "transport" else 1 / 16)
        if name == "transport":
            p.add_argument("--residual", action="store_true", help="also report the divergence residual")
        p.set_defaults(fn=_eigen_cmd if name == "eigen" else _transport_cmd)

    p = sub.add_parser("riccati-lab", help="inequality-set measures for a test function u")
    p.add_argument("--u", choices=sorted(_U_FAMILY), default="sin")
    p.add_argument("--lam", default="1,10,100,1000,10000", help="comma separated lambda values")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--m", type=int, default=200)
    p.set_defaults(fn=_riccati_cmd)

    p = sub.add_parser("example", help="canned configuration of example 1, 2 or 3")
    p.add_argument("which", type=int, choices=(1, 2, 3))
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=_example_cmd)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
