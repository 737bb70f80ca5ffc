"""Times the compiled kernels against the numpy fallback on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are called on identical arrays and their outputs are compared before
timing, so a speedup is only reported for matching results.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from spectrum_criteria import _kernels_py, transport
from spectrum_criteria.geometry import Ball

try:
    from spectrum_criteria import _kernels as compiled
except ImportError:
    compiled = None


def shooting_case(n_steps: int):
    rho = np.linspace(0.0, 1.0, 2 * n_steps + 1)
    vs = np.ascontiguousarray(np.sqrt(rho))
    # lambda just below the threshold, so the whole interval is integrated
    return (vs, 10.0, 3, 1.0 / n_steps, False)


def energy_case(h: float):
    mesh = transport.simplex_mesh(Ball(np.zeros(3), 1.0), h)
    u = np.random.default_rng(0).normal(size=mesh.n_vertices)
    return (u, mesh.simplices, mesh.stype, np.ascontiguousarray(mesh.G), mesh.vol, 1.5, 1e-16), mesh


def best_time(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def run(repeat: int) -> list:
    rows = []
    for n in (2000, 8000):
        args = shooting_case(n)
        rows.append(("shoot_radial", f"{n} RK4 steps", args))
    for h in (1 / 12, 1 / 24):
        args, mesh = energy_case(h)
        rows.append(("simplex_energy_grad", f"{mesh.simplices.shape[0]} simplices", args))
    out = []
    for name, size, args in rows:
        py = getattr(_kernels_py, name)
        t_py = best_time(py, args, repeat)
        rec = {"kernel": name, "size": size, "python_s": t_py, "cython_s": None, "speedup": None}
        if compiled is not None:
            cy = getattr(compiled, name)
            a, b = cy(*args), py(*args)
            if not np.allclose(np.asarray(a[0]), np.asarray(b[0]), rtol=1e-10, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree ({a[0]} vs {b[0]})")
            t_cy = best_time(cy, args, repeat)
            rec.update(cython_s=t_cy, speedup=t_py / t_cy)
        out.append(rec)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results to this file")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    res = run(args.repeat)
    print(f"{'kernel':<22}{'size':<22}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for r in res:
        cy = f"{r['cython_s']:.5f}" if r["cython_s"] is not None else "-"
        sp = f"{r['speedup']:.1f}x" if r["speedup"] is not None else "-"
        print(f"{r['kernel']:<22}{r['size']:<22}{r['python_s']:>12.5f}{cy:>12}{sp:>10}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
