"""Acceptance criteria 1-10 at their stated tolerances.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary lists one
PASS/FAIL line per criterion with the measured numbers.
"""
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from spectrum_criteria import cli
from spectrum_criteria import criteria as CR
from spectrum_criteria import potential as P
from spectrum_criteria import riccati_lab as RL
from spectrum_criteria import spectral as SP
from spectrum_criteria import statistics as ST
from spectrum_criteria import transport as T
from spectrum_criteria.geometry import Ball, Cube, make_grid, make_shell_grid


def _timed(record_property, budget, start, detail):
    took = time.perf_counter() - start
    record_property("detail", f"{detail} ({took:.1f}s, budget {budget}s)")
    assert took < budget, f"took {took:.1f}s, budget {budget}s"


def test_criterion_01_constants(record_property):
    t = time.perf_counter()
    s = CR.sobolev_constants(3)
    assert abs(s.C - s.C_lanczos) <= 1e-12
    assert s.K * s.C ** 2 == 1.0
    _timed(record_property, 1, t, f"C(3)={s.C:.15f} |dC|={abs(s.C - s.C_lanczos):.1e} K*C^2={s.K * s.C ** 2!r}")


def test_criterion_02_eigen_ground_truth(record_property):
    t = time.perf_counter()
    ball = Ball(np.zeros(3), 1.0)
    zero = lambda x: np.zeros(len(x))  # noqa: E731
    lam = {h: SP.dirichlet_lambda0(zero, ball, 1 / h).lambda0 for h in (8, 16, 32)}
    exact = math.pi ** 2
    rel = abs(lam[32] - exact) / exact
    order_exact = math.log2(abs(exact - lam[16]) / abs(exact - lam[32]))
    order_3grid = math.log2(abs(lam[16] - lam[8]) / abs(lam[32] - lam[16]))
    assert rel < 0.02
    assert order_exact >= 1.8 and order_3grid >= 1.8
    _timed(record_property, 60, t, f"lambda0(1/32)={lam[32]:.5f} err={rel:.2%} order={order_exact:.2f}/{order_3grid:.2f}")


def test_criterion_03_localization_riccati(record_property):
    t = time.perf_counter()
    cases = {"zero": (lambda r: np.zeros_like(r), lambda x: np.zeros(len(x))),
             "r^2": (lambda r: np.asarray(r) ** 2, lambda x: np.sum(x * x, axis=1)),
             "sqrt r": (lambda r: np.sqrt(np.asarray(r)), lambda x: np.sqrt(np.linalg.norm(x, axis=1)))}
    worst, parts = 0.0, []
    for name, (rad, full) in cases.items():
        a = SP.riccati_threshold(rad, 1.0).lambda_hat
        b = SP.dirichlet_lambda0(full, Ball(np.zeros(3), 1.0), 1 / 16).lambda0
        worst = max(worst, abs(a - b) / abs(a))
        parts.append(f"{name}: {a:.4f}/{b:.4f}")
    assert worst < 0.02
    _timed(record_property, 120, t, f"{'; '.join(parts)} max rel diff {worst:.2%}")


def _step(r):
    a = 0.5
    return np.where(np.asarray(r) < a, 1.0, -a ** 3 / (1 - a ** 3))


def _bump_difference():
    b1 = lambda r: np.clip(1 - (np.asarray(r) / 0.5) ** 2, 0, None) ** 3  # noqa: E731
    b2 = lambda r: np.clip(1 - np.asarray(r) ** 2, 0, None) ** 3  # noqa: E731
    k = integrate.quad(lambda r: b1(r) * r * r, 0, 0.5)[0] / integrate.quad(lambda r: b2(r) * r * r, 0, 1)[0]
    return lambda r: b1(r) - k * b2(r)


def test_criterion_04_transport_oracle(record_property):
    t = time.perf_counter()
    p3 = P.Example3Params()
    profiles = [("step", _step, 1.0, [0.5]), ("bump difference", _bump_difference(), 1.0, [0.5])]
    for L in (2, 5):
        prof, brk = P.example3_profile(np.array([float(L), 0.0, 0.0]), p3)
        profiles.append((f"example3 |l|={L}", prof, p3.rho0, [b for b in brk if b < p3.rho0]))
    worst, parts = 0.0, []
    for name, prof, R, brk in profiles:
        exact = T.radial_neumann_solve(prof, R, 3, breaks=brk).field_norm
        W = lambda x, prof=prof: prof(np.linalg.norm(x, axis=1))  # noqa: E731
        mesh = T.simplex_mesh(Ball(np.zeros(3), R), R / 24)
        _, F = T.grid_plaplace_minimize(W, 3.0, mesh, center_mean=True)
        rel = F.norm_d / exact - 1
        worst = max(worst, abs(rel))
        parts.append(f"{name} {rel:+.2%}")
    assert worst < 0.05
    _timed(record_property, 300, t, "; ".join(parts))


def test_criterion_05_inequality_measures(record_property):
    t = time.perf_counter()
    lams = [1.0, 10.0, 100.0, 1000.0, 10000.0]
    parts = []
    for name, u in RL.TEST_FAMILY.items():
        mes = [RL.en_measure(u, lam, 1.0).measure for lam in lams]
        assert all(b <= a for a, b in zip(mes, mes[1:])), (name, mes)
        assert (mes[0] == 0 and mes[-1] == 0) or mes[-1] < 0.1 * mes[0], (name, mes)
        parts.append(f"{name} {mes[0]:.3g}->{mes[-1]:.3g}")
    res = max(RL.comparator_residual(lam) for lam in lams)
    assert res < 1e-8
    _timed(record_property, 60, t, f"{'; '.join(parts)}; comparator residual {res:.1e}")


def test_criterion_06_example1(record_property, tmp_path):
    t = time.perf_counter()
    cfg = cli.example_config(1, str(tmp_path))
    rep = cli.run_scan(cfg, write=False)
    nm = rep["criteria"]["necessary_measures"]
    A = nm["A_list"]
    mes1 = np.array(nm["mes1"][A.index(0.0)])
    mes2 = np.array(nm["mes2"][A.index(1.0)])
    r = nm["r"]
    assert max(abs(c[0]) for c in nm["centers"]) == 20
    assert nm["trends2"][A.index(1.0)] == "declining"
    assert mes2[-1] < 0.25 * mes2[0]
    assert np.all(mes1 > 0.9 * r)
    _timed(record_property, 300, t, f"mes2(A=1) {mes2[0]:.4f}->{mes2[-1]:.4f} ({mes2[-1] / mes2[0]:.1%}); "
                                    f"min mes1(A=0)/r = {mes1.min() / r:.3f}")


def test_criterion_07_example2(record_property, tmp_path):
    t = time.perf_counter()
    alpha = [float(k * k) for k in range(1, 11)]
    V1, Vd, lay = P.example2_potential(1.0, alpha)
    step = 1e-4
    res_max, lam_max = 0.0, 0.0
    for k in range(3, 9):
        phi = P.example2_eigenfunction(lay, k)
        c0, c1 = lay.window(k)
        x = np.arange(c0 + step, c1 - step / 2, step)
        joints = np.array([c0, lay.l_odd[k - 1], lay.l_even[k - 1], lay.m[k], c1])
        x = x[np.min(np.abs(x[:, None] - joints[None]), axis=1) > 2 * step]
        r = -(phi(x + step) - 2 * phi(x) + phi(x - step)) / step ** 2 + V1(x) * phi(x)
        res_max = max(res_max, float(np.max(np.abs(r))))
        lam_max = max(lam_max, abs(SP.interval_lambda0_1d(V1, (c0, c1))))
    assert res_max < 1e-4
    assert lam_max < 5e-2
    cfg = cli.example_config(2, str(tmp_path))
    rep = cli.run_scan(cfg, write=False)
    ti = np.array(rep["criteria"]["trimmed_integral"]["values"][0])
    q = max(1, ti.size // 4)
    head, tail = ti[:q].mean(), ti[-q:].mean()
    assert tail > 5 * head
    loc = np.array(rep["spectral"]["values"][0])
    assert np.all(np.isfinite(loc))
    assert rep["spectral"]["trend"] != "diverging"
    assert loc.max() - loc.min() < 0.5
    _timed(record_property, 600, t, f"phi residual {res_max:.1e}; max |lambda0 window| {lam_max:.1e}; "
                                    f"trimmed {head:.1f}->{tail:.1f}; lambda0 band [{loc.min():.3f}, {loc.max():.3f}]")


def test_criterion_08_example3(record_property, tmp_path):
    t = time.perf_counter()
    p = P.Example3Params()
    V = P.example3_potential(p)
    cfg = cli.example_config(3, str(tmp_path))
    cfg.spectral = False
    cfg.criteria = ["transport", "negative_part"]
    centers = cli.scan_centers(cfg)
    assert max(np.linalg.norm(c) for c in centers) == 12
    mean_err = 0.0
    for c in centers:
        brk = V.radial_breaks(c)
        g = make_shell_grid(Ball(c, p.r0), [b for b in brk if 0 < b < p.r0])
        Wv = V(g.nodes) - np.sqrt(np.linalg.norm(g.nodes, axis=1))
        mean_err = max(mean_err, abs(g.integrate(Wv)) / g.measure)
    assert mean_err < 1e-6
    rep = cli.run_scan(cfg, write=False)
    tr = rep["criteria"]["transport"]
    B, E = (np.array(v) for v in tr["values"])
    thr = 1 / (2 * CR.sobolev_constants(3).C)
    assert np.max(B) < thr
    q = max(1, E.size // 4)
    ratio = E[-q:].mean() / E[:q].mean()
    assert ratio >= 3
    neg = np.array(rep["criteria"]["negative_part"]["values"][0])
    assert neg[-q:].mean() > neg[:q].mean()
    assert rep["criteria"]["negative_part"]["trend"] in ("diverging", "violating")
    _timed(record_property, 600, t, f"mean err {mean_err:.1e}; max bound {B.max():.3f} < {thr:.3f}; "
                                    f"E head->tail x{ratio:.3f}; neg part {neg[:q].mean():.3f}->{neg[-q:].mean():.3f}")


def test_criterion_09_statistics(record_property):
    t = time.perf_counter()
    g = make_grid(Ball(np.zeros(3), 1.0), 1 / 24)
    x = g.nodes
    V = np.linalg.norm(x, axis=1) ** 2 + 0.5 * np.sin(5 * x[:, 0]) + 0.5
    assert np.all(V >= 0)
    ts = np.linspace(1e-3, g.measure, 400)
    R = ST.rearrangement(V, None, ts, grid=g)
    assert np.all(np.diff(R) <= 0)
    # equimeasurability: |{V* > s}| on (0, |B|) equals |{V >= s}| up to one node weight
    for s in np.linspace(0.1, 1.5, 8):
        fine = np.linspace(1e-6, g.measure, 200001)
        lhs = np.sum(ST.rearrangement(V, None, fine, grid=g) >= s) * (fine[1] - fine[0])
        assert abs(lhs - ST.level_measure(V, None, s, grid=g)) <= 2 * g.weights.max() + 2 * (fine[1] - fine[0])
    # layer cake: int V = int_0^inf |{V >= s}| ds
    s_grid = np.linspace(0, V.max(), 4001)
    cake = integrate.trapezoid(ST.level_profile(V, None, s_grid, grid=g).measures, s_grid)
    full = ST.integral(V, None, grid=g)
    cake_err = abs(cake - full) / full
    assert cake_err < 0.02
    # scaling and shift identities
    scale_err = np.max(np.abs(ST.rearrangement(2.5 * V, None, ts, grid=g) - 2.5 * R))
    shift_err = np.max(np.abs(ST.rearrangement(V + 3.0, None, ts, grid=g) - (R + 3.0)))
    assert scale_err < 1e-10 and shift_err < 1e-10
    # trimmed-integral boundary cases
    assert ST.trimmed_integral(V, None, 0.0, grid=g) == full
    assert ST.trimmed_integral(V, None, g.measure, grid=g) == 0.0
    c = Cube(np.zeros(3), 0.5)
    gc = make_grid(c, 1 / 8)
    assert ST.trimmed_integral(np.full(gc.size, 4.0), None, 0.5, grid=gc) == 2.0
    _timed(record_property, 60, t, f"layer cake err {cake_err:.2e}; scaling err {scale_err:.1e}; shift err {shift_err:.1e}")


def test_criterion_10_determinism(record_property, tmp_path):
    t = time.perf_counter()
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        cli.run_scan(cli.example_config(3, str(out)))
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]
    rep = json.loads(blobs[0])
    assert rep["partial"] is False
    _timed(record_property, 1200, t, f"report {len(blobs[0])} bytes identical")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
