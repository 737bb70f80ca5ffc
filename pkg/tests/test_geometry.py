import math

import numpy as np
import pytest

from spectrum_criteria.geometry import (Ball, Cube, LatticeCovering, SphericalLayer, covering_centers,
                                        is_rho_covering, make_grid, make_mc_grid, make_shell_grid,
                                        sphere_directions, triangle_grid, unit_ball_volume, unit_sphere_area)


def test_unit_ball_volume_and_sphere_area():
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-14)


def test_domain_validation():
    with pytest.raises(ValueError):
        Ball([0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        SphericalLayer([0, 0, 0], 1.0, 0.5)
    with pytest.raises(ValueError):
        Cube([0, 0], -1.0)


def test_covering_centers_enumeration():
    one_d = covering_centers(LatticeCovering(1, 1.0, 0.6, 1))
    assert sorted(float(c[0]) for c in one_d) == [-1.0, 0.0, 1.0]
    assert len(covering_centers(LatticeCovering(3, 1.0, 0.9, 2))) == 125


def test_covering_centers_sorted_and_stable():
    cov = LatticeCovering(3, 0.5, 0.5, 2)
    a = covering_centers(cov)
    b = covering_centers(cov)
    norms = [float(np.linalg.norm(c)) for c in a]
    assert norms == sorted(norms)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert np.allclose(a[0], 0.0)


def test_axis_only_centers():
    cs = covering_centers(LatticeCovering(3, 1.0, 0.9, 3, axis_only=True))
    assert len(cs) == 7
    assert all(c[1] == 0 and c[2] == 0 for c in cs)


@pytest.mark.parametrize("d, r0, flag, rho", [(3, 0.8, False, 0.8 - math.sqrt(3) / 2),
                                               (3, 1.0, True, 1 - math.sqrt(3) / 2),
                                               (1, 0.6, True, 0.1)])
def test_is_rho_covering(d, r0, flag, rho):
    ok, got = is_rho_covering(LatticeCovering(d, 1.0, r0, 1))
    assert ok is flag
    assert got == pytest.approx(rho, abs=1e-12)


def test_rho_covering_geometry_sampled():
    # every sample point is within r0 - rho of its nearest lattice point
    cov = LatticeCovering(3, 1.0, 0.9, 1)
    ok, rho = is_rho_covering(cov)
    pts = np.random.default_rng(3).uniform(-5, 5, size=(2000, 3))
    dist = np.linalg.norm(pts - np.rint(pts), axis=1)
    assert ok and np.all(dist + rho <= cov.r0 + 1e-12)


def test_rho_covering_monotone_in_r0():
    flags = [is_rho_covering(LatticeCovering(3, 1.0, r, 1))[0] for r in np.linspace(0.5, 1.5, 21)]
    first = flags.index(True)
    assert all(flags[first:])


def test_grid_measure_ball_and_layer():
    g = make_grid(Ball(np.zeros(3), 1.0), 1 / 32)
    assert g.measure == pytest.approx(4 * math.pi / 3, rel=0.03)
    layer = make_grid(SphericalLayer(np.zeros(3), 0.5, 1.0), 1 / 32)
    assert layer.measure == pytest.approx(4 * math.pi / 3 * (1 - 1 / 8), rel=0.03)
    assert np.all(np.linalg.norm(g.nodes, axis=1) < 1.0)


def test_grid_measure_converges():
    exact = 4 * math.pi / 3
    errs = [abs(make_grid(Ball(np.zeros(3), 1.0), h).measure - exact) for h in (1 / 8, 1 / 16, 1 / 32)]
    assert errs[2] < errs[0]


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        make_grid(Ball(np.zeros(3), 1.0), 2.0)


def test_translated_grid_keeps_weights():
    g = make_grid(Ball(np.zeros(3), 1.0), 1 / 8)
    t = g.translated([2.0, 0.0, 0.0])
    assert np.allclose(t.nodes - g.nodes, [2.0, 0.0, 0.0])
    assert t.measure == g.measure


def test_mc_grid_seeded():
    a = make_mc_grid(Ball(np.zeros(3), 1.0), 4000, seed=7)
    b = make_mc_grid(Ball(np.zeros(3), 1.0), 4000, seed=7)
    assert np.array_equal(a.nodes, b.nodes)
    assert a.measure == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_sphere_directions_integrate_polynomials():
    dirs, w = sphere_directions(3, 16)
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-13)
    assert np.dot(w, dirs[:, 0] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert np.dot(w, dirs[:, 1] ** 4) == pytest.approx(4 * math.pi / 5, rel=1e-12)


def test_shell_grid_integrates_radial_jump_exactly():
    ball = Ball(np.array([1.0, 2.0, 0.0]), 0.9)
    g = make_shell_grid(ball, breaks=[0.3])
    r = np.linalg.norm(g.nodes - ball.center, axis=1)
    vals = np.where(r < 0.3, 2.0, -1.0)
    exact = 4 * math.pi / 3 * (2 * 0.3 ** 3 - (0.9 ** 3 - 0.3 ** 3))
    assert g.integrate(vals) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_triangle_grid(r):
    nodes, w = triangle_grid(r, 400)
    assert np.all(nodes[:, 0] < nodes[:, 1])
    assert np.all((nodes > 0) & (nodes < r))
    assert w.sum() == pytest.approx(r * r / 2, rel=1e-12)
