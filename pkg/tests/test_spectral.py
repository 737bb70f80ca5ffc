import math

import numpy as np
import pytest

from spectrum_criteria import spectral as SP
from spectrum_criteria.geometry import Ball, Cube
from spectrum_criteria.potential import PotentialField

UNIT = Ball(np.zeros(3), 1.0)


def zero(x):
    return np.zeros(len(x))


def test_free_ball_close_to_pi_squared():
    res = SP.dirichlet_lambda0(zero, UNIT, 1 / 8)
    assert res.lambda0 == pytest.approx(math.pi ** 2, rel=0.01)
    assert res.residual < 1e-5
    assert np.all(res.ground_state > 0)
    assert res.size == res.nodes.shape[0]


def test_shift_identity():
    V = lambda x: np.sin(3 * x[:, 0]) * x[:, 1]  # noqa: E731
    a = SP.dirichlet_lambda0(V, UNIT, 1 / 8).lambda0
    b = SP.dirichlet_lambda0(lambda x: V(x) + 4.25, UNIT, 1 / 8).lambda0
    assert b - a == pytest.approx(4.25, abs=1e-6)


def test_monotone_in_potential():
    V1 = lambda x: np.linalg.norm(x, axis=1)  # noqa: E731
    V2 = lambda x: V1(x) + np.maximum(x[:, 0], 0.0) * 5  # noqa: E731
    assert SP.dirichlet_lambda0(V1, UNIT, 1 / 8).lambda0 <= SP.dirichlet_lambda0(V2, UNIT, 1 / 8).lambda0


def test_monotone_in_domain():
    small = SP.dirichlet_lambda0(zero, Ball(np.zeros(3), 1.0), 1 / 8).lambda0
    big = SP.dirichlet_lambda0(zero, Ball(np.zeros(3), 1.5), 1 / 8).lambda0
    assert big < small
    assert big * 1.5 ** 2 == pytest.approx(small, rel=0.01)


def test_deep_negative_well_converges():
    V = lambda x: np.where(np.linalg.norm(x, axis=1) < 0.3, -200.0, 0.0)  # noqa: E731
    res = SP.dirichlet_lambda0(V, UNIT, 1 / 8)
    assert res.lambda0 < 0


def test_coarse_grid_rejected():
    with pytest.raises(ValueError):
        SP.dirichlet_lambda0(zero, UNIT, 0.25)


def test_nonfinite_potential_rejected():
    with pytest.raises(ValueError):
        SP.dirichlet_lambda0(lambda x: np.full(len(x), np.nan), UNIT, 1 / 8)


def test_cube_operator_free():
    # discrete ground energy of the 3D cube grid is 3 * (4/h^2) sin^2(pi h / (2 L))
    c = Cube(np.zeros(3), 0.5)
    h = 1 / 16
    lam = SP.cube_lambda0(zero, c, h)
    assert lam == pytest.approx(3 * 4 / h ** 2 * math.sin(math.pi * h / 2) ** 2, rel=1e-7)
    with pytest.raises(ValueError):
        SP.cube_operator(c, 0.3)


def test_cube_separable_matches_grid_operator():
    parts = (lambda t: t ** 2, lambda t: np.where(t > 0, 2.0, 0.0), lambda t: np.cos(t))
    total = lambda x: sum(f(x[:, i]) for i, f in enumerate(parts))  # noqa: E731
    V = PotentialField(3, total, separable=parts)
    plain = PotentialField(3, total)
    c = Cube(np.array([0.2, 0.0, -0.1]), 0.5)
    exact = SP.cube_lambda0(V, c, 1 / 16)
    errs = [abs(SP.cube_lambda0(plain, c, h) - exact) for h in (1 / 8, 1 / 16, 1 / 32)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3 * exact


def test_interval_lambda0_1d():
    assert SP.interval_lambda0_1d(lambda t: np.zeros_like(t), (0.0, 1.0)) == pytest.approx(math.pi ** 2, rel=1e-6)
    assert SP.interval_lambda0_1d(lambda t: np.full_like(t, 3.0), (1.0, 3.0)) == pytest.approx(
        math.pi ** 2 / 4 + 3.0, rel=1e-6)
    with pytest.raises(ValueError):
        SP.interval_lambda0_1d(lambda t: t, (1.0, 1.0))


@pytest.mark.parametrize("values, expect", [
    ([1, 1.01, 0.99, 1.0, 1.02, 0.98, 1.0, 1.01], "bounded"),
    ([1, 2, 3, 4, 5, 6, 7, 8], "diverging"),
    ([8, 7, 6, 5, 4, 3, 2, 1], "declining"),
    ([1, 1, 1, 1, 1, 1, 1, 20, -20], "inconclusive"),
    ([1.0], "inconclusive"),
    ([np.nan, np.nan, 2.0], "inconclusive"),
])
def test_classify_trend(values, expect):
    assert SP.classify_trend(values) == expect


def test_classify_trend_relative_floor():
    # one-point head quartile, small relative drift stays bounded
    assert SP.classify_trend([7.25, 7.2, 7.22, 7.17]) == "bounded"
    assert SP.classify_trend([7.25, 7.2, 7.22, 7.17], rel_floor=0.0) == "declining"


def test_localization_scan_shift_and_order():
    centers = [np.array([k, 0.0, 0.0]) for k in range(4)]
    V = lambda x: x[:, 0]  # noqa: E731
    s = SP.localization_scan(V, centers, 1.0, 1 / 8, workers=2)
    assert np.allclose(np.diff(s.values), 1.0, atol=1e-6)
    assert s.trend == "diverging"
    assert s.errors == {}
    b = SP.localization_scan(zero, centers, 1.0, 1 / 8)
    assert b.trend == "bounded-below"
    with pytest.raises(ValueError):
        SP.localization_scan(zero, centers, 1.0, 1 / 8, domain="torus")


def test_localization_scan_records_failures():
    s = SP.localization_scan(zero, [np.zeros(3)], 1.0, 0.5)
    assert np.isnan(s.values[0]) and 0 in s.errors


def test_split_operator_scan_lower_bound():
    V1 = lambda x: np.sin(4 * x[:, 0])  # noqa: E731
    V2 = lambda x: x[:, 1] ** 2  # noqa: E731
    centers = [np.zeros(3), np.array([1.0, 0.0, 0.0])]
    sp = SP.split_operator_scan(V1, V2, 0.5, 0.5, centers, 1.0, 1 / 8, total=lambda x: V1(x) + V2(x))
    full = SP.localization_scan(lambda x: V1(x) + V2(x), centers, 1.0, 1 / 8).values
    assert np.all(sp.combined <= full + 1e-8)
    with pytest.raises(ValueError):
        SP.split_operator_scan(V1, V2, 0.6, 0.6, centers, 1.0, 1 / 8)
    with pytest.raises(ValueError):
        SP.split_operator_scan(V1, V2, 0.5, 0.5, centers, 1.0, 1 / 8, total=lambda x: V1(x))


def test_riccati_threshold_free_ball():
    t = SP.riccati_threshold(lambda r: np.zeros_like(r), 1.0)
    assert t.lambda_hat == pytest.approx(math.pi ** 2, rel=1e-6)
    assert t.bracket <= 1e-5 * t.lambda_hat


def test_riccati_threshold_monotone_in_potential():
    a = SP.riccati_threshold(lambda r: np.zeros_like(r), 1.0).lambda_hat
    b = SP.riccati_threshold(lambda r: r ** 2, 1.0).lambda_hat
    c = SP.riccati_threshold(lambda r: np.sqrt(r), 1.0).lambda_hat
    assert a < b < c


def test_first_zero():
    # u = sin(k rho)/rho vanishes at pi / k
    k = math.sqrt(20.0)
    assert SP.first_zero(lambda r: np.zeros_like(r), 1.0, 20.0) == pytest.approx(math.pi / k, abs=1e-3)
    assert SP.first_zero(lambda r: np.zeros_like(r), 1.0, 5.0) == -1


def test_riccati_solution_residual_and_past_threshold():
    prof = SP.riccati_solution(lambda r: r, 1.0, 5.0)
    assert prof.v[0] == pytest.approx(0.0)
    assert prof.residual < 1e-3
    with pytest.raises(ValueError):
        SP.riccati_solution(lambda r: np.zeros_like(r), 1.0, 20.0)


def test_map_ordered_keeps_order(monkeypatch):
    monkeypatch.setenv(SP.WORKERS_ENV, "3")
    assert SP.map_ordered(lambda v: v * v, list(range(10))) == [v * v for v in range(10)]
    monkeypatch.setenv(SP.WORKERS_ENV, "junk")
    assert SP.worker_count() == 1
