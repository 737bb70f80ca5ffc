import math

import numpy as np
import pytest

from spectrum_criteria import riccati_lab as RL

FAMILY = {
    "zero": lambda t: np.zeros_like(np.asarray(t, dtype=float)),
    "const": lambda t: np.full_like(np.asarray(t, dtype=float), 2.0),
    "sin": lambda t: np.sin(10 * np.asarray(t, dtype=float)),
    "linear": lambda t: 5 * np.asarray(t, dtype=float),
    "tent": lambda t: 1 - np.abs(2 * np.asarray(t, dtype=float) - 1),
}


@pytest.mark.parametrize("name", sorted(FAMILY))
def test_en_measure_shrinks_to_zero(name):
    u = FAMILY[name]
    mes = [RL.en_measure(u, lam, 1.0, m=100).measure for lam in (0.5, 2.0, 10.0, 100.0)]
    assert all(b <= a + 1e-12 for a, b in zip(mes, mes[1:]))
    assert mes[-1] == 0.0


def test_en_measure_negative_lambda_zero_u():
    # g = -lam z increasing: every pair s < t is in the set
    res = RL.en_measure(FAMILY["zero"], -1.0, 1.0, m=100)
    assert res.measure == pytest.approx(0.5, rel=1e-9)
    assert res.refinement_change < 0.02


def test_en_measure_linear_oracle():
    # u = a t: g(t) = a t - a^2 t^3 / 3 - lam t, increasing for t < sqrt((a - lam)) / a
    a, lam = 5.0, 1.0
    res = RL.en_measure(FAMILY["linear"], lam, 1.0, m=200)
    z = math.sqrt(a - lam) / a
    g = lambda t: a * t - a * a * t ** 3 / 3 - lam * t  # noqa: E731
    s, t = res.nodes[:, 0], res.nodes[:, 1]
    expect = g(t) > g(s)
    assert np.mean(expect != res.indicator) < 0.01
    assert z < 1.0 and res.measure > 0


def test_xn_measure():
    assert RL.xn_measure(FAMILY["const"], 1.0, 0.0, 1.0) == pytest.approx(0.4, abs=1e-3)
    assert RL.xn_measure(FAMILY["zero"], 1.0, 0.0, 1.0) == 0.0
    assert RL.xn_measure(FAMILY["const"], 0.0, 0.5, 1.0) == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError):
        RL.xn_measure(FAMILY["const"], 1.0, 1.0, 1.0)


@pytest.mark.parametrize("lam", [1.0, 100.0])
def test_comparator_solves_integral_equation(lam):
    assert RL.comparator_residual(lam) < 1e-12
    w, zb = RL.blowup_comparator(lam)
    assert zb == pytest.approx(math.pi / (2 * math.sqrt(lam)))
    assert float(w(0.0)) == 0.0
    with pytest.raises(ValueError):
        RL.blowup_comparator(0.0)


def test_comparator_dominates():
    lam = 4.0
    z = np.linspace(0, 0.7, 2001)
    w, _ = RL.blowup_comparator(lam)
    assert RL.comparator_dominates(1.2 * w(z) + 0.01, z, lam)
    # zero fails the inequality immediately after z = 0, nothing to compare afterwards
    assert RL.comparator_dominates(np.zeros_like(z), z, lam)
    # u = 1, lam = 1: 1 >= z + z, true up to z = 1/2
    ok = RL.satisfies_inequality(np.ones_like(z), z, 1.0)
    assert np.array_equal(ok, z <= 0.5)
