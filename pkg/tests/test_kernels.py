import subprocess
import sys

import numpy as np
import pytest

from spectrum_criteria import _kernels_py, kernels, transport
from spectrum_criteria.geometry import Ball

compiled = pytest.importorskip("spectrum_criteria._kernels")


def test_backend_selected():
    assert kernels.BACKEND == "cython"


def test_pure_env_forces_fallback():
    code = "from spectrum_criteria import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"SPECTRUM_CRITERIA_PURE": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("lam", [-3.0, 5.0, 20.0, 60.0])
@pytest.mark.parametrize("record", [False, True])
def test_shoot_radial_backends_agree(lam, record):
    n = 800
    rho = np.linspace(0, 1, 2 * n + 1)
    vs = np.ascontiguousarray(np.sqrt(rho) + np.where(rho > 0.5, 3.0, 0.0))
    a = compiled.shoot_radial(vs, lam, 3, 1.0 / n, record)
    b = _kernels_py.shoot_radial(vs, lam, 3, 1.0 / n, record)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    if record and a[0] < 0:
        assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-12)
        assert np.allclose(a[2], b[2], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_simplex_energy_backends_agree(q):
    mesh = transport.simplex_mesh(Ball(np.zeros(3), 1.0), 0.25)
    u = np.random.default_rng(1).normal(size=mesh.n_vertices)
    args = (mesh.simplices, mesh.stype, np.ascontiguousarray(mesh.G), mesh.vol, q, 1e-12)
    ea, ga = compiled.simplex_energy_grad(u, *args)
    eb, gb = _kernels_py.simplex_energy_grad(u, *args)
    assert ea == pytest.approx(eb, rel=1e-12)
    assert np.allclose(ga, gb, rtol=1e-10, atol=1e-12)


def test_simplex_gradient_matches_finite_difference():
    mesh = transport.simplex_mesh(Ball(np.zeros(3), 1.0), 0.5)
    rng = np.random.default_rng(4)
    u = rng.normal(size=mesh.n_vertices)
    args = (mesh.simplices, mesh.stype, np.ascontiguousarray(mesh.G), mesh.vol, 1.5, 1e-6)
    _, g = kernels.simplex_energy_grad(u, *args)
    v = rng.normal(size=u.size)
    eps = 1e-6
    ep = kernels.simplex_energy_grad(u + eps * v, *args)[0]
    em = kernels.simplex_energy_grad(u - eps * v, *args)[0]
    assert (ep - em) / (2 * eps) == pytest.approx(float(g @ v), rel=1e-6)
