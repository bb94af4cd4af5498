import math

import numpy as np
import pytest

from helpers import sphere_cap
from surfgap import kernels
from surfgap.eigen import radial_oracle

needs_compiled = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="compiled extension not built")


@needs_compiled
def test_element_matrices_agree():
    mesh = sphere_cap(math.pi / 3).triangulate(0.05)
    kc, mc = kernels.element_matrices(mesh.params, mesh.metric, mesh.tris, backend="cython")
    kp, mp = kernels.element_matrices(mesh.params, mesh.metric, mesh.tris, backend="python")
    assert np.allclose(kc, kp, rtol=1e-13, atol=1e-13)
    assert np.allclose(mc, mp, rtol=1e-13, atol=1e-15)


@needs_compiled
@pytest.mark.parametrize("m", [0, 1])
def test_shooting_agrees(m):
    r = np.linspace(0.1, 1.0, 401)
    f = np.sin(r)
    uc, wc = kernels.shoot_radial(f, r[2] - r[0], 3.0, m, 0.1, 1.0, backend="cython")
    up, wp = kernels.shoot_radial(f, r[2] - r[0], 3.0, m, 0.1, 1.0, backend="python")
    assert np.allclose(uc, up, rtol=1e-13, atol=1e-15)
    assert wc == pytest.approx(wp, rel=1e-13)


def test_python_backend_oracle():
    d = sphere_cap(math.pi / 2)
    res = radial_oracle(d.chart, d.radius, rtol=1e-8, backend="python")
    assert res.lambda1 == pytest.approx(2.0, abs=1e-6)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.element_matrices(np.zeros((3, 2)), np.zeros((3, 2, 2)), np.zeros((1, 3), int), backend="fortran")
