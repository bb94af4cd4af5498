# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: P1 element assembly and radial RK4 shooting.

Signatures match :mod:`surfgap._kernels_py` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def element_matrices(const double[:, ::1] params,
                     const double[:, :, ::1] metric,
                     const long[:, ::1] tris):
    """Per-triangle P1 stiffness and mass blocks, metric averaged over vertices."""
    cdef Py_ssize_t nt = tris.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] ke_arr = np.empty((nt, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] me_arr = np.empty((nt, 3, 3))
    cdef double[:, :, ::1] ke = ke_arr
    cdef double[:, :, ::1] me = me_arr
    cdef Py_ssize_t t, a, b, v
    cdef long i0, i1, i2
    cdef double e1x, e1y, e2x, e2y, det, area, g00, g01, g11, dg, w
    cdef double h00, h01, h11
    cdef double gx[3]
    cdef double gy[3]
    for t in range(nt):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        e1x = params[i1, 0] - params[i0, 0]
        e1y = params[i1, 1] - params[i0, 1]
        e2x = params[i2, 0] - params[i0, 0]
        e2y = params[i2, 1] - params[i0, 1]
        det = e1x * e2y - e1y * e2x
        area = 0.5 * fabs(det)
        gx[1] = e2y / det
        gy[1] = -e2x / det
        gx[2] = -e1y / det
        gy[2] = e1x / det
        gx[0] = -gx[1] - gx[2]
        gy[0] = -gy[1] - gy[2]
        g00 = (metric[i0, 0, 0] + metric[i1, 0, 0] + metric[i2, 0, 0]) / 3.0
        g01 = (metric[i0, 0, 1] + metric[i1, 0, 1] + metric[i2, 0, 1]) / 3.0
        g11 = (metric[i0, 1, 1] + metric[i1, 1, 1] + metric[i2, 1, 1]) / 3.0
        dg = g00 * g11 - g01 * g01
        h00 = g11 / dg
        h01 = -g01 / dg
        h11 = g00 / dg
        w = area * sqrt(dg)
        for a in range(3):
            for b in range(3):
                ke[t, a, b] = w * (gx[a] * (h00 * gx[b] + h01 * gy[b])
                                   + gy[a] * (h01 * gx[b] + h11 * gy[b]))
                me[t, a, b] = w * (2.0 if a == b else 1.0) / 12.0
    return ke_arr, me_arr


def shoot_radial(const double[::1] f, double dr, double lam, int m,
                 double u0, double w0):
    """RK4 for u' = w/f, w' = -lam f u + m^2 u / f.

    ``f`` is tabulated at half steps, so it has ``2 n + 1`` entries for
    ``n`` steps. Returns ``(u at every full step, final w)``.
    """
    cdef Py_ssize_t n = (f.shape[0] - 1) // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n + 1)
    cdef double[::1] out = out_arr
    cdef double u = u0, w = w0, m2 = m * m
    cdef double fa, fm, fb, k1u, k1w, k2u, k2w, k3u, k3w, k4u, k4w
    cdef double half = 0.5 * dr
    cdef Py_ssize_t i
    out[0] = u
    for i in range(n):
        fa = f[2 * i]
        fm = f[2 * i + 1]
        fb = f[2 * i + 2]
        k1u = w / fa
        k1w = (-lam * fa + m2 / fa) * u
        k2u = (w + half * k1w) / fm
        k2w = (-lam * fm + m2 / fm) * (u + half * k1u)
        k3u = (w + half * k2w) / fm
        k3w = (-lam * fm + m2 / fm) * (u + half * k2u)
        k4u = (w + dr * k3w) / fb
        k4w = (-lam * fb + m2 / fb) * (u + dr * k3u)
        u += dr * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        w += dr * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
        out[i + 1] = u
    return out_arr, w
