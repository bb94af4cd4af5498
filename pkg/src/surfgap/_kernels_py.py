"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def element_matrices(params, metric, tris):
    p = params[tris]  # (nt, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    grads = np.empty((len(tris), 3, 2))
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    g = metric[tris].mean(axis=1)
    dg = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    ginv = np.empty_like(g)
    ginv[:, 0, 0] = g[:, 1, 1] / dg
    ginv[:, 1, 1] = g[:, 0, 0] / dg
    ginv[:, 0, 1] = ginv[:, 1, 0] = -g[:, 0, 1] / dg
    w = area * np.sqrt(dg)
    ke = w[:, None, None] * np.einsum("tai,tij,tbj->tab", grads, ginv, grads)
    me = w[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
    return ke, me


def shoot_radial(f, dr, lam, m, u0, w0):
    n = (len(f) - 1) // 2
    out = np.empty(n + 1)
    u, w, m2, half = u0, w0, m * m, 0.5 * dr
    out[0] = u
    f = f.tolist()
    for i in range(n):
        fa, fm, fb = f[2 * i], f[2 * i + 1], f[2 * i + 2]
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
    return out, w
