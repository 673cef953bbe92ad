"""Independent reference computations shared by the unit and acceptance tests.

Each one is written from the defining formula with plain loops or a different
algorithm from the package code, so agreement is a real cross-check.
"""
import math
import statistics

import numpy as np

from domadapt.adapt.itl import ITLProblem
from domadapt.core import RandomStream
from domadapt.linalg import median_sq_distance, pca


def naive_mmd(a, b, gamma):
    """V-statistic with explicit loops over rows and coordinates."""
    def k(x, y):
        s = 0.0
        for xi, yi in zip(x, y):
            s += (xi - yi) ** 2
        return math.exp(-gamma * s)

    def block(x, y):
        return sum(k(p, q) for p in x for q in y) / (len(x) * len(y))

    return block(a, a) + block(b, b) - 2.0 * block(a, b)


def naive_median_gamma(rows):
    d2 = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            d2.append(sum((p - q) ** 2 for p, q in zip(rows[i], rows[j])))
    return 1.0 / statistics.median(d2)


def dct_matrix(n):
    """Orthonormal DCT-II matrix written out entry by entry."""
    c = np.empty((n, n))
    for k in range(n):
        a = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        for j in range(n):
            c[k, j] = a * np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    return c


def plain_sinkhorn(cost, eps, sweeps=20000):
    """Scaling-form fixed point u = a / (K v), v = b / (K^T u)."""
    k = np.exp(-cost / eps)
    a = np.full(cost.shape[0], 1 / cost.shape[0])
    b = np.full(cost.shape[1], 1 / cost.shape[1])
    u, v = np.ones_like(a), np.ones_like(b)
    for _ in range(sweeps):
        u = a / (k @ v)
        v = b / (k.T @ u)
    return u[:, None] * k * v[None, :]


def geodesic_kernel_oracle(ps, pt, nodes=64):
    """2 * integral of Y(t) Y(t)^T along the geodesic Y(t) = Ps V cos(Th t) + U sin(Th t)."""
    m = ps.T @ pt
    tangent = (pt - ps @ m) @ np.linalg.inv(m)
    u, tan_th, vt = np.linalg.svd(tangent, full_matrices=False)
    th = np.arctan(tan_th)
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = 0.5 * (x + 1), 0.5 * w
    g = np.zeros((ps.shape[0], ps.shape[0]))
    for tk, wk in zip(x, w):
        y = ps @ vt.T * np.cos(th * tk) + u * np.sin(th * tk)
        g += wk * y @ y.T
    return 2 * g


def itl_toy_problem(seed=0, lam=1.0):
    """Eight labeled source and six target points in 4-D, projected to 2-D."""
    r = RandomStream(seed)
    xs = r.normal((8, 4)) + np.r_[np.zeros((4, 4)), np.ones((4, 4))]
    xt = 1.2 * r.normal((6, 4)) + 0.7
    x = np.vstack([xs, xt])
    x = x - x.mean(0)
    is_src = np.r_[np.ones(8, bool), np.zeros(6, bool)]
    cls = np.r_[np.repeat([0, 1], 4), np.full(6, -1)]
    w0 = pca(x, 2)[0]
    return ITLProblem(x, is_src, cls, lam, median_sq_distance(x @ w0)), w0
