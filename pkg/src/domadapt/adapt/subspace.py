"""Subspace alignment and the geodesic flow kernel."""
import numpy as np

from ..errors import DegenerateSubspace, SubspaceTooLarge
from ..linalg import orth_complement, pca, sym_power, symmetrize
from .base import clamp_dim
from .registry import register

SMALL_ANGLE = 1e-6


@register("sa")
def adapt_sa(s, t, cfg, stream=None):
    d = clamp_dim(cfg, min(s.dim, s.n - 1, t.n - 1))
    bs, vs, ms = pca(s.samples, d)
    bt, vt, mt = pca(t.samples, d)
    if vs.max(initial=0.0) < 1e-12 or vt.max(initial=0.0) < 1e-12:
        raise DegenerateSubspace("a domain has no variance to span a subspace")
    m = bs.T @ bt
    xs = (s.samples - ms) @ bs @ m
    xt = (t.samples - mt) @ bt
    return xs, xt, cfg.replace(subspace_dim=d), {"alignment": m}


def principal_angles(ps, pt):
    gam = np.linalg.svd(ps.T @ pt, compute_uv=False)
    return np.arccos(np.clip(gam, 0.0, 1.0))


def gfk_kernel(ps, pt):
    """Closed-form geodesic flow kernel between two ``D x d`` orthonormal bases.

    Returns ``(G, theta)``.  ``G`` equals twice the integral over
    ``t in [0, 1]`` of ``Phi(t) Phi(t).T`` along the geodesic from
    ``span(ps)`` to ``span(pt)``; zero angles use the limits 2, 0, 0.
    """
    D, d = ps.shape
    if 2 * d > D:
        raise SubspaceTooLarge(f"GFK needs d <= D/2, got d={d}, D={D}")
    rs = orth_complement(ps)
    u1, gam, vt = np.linalg.svd(ps.T @ pt)
    u1 = u1[:, :d]
    gam = np.clip(gam[:d], 0.0, 1.0)
    theta = np.arccos(gam)
    # R_s^T P_t = -U2 Sigma V^T with the same V as above
    b = rs.T @ pt @ vt.T
    sig = np.linalg.norm(b, axis=0)
    u2 = np.zeros((D - d, d))
    ok = sig > 1e-12
    u2[:, ok] = -b[:, ok] / sig[ok]

    small = theta < SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    l1 = np.where(small, 2.0, 1.0 + np.sin(2 * th) / (2 * th))
    l2 = np.where(small, 0.0, (np.cos(2 * th) - 1.0) / (2 * th))
    l3 = np.where(small, 0.0, 1.0 - np.sin(2 * th) / (2 * th))

    left = np.hstack([ps @ u1, rs @ u2])
    mid = np.block([[np.diag(l1), np.diag(l2)], [np.diag(l2), np.diag(l3)]])
    return symmetrize(left @ mid @ left.T), theta


@register("gfk")
def adapt_gfk(s, t, cfg, stream=None):
    if s.dim < 2:
        raise SubspaceTooLarge("GFK needs at least two features")
    d = clamp_dim(cfg, min(s.dim // 2, s.n - 1, t.n - 1))
    ps, _, _ = pca(s.samples, d)
    pt, _, _ = pca(t.samples, d)
    g, theta = gfk_kernel(ps, pt)
    root = sym_power(g, 0.5, floor=0.0)
    info = {"kernel": g, "angles": theta}
    return s.samples @ root, t.samples @ root, cfg.replace(subspace_dim=d), info
