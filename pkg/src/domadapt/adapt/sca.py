"""Scatter component analysis (linear, input-space form)."""
import numpy as np

from ..linalg import generalized_eigh
from .base import clamp_dim
from .registry import register


def scatter_matrices(xs, ys, xt):
    """Total, between-class, within-class and domain scatter (all per-sample averaged)."""
    pooled = np.vstack([xs, xt])
    m = pooled.mean(axis=0)
    total = (pooled - m).T @ (pooled - m) / pooled.shape[0]
    ms = xs.mean(axis=0)
    D = xs.shape[1]
    between = np.zeros((D, D))
    within = np.zeros((D, D))
    for c in np.unique(ys):
        xc = xs[ys == c]
        mc = xc.mean(axis=0)
        between += xc.shape[0] / xs.shape[0] * np.outer(mc - ms, mc - ms)
        within += (xc - mc).T @ (xc - mc) / xs.shape[0]
    shift = ms - xt.mean(axis=0)
    return total, between, within, np.outer(shift, shift)


@register("sca", labeled=True, defaults=lambda dim: {"aux": {"beta": 0.5, "delta": 1.0}})
def adapt_sca(s, t, cfg, stream=None):
    beta = float(cfg.aux.get("beta", 0.5))
    delta = float(cfg.aux.get("delta", 1.0))
    total, between, within, domain = scatter_matrices(s.samples, np.asarray(s.labels), t.samples)
    a = beta * between + (1.0 - beta) * total
    b = delta * domain + within + np.eye(s.dim)
    d = clamp_dim(cfg, s.dim)
    sol = generalized_eigh(a, b, d)
    v = sol.vectors
    eff = cfg.replace(subspace_dim=d, aux={"beta": beta, "delta": delta})
    return s.samples @ v, t.samples @ v, eff, {"directions": v, "eigenvalues": sol.values}
