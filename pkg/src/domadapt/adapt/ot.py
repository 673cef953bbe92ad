"""Entropic optimal transport with a barycentric map."""
import warnings

import numpy as np

from .. import kernels
from ..errors import SinkhornDiverged
from .registry import register

MARGINAL_TOL = 1e-9
DIVERGED_TOL = 1e-6
NEWTON_MAX_SIZE = 2000  # n_s + n_t above which the dense Newton polish is skipped


def _dual_value(f, g, cost, eps, a, b):
    return float(f @ a + g @ b - eps * np.exp((f[:, None] + g[None, :] - cost) / eps).sum())


def newton_polish(f, g, cost, eps, a, b, tol=MARGINAL_TOL, steps=30):
    """Newton ascent on the entropic dual, started from Sinkhorn potentials.

    Sinkhorn converges linearly and very slowly for small ``eps``; near the
    optimum Newton converges quadratically to the same (unique) plan.  The
    last ``g`` entry is pinned to remove the additive gauge freedom.
    """
    n, m = cost.shape
    fval = _dual_value(f, g, cost, eps, a, b)
    for _ in range(steps):
        plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
        r, c = plan.sum(axis=1), plan.sum(axis=0)
        if max(np.abs(r - a).max(), np.abs(c - b).max()) <= tol:
            break
        hess = np.block([[np.diag(r), plan[:, :-1]], [plan[:, :-1].T, np.diag(c[:-1])]]) / eps
        grad = np.r_[a - r, (b - c)[:-1]]
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        df, dg = step[:n], np.r_[step[n:], 0.0]
        t = 1.0
        while t > 1e-8:
            cand = _dual_value(f + t * df, g + t * dg, cost, eps, a, b)
            if cand >= fval:
                break
            t *= 0.5
        else:
            break
        f, g, fval = f + t * df, g + t * dg, cand
    return f, g


def sinkhorn_plan(cost, eps, a=None, b=None, max_sweeps=1000, tol=MARGINAL_TOL):
    """Entropic transport plan by log-domain Sinkhorn.

    Returns ``(plan, info)``; ``info`` holds the sweep count and the final
    marginal violation (max-norm over row and column sums).
    """
    cost = np.ascontiguousarray(cost, dtype=float)
    n, m = cost.shape
    a = np.full(n, 1.0 / n) if a is None else np.asarray(a, float)
    b = np.full(m, 1.0 / m) if b is None else np.asarray(b, float)
    f, g, sweeps, viol = kernels.sinkhorn_log(cost, float(eps), np.log(a), np.log(b),
                                               int(max_sweeps), float(tol))
    polished = bool(viol > tol and n + m <= NEWTON_MAX_SIZE)
    if polished:
        f, g = newton_polish(f, g, cost, float(eps), a, b, tol)
    plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
    viol = max(np.abs(plan.sum(axis=1) - a).max(), np.abs(plan.sum(axis=0) - b).max())
    return plan, {"sweeps": int(sweeps), "violation": float(viol), "newton": polished}


@register("ot", defaults=lambda dim: {"iterations": 100, "aux": {"epsilon": 0.01}})
def adapt_ot(s, t, cfg, stream=None):
    eps = float(cfg.aux.get("epsilon", 0.01))
    xs, xt = s.samples, t.samples
    cost = kernels.sq_dists(np.ascontiguousarray(xs), np.ascontiguousarray(xt))
    cmax = cost.max()
    if cmax > 0:
        cost = cost / cmax
    plan, info = sinkhorn_plan(cost, eps, max_sweeps=cfg.iterations * 10)
    if info["violation"] > DIVERGED_TOL:
        raise SinkhornDiverged(
            f"marginal violation {info['violation']:.3g} after {info['sweeps']} sweeps (eps={eps})")
    info["converged"] = info["violation"] <= MARGINAL_TOL
    if not info["converged"]:
        warnings.warn(f"Sinkhorn stopped at marginal violation {info['violation']:.3g}",
                      RuntimeWarning, stacklevel=2)
    mapped = s.n * plan @ xt
    info["plan"] = plan
    eff = cfg.replace(subspace_dim=s.dim, aux={"epsilon": eps})
    return mapped, xt.copy(), eff, info
