"""Information-theoretic subspace learning (ITL).

Learns a column-orthonormal projection ``W`` minimizing

    J(W) = J_dom(W) + lam * J_cls(W)

* ``J_dom`` is the negative mean binary entropy of a kernel-density domain
  posterior (Gaussian kernel ``exp(-|z_i - z_j|^2 / h)``, each point's own
  kernel term included), so minimizing it makes the domains
  indistinguishable;
* ``J_cls`` is the mean entropy of target class posteriors
  ``softmax(-|z - mu_c|^2 / h)`` over projected source class means.

``h`` is the median pairwise squared distance of the data projected by the
initial ``W`` and stays fixed during descent.  Re-taking the median at every
``W`` makes ``J`` jump whenever the median pair changes, and the line search
then stalls on those kinks.

Descent is along the gradient projected onto the tangent space of the
Stiefel manifold, with Armijo backtracking (halving, ``c = 1e-4``) and a
QR retraction (``diag(R) > 0``) after every accepted step.
"""
from __future__ import annotations

import warnings

import numpy as np

from .. import kernels
from ..linalg import median_sq_distance, pca
from .registry import register

ARMIJO_C = 1e-4
FD_STEP = 1e-5
MIN_STEP = 1e-12
FD_AUTO_LIMIT = 64  # central differences when D*d is at most this


class ITLProblem:
    """Objective and gradients for fixed data; ``W`` is the only variable."""

    def __init__(self, x, is_src, cls, lam, bandwidth=None):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.is_src = np.ascontiguousarray(is_src, dtype=np.bool_)
        self.cls = np.ascontiguousarray(cls, dtype=np.int64)
        self.n_classes = int(self.cls[self.is_src].max()) + 1
        self.lam = float(lam)
        # None: median of the current projection (scale-free, but only piecewise smooth)
        self.bandwidth = bandwidth

    def objective(self, w) -> float:
        h = 0.0 if self.bandwidth is None else float(self.bandwidth)
        return float(kernels.itl_objective(self.x, np.ascontiguousarray(w), self.is_src,
                                           self.cls, self.n_classes, self.lam, h))

    def grad_central(self, w, step=FD_STEP):
        g = np.empty_like(w)
        wp = np.array(w, dtype=float, copy=True)
        for idx in np.ndindex(*w.shape):
            orig = wp[idx]
            wp[idx] = orig + step
            fp = self.objective(wp)
            wp[idx] = orig - step
            fm = self.objective(wp)
            wp[idx] = orig
            g[idx] = (fp - fm) / (2.0 * step)
        return g

    def grad_forward(self, w, step=1e-7):
        g = np.empty_like(w)
        f0 = self.objective(w)
        wp = np.array(w, dtype=float, copy=True)
        for idx in np.ndindex(*w.shape):
            orig = wp[idx]
            wp[idx] = orig + step
            g[idx] = (self.objective(wp) - f0) / step
            wp[idx] = orig
        return g

    def grad_analytic(self, w):
        """Exact gradient; with a median bandwidth, valid wherever the median pair is unique."""
        h0 = 0.0 if self.bandwidth is None else float(self.bandwidth)
        t = kernels.itl_terms_numpy(self.x, w, self.is_src, self.cls, self.n_classes, h0)
        z, d2, h, kmat, den, p = t["z"], t["d2"], t["h"], t["kmat"], t["den"], t["p"]
        n = z.shape[0]
        s = self.is_src.astype(float)

        pc = np.clip(p, 1e-300, 1.0 - 1e-16)
        a = -np.log((1.0 - pc) / pc) / n  # dJ/dp_i
        m = (a / den)[:, None] * (s[None, :] - p[:, None])  # dJ/dk_ij through row i
        np.fill_diagonal(m, 0.0)
        coef = -(m + m.T) * kmat / h  # dJ/dD2 per unordered pair
        np.fill_diagonal(coef, 0.0)
        dj_dh = float(np.sum(m * kmat * d2)) / h**2

        gz = np.zeros_like(z)
        present = t["present"]
        if self.lam != 0.0 and np.any(~self.is_src):
            logq = t["logq"]
            q = np.exp(logq)
            ent = -(q * logq).sum(axis=1, keepdims=True)
            b = self.lam / q.shape[0] * (-q * (logq + ent))  # dJ/dlogit
            e = t["e"]
            dj_dh += float(np.sum(b * e)) / h**2
            de = -b / h
            mu = t["mu"][present]
            zt = z[~self.is_src]
            diff = zt[:, None, :] - mu[None, :, :]
            gz[~self.is_src] += 2.0 * np.einsum("jc,jck->jk", de, diff)
            dmu = -2.0 * np.einsum("jc,jck->ck", de, diff)
            for row, c in enumerate(np.flatnonzero(present)):
                members = self.is_src & (self.cls == c)
                gz[members] += dmu[row] / members.sum()

        iu = np.triu_indices(n, 1)
        flat = d2[iu]
        if self.bandwidth is None and t["h"] == float(np.median(flat)):
            order = np.argsort(flat, kind="stable")
            k = flat.size
            picks = [(order[(k - 1) // 2], 1.0)] if k % 2 else [(order[k // 2 - 1], 0.5), (order[k // 2], 0.5)]
            for pos, wgt in picks:
                i, j = iu[0][pos], iu[1][pos]
                coef[i, j] += wgt * dj_dh
                coef[j, i] += wgt * dj_dh

        gz += 2.0 * (coef.sum(axis=1)[:, None] * z - coef @ z)
        return self.x.T @ gz


def stiefel_project(w, g):
    sym = 0.5 * (w.T @ g + g.T @ w)
    return g - w @ sym


def qr_retract(w):
    q, r = np.linalg.qr(w)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_orthonormal(stream, D, d):
    return qr_retract(stream.normal((D, d)))


def descend(problem: ITLProblem, w0, iterations, grad="central"):
    """Projected steepest descent; returns ``(W, history, stalled)``."""
    gradient = {"central": problem.grad_central, "analytic": problem.grad_analytic}[grad]
    w = qr_retract(w0)
    f = problem.objective(w)
    history = [f]
    stalled = False
    alpha = 1.0
    for _ in range(iterations):
        g = stiefel_project(w, gradient(w))
        gnorm2 = float(np.sum(g * g))
        if gnorm2 < 1e-20:
            break
        alpha = min(1.0, 2.0 * alpha)
        while alpha >= MIN_STEP:
            cand = qr_retract(w - alpha * g)
            fc = problem.objective(cand)
            if fc <= f - ARMIJO_C * alpha * gnorm2:
                break
            alpha *= 0.5
        else:
            stalled = True
            break
        w, f = cand, fc
        history.append(f)
    return w, history, stalled


def _itl_defaults(dim):
    return {"iterations": 100, "aux": {"lambda": 1.0}}


@register("itl", labeled=True, defaults=_itl_defaults)
def adapt_itl(s, t, cfg, stream):
    lam = float(cfg.aux.get("lambda", 1.0))
    D = s.dim
    d = max(1, min(cfg.subspace_dim, D))
    x = np.vstack([s.samples, t.samples])
    mean = x.mean(axis=0)
    xc = x - mean
    _, ys = np.unique(np.asarray(s.labels), return_inverse=True)
    is_src = np.r_[np.ones(s.n, bool), np.zeros(t.n, bool)]
    cls = np.r_[ys, np.full(t.n, -1)]
    starts = [pca(xc, d)[0]]
    for _ in range(int(cfg.aux.get("restarts", 0))):
        starts.append(random_orthonormal(stream, D, d))

    fd = cfg.aux.get("fd_gradient")
    if fd is None:
        mode = "central" if D * d <= FD_AUTO_LIMIT else "analytic"
    else:
        mode = "central" if fd else "analytic"

    # one bandwidth for every start keeps their objectives comparable
    problem = ITLProblem(xc, is_src, cls, lam, median_sq_distance(xc @ starts[0]))
    best = None
    for w0 in starts:
        w, hist, stalled = descend(problem, w0, cfg.iterations, mode)
        if best is None or hist[-1] < best[1][-1]:
            best = (w, hist, stalled)
    w, hist, stalled = best
    if stalled:
        warnings.warn("ITL line search stalled; returning the best projection found",
                      RuntimeWarning, stacklevel=2)
    info = {"projection": w, "objective": hist, "stalled": stalled, "gradient": mode,
            "bandwidth": problem.bandwidth}
    eff_aux = {"lambda": lam, "fd_gradient": 1.0 if mode == "central" else 0.0}
    eff = cfg.replace(subspace_dim=d, aux=eff_aux)
    return (s.samples - mean) @ w, (t.samples - mean) @ w, eff, info
