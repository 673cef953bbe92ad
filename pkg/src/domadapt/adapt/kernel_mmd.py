"""MMD-based kernel embeddings: TCA, JDA and TJM.

All three solve ``A w = lam B w`` with ``A = K H K`` (variance kept) and a
``B`` that penalizes the MMD between domains.  Embedding coefficients are
rescaled to ``W.T A W = I`` so objectives are comparable across iterations.
"""
import numpy as np

from .. import kernels
from ..linalg import generalized_eigh, kernel_matrix, resolve_gamma
from .base import clamp_dim
from .registry import register


def mmd_matrix(ns, nt, src_mask=None, tgt_mask=None):
    """MMD coefficient matrix ``L`` for (sub)sets of the stacked samples.

    ``L = e e.T`` with ``e_i = 1/n_s`` on selected source rows and
    ``-1/n_t`` on selected target rows.  Empty selections give zeros.
    """
    n = ns + nt
    e = np.zeros(n)
    sm = np.ones(ns, bool) if src_mask is None else src_mask
    tm = np.ones(nt, bool) if tgt_mask is None else tgt_mask
    cs, ct = int(sm.sum()), int(tm.sum())
    if cs == 0 or ct == 0:
        return np.zeros((n, n))
    e[:ns][sm] = 1.0 / cs
    e[ns:][tm] = -1.0 / ct
    return np.outer(e, e)


def centering(n):
    return np.eye(n) - np.full((n, n), 1.0 / n)


def joint_kernel(s, t, cfg):
    x = np.vstack([s.samples, t.samples])
    gamma = resolve_gamma(cfg.kernel, x)
    return kernel_matrix(x, x, cfg.kernel, gamma), gamma


RANK_TOL = 1e-10  # eigenvalues below this fraction of the largest are numerically zero


def solve_embedding(a, b, d):
    """Top-``d`` coefficients scaled to ``W.T A W = I``.

    Directions whose eigenvalue is numerically zero carry no variance and
    would be blown up by the rescaling, so they are dropped: the returned
    ``W`` may have fewer than ``d`` columns.
    """
    sol = generalized_eigh(a, b, d)
    top = sol.values[0] if sol.values.size else 0.0
    keep = max(1, int(np.sum(sol.values > RANK_TOL * top))) if top > 0 else 1
    w = sol.vectors[:, :keep] / np.sqrt(np.maximum(sol.values[:keep], 1e-300))
    return w, sol


def _embedding_dim(cfg, s, t):
    return clamp_dim(cfg, s.n + t.n - 1)


@register("tca", defaults=lambda dim: {"reg": 1.0})
def adapt_tca(s, t, cfg, stream=None):
    ns, nt = s.n, t.n
    k, gamma = joint_kernel(s, t, cfg)
    d = _embedding_dim(cfg, s, t)
    n = ns + nt
    h = centering(n)
    lmat = mmd_matrix(ns, nt)
    a = k @ h @ k
    b = k @ lmat @ k + cfg.reg * np.eye(n)
    w, sol = solve_embedding(a, b, d)
    d = w.shape[1]
    z = k @ w
    info = {"gamma": gamma, "eigenvalues": sol.values, "coefficients": w}
    return z[:ns], z[ns:], cfg.replace(subspace_dim=d), info


def nn1_labels(train, labels, test):
    # a fresh writable copy: read-only arrays are a separate numba signature
    labels = np.array(labels, dtype=np.int64)
    return kernels.knn_predict(np.ascontiguousarray(train), labels, np.ascontiguousarray(test),
                               1, int(labels.max()) + 1)


@register("jda", labeled=True, defaults=lambda dim: {"reg": 1.0, "iterations": 10})
def adapt_jda(s, t, cfg, stream=None):
    ns, nt = s.n, t.n
    k, gamma = joint_kernel(s, t, cfg)
    d = _embedding_dim(cfg, s, t)
    n = ns + nt
    a = k @ centering(n) @ k
    l0 = mmd_matrix(ns, nt)
    ys = np.asarray(s.labels)
    classes = np.unique(ys)
    pseudo = None
    history = []
    for _ in range(cfg.iterations):
        lmat = l0.copy()
        if pseudo is not None:
            for c in classes:
                lmat += mmd_matrix(ns, nt, ys == c, pseudo == c)
        b = k @ lmat @ k + cfg.reg * np.eye(n)
        w, sol = solve_embedding(a, b, d)
        d = w.shape[1]
        z = k @ w
        pseudo = nn1_labels(z[:ns], ys, z[ns:])
        history.append(pseudo.copy())
    info = {"gamma": gamma, "pseudo_labels": pseudo, "pseudo_history": history,
            "coefficients": w}
    return z[:ns], z[ns:], cfg.replace(subspace_dim=d), info


def tjm_objective(w, klk, lam, ns):
    src = np.linalg.norm(w[:ns], axis=1).sum()
    tgt = float(np.sum(w[ns:] ** 2))
    return float(np.trace(w.T @ klk @ w)) + lam * (src + tgt)


@register("tjm", labeled=True, defaults=lambda dim: {"iterations": 10, "aux": {"lambda": 1.0}})
def adapt_tjm(s, t, cfg, stream=None):
    """Feature matching with l2,1 row-sparsity on the source coefficients.

    Each pass minimizes a quadratic majorizer of the l2,1 penalty, so
    :func:`tjm_objective` (which includes the squared-norm term the
    target rows carry through ``G_ii = 1``) never increases.  The pass is
    solved in ``U = G^(1/2) W``: the pencil
    ``(S K L K S + lam I, S K H K S)`` with ``S = G^(-1/2)`` is equivalent
    and stays well conditioned when source rows of ``W`` shrink to zero.
    """
    lam = float(cfg.aux.get("lambda", 1.0))
    ns, nt = s.n, t.n
    k, gamma = joint_kernel(s, t, cfg)
    d = _embedding_dim(cfg, s, t)
    n = ns + nt
    a = k @ centering(n) @ k
    klk = k @ mmd_matrix(ns, nt) @ k
    scale = np.ones(n)  # diagonal of G^(-1/2)
    objectives = []
    for _ in range(cfg.iterations):
        sa = scale[:, None] * a * scale[None, :]
        sb = scale[:, None] * klk * scale[None, :] + lam * np.eye(n)
        u, sol = solve_embedding(sa, sb, d)
        d = u.shape[1]
        w = scale[:, None] * u
        objectives.append(tjm_objective(w, klk, lam, ns))
        if lam == 0.0:
            break  # no penalty: the first pass is already the TCA solution
        scale = np.ones(n)
        scale[:ns] = np.sqrt(2.0 * np.linalg.norm(w[:ns], axis=1) + 1e-12)
    z = k @ w
    info = {"gamma": gamma, "objective": objectives, "coefficients": w}
    eff = cfg.replace(subspace_dim=d, aux={"lambda": lam})
    return z[:ns], z[ns:], eff, info
