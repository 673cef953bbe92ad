"""Hot numeric kernels.

Each public kernel has a loop implementation compiled with numba and a
vectorized numpy implementation.  The module-level names resolve to one of
them according to :data:`domadapt._accel.USE_NUMBA`; both variants stay
importable (``*_numba`` / ``*_numpy``) so tests and the benchmark can compare
them directly.  Results agree to rounding, not bit for bit.
"""
import math
import time

import numpy as np
from scipy.special import logsumexp

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# pairwise squared Euclidean distances
# ---------------------------------------------------------------------------


@njit(cache=True)
def sq_dists_numba(a, b):
    n, m, d = a.shape[0], b.shape[0], a.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = a[i, k] - b[j, k]
                s += t * t
            out[i, j] = s
    return out


def sq_dists_numpy(a, b):
    aa = np.einsum("ij,ij->i", a, a)[:, None]
    bb = np.einsum("ij,ij->i", b, b)[None, :]
    out = aa + bb - 2.0 * (a @ b.T)
    np.maximum(out, 0.0, out=out)
    return out


# ---------------------------------------------------------------------------
# log-domain Sinkhorn
# ---------------------------------------------------------------------------


@njit(cache=True)
def sinkhorn_log_numba(cost, eps, log_a, log_b, max_sweeps, tol):
    n, m = cost.shape
    f = np.zeros(n)
    g = np.zeros(m)
    a = np.exp(log_a)
    b = np.exp(log_b)
    buf = np.empty(max(n, m))
    violation = np.inf
    sweeps = 0
    for it in range(max_sweeps):
        sweeps = it + 1
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                v = (g[j] - cost[i, j]) / eps
                buf[j] = v
                if v > mx:
                    mx = v
            s = 0.0
            for j in range(m):
                s += math.exp(buf[j] - mx)
            f[i] = eps * (log_a[i] - (mx + math.log(s)))
        for j in range(m):
            mx = -np.inf
            for i in range(n):
                v = (f[i] - cost[i, j]) / eps
                buf[i] = v
                if v > mx:
                    mx = v
            s = 0.0
            for i in range(n):
                s += math.exp(buf[i] - mx)
            g[j] = eps * (log_b[j] - (mx + math.log(s)))
        # columns are exact after the g-update; rows carry the violation
        violation = 0.0
        for i in range(n):
            r = 0.0
            for j in range(m):
                r += math.exp((f[i] + g[j] - cost[i, j]) / eps)
            dv = abs(r - a[i])
            if dv > violation:
                violation = dv
        if violation < tol:
            break
    col_violation = 0.0
    for j in range(m):
        c = 0.0
        for i in range(n):
            c += math.exp((f[i] + g[j] - cost[i, j]) / eps)
        dv = abs(c - b[j])
        if dv > col_violation:
            col_violation = dv
    return f, g, sweeps, max(violation, col_violation)


def sinkhorn_log_numpy(cost, eps, log_a, log_b, max_sweeps, tol):
    n, m = cost.shape
    f = np.zeros(n)
    g = np.zeros(m)
    a = np.exp(log_a)
    b = np.exp(log_b)
    violation = np.inf
    sweeps = 0
    for it in range(max_sweeps):
        sweeps = it + 1
        f = eps * (log_a - logsumexp((g[None, :] - cost) / eps, axis=1))
        g = eps * (log_b - logsumexp((f[:, None] - cost) / eps, axis=0))
        plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
        violation = np.max(np.abs(plan.sum(axis=1) - a))
        if violation < tol:
            break
    plan = np.exp((f[:, None] + g[None, :] - cost) / eps)
    col_violation = np.max(np.abs(plan.sum(axis=0) - b))
    return f, g, sweeps, max(violation, col_violation)


# ---------------------------------------------------------------------------
# k-nearest-neighbour prediction, ties broken by smallest training index
# ---------------------------------------------------------------------------


@njit(cache=True)
def knn_predict_numba(train, labels, test, k, n_classes):
    n_test = test.shape[0]
    n_train = train.shape[0]
    out = np.empty(n_test, dtype=np.int64)
    d = np.empty(n_train)
    for q in range(n_test):
        for i in range(n_train):
            s = 0.0
            for c in range(train.shape[1]):
                t = test[q, c] - train[i, c]
                s += t * t
            d[i] = s
        order = np.argsort(d, kind="mergesort")
        votes = np.zeros(n_classes, dtype=np.int64)
        for r in range(k):
            votes[labels[order[r]]] += 1
        best = votes.max()
        for r in range(k):
            lab = labels[order[r]]
            if votes[lab] == best:
                out[q] = lab
                break
    return out


def knn_predict_numpy(train, labels, test, k, n_classes):
    # accumulate coordinate by coordinate like the loop kernel, so distance
    # ties come out bit-equal and both backends break them the same way
    d = np.zeros((test.shape[0], train.shape[0]))
    for c in range(train.shape[1]):
        d += (test[:, c, None] - train[None, :, c]) ** 2
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    nbr = labels[order]
    votes = np.zeros((test.shape[0], n_classes), dtype=np.int64)
    for r in range(k):
        np.add.at(votes, (np.arange(test.shape[0]), nbr[:, r]), 1)
    best = votes.max(axis=1)
    # first neighbour (in distance order) whose class reaches the top vote
    hit = votes[np.arange(test.shape[0])[:, None], nbr] == best[:, None]
    return nbr[np.arange(test.shape[0]), np.argmax(hit, axis=1)].astype(np.int64)


# ---------------------------------------------------------------------------
# t-SNE: perplexity calibration and gradient
# ---------------------------------------------------------------------------


@njit(cache=True)
def _row_entropy(dist_row, beta, prow):
    # dist_row is already shifted so its minimum is zero
    s = 0.0
    for j in range(dist_row.shape[0]):
        prow[j] = math.exp(-beta * dist_row[j])
        s += prow[j]
    h = 0.0
    for j in range(dist_row.shape[0]):
        prow[j] /= s
        h += dist_row[j] * prow[j]
    return math.log(s) + beta * h


@njit(cache=True)
def conditional_p_numba(d2, perplexity, tol, max_bisect):
    n = d2.shape[0]
    p = np.zeros((n, n))
    perp = np.empty(n)
    target = math.log(perplexity)
    row = np.empty(n - 1)
    prow = np.empty(n - 1)
    for i in range(n):
        c = 0
        for j in range(n):
            if j != i:
                row[c] = d2[i, j]
                c += 1
        row -= row.min()
        scale = row.mean()
        beta = 1.0 / scale if scale > 0 else 1.0
        lo, hi = 0.0, np.inf
        h = _row_entropy(row, beta, prow)
        # grow the bracket geometrically, then bisect
        for _ in range(200):
            if abs(math.exp(h) - perplexity) < tol:
                break
            if h > target:
                lo = beta
                if hi == np.inf:
                    beta *= 2.0
                else:
                    break
            else:
                hi = beta
                if lo == 0.0:
                    beta /= 2.0
                else:
                    break
            h = _row_entropy(row, beta, prow)
        for _ in range(max_bisect):
            if abs(math.exp(h) - perplexity) < tol:
                break
            if h > target:
                lo = beta
            else:
                hi = beta
            # an open bracket means the target is below the tie-limited minimum
            beta = 2.0 * beta if hi == np.inf else 0.5 * (lo + hi)
            h = _row_entropy(row, beta, prow)
        perp[i] = math.exp(h)
        c = 0
        for j in range(n):
            if j != i:
                p[i, j] = prow[c]
                c += 1
    return p, perp


def _row_entropy_numpy(row, beta):
    prow = np.exp(-beta * row)
    s = prow.sum()
    prow /= s
    return math.log(s) + beta * float(row @ prow), prow


def conditional_p_numpy(d2, perplexity, tol, max_bisect):
    n = d2.shape[0]
    p = np.zeros((n, n))
    perp = np.empty(n)
    target = math.log(perplexity)
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = d2[i, mask[i]]
        row = row - row.min()
        scale = row.mean()
        beta = 1.0 / scale if scale > 0 else 1.0
        lo, hi = 0.0, np.inf
        h, prow = _row_entropy_numpy(row, beta)
        for _ in range(200):
            if abs(math.exp(h) - perplexity) < tol:
                break
            if h > target:
                lo = beta
                if hi == np.inf:
                    beta *= 2.0
                else:
                    break
            else:
                hi = beta
                if lo == 0.0:
                    beta /= 2.0
                else:
                    break
            h, prow = _row_entropy_numpy(row, beta)
        for _ in range(max_bisect):
            if abs(math.exp(h) - perplexity) < tol:
                break
            if h > target:
                lo = beta
            else:
                hi = beta
            # an open bracket means the target is below the tie-limited minimum
            beta = 2.0 * beta if hi == np.inf else 0.5 * (lo + hi)
            h, prow = _row_entropy_numpy(row, beta)
        perp[i] = math.exp(h)
        p[i, mask[i]] = prow
    return p, perp


@njit(cache=True)
def tsne_grad_numba(y, p):
    n = y.shape[0]
    num = np.empty((n, n))
    total = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            dx = y[i, 0] - y[j, 0]
            dy = y[i, 1] - y[j, 1]
            v = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = v
            num[j, i] = v
            total += 2.0 * v
    grad = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            w = (p[i, j] - num[i, j] / total) * num[i, j]
            grad[i, 0] += 4.0 * w * (y[i, 0] - y[j, 0])
            grad[i, 1] += 4.0 * w * (y[i, 1] - y[j, 1])
    return grad


def tsne_grad_numpy(y, p):
    num = 1.0 / (1.0 + sq_dists_numpy(y, y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    w = (p - q) * num
    return 4.0 * (np.diag(w.sum(axis=1)) - w) @ y


def tsne_kl(y, p):
    """KL(P || Q) for a t-SNE embedding (numpy; called rarely)."""
    num = 1.0 / (1.0 + sq_dists_numpy(y, y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-300)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


# ---------------------------------------------------------------------------
# information-theoretic objective (ITL)
# ---------------------------------------------------------------------------


@njit(cache=True)
def itl_objective_numba(x, w, is_src, cls, n_classes, lam, h=0.0):
    n = x.shape[0]
    z = x @ w
    d = z.shape[1]
    npairs = n * (n - 1) // 2
    flat = np.empty(npairs)
    d2 = np.zeros((n, n))
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                t = z[i, k] - z[j, k]
                s += t * t
            d2[i, j] = s
            d2[j, i] = s
            flat[c] = s
            c += 1
    if h <= 0.0:
        h = np.median(flat)
    if h <= 0.0:
        h = 1.0
    j_dom = 0.0
    for i in range(n):
        num = 0.0
        den = 0.0
        for j in range(n):
            kv = math.exp(-d2[i, j] / h)
            den += kv
            if is_src[j]:
                num += kv
        p = num / den if den > 0.0 else 0.5
        hb = 0.0
        if p > 0.0:
            hb -= p * math.log(p)
        if p < 1.0:
            hb -= (1.0 - p) * math.log(1.0 - p)
        j_dom -= hb
    j_dom /= n
    mu = np.zeros((n_classes, d))
    cnt = np.zeros(n_classes)
    for i in range(n):
        if is_src[i]:
            cnt[cls[i]] += 1.0
            for k in range(d):
                mu[cls[i], k] += z[i, k]
    for cc in range(n_classes):
        if cnt[cc] > 0:
            for k in range(d):
                mu[cc, k] /= cnt[cc]
    j_cls = 0.0
    nt = 0
    logits = np.empty(n_classes)
    for i in range(n):
        if is_src[i]:
            continue
        nt += 1
        mx = -np.inf
        for cc in range(n_classes):
            if cnt[cc] == 0:
                logits[cc] = -np.inf
                continue
            e = 0.0
            for k in range(d):
                t = z[i, k] - mu[cc, k]
                e += t * t
            logits[cc] = -e / h
            if logits[cc] > mx:
                mx = logits[cc]
        s = 0.0
        for cc in range(n_classes):
            if cnt[cc] > 0:
                s += math.exp(logits[cc] - mx)
        lse = mx + math.log(s)
        ent = 0.0
        for cc in range(n_classes):
            if cnt[cc] > 0:
                lq = logits[cc] - lse
                ent -= math.exp(lq) * lq
        j_cls += ent
    if nt > 0:
        j_cls /= nt
    return j_dom + lam * j_cls


def itl_terms_numpy(x, w, is_src, cls, n_classes, h=0.0):
    """Intermediate quantities of the ITL objective (shared with the gradient).

    ``h <= 0`` selects the median pairwise squared distance of the projection.
    """
    z = x @ w
    n = z.shape[0]
    d2 = sq_dists_numpy(z, z)
    if h <= 0.0:
        iu = np.triu_indices(n, 1)
        h = float(np.median(d2[iu]))
    if h <= 0.0:
        h = 1.0
    kmat = np.exp(-d2 / h)
    np.fill_diagonal(kmat, 1.0)
    den = kmat.sum(axis=1)
    num = kmat[:, is_src].sum(axis=1)
    p = np.divide(num, den, out=np.full(n, 0.5), where=den > 0)
    present = np.array([np.any(is_src & (cls == c)) for c in range(n_classes)])
    mu = np.zeros((n_classes, z.shape[1]))
    for c in np.flatnonzero(present):
        mu[c] = z[is_src & (cls == c)].mean(axis=0)
    zt = z[~is_src]
    e = sq_dists_numpy(zt, mu)[:, present]
    logits = -e / h
    logq = logits - logsumexp(logits, axis=1, keepdims=True)
    return dict(z=z, d2=d2, h=h, kmat=kmat, den=den, p=p, present=present,
                mu=mu, e=e, logq=logq)


def _binary_entropy(p):
    p = np.clip(p, 0.0, 1.0)
    out = np.zeros_like(p)
    m = p > 0
    out[m] -= p[m] * np.log(p[m])
    m = p < 1
    out[m] -= (1 - p[m]) * np.log(1 - p[m])
    return out


def itl_objective_numpy(x, w, is_src, cls, n_classes, lam, h=0.0):
    t = itl_terms_numpy(x, w, is_src, cls, n_classes, h)
    j_dom = -float(np.mean(_binary_entropy(t["p"])))
    q = np.exp(t["logq"])
    j_cls = float(np.mean(-(q * t["logq"]).sum(axis=1))) if q.shape[0] else 0.0
    return j_dom + lam * j_cls


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    sq_dists = sq_dists_numba
    sinkhorn_log = sinkhorn_log_numba
    knn_predict = knn_predict_numba
    conditional_p = conditional_p_numba
    tsne_grad = tsne_grad_numba
    itl_objective = itl_objective_numba
else:
    sq_dists = sq_dists_numpy
    sinkhorn_log = sinkhorn_log_numpy
    knn_predict = knn_predict_numpy
    conditional_p = conditional_p_numpy
    tsne_grad = tsne_grad_numpy
    itl_objective = itl_objective_numpy


def warmup() -> float:
    """Compile (or load from cache) every jitted kernel; returns seconds spent.

    Callers that time individual methods run this first so JIT compilation is
    not billed to whichever method happens to touch a kernel first.
    """
    if not USE_NUMBA:
        return 0.0
    t0 = time.perf_counter()
    x = np.ascontiguousarray(np.arange(12.0).reshape(6, 2) / 7.0)
    d2 = sq_dists(x, x)
    labels = np.array([0, 1, 0, 1, 0, 1], dtype=np.int64)
    knn_predict(x, labels, x, 1, 2)
    log_w = np.full(6, -math.log(6.0))
    sinkhorn_log(d2 / d2.max(), 0.1, log_w, log_w, 5, 1e-9)
    p, _ = conditional_p(d2, 1.5, 1e-5, 50)
    tsne_grad(np.ascontiguousarray(x), np.ascontiguousarray((p + p.T) / 12.0))
    is_src = np.array([True, True, True, False, False, False])
    cls = np.array([0, 1, 0, -1, -1, -1], dtype=np.int64)
    w = np.ascontiguousarray(np.array([[1.0], [0.0]]))
    itl_objective(x, w, is_src, cls, 2, 1.0, 0.0)
    itl_objective(x, w, is_src, cls, 2, 1.0, 1.0)
    return time.perf_counter() - t0
