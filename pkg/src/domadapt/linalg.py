"""Linear-algebra helpers shared by the adapters, metrics and embeddings."""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .core import KernelSpec
from .errors import EigenFailure

EIGEN_RESIDUAL_TOL = 1e-6


def symmetrize(m):
    return 0.5 * (m + m.T)


def median_sq_distance(x) -> float:
    """Median of the pairwise squared distances over distinct row pairs."""
    n = x.shape[0]
    if n < 2:
        return 1.0
    d2 = kernels.sq_dists(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(x, dtype=float))
    med = float(np.median(d2[np.triu_indices(n, 1)]))
    if med <= 0.0:
        # more than half the pairs coincide; fall back to the mean
        med = float(d2.sum() / (n * (n - 1)))
    return med if med > 0.0 else 1.0


def resolve_gamma(spec: KernelSpec, pooled) -> float:
    if spec.kind == "linear":
        return 0.0
    if spec.bandwidth == "median":
        return 1.0 / median_sq_distance(pooled)
    return float(spec.bandwidth)


def kernel_matrix(a, b, spec: KernelSpec, gamma=None):
    """Gram matrix between the rows of ``a`` and ``b``.

    ``gamma`` overrides the bandwidth rule (callers pass the pooled median
    value so that every block of a joint matrix uses one bandwidth).
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if spec.kind == "linear":
        return a @ b.T
    if gamma is None:
        gamma = resolve_gamma(spec, np.vstack([a, b]))
    return np.exp(-gamma * kernels.sq_dists(a, b))


def fix_signs(vecs):
    """Flip each column so its largest-magnitude entry is positive."""
    vecs = np.array(vecs, dtype=float, copy=True)
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def pca(x, d=None):
    """Principal directions of the centered rows of ``x``.

    Returns ``(basis, variances, mean)`` with ``basis`` of shape ``(D, d)``,
    sorted by decreasing variance and sign-fixed by :func:`fix_signs`.
    """
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = symmetrize(xc.T @ xc / x.shape[0])
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w, kind="stable")[::-1]
    w, v = w[order], v[:, order]
    if d is not None:
        w, v = w[:d], v[:, :d]
    return fix_signs(v), np.clip(w, 0.0, None), mean


def orth_complement(basis):
    """Orthonormal basis of the complement of the column span of ``basis``."""
    D, d = basis.shape
    q, _ = np.linalg.qr(basis, mode="complete")
    return fix_signs(q[:, d:])


def sym_power(m, power, floor=1e-12):
    """``m ** power`` for a symmetric PSD matrix, eigenvalues floored at ``floor``."""
    w, v = np.linalg.eigh(symmetrize(m))
    w = np.maximum(w, floor)
    return symmetrize((v * w**power) @ v.T)


@dataclass
class EigenSolution:
    values: np.ndarray
    vectors: np.ndarray
    a: np.ndarray
    b: np.ndarray
    residuals: np.ndarray


_recorder = threading.local()


@contextmanager
def record_eigenproblems():
    """Collect every :class:`EigenSolution` produced in this thread."""
    log = []
    prev = getattr(_recorder, "log", None)
    _recorder.log = log
    try:
        yield log
    finally:
        _recorder.log = prev


def eigen_residuals(a, b, values, vectors):
    r = a @ vectors - (b @ vectors) * values
    return np.linalg.norm(r, axis=0) / np.maximum(np.linalg.norm(vectors, axis=0), 1e-300)


def generalized_eigh(a, b, d):
    """Top-``d`` eigenpairs of ``a v = lam b v`` sorted by decreasing ``lam``.

    ``b`` receives the ridge ``1e-9 * trace(b) / size`` before solving.
    Vectors are ``b``-orthonormal (as returned by LAPACK) and sign-fixed.
    ``residuals`` holds ``|A v - lam B v| / |v|`` per pair; callers on
    well-conditioned pencils can hold it to :data:`EIGEN_RESIDUAL_TOL`.
    :class:`EigenFailure` is raised when the backward error
    ``|A v - lam B v| / ((|A| + |lam| |B|) |v|)`` exceeds 1e-8, which no
    rescaling of the pencil can fix.
    """
    a = symmetrize(np.asarray(a, dtype=float))
    b = symmetrize(np.asarray(b, dtype=float))
    n = a.shape[0]
    d = int(min(max(d, 1), n))
    tr = float(np.trace(b))
    ridge = 1e-9 * tr / n if tr > 0 else 1e-9
    b = b + ridge * np.eye(n)
    try:
        vals, vecs = scipy.linalg.eigh(a, b, subset_by_index=[n - d, n - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    vals, vecs = vals[::-1], fix_signs(vecs[:, ::-1])
    res = eigen_residuals(a, b, vals, vecs)
    scale = np.linalg.norm(a, 2) + np.abs(vals) * np.linalg.norm(b, 2)
    backward = res / np.maximum(scale, 1e-300)
    if not np.all(np.isfinite(res)) or np.any(backward > 1e-8):
        raise EigenFailure(f"generalized eigenproblem backward error {np.nanmax(backward):.3g}")
    sol = EigenSolution(vals, vecs, a, b, res)
    log = getattr(_recorder, "log", None)
    if log is not None:
        log.append(sol)
    return sol
