"""Two-dimensional embeddings for plotting: exact t-SNE and PCA."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import RandomStream
from .errors import InvalidConfig, PerplexityInfeasible, TooFewPoints
from .linalg import pca

PERPLEXITY_TOL = 1e-5
MAX_BISECT = 50
MIN_GAIN = 0.01
P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: Optional[float] = None  # None: min(30, (n - 1) / 3)
    iterations: int = 1000
    learning_rate: float = 200.0
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum: float = 0.5
    final_momentum: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 50:
            raise InvalidConfig("t-SNE needs at least 50 iterations")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")

    def resolve_perplexity(self, n):
        limit = (n - 1) / 3.0
        perp = min(30.0, limit) if self.perplexity is None else float(self.perplexity)
        if not 1.0 <= perp <= limit:
            raise PerplexityInfeasible(f"perplexity {perp} outside [1, {limit:.4g}] for n={n}")
        return perp


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_initial: float  # right after early exaggeration ends
    kl_final: float
    perplexities: np.ndarray
    p: np.ndarray = field(repr=False)


def joint_probabilities(x, perplexity, stream=None):
    """Symmetric t-SNE affinities ``P`` (total mass 1) and per-row perplexities."""
    x = np.ascontiguousarray(x, dtype=float)
    n = x.shape[0]
    d2 = kernels.sq_dists(x, x)
    off = ~np.eye(n, dtype=bool)
    if np.any(d2[off] == 0.0):
        # coincident rows make the row entropy degenerate
        stream = stream or RandomStream(0)
        x = x + 1e-10 * stream.normal(x.shape)
        d2 = kernels.sq_dists(x, x)
    np.fill_diagonal(d2, 0.0)
    cond, perps = kernels.conditional_p(d2, float(perplexity), PERPLEXITY_TOL, MAX_BISECT)
    p = (cond + cond.T) / (2.0 * n)
    return p, perps


def tsne_embed(x, cfg: TsneConfig = TsneConfig()) -> TsneResult:
    """Exact t-SNE with PCA initialization, momentum and per-parameter gains."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        raise TooFewPoints(f"t-SNE needs at least 4 points, got {n}")
    perp = cfg.resolve_perplexity(n)
    stream = RandomStream(cfg.seed)
    p, perps = joint_probabilities(x, perp, stream.spawn(0))
    p = np.maximum(p, P_FLOOR)
    np.fill_diagonal(p, 0.0)

    y = pca_embed(x, 2)
    sd = y.std()
    y = y * (1e-4 / sd) if sd > 0 else 1e-4 * stream.spawn(1).normal((n, 2))
    y = np.ascontiguousarray(y)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_initial = kernels.tsne_kl(y, p)
    for it in range(cfg.iterations):
        early = it < cfg.exaggeration_iters
        if it == cfg.exaggeration_iters:
            kl_initial = kernels.tsne_kl(y, p)
        mom = cfg.momentum if early else cfg.final_momentum
        grad = kernels.tsne_grad(y, p * cfg.exaggeration if early else p)
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        update = mom * update - cfg.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return TsneResult(y, kl_initial, kernels.tsne_kl(y, p), perps, p)


def pca_embed(x, d=2):
    """Centered projection on the top ``d`` principal directions (zero-padded if ``D < d``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise TooFewPoints("PCA embedding needs at least 2 points")
    basis, _, mean = pca(x, min(d, x.shape[1]))
    z = (x - mean) @ basis
    if z.shape[1] < d:
        z = np.hstack([z, np.zeros((z.shape[0], d - z.shape[1]))])
    return z
