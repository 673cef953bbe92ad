"""Synthetic two-domain Gaussian data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .core import FeatureDataset, RandomStream
from .errors import DimMismatch, InvalidConfig, NotPSD


@dataclass(frozen=True)
class GaussianClassSpec:
    mean: np.ndarray
    covariance: np.ndarray
    count: int
    label: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimMismatch(f"covariance {cov.shape} does not match mean length {mean.size}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise InvalidConfig("covariance is not symmetric")
        if int(self.count) < 1:
            raise InvalidConfig("count must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "count", int(self.count))


@dataclass(frozen=True)
class SyntheticDomainSpec:
    classes: Sequence[GaussianClassSpec]
    domain: str = "source"

    def __post_init__(self):
        if not self.classes:
            raise InvalidConfig("a domain needs at least one class")
        dims = {c.mean.size for c in self.classes}
        if len(dims) != 1:
            raise DimMismatch(f"classes disagree on dimension: {sorted(dims)}")


def psd_factor(cov):
    """Factor ``L`` with ``L @ L.T == cov`` for a PSD (possibly singular) matrix.

    Eigenvalues in [-1e-10, 0) are clipped to zero; anything more negative is
    rejected.  An eigen-factor is used instead of pivoted Cholesky because it
    handles exact singularity without special cases.
    """
    w, v = np.linalg.eigh(cov)
    if w.size and w.min() < -1e-10:
        raise NotPSD(f"covariance has eigenvalue {w.min():.3g}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(spec: GaussianClassSpec, stream: RandomStream) -> np.ndarray:
    factor = psd_factor(spec.covariance)
    z = stream.normal((spec.count, spec.mean.size))
    return spec.mean + z @ factor.T


def sample_domain(spec: SyntheticDomainSpec, stream: RandomStream) -> FeatureDataset:
    blocks, labels = [], []
    for c in spec.classes:
        blocks.append(sample_gaussian(c, stream))
        labels.append(np.full(c.count, c.label, dtype=np.int64))
    return FeatureDataset(np.vstack(blocks), np.concatenate(labels), spec.domain)


def paper_domain_specs():
    """Two-class, two-domain configuration with 30 samples per class."""
    wide, narrow = 0.2 * np.eye(2), 0.1 * np.eye(2)
    source = SyntheticDomainSpec([
        GaussianClassSpec([0.0, 0.0], wide, 30, label=1),
        GaussianClassSpec([0.0, 1.0], narrow, 30, label=0),
    ], "source")
    target = SyntheticDomainSpec([
        GaussianClassSpec([1.0, -0.5], wide, 30, label=1),
        GaussianClassSpec([1.0, 0.2], narrow, 30, label=0),
    ], "target")
    return source, target


def make_paper_synthetic(stream: RandomStream):
    src_spec, tgt_spec = paper_domain_specs()
    # one child stream per domain: each domain is reproducible on its own
    return (sample_domain(src_spec, stream.spawn(0)),
            sample_domain(tgt_spec, stream.spawn(1)))


def make_shifted_synthetic(stream: RandomStream, dim: int = 90, n_per_class: int = 30,
                           factors: int = 5, class_sep: float = 2.0, offset: float = 0.8,
                           gain: float = 0.3, noise: float = 0.5) -> tuple:
    """Correlated high-dimensional two-class domains with a site effect.

    Features follow a ``factors``-dimensional latent model,
    ``x = L z + class * L[:, 0] * class_sep / 2 + e`` with ``z ~ N(0, I)`` and
    isotropic noise ``e`` of scale ``noise``.  The target shares ``L`` and the
    class structure but adds a per-feature offset ``N(0, offset**2)`` and
    multiplies each feature's noise scale by ``exp(N(0, gain**2))``, the usual
    additive/multiplicative batch model for ROI measurements.
    """
    if dim < 1 or n_per_class < 1 or factors < 1:
        raise InvalidConfig("dim, n_per_class and factors must be positive")
    geo = stream.spawn(2)
    load = geo.normal((dim, factors)) / np.sqrt(factors)
    half = 0.5 * class_sep * load[:, 0]
    site = offset * geo.normal(dim)
    scale = np.exp(gain * geo.normal(dim))
    shared = load @ load.T

    def domain(tag, shift, noise_sd):
        cov = shared + np.diag(noise_sd**2)
        return SyntheticDomainSpec([
            GaussianClassSpec(shift + half, cov, n_per_class, label=1),
            GaussianClassSpec(shift - half, cov, n_per_class, label=0),
        ], tag)

    src = domain("source", np.zeros(dim), np.full(dim, noise))
    tgt = domain("target", site, noise * scale)
    return sample_domain(src, stream.spawn(0)), sample_domain(tgt, stream.spawn(1))


def domain_spec_from_dict(d, tag) -> SyntheticDomainSpec:
    classes: List[GaussianClassSpec] = []
    for c in d:
        classes.append(GaussianClassSpec(c["mean"], c["covariance"], c["count"], c.get("label", 0)))
    return SyntheticDomainSpec(classes, tag)
