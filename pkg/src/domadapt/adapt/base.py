"""Uniform adapter entry point and default configurations."""
from __future__ import annotations

import time

import numpy as np

from ..core import (
    KERNEL_METHODS,
    METHODS,
    AdaptationConfig,
    AdaptationOutput,
    FeatureDataset,
    KernelSpec,
    RandomStream,
)
from ..errors import DimMismatch, MissingSourceLabels
from . import registry


def default_config(method: str, dim: int | None = None) -> AdaptationConfig:
    """Documented defaults for ``method``.

    ``subspace_dim`` is ``min(30, dim)`` (30 when ``dim`` is unknown; the
    adapter clamps it again against the data).
    """
    entry = registry.get(method)
    base = {
        "method": method,
        "subspace_dim": 30 if dim is None else max(1, min(30, int(dim))),
        "kernel": KernelSpec("rbf", "median") if method in KERNEL_METHODS else KernelSpec("linear", "median"),
        "reg": 1.0,
        "iterations": 10,
        "aux": {},
        "seed": 0,
    }
    base.update(entry.defaults(dim))
    return AdaptationConfig(**base)


def check_pair(s: FeatureDataset, t: FeatureDataset):
    if s.dim != t.dim:
        raise DimMismatch(f"source has {s.dim} features, target has {t.dim}")


def adapt(source: FeatureDataset, target: FeatureDataset, config: AdaptationConfig,
          stream: RandomStream | None = None) -> AdaptationOutput:
    """Run one adaptation method through the shared contract.

    Inputs are never modified; the returned config carries every clamp and
    default actually used.
    """
    entry = registry.get(config.method)
    check_pair(source, target)
    if entry.labeled and source.labels is None:
        raise MissingSourceLabels(f"{config.method} needs source labels")
    if stream is None:
        stream = RandomStream(config.seed)
    t0 = time.perf_counter()
    xs, xt, eff, info = entry.func(source, target, config, stream)
    wall = time.perf_counter() - t0
    return AdaptationOutput(np.asarray(xs), np.asarray(xt), config.method, eff, wall, info)


def clamp_dim(cfg: AdaptationConfig, limit: int) -> int:
    return max(1, min(cfg.subspace_dim, int(limit)))


def builtin_methods():
    return METHODS
