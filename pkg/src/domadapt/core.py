"""Shared data model: datasets, kernels, configurations and the random stream."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    DimMismatch,
    EmptyDataset,
    InvalidConfig,
    LabelCountMismatch,
    NegativeLabel,
    NonFiniteValue,
    RaggedRow,
    UnknownMethod,
)

METHODS = ("baseline", "sa", "coral", "tca", "ot", "jda", "tjm", "gfk", "sca", "itl")
LABELED_METHODS = frozenset({"jda", "tjm", "sca", "itl"})
KERNEL_METHODS = frozenset({"tca", "jda", "tjm"})


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """An ``n x D`` sample matrix with optional integer class labels.

    Construction validates every invariant (see :func:`validate_dataset`);
    arrays are copied and made read-only so adapters cannot mutate inputs.
    """

    samples: np.ndarray
    labels: Optional[np.ndarray] = None
    domain: str = "source"

    def __post_init__(self):
        validate_dataset(self)
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int64, copy=True)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples, domain=None) -> "FeatureDataset":
        return FeatureDataset(samples, self.labels, domain or self.domain)

    def __eq__(self, other):
        if not isinstance(other, FeatureDataset):
            return NotImplemented
        if self.domain != other.domain or not np.array_equal(self.samples, other.samples):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


def validate_dataset(ds) -> None:
    """Check the dataset invariants and raise on the first violation.

    Accepts a :class:`FeatureDataset` or anything with ``samples`` and
    ``labels`` attributes (``samples`` may still be a ragged list of rows).
    Returns ``None`` when every invariant holds.
    """
    samples = ds.samples
    if isinstance(samples, np.ndarray):
        if samples.ndim != 2:
            if samples.size == 0:
                raise EmptyDataset("dataset has no rows")
            raise RaggedRow(0, "a 2-D matrix", f"{samples.ndim}-D array")
        rows = samples
    else:
        rows = list(samples)
        if not rows:
            raise EmptyDataset("dataset has no rows")
        width = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != width:
                raise RaggedRow(i, width, len(r))
        rows = np.asarray(rows, dtype=float)
    if rows.shape[0] < 1 or rows.shape[1] < 1:
        raise EmptyDataset(f"dataset shape {rows.shape}")
    bad = ~np.isfinite(rows)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteValue(int(r), int(c))
    labels = ds.labels
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (rows.shape[0],):
            raise LabelCountMismatch(
                f"{labels.size} labels for {rows.shape[0]} rows")
        if labels.size and np.any(labels != np.round(labels)):
            raise InvalidConfig("labels must be integers")
        neg = np.flatnonzero(labels < 0)
        if neg.size:
            raise NegativeLabel(int(neg[0]), int(labels[neg[0]]))


def pooled_standardize(s: FeatureDataset, t: FeatureDataset):
    """Shift and scale every column by the pooled (source and target) moments.

    Columns whose pooled standard deviation is below 1e-12 are only shifted.
    """
    if s.dim != t.dim:
        raise DimMismatch(f"source has {s.dim} columns, target {t.dim}")
    pooled = np.vstack([s.samples, t.samples])
    mean = pooled.mean(axis=0)
    sd = pooled.std(axis=0)
    scale = np.where(sd < 1e-12, 1.0, sd)
    return (s.with_samples((s.samples - mean) / scale),
            t.with_samples((t.samples - mean) / scale))


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    bandwidth: Union[float, str] = "median"

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise InvalidConfig(f"unknown kernel kind {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise InvalidConfig(f"bandwidth must be a number or 'median', got {self.bandwidth!r}")
        elif self.kind == "rbf" and not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InvalidConfig("rbf bandwidth must be positive")

    def to_dict(self):
        return {"kind": self.kind, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, KernelSpec):
            return d
        return cls(d.get("kind", "rbf"), d.get("bandwidth", "median"))


@dataclass(frozen=True)
class AdaptationConfig:
    method: str
    subspace_dim: int = 30
    kernel: KernelSpec = field(default_factory=KernelSpec)
    reg: float = 1.0
    iterations: int = 10
    aux: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS and self.method not in _extra_methods():
            raise UnknownMethod(f"unknown method {self.method!r}")
        if int(self.subspace_dim) < 1:
            raise InvalidConfig("subspace_dim must be >= 1")
        if int(self.iterations) < 1:
            raise InvalidConfig("iterations must be >= 1")
        if not (self.reg >= 0 and math.isfinite(self.reg)):
            raise InvalidConfig("reg must be a finite non-negative number")
        for k, v in self.aux.items():
            if not math.isfinite(float(v)):
                raise InvalidConfig(f"aux[{k!r}] is not finite")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "subspace_dim", int(self.subspace_dim))
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "kernel", KernelSpec.from_dict(self.kernel)
                           if isinstance(self.kernel, dict) else self.kernel)
        object.__setattr__(self, "aux", dict(sorted((k, float(v)) for k, v in self.aux.items())))

    def replace(self, **changes) -> "AdaptationConfig":
        if "aux" in changes:
            changes["aux"] = {**self.aux, **changes["aux"]}
        return replace(self, **changes)

    def to_dict(self):
        return {
            "method": self.method,
            "subspace_dim": self.subspace_dim,
            "kernel": self.kernel.to_dict(),
            "reg": self.reg,
            "iterations": self.iterations,
            "aux": dict(self.aux),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "kernel" in d:
            d["kernel"] = KernelSpec.from_dict(d["kernel"])
        return cls(**d)


def _extra_methods():
    from .adapt import registry

    return registry.names()


@dataclass(frozen=True, eq=False)
class AdaptationOutput:
    adapted_source: np.ndarray
    adapted_target: np.ndarray
    method: str
    effective_config: AdaptationConfig
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        s = _frozen(self.adapted_source)
        t = _frozen(self.adapted_target)
        if s.ndim != 2 or t.ndim != 2 or s.shape[1] != t.shape[1]:
            raise DimMismatch(f"adapted shapes {s.shape} and {t.shape} disagree")
        if not (np.isfinite(s).all() and np.isfinite(t).all()):
            raise NonFiniteValue(-1, -1)
        object.__setattr__(self, "adapted_source", s)
        object.__setattr__(self, "adapted_target", t)

    @property
    def dim(self) -> int:
        return self.adapted_source.shape[1]


class RandomStream:
    """Seeded stream of uniforms and normals.

    Backed by the Philox-4x64 counter-based generator seeded through numpy's
    ``SeedSequence``.  Uniform doubles are ``(next_uint64 >> 11) * 2**-53``;
    normals come from the Box-Muller transform applied to pairs of uniforms,
    so the variate sequence does not depend on numpy's sampler internals.
    """

    def __init__(self, seed: int = 0, *, key: Sequence[int] = ()):
        if not 0 <= int(seed) < 2**64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._bitgen = np.random.Philox(seq)

    def spawn(self, index: int) -> "RandomStream":
        """Independent child stream; the parent's state is not consumed."""
        return RandomStream(self.seed, key=self.key + (int(index),))

    def uniform(self, size=None):
        """Doubles in [0, 1)."""
        shape = () if size is None else size
        count = int(np.prod(shape))
        raw = self._bitgen.random_raw(count).astype(np.uint64)
        u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return float(u[0]) if size is None else u.reshape(shape)

    def normal(self, size=None):
        shape = () if size is None else size
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u1 = 1.0 - self.uniform(pairs)  # (0, 1], keeps log finite
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        z = z[:count]
        return float(z[0]) if size is None else z.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")
