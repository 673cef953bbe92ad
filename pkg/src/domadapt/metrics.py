"""Adaptation quality metrics.

Feature level: squared MMD (biased V-statistic) and domain-classification
accuracy of a k-NN discriminator.  Image level: Pearson CC, PSNR and MSE,
plus their slice averages over the axial axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import FeatureDataset, KernelSpec, RandomStream, pooled_standardize
from .errors import (
    ConstantImage,
    DimMismatch,
    InvalidConfig,
    NoValidSlices,
    ShapeMismatch,
    TooFewSamples,
)
from .linalg import kernel_matrix, resolve_gamma

MEDIAN_RBF = KernelSpec("rbf", "median")


@dataclass
class MetricReport:
    values: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self):
        from .dataio import json_safe

        out = {"metrics": dict(self.values), "meta": dict(self.meta)}
        flags = {k: True for k, v in self.values.items()
                 if isinstance(v, float) and math.isinf(v)}
        if flags:
            out["infinite"] = flags
        return json_safe(out)


def mmd_squared(a, b, kernel: KernelSpec = MEDIAN_RBF) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"{a.shape[1]} vs {b.shape[1]} columns")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidConfig("mmd_squared needs non-empty samples")
    gamma = resolve_gamma(kernel, np.vstack([a, b]))
    kaa = kernel_matrix(a, a, kernel, gamma).mean()
    kbb = kernel_matrix(b, b, kernel, gamma).mean()
    kab = kernel_matrix(a, b, kernel, gamma).mean()
    val = float(kaa + kbb - 2.0 * kab)
    return max(val, 0.0) if val > -1e-12 else val


@dataclass(frozen=True)
class DomainClassifierConfig:
    k: int = 1
    train_fraction: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig("train_fraction must be in (0, 1)")
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")


def stratified_split(n_source, n_target, cfg: DomainClassifierConfig):
    """Per-domain shuffled train/test indices into the pooled rows."""
    stream = RandomStream(cfg.seed)
    train, test = [], []
    for offset, n, sub in ((0, n_source, 0), (n_source, n_target, 1)):
        perm = stream.spawn(sub).permutation(n) + offset
        cut = int(round(cfg.train_fraction * n))
        cut = min(max(cut, 1), n - 1)
        train.append(perm[:cut])
        test.append(perm[cut:])
    return np.concatenate(train), np.concatenate(test)


def domain_classification_accuracy(s, t, cfg: DomainClassifierConfig = DomainClassifierConfig()) -> float:
    """Test accuracy of k-NN telling source (label 1) from target (label 0)."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    t = np.atleast_2d(np.asarray(t, dtype=float))
    if s.shape[1] != t.shape[1]:
        raise DimMismatch(f"{s.shape[1]} vs {t.shape[1]} columns")
    if s.shape[0] < 5 or t.shape[0] < 5:
        raise TooFewSamples("need at least 5 samples per domain")
    x = np.ascontiguousarray(np.vstack([s, t]))
    y = np.r_[np.ones(s.shape[0], np.int64), np.zeros(t.shape[0], np.int64)]
    tr, te = stratified_split(s.shape[0], t.shape[0], cfg)
    k = min(cfg.k, tr.size)
    pred = kernels.knn_predict(np.ascontiguousarray(x[tr]), y[tr], np.ascontiguousarray(x[te]), k, 2)
    return float(np.mean(pred == y[te]))


def feature_report(s, t, split_seed=0, k=1, metrics=("mmd", "domain-acc")) -> MetricReport:
    """Both feature metrics under the pooled-standardize + median-RBF protocol."""
    ds = FeatureDataset(np.asarray(s, dtype=float), domain="source")
    dt = FeatureDataset(np.asarray(t, dtype=float), domain="target")
    zs, zt = pooled_standardize(ds, dt)
    values = {}
    if "mmd" in metrics:
        values["mmd"] = mmd_squared(zs.samples, zt.samples, MEDIAN_RBF)
    if "domain-acc" in metrics:
        values["domain-acc"] = domain_classification_accuracy(
            zs.samples, zt.samples, DomainClassifierConfig(k=k, seed=split_seed))
    meta = {"kernel": MEDIAN_RBF.to_dict(), "standardize": "pooled", "split_seed": split_seed,
            "k": k, "train_fraction": 0.6}
    return MetricReport(values, meta)


# ---------------------------------------------------------------------------
# image metrics
# ---------------------------------------------------------------------------


def _pair(a, b):
    a = np.asarray(getattr(a, "data", a), dtype=float)
    b = np.asarray(getattr(b, "data", b), dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def image_cc(a, b) -> float:
    a, b = _pair(a, b)
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise ConstantImage("correlation is undefined for a constant image")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def image_mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def image_psnr(a, b) -> float:
    """PSNR in dB for intensities in [0, 1]; ``inf`` for identical images."""
    mse = image_mse(a, b)
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def slice_averaged_metrics(a, b) -> MetricReport:
    """Mean CC/PSNR/MSE over axial slice pairs.

    Constant slices are left out of the CC mean and identical slices out of
    the PSNR mean; the report counts both exclusions.  A metric with no
    usable slice is reported as ``None`` (or raises if every metric is empty).
    """
    a, b = _pair(a, b)
    if a.ndim != 3:
        raise ShapeMismatch("slice averaging needs 3-D volumes")
    cc, psnr, mse = [], [], []
    cc_excluded = psnr_excluded = 0
    for z in range(a.shape[2]):
        sa, sb = a[:, :, z], b[:, :, z]
        mse.append(image_mse(sa, sb))
        try:
            cc.append(image_cc(sa, sb))
        except ConstantImage:
            cc_excluded += 1
        if mse[-1] == 0:
            psnr_excluded += 1
        else:
            psnr.append(image_psnr(sa, sb))
    values = {
        "mse": float(np.mean(mse)),
        "cc": float(np.mean(cc)) if cc else None,
        "psnr": float(np.mean(psnr)) if psnr else None,
    }
    meta = {"slices": a.shape[2], "cc_excluded": cc_excluded, "psnr_excluded": psnr_excluded}
    return MetricReport(values, meta)


def require(report: MetricReport, name: str) -> float:
    """Metric value, raising :class:`NoValidSlices` if no slice supported it."""
    v = report.values.get(name)
    if v is None:
        raise NoValidSlices(f"no slice yields a finite {name}")
    return v
