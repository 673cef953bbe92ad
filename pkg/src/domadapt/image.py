"""Image-level adaptation: intensity normalization, histogram matching, SSIMH.

Volumes are adapted one axial slice (third index) at a time; source slice
``k`` is paired with target slice ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.ndimage

from .dataio import Volume
from .errors import DimMismatch, InvalidConfig, NotNormalized, ShapeMismatch, ThresholdTooLarge

LEVELS = 256
NORMALIZED_TOL = 1e-9
IMAGE_METHODS = ("baseline", "hm", "ssimh")


@dataclass(frozen=True)
class SsimhConfig:
    threshold: int = 3

    def __post_init__(self):
        if int(self.threshold) != self.threshold or self.threshold < 1:
            raise InvalidConfig(f"threshold must be a positive integer, got {self.threshold!r}")


def normalize_volume(v: Volume) -> Volume:
    """Affine map of the intensities onto [0, 1]; constant volumes become zeros.

    The returned volume records the original ``(min, max)`` in
    ``intensity_range``.
    """
    lo, hi = float(v.data.min()), float(v.data.max())
    if hi > lo:
        out = (v.data - lo) / (hi - lo)
    else:
        out = np.zeros_like(v.data)
    return v.replace_data(out, intensity_range=(lo, hi))


def _check_slices(src, tgt):
    src = np.asarray(src, dtype=float)
    tgt = np.asarray(tgt, dtype=float)
    if src.shape != tgt.shape or src.ndim != 2:
        raise ShapeMismatch(f"slice shapes {src.shape} and {tgt.shape} differ")
    for name, a in (("source", src), ("target", tgt)):
        if a.size and (a.min() < -NORMALIZED_TOL or a.max() > 1.0 + NORMALIZED_TOL):
            raise NotNormalized(f"{name} slice leaves [0, 1]")
    return src, tgt


def quantize(x):
    """Bin index in ``0..255`` of each value of ``x`` (bin centers ``k / 255``)."""
    return np.clip(np.rint(np.asarray(x, dtype=float) * (LEVELS - 1)), 0, LEVELS - 1).astype(np.int64)


def histogram_match(src, tgt):
    """Map each source pixel to the target quantile of its source CDF value.

    Both slices are quantized to 256 levels.  A source level with cumulative
    count ``c_s`` goes to the lowest target level whose cumulative count
    ``c_t`` satisfies ``c_t / n_t >= c_s / n_s``; the comparison is done in
    integers so ties are exact.
    """
    src, tgt = _check_slices(src, tgt)
    qs, qt = quantize(src).ravel(), quantize(tgt).ravel()
    ns, nt = qs.size, qt.size
    cs = np.cumsum(np.bincount(qs, minlength=LEVELS))
    ct = np.cumsum(np.bincount(qt, minlength=LEVELS))
    # smallest target level with ct * ns >= cs * nt, per source level
    lut = np.searchsorted(ct * ns, cs * nt, side="left")
    lut = np.minimum(lut, LEVELS - 1)
    return (lut[qs] / (LEVELS - 1)).reshape(src.shape)


def dct2(x):
    """Orthonormal 2-D type-II DCT."""
    return scipy.fft.dctn(np.asarray(x, dtype=float), type=2, norm="ortho")


def idct2(c):
    return scipy.fft.idctn(np.asarray(c, dtype=float), type=2, norm="ortho")


def ssimh_spectrum(src, tgt, threshold):
    """Source DCT spectrum with its ``threshold x threshold`` low-frequency block from the target."""
    src, tgt = _check_slices(src, tgt)
    t = int(threshold)
    if t > min(src.shape):
        raise ThresholdTooLarge(f"threshold {t} exceeds slice dims {src.shape}")
    if t < 1:
        raise InvalidConfig("threshold must be >= 1")
    a = dct2(src)
    a[:t, :t] = dct2(tgt)[:t, :t]
    return a


def ssimh(src, tgt, cfg: SsimhConfig = SsimhConfig()):
    return np.clip(idct2(ssimh_spectrum(src, tgt, cfg.threshold)), 0.0, 1.0)


def _require_normalized(v: Volume, name):
    d = v.data
    if d.min() < -NORMALIZED_TOL or d.max() > 1.0 + NORMALIZED_TOL:
        raise NotNormalized(f"{name} volume is not normalized to [0, 1]")


def adapt_volume(source: Volume, target: Volume, method="ssimh", cfg: SsimhConfig = None) -> Volume:
    """Adapt ``source`` slice by slice toward ``target`` (which is left untouched)."""
    if method not in IMAGE_METHODS:
        raise InvalidConfig(f"unknown image method {method!r}; expected one of {IMAGE_METHODS}")
    if source.dims != target.dims:
        raise DimMismatch(f"volume dims {source.dims} and {target.dims} differ")
    _require_normalized(source, "source")
    _require_normalized(target, "target")
    if method == "baseline":
        return source.replace_data(source.data.copy())
    cfg = cfg or SsimhConfig()
    if method == "ssimh" and cfg.threshold > min(source.dims[:2]):
        raise ThresholdTooLarge(f"threshold {cfg.threshold} exceeds slice dims {source.dims[:2]}")
    out = np.empty_like(source.data)
    for k in range(source.dims[2]):
        s, t = source.data[:, :, k], target.data[:, :, k]
        out[:, :, k] = histogram_match(s, t) if method == "hm" else ssimh(s, t, cfg)
    return source.replace_data(out)


def scanner_shift(volume: Volume, gamma=0.8, bias=0.2, seed=0) -> Volume:
    """Synthetic second-scanner acquisition of a normalized volume.

    Applies the power law ``x ** gamma`` and multiplies by a smooth bias field
    with values in ``[1 - bias, 1 + bias]`` (a random low-order cosine
    surface), then clamps to [0, 1].
    """
    from .core import RandomStream

    nx, ny, nz = volume.dims
    coef = RandomStream(seed).uniform((3, 3, 2)) * 2.0 - 1.0
    gx = np.linspace(0.0, np.pi, nx)[:, None, None]
    gy = np.linspace(0.0, np.pi, ny)[None, :, None]
    gz = np.linspace(0.0, np.pi, nz)[None, None, :]
    field = np.zeros(volume.dims)
    for i in range(3):
        for j in range(3):
            for k in range(2):
                if i + j + k:
                    field += coef[i, j, k] * np.cos(i * gx) * np.cos(j * gy) * np.cos(k * gz)
    peak = np.abs(field).max()
    if peak > 0:
        field *= bias / peak
    out = np.clip(np.power(np.clip(volume.data, 0.0, 1.0), gamma) * (1.0 + field), 0.0, 1.0)
    return volume.replace_data(out)


def phantom_volume(shape=(64, 64, 16), seed=0) -> Volume:
    """Smooth head-like test volume: nested ellipsoids with texture, in [0, 1]."""
    from .core import RandomStream

    nx, ny, nz = shape
    x = np.linspace(-1, 1, nx)[:, None, None]
    y = np.linspace(-1, 1, ny)[None, :, None]
    z = np.linspace(-1, 1, nz)[None, None, :]
    r = np.sqrt((x / 0.85) ** 2 + (y / 0.95) ** 2 + (z / 1.1) ** 2)
    vol = np.where(r < 1.0, 0.35, 0.0)
    vol = vol + np.where(r < 0.9, 0.25, 0.0)
    inner = np.sqrt(((x - 0.2) / 0.3) ** 2 + (y / 0.4) ** 2 + (z / 0.6) ** 2)
    vol = vol + np.where(inner < 1.0, 0.3, 0.0)
    vent = np.sqrt(((x + 0.25) / 0.15) ** 2 + ((y - 0.1) / 0.3) ** 2 + (z / 0.5) ** 2)
    vol = np.where(vent < 1.0, 0.1, vol)
    noise = RandomStream(seed).normal(shape) * 0.03
    vol = np.clip(vol + noise * (r < 1.0), 0.0, None)
    return normalize_volume(Volume(vol))


def textured_phantom(shape=(64, 64, 16), seed=0, texture_weight=0.5, smoothness=3.0) -> Volume:
    """Phantom blended with a smooth random texture filling the whole field of view.

    On the bare phantom most of each slice is empty background; swapping
    low frequencies then leaves a smooth halo over it, which costs
    correlation even while MSE drops.  The texture gives every pixel
    content, as in a tissue-filled crop.
    """
    from .core import RandomStream

    base = phantom_volume(shape, seed).data
    field = scipy.ndimage.gaussian_filter(RandomStream(seed).spawn(1).normal(shape), smoothness)
    tex = normalize_volume(Volume(field)).data
    return normalize_volume(Volume((1.0 - texture_weight) * base + texture_weight * tex))
