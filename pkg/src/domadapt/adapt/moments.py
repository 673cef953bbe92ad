"""Baseline (identity) and CORAL."""
import numpy as np

from ..core import RandomStream
from ..errors import InvalidConfig
from ..linalg import sym_power
from .registry import register

# Optional diagonal loading of both covariances (aux["ridge"]).  Off by
# default: any ridge eps leaves cov(adapted) off C_t by
# eps * (I - C_t^1/2 C_s^-1 C_t^1/2), about 1e-5 already for unit-variance
# data, so closure would fail.  The eigenvalue floor inside sym_power guards
# rank-deficient inputs instead.
CORAL_RIDGE = 0.0


@register("baseline")
def adapt_baseline(s, t, cfg, stream: RandomStream = None):
    eff = cfg.replace(subspace_dim=s.dim)
    return s.samples.copy(), t.samples.copy(), eff, {}


def coral_transform(xs, xt, ridge=CORAL_RIDGE):
    """Linear map ``A`` with ``cov(xs @ A) ~= cov(xt)`` (population covariances)."""
    D = xs.shape[1]
    cs = np.cov(xs, rowvar=False, bias=True).reshape(D, D) + ridge * np.eye(D)
    ct = np.cov(xt, rowvar=False, bias=True).reshape(D, D) + ridge * np.eye(D)
    return sym_power(cs, -0.5) @ sym_power(ct, 0.5)


@register("coral", defaults=lambda dim: {"aux": {"recenter": 1.0, "ridge": CORAL_RIDGE}})
def adapt_coral(s, t, cfg, stream=None):
    """Whiten the source covariance and recolor it with the target's.

    With ``aux["recenter"]`` nonzero (the default) the recolored source is
    moved onto the target mean; with 0 it keeps its own mean, so only the
    second-order statistics change.  ``aux["ridge"]`` adds ``ridge * I`` to
    both covariances before taking matrix roots.
    """
    xs = s.samples
    mean_s = xs.mean(axis=0)
    recenter = float(cfg.aux.get("recenter", 1.0)) != 0.0
    ridge = float(cfg.aux.get("ridge", CORAL_RIDGE))
    if not ridge >= 0.0:
        raise InvalidConfig(f"coral ridge must be non-negative, got {ridge}")
    anchor = t.samples.mean(axis=0) if recenter else mean_s
    a = coral_transform(xs, t.samples, ridge)
    eff = cfg.replace(subspace_dim=s.dim, aux={"recenter": 1.0 if recenter else 0.0, "ridge": ridge})
    return (xs - mean_s) @ a + anchor, t.samples.copy(), eff, {"transform": a}
