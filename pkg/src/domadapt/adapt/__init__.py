"""Feature-level adaptation methods behind one entry point, :func:`adapt`."""
from . import registry
from .base import adapt, check_pair, default_config
from .moments import adapt_baseline, adapt_coral
from .subspace import adapt_gfk, adapt_sa, gfk_kernel
from .kernel_mmd import adapt_jda, adapt_tca, adapt_tjm
from .ot import adapt_ot, sinkhorn_plan
from .sca import adapt_sca
from .itl import adapt_itl
from .registry import register

__all__ = [
    "adapt", "default_config", "register", "registry", "check_pair",
    "adapt_baseline", "adapt_sa", "adapt_coral", "adapt_tca", "adapt_ot",
    "adapt_jda", "adapt_tjm", "adapt_gfk", "adapt_sca", "adapt_itl",
    "gfk_kernel", "sinkhorn_plan",
]
