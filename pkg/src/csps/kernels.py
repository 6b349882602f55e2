"""Kernel backend selection.

The compiled extension is used when it imports; set ``CSPS_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("CSPS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

latent_sweep = _impl.latent_sweep
log_marginal_gram = _impl.log_marginal_gram
truncnorm_draw = _impl.truncnorm_draw

__all__ = ["BACKEND", "latent_sweep", "log_marginal_gram", "truncnorm_draw"]
