"""Backend selection for the hot inner loops.

The compiled extension is preferred; the pure-Python module is used when the
extension failed to build or ``FXHYBRID_PURE_PYTHON`` is set to a truthy value.
``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels

if os.environ.get("FXHYBRID_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

exp_smooth = _impl.exp_smooth
arma_residuals = _impl.arma_residuals
analysis_step = _impl.analysis_step
synthesis_step = _impl.synthesis_step

__all__ = [
    "BACKEND",
    "exp_smooth",
    "arma_residuals",
    "analysis_step",
    "synthesis_step",
]
