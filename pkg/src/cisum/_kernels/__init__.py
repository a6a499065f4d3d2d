"""Kernel backend selection.

The compiled extension is preferred when present; setting the environment
variable ``CISUM_PURE_PYTHON=1`` (before import) forces the numpy fallback.
``BACKEND`` records which implementation is active.
"""

import os

if os.environ.get("CISUM_PURE_PYTHON", "") not in ("", "0"):
    from ._ref import (BACKEND, demod_boxcar_decimate, dtft_points,
                       lag1_autocorr, synth_components)
else:
    try:
        from ._fast import (BACKEND, demod_boxcar_decimate, dtft_points,
                            lag1_autocorr, synth_components)
    except ImportError:
        from ._ref import (BACKEND, demod_boxcar_decimate, dtft_points,
                           lag1_autocorr, synth_components)

__all__ = [
    "BACKEND",
    "synth_components",
    "demod_boxcar_decimate",
    "dtft_points",
    "lag1_autocorr",
]
