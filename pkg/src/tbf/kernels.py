"""Kernel backend selection.

The compiled extension is used when it imports; set ``TBF_PURE_PYTHON=1`` to
force the pure-Python fallback.
"""

import os

from tbf import _kernels_py
from tbf._kernels_py import N_COEFF, RATE_NAMES, derivative, frame_frequencies, stability_limit

__all__ = [
    "BACKEND",
    "N_COEFF",
    "RATE_NAMES",
    "derivative",
    "frame_frequencies",
    "integrate_coefficients",
    "stability_limit",
]

if os.environ.get("TBF_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from tbf import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"


def integrate_coefficients(y0, g_half, stark_half, t0, dt, n_steps, rates, interaction, independent_conjugate=False):
    if independent_conjugate:
        return _kernels_py.integrate_coefficients(
            y0, g_half, stark_half, t0, dt, n_steps, rates, interaction, independent_conjugate=True
        )
    return _impl.integrate_coefficients(y0, g_half, stark_half, t0, dt, n_steps, rates, bool(interaction))
