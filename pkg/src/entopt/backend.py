"""Kernel backend selection.

Prefers the compiled extension (entopt._kernels) when it was built; falls
back to the pure-NumPy kernels otherwise. ENTOPT_PURE_PYTHON=1 forces the
fallback (used by the benchmark and for debugging).
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

if os.environ.get("ENTOPT_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _active = _kernels_py
else:
    _active = _compiled if _compiled is not None else _kernels_py

IMPL = "compiled" if _active is _compiled else "python"

apply_1q = _active.apply_1q
apply_2q = _active.apply_2q
qubit_marginals = _active.qubit_marginals
zgen_moments = _active.zgen_moments
zgen_weights = _kernels_py.zgen_weights  # cached table, not a hot loop


def available_backends() -> dict[str, object]:
    """Name -> kernel module, for tests and benchmarks."""
    out: dict[str, object] = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
