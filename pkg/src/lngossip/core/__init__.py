"""Simulation core selection.

Prefers the compiled kernel (`lngossip.core._kernel`, built from Cython) and
falls back to the pure-Python implementation. Both consume the same SimPlan
and produce bit-identical RawResults; set LNGOSSIP_PURE=1 to force the
fallback (e.g. for benchmarking or debugging).
"""

from __future__ import annotations

import os

from .plan import RawResult, SimPlan

if os.environ.get("LNGOSSIP_PURE") == "1":
    from . import _pycore as _impl
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pycore as _impl

ACTIVE_IMPL = _impl.IMPL


def run_plan(plan: SimPlan) -> RawResult:
    return _impl.run_plan(plan)


def get_core(name: str):
    """Return a specific core module by name ("kernel" or "python")."""
    if name == "python":
        from . import _pycore

        return _pycore
    if name == "kernel":
        from . import _kernel  # type: ignore[attr-defined]

        return _kernel
    raise ValueError(f"unknown core {name!r}")


__all__ = ["SimPlan", "RawResult", "run_plan", "get_core", "ACTIVE_IMPL"]
