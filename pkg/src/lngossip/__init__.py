"""Deterministic discrete-event simulator and trace analyzer for
routing-gossip propagation in payment-channel networks."""

from .core import ACTIVE_IMPL
from .engine import SimConfig, run_comparison, run_simulation
from .metrics import RunReport, b_min
from .protocols import PRESETS, ProtocolSpec, get_preset

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_IMPL",
    "SimConfig",
    "run_simulation",
    "run_comparison",
    "RunReport",
    "b_min",
    "PRESETS",
    "ProtocolSpec",
    "get_preset",
    "__version__",
]
