"""Flat-buffer batch bindings over the kfuse inject pipeline."""

from .core import BoundBatch, BridgeConfigError, KgHandle, bind_inject_batch, bind_load_kg

__all__ = [
    "BoundBatch",
    "BridgeConfigError",
    "KgHandle",
    "bind_inject_batch",
    "bind_load_kg",
]

__version__ = "0.1.0"
