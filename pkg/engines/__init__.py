"""Engines package for the rough Bergomi VIX toolkit."""

from .vix_engine import VixEngine
from .spx_engine import SpxEngine
from .essvi_engine import EssviSurface
from .calibration_engine import calibrate_futures, calibrate_spx

__all__ = ["VixEngine", "SpxEngine", "EssviSurface", "calibrate_futures", "calibrate_spx"]
