"""Behavioral indicators from smartphone accelerometer and location data.

Raw sensor streams become per-minute base indicators (activity counts,
levels, steps, activity type, sleep), visited places and trips, and
finally anonymous geohash votes aggregated into population-level
indicators per spatial cell.
"""
from .config import PipelineConfig, load_config

__version__ = "0.1.0"
__all__ = ["PipelineConfig", "load_config", "__version__"]
