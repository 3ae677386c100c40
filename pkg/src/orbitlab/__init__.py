"""Closeness of orbits of chaotic maps: exact 128-bit engine, oracles and experiments."""
from .circlepoint import BitStreamPoint, CirclePoint, circle_distance, interval_distance
from .dynamics import MeasureSpec, Metric, OrbitStream, SystemSpec, random_orbit
from .engine import closeness_profile, min_distance_trace, single_orbit_profile
from .errors import ConfigError, NumericalError, OrbitLabError
from .schedules import PowerLog

__version__ = "0.1.0"

__all__ = [
    "BitStreamPoint", "CirclePoint", "circle_distance", "interval_distance", "MeasureSpec",
    "Metric", "OrbitStream", "SystemSpec", "random_orbit", "closeness_profile",
    "min_distance_trace", "single_orbit_profile", "ConfigError", "NumericalError",
    "OrbitLabError", "PowerLog",
]
