"""aerorom: level-set CNN surrogates for wing induced-drag optimization."""

__version__ = "0.1.0"
