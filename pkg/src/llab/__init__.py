"""Modes and quasimodes of integrable geodesic flows on surfaces."""

__version__ = "0.1.0"
