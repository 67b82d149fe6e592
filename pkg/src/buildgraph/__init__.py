"""Planar building-graph assembly from detected geometric primitives.

The package turns noisy primitive detections (corners, an edge-confidence
map, region masks, region-boundary masks) into a planar graph by solving a
0-1 integer program, and ships the surrounding tooling: a synthetic
detection simulator, reconstruction metrics, JSON/LP serialization, a CLI
and a small HTTP service.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
