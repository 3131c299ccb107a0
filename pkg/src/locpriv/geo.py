"""Coordinate frames and the planar metric used by every mechanism.

Geographic coordinates (WGS84 degrees) appear only at I/O boundaries; all
mechanism math runs in a local planar frame measured in meters, so privacy
budgets stay in units of 1/meter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# Local-frame validity bounds for the equirectangular projection.
PROJECT_MAX_DELTA_DEG = 1.0
UNPROJECT_MAX_RANGE_M = 100_000.0


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 location in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range [-180, 180]: {self.lon}")


@dataclass(frozen=True)
class PlanarPoint:
    """A point in the local planar frame: meters east (x) / north (y) of the origin."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"planar point must be finite: ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def distance(a: PlanarPoint, b: PlanarPoint) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection centered on ``origin``.

    Accurate to well under GPS noise across a few-kilometer region, which is
    the regime all evaluation here operates in. project(origin) == (0, 0).
    """

    origin: GeoPoint

    def project(self, p: GeoPoint) -> PlanarPoint:
        """Map geographic degrees to local planar meters."""
        if abs(p.lat - self.origin.lat) > PROJECT_MAX_DELTA_DEG or abs(p.lon - self.origin.lon) > PROJECT_MAX_DELTA_DEG:
            raise ValueError(
                f"point {p} outside projection validity range "
                f"(+/-{PROJECT_MAX_DELTA_DEG} deg of origin {self.origin})"
            )
        x = EARTH_RADIUS_M * math.cos(math.radians(self.origin.lat)) * math.radians(p.lon - self.origin.lon)
        y = EARTH_RADIUS_M * math.radians(p.lat - self.origin.lat)
        return PlanarPoint(x, y)

    def unproject(self, p: PlanarPoint) -> GeoPoint:
        """Exact inverse of :meth:`project`."""
        if math.hypot(p.x, p.y) > UNPROJECT_MAX_RANGE_M:
            raise ValueError(f"planar point {p} beyond {UNPROJECT_MAX_RANGE_M} m unprojection range")
        lat = self.origin.lat + math.degrees(p.y / EARTH_RADIUS_M)
        lon = self.origin.lon + math.degrees(p.x / (EARTH_RADIUS_M * math.cos(math.radians(self.origin.lat))))
        return GeoPoint(lat, lon)

    def project_array(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Vectorized project: degree arrays to an (N, 2) meter array."""
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        if np.any(np.abs(lats - self.origin.lat) > PROJECT_MAX_DELTA_DEG) or np.any(
            np.abs(lons - self.origin.lon) > PROJECT_MAX_DELTA_DEG
        ):
            raise ValueError("point(s) outside projection validity range")
        x = EARTH_RADIUS_M * math.cos(math.radians(self.origin.lat)) * np.radians(lons - self.origin.lon)
        y = EARTH_RADIUS_M * np.radians(lats - self.origin.lat)
        return np.column_stack([x, y])

    def unproject_array(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized unproject: (N, 2) meters to (lats, lons) degree arrays."""
        points = np.asarray(points, dtype=float)
        lats = self.origin.lat + np.degrees(points[:, 1] / EARTH_RADIUS_M)
        lons = self.origin.lon + np.degrees(points[:, 0] / (EARTH_RADIUS_M * math.cos(math.radians(self.origin.lat))))
        return lats, lons
