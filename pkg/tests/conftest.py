"""Shared helpers for building traces and trace pairs in tests."""

import numpy as np

from locpriv import Fix, GeoPoint, Region, Trace


def planar_trace(points, region=None, dt=1.0, user="u") -> Trace:
    """Build a Trace whose projected coordinates match the given planar points.

    Round-tripping through geographic coordinates costs a fraction of a
    millimeter at region scale, so exact-coordinate assertions should allow
    for that.
    """
    region = region or Region()
    proj = region.projection
    pts = np.asarray(points, dtype=float)
    lats, lons = proj.unproject_array(pts)
    fixes = [Fix(i * dt, GeoPoint(float(lats[i]), float(lons[i])), user) for i in range(len(pts))]
    return Trace(fixes, proj)
