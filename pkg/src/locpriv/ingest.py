"""Trajectory loading, region clipping, grid discretization, synthetic walks.

Canonical interchange format is CSV with header ``user_id,timestamp,lat,lon``
(ISO-8601 UTC timestamps, decimal degrees). Perturbed traces append
``released_lat,released_lon`` columns.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .geo import GeoPoint, PlanarPoint, Projection

log = logging.getLogger(__name__)

DEFAULT_REGION_SIDE_M = 6000.0
DEFAULT_CELLS_PER_SIDE = 200
# Synthetic traces need some geographic anchor; any mid-latitude point works.
DEFAULT_REGION_CENTER = GeoPoint(40.0, -74.0)


class EmptyInputError(ValueError):
    """No valid rows in the input file."""


class EmptyTraceError(ValueError):
    """An operation produced a trace with no fixes."""


@dataclass(frozen=True)
class Fix:
    """One timestamped true location of one user."""

    t: float  # seconds since epoch
    point: GeoPoint
    user: str


@dataclass
class Trace:
    """A time-ordered, nonempty fix sequence plus the planar frame it uses."""

    fixes: list[Fix]
    projection: Projection

    def __post_init__(self):
        if not self.fixes:
            raise EmptyTraceError("trace must contain at least one fix")
        times = [f.t for f in self.fixes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("fix timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.fixes)

    @property
    def user(self) -> str:
        return self.fixes[0].user

    def planar(self) -> np.ndarray:
        """(N, 2) array of fix positions in the trace's planar frame."""
        lats = np.array([f.point.lat for f in self.fixes])
        lons = np.array([f.point.lon for f in self.fixes])
        return self.projection.project_array(lats, lons)


@dataclass(frozen=True)
class Region:
    """Axis-aligned square region of interest, centered on a geographic point."""

    center: GeoPoint = DEFAULT_REGION_CENTER
    side: float = DEFAULT_REGION_SIDE_M

    def __post_init__(self):
        if self.side <= 0.0:
            raise ValueError(f"region side must be positive, got {self.side}")

    @property
    def projection(self) -> Projection:
        return Projection(self.center)

    def contains(self, p: PlanarPoint) -> bool:
        h = self.side / 2.0
        return -h <= p.x <= h and -h <= p.y <= h

    def contains_array(self, points: np.ndarray) -> np.ndarray:
        h = self.side / 2.0
        points = np.asarray(points, dtype=float)
        return (np.abs(points[:, 0]) <= h) & (np.abs(points[:, 1]) <= h)


@dataclass(frozen=True)
class Grid:
    """Square discretization of a region into cells_per_side^2 row-major cells."""

    region: Region = field(default_factory=Region)
    cells_per_side: int = DEFAULT_CELLS_PER_SIDE

    def __post_init__(self):
        if self.cells_per_side < 1:
            raise ValueError("cells_per_side must be >= 1")

    @property
    def cell_width(self) -> float:
        return self.region.side / self.cells_per_side

    @property
    def n_cells(self) -> int:
        return self.cells_per_side**2

    def to_cell(self, p: PlanarPoint) -> int:
        """Row-major cell index of an in-region point.

        Points on a cell's max edge belong to the next cell, except on the
        region's outer max edge, which is clamped inward.
        """
        if not self.region.contains(p):
            raise ValueError(f"point {p} outside region")
        h = self.region.side / 2.0
        col = min(int((p.x + h) // self.cell_width), self.cells_per_side - 1)
        row = min(int((p.y + h) // self.cell_width), self.cells_per_side - 1)
        return row * self.cells_per_side + col

    def to_cells(self, points: np.ndarray) -> np.ndarray:
        """Vectorized to_cell over an (N, 2) array of in-region points."""
        points = np.asarray(points, dtype=float)
        if not np.all(self.region.contains_array(points)):
            raise ValueError("point(s) outside region")
        h = self.region.side / 2.0
        cols = np.minimum(((points[:, 0] + h) // self.cell_width).astype(np.int64), self.cells_per_side - 1)
        rows = np.minimum(((points[:, 1] + h) // self.cell_width).astype(np.int64), self.cells_per_side - 1)
        return rows * self.cells_per_side + cols

    def cell_center(self, cell: int) -> PlanarPoint:
        if not 0 <= cell < self.n_cells:
            raise ValueError(f"cell index {cell} out of range")
        row, col = divmod(cell, self.cells_per_side)
        h = self.region.side / 2.0
        return PlanarPoint(-h + (col + 0.5) * self.cell_width, -h + (row + 0.5) * self.cell_width)


@dataclass
class LoadReport:
    """Row-level bookkeeping from a load: what was kept, skipped, deduplicated."""

    rows_total: int = 0
    rows_kept: int = 0
    rows_malformed: int = 0
    rows_duplicate_ts: int = 0


def _parse_timestamp(raw: str) -> float:
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_traces(path, fmt: str = "csv") -> tuple[list[Trace], LoadReport]:
    """Load one time-sorted Trace per user_id from a CSV file.

    Malformed rows and duplicate timestamps are skipped and counted in the
    returned report. The shared projection is centered on the centroid of all
    kept fixes.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported format: {fmt}")
    report = LoadReport()
    per_user: dict[str, dict[float, Fix]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: empty file")
        for row in reader:
            report.rows_total += 1
            try:
                user, ts, lat, lon = row[0].strip(), row[1], float(row[2]), float(row[3])
                if not user:
                    raise ValueError("empty user id")
                fix = Fix(_parse_timestamp(ts), GeoPoint(lat, lon), user)
            except (ValueError, IndexError):
                report.rows_malformed += 1
                continue
            bucket = per_user.setdefault(fix.user, {})
            if fix.t in bucket:
                report.rows_duplicate_ts += 1
                continue
            bucket[fix.t] = fix
            report.rows_kept += 1
    if not per_user:
        raise EmptyInputError(f"{path}: no valid rows")
    if report.rows_malformed or report.rows_duplicate_ts:
        log.warning(
            "%s: skipped %d malformed and %d duplicate-timestamp rows of %d",
            path, report.rows_malformed, report.rows_duplicate_ts, report.rows_total,
        )
    all_fixes = [f for bucket in per_user.values() for f in bucket.values()]
    centroid = GeoPoint(
        sum(f.point.lat for f in all_fixes) / len(all_fixes),
        sum(f.point.lon for f in all_fixes) / len(all_fixes),
    )
    projection = Projection(centroid)
    traces = [
        Trace(sorted(bucket.values(), key=lambda f: f.t), projection)
        for _, bucket in sorted(per_user.items())
    ]
    return traces, report


def write_traces(path, traces: list[Trace], released: list[np.ndarray] | None = None) -> None:
    """Write traces back to CSV, optionally with released planar points appended."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["user_id", "timestamp", "lat", "lon"]
        if released is not None:
            header += ["released_lat", "released_lon"]
        writer.writerow(header)
        for i, trace in enumerate(traces):
            rel_geo = None
            if released is not None:
                if len(released[i]) != len(trace):
                    raise ValueError("released points not aligned with trace")
                rel_geo = trace.projection.unproject_array(released[i])
            for j, fix in enumerate(trace.fixes):
                ts = datetime.fromtimestamp(fix.t, tz=timezone.utc).isoformat()
                row = [fix.user, ts, f"{fix.point.lat:.9f}", f"{fix.point.lon:.9f}"]
                if rel_geo is not None:
                    row += [f"{rel_geo[0][j]:.9f}", f"{rel_geo[1][j]:.9f}"]
                writer.writerow(row)


def load_trace_pairs(path) -> list[tuple[Trace, np.ndarray]]:
    """Load a perturbed CSV (with released_lat/released_lon) as aligned pairs."""
    pairs_per_user: dict[str, list[tuple[Fix, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"user_id", "timestamp", "lat", "lon", "released_lat", "released_lon"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            fix = Fix(_parse_timestamp(row["timestamp"]), GeoPoint(float(row["lat"]), float(row["lon"])), row["user_id"])
            pairs_per_user.setdefault(fix.user, []).append(
                (fix, float(row["released_lat"]), float(row["released_lon"]))
            )
    if not pairs_per_user:
        raise EmptyInputError(f"{path}: no valid rows")
    all_rows = [r for rows in pairs_per_user.values() for r in rows]
    centroid = GeoPoint(
        sum(r[0].point.lat for r in all_rows) / len(all_rows),
        sum(r[0].point.lon for r in all_rows) / len(all_rows),
    )
    projection = Projection(centroid)
    out = []
    for _, rows in sorted(pairs_per_user.items()):
        rows.sort(key=lambda r: r[0].t)
        trace = Trace([r[0] for r in rows], projection)
        released = projection.project_array(
            np.array([r[1] for r in rows]), np.array([r[2] for r in rows])
        )
        out.append((trace, released))
    return out


def clip_and_subsample(trace: Trace, region: Region, min_interval: float = 0.0) -> Trace:
    """Restrict a trace to the region and thin it in time.

    Keeps the longest contiguous in-region run, then keeps a fix only when it
    is at least min_interval seconds after the last kept fix. The result uses
    the region-centered projection.
    """
    proj = region.projection
    inside = []
    for fix in trace.fixes:
        try:
            inside.append(region.contains(proj.project(fix.point)))
        except ValueError:
            inside.append(False)
    best_start, best_len, run_start = 0, 0, None
    for i, flag in enumerate(inside + [False]):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None
    if best_len == 0:
        raise EmptyTraceError("no fixes inside region")
    run = trace.fixes[best_start : best_start + best_len]
    kept = [run[0]]
    for fix in run[1:]:
        if fix.t - kept[-1].t >= min_interval:
            kept.append(fix)
    return Trace(kept, proj)


def _reflect(v: float, h: float) -> float:
    """Fold a coordinate back into [-h, h] by mirror reflection."""
    while v > h or v < -h:
        v = 2.0 * h - v if v > h else -2.0 * h - v
    return v


def synth_walk(
    kind: str,
    step: float,
    count: int,
    rng: np.random.Generator,
    region: Region | None = None,
    heading: float | None = None,
    dt: float = 1.0,
    user: str = "synth",
) -> Trace:
    """Generate a synthetic trace inside a region.

    kind is one of stationary, line, random_walk. ``line`` keeps one fixed
    heading (drawn from rng when not given); ``random_walk`` draws a fresh
    uniform heading per step. Walks reflect off the region boundary.
    """
    if kind not in ("stationary", "line", "random_walk"):
        raise ValueError(f"unknown walk kind: {kind}")
    if step < 0.0:
        raise ValueError("step must be >= 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    region = region or Region()
    h = region.side / 2.0
    if kind == "line":
        heading = rng.random() * 2.0 * math.pi if heading is None else heading
    points = np.empty((count, 2))
    x, y = 0.0, 0.0
    points[0] = (x, y)
    for i in range(1, count):
        if kind == "stationary":
            points[i] = (x, y)
            continue
        ang = heading if kind == "line" else rng.random() * 2.0 * math.pi
        x = _reflect(x + step * math.cos(ang), h)
        y = _reflect(y + step * math.sin(ang), h)
        points[i] = (x, y)
    proj = region.projection
    lats, lons = proj.unproject_array(points)
    fixes = [Fix(i * dt, GeoPoint(lats[i], lons[i]), user) for i in range(count)]
    return Trace(fixes, proj)
