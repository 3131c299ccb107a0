"""Virtual-object field generation and visibility geometry.

A content server spawns objects on a phase-randomized square lattice around
each released fix. An object is catchable when it falls inside the 100 m
visibility disk of both the true and the released location.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import PlanarPoint, distance

DENSITY_SPACING = {"dense": 50.0, "sparse": 100.0}


@dataclass(frozen=True)
class VirtualObject:
    """One spawned object, id unique within its field."""

    id: str
    point: PlanarPoint


@dataclass(frozen=True)
class ObjectFieldConfig:
    """Lattice pitch, generation extent, and visibility-disk radius."""

    spacing: float = 100.0
    field_radius: float = 150.0
    visibility_radius: float = 100.0

    def __post_init__(self):
        for name in ("spacing", "field_radius", "visibility_radius"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def for_density(cls, density: str, field_radius: float = 150.0, visibility_radius: float = 100.0) -> "ObjectFieldConfig":
        if density not in DENSITY_SPACING:
            raise ValueError(f"unknown density: {density!r} (expected one of {sorted(DENSITY_SPACING)})")
        return cls(DENSITY_SPACING[density], field_radius, visibility_radius)


def generate_field(
    z: PlanarPoint,
    cfg: ObjectFieldConfig,
    rng: np.random.Generator,
) -> list[VirtualObject]:
    """Spawn objects on a square lattice inside the field_radius disk around z.

    The lattice phase is drawn uniformly per call, so repeated calls place
    objects differently while keeping the configured mean density.
    """
    s = cfg.spacing
    rr = cfg.field_radius
    phase_x = rng.random() * s
    phase_y = rng.random() * s
    objs = []
    i_lo, i_hi = math.ceil((-rr - phase_x) / s), math.floor((rr - phase_x) / s)
    j_lo, j_hi = math.ceil((-rr - phase_y) / s), math.floor((rr - phase_y) / s)
    n = 0
    for j in range(j_lo, j_hi + 1):
        dy = phase_y + j * s
        for i in range(i_lo, i_hi + 1):
            dx = phase_x + i * s
            if dx * dx + dy * dy <= rr * rr:
                objs.append(VirtualObject(f"obj-{n}", PlanarPoint(z.x + dx, z.y + dy)))
                n += 1
    return objs


def visible(objs: list[VirtualObject], center: PlanarPoint, radius: float) -> list[VirtualObject]:
    """Objects within the closed disk of given radius around center."""
    return [o for o in objs if distance(o.point, center) <= radius]


def catchable_split(
    x_true: PlanarPoint,
    z: PlanarPoint,
    objs: list[VirtualObject],
    cfg: ObjectFieldConfig,
) -> tuple[int, int]:
    """(|V|, |V intersect V_hat|) for one step.

    V is the set visible from the true location, V_hat from the released one.
    """
    v = visible(objs, x_true, cfg.visibility_radius)
    inter = visible(v, z, cfg.visibility_radius)
    return len(v), len(inter)


def catchable_fraction(
    x_true: PlanarPoint,
    z: PlanarPoint,
    objs: list[VirtualObject],
    cfg: ObjectFieldConfig,
) -> float | None:
    """Share (percent) of truly visible objects that remain catchable.

    Returns None when no object is visible from the true location; such steps
    are excluded from averages rather than scored 0 or 100.
    """
    n_true, n_inter = catchable_split(x_true, z, objs, cfg)
    if n_true == 0:
        return None
    return 100.0 * n_inter / n_true


def accumulated_loss(per_step: list[tuple[int, int]]) -> int:
    """Total objects lost to perturbation: sum of |V_t| - |V_t intersect V_hat_t|."""
    total = 0
    for pair in per_step:
        n_true, n_inter = pair
        if n_true < 0 or n_inter < 0 or n_inter > n_true:
            raise ValueError(f"malformed step pair {pair}")
        total += n_true - n_inter
    return total
