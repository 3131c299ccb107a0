"""Stateless per-location perturbation mechanisms.

Two geo-indistinguishable mechanisms over the planar frame, both sampled in
polar form (radius from a 1-D radial law, angle uniform on [0, 2pi)):

* planar Laplace: radial density eps^2 * r * exp(-eps * r), inverted in
  closed form through the lower Lambert W branch;
* planar staircase: radial density piecewise-constant over width-``delta_width``
  intervals, geometrically decaying by exp(-eps) per interval, with an exact
  closed-form inverse CDF (no tables, works for unbounded interval counts).

``epsilon`` is the per-release privacy budget in units of 1/meter; larger
epsilon means weaker privacy and less noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import PlanarPoint
from .lambertw import lambert_w_minus1, lambert_w_minus1_scalar

TWO_PI = 2.0 * math.pi

# Uniform draws are clamped below 1 so closed-form inverses stay finite.
_U_MAX = 1.0 - 2.0**-53


def validate_epsilon(epsilon: float) -> float:
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon}")
    return float(epsilon)


@dataclass(frozen=True)
class StaircaseParams:
    """Staircase radial-law parameters.

    delta_width is the interval width in meters (default 1 for fine
    granularity); n_intervals = None means an unbounded staircase, the
    default and the variant all headline numbers use.
    """

    epsilon: float
    delta_width: float = 1.0
    n_intervals: int | None = None

    def __post_init__(self):
        validate_epsilon(self.epsilon)
        if not (self.delta_width > 0.0 and math.isfinite(self.delta_width)):
            raise ValueError(f"delta_width must be positive, got {self.delta_width}")
        if self.n_intervals is not None and self.n_intervals < 1:
            raise ValueError(f"n_intervals must be >= 1 or None, got {self.n_intervals}")

    @property
    def total_mass(self) -> float:
        """Normalizing mass: 1 for unbounded n, else 1 - exp(-n*eps)."""
        if self.n_intervals is None:
            return 1.0
        return -math.expm1(-self.n_intervals * self.epsilon)


@dataclass(frozen=True)
class RadialSample:
    """A polar noise draw: radius in meters, angle in [0, 2pi)."""

    r: float
    theta: float

    def offset(self) -> tuple[float, float]:
        return self.r * math.cos(self.theta), self.r * math.sin(self.theta)


# ---------------------------------------------------------------------------
# Planar Laplace (polar form)
# ---------------------------------------------------------------------------


def plm_radial_inverse_cdf(u, epsilon: float):
    """Invert the polar-Laplace radial CDF C(r) = 1 - (1 + eps*r) exp(-eps*r).

    r = -(W_-1((u - 1)/e) + 1)/eps. Accepts a scalar or array u in [0, 1);
    u = 0 maps to r = 0.
    """
    validate_epsilon(epsilon)
    if np.isscalar(u) or isinstance(u, float):
        if not 0.0 <= u < 1.0:
            raise ValueError(f"u must be in [0, 1), got {u}")
        u = min(u, _U_MAX)
        if u == 0.0:
            return 0.0
        w = lambert_w_minus1_scalar((u - 1.0) / math.e)
        return -(w + 1.0) / epsilon
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise ValueError("u must be in [0, 1)")
    u = np.minimum(u, _U_MAX)
    w = lambert_w_minus1((u - 1.0) / math.e)
    return -(w + 1.0) / epsilon


def plm_sample_radial(epsilon: float, rng: np.random.Generator) -> RadialSample:
    """One polar draw from the planar Laplace law (radius first, then angle)."""
    r = plm_radial_inverse_cdf(rng.random(), epsilon)
    theta = rng.random() * TWO_PI
    return RadialSample(r, theta)


def plm_sample(x: PlanarPoint, epsilon: float, rng: np.random.Generator) -> PlanarPoint:
    """Perturb one location with planar Laplace noise."""
    dx, dy = plm_sample_radial(epsilon, rng).offset()
    return PlanarPoint(x.x + dx, x.y + dy)


def plm_sample_many(x: PlanarPoint, epsilon: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent planar-Laplace perturbations of x, as an (n, 2) array.

    Draw order matches a loop of plm_sample calls: radius then angle per fix.
    """
    u = rng.random((n, 2))
    r = plm_radial_inverse_cdf(u[:, 0], epsilon)
    theta = u[:, 1] * TWO_PI
    return np.column_stack([x.x + r * np.cos(theta), x.y + r * np.sin(theta)])


# ---------------------------------------------------------------------------
# Planar staircase (polar form)
# ---------------------------------------------------------------------------


def _interval_index(r, params: StaircaseParams):
    """1-based interval index: i = ceil(r / width), with r = 0 in interval 1.

    A radius exactly at i*width belongs to interval i (closed on the right).
    """
    idx = np.ceil(np.asarray(r, dtype=float) / params.delta_width)
    return np.maximum(idx, 1.0)


def psm_radial_pdf(r, params: StaircaseParams):
    """Staircase radial density f_i = (1 - e^-eps) e^-(i-1)eps / (mass * width)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise ValueError("radius must be nonnegative")
    eps = params.epsilon
    i = _interval_index(r_arr, params)
    dens = -math.expm1(-eps) * np.exp(-(i - 1.0) * eps) / (params.total_mass * params.delta_width)
    if params.n_intervals is not None:
        dens = np.where(r_arr > params.n_intervals * params.delta_width, 0.0, dens)
    return float(dens) if np.isscalar(r) or isinstance(r, float) else dens


def psm_radial_cdf(r, params: StaircaseParams):
    """Piecewise-linear staircase radial CDF; continuous, 0 at r=0, 1 at the tail."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise ValueError("radius must be nonnegative")
    eps, width = params.epsilon, params.delta_width
    k = _interval_index(r_arr, params)
    below = -np.expm1(-(k - 1.0) * eps)  # mass of the k-1 full intervals
    f_k = -math.expm1(-eps) * np.exp(-(k - 1.0) * eps) / width
    c = (below + f_k * (r_arr - (k - 1.0) * width)) / params.total_mass
    if params.n_intervals is not None:
        c = np.where(r_arr >= params.n_intervals * width, 1.0, c)
    c = np.clip(c, 0.0, 1.0)
    return float(c) if np.isscalar(r) or isinstance(r, float) else c


def psm_radial_inverse_cdf(u, params: StaircaseParams):
    """Closed-form inverse of the staircase radial CDF; C(inverse(u)) == u.

    The interval index comes from log1p(1 - u) rather than a CDF scan, which
    stays exact for u arbitrarily close to 1.
    """
    eps, width = params.epsilon, params.delta_width
    if np.isscalar(u) or isinstance(u, float):
        uf = float(u)
        if not 0.0 <= uf < 1.0:
            raise ValueError(f"u must be in [0, 1), got {u}")
        v = min(uf, _U_MAX) * params.total_mass
        k = math.floor(-math.log1p(-v) / eps) + 1.0
        if params.n_intervals is not None:
            k = min(k, float(params.n_intervals))
        below = -math.expm1(-(k - 1.0) * eps)
        f_k = -math.expm1(-eps) * math.exp(-(k - 1.0) * eps) / width
        return (k - 1.0) * width + (v - below) / f_k
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0) or np.any(u_arr >= 1.0):
        raise ValueError("u must be in [0, 1)")
    v = np.minimum(u_arr, _U_MAX) * params.total_mass
    k = np.floor(-np.log1p(-v) / eps) + 1.0
    if params.n_intervals is not None:
        k = np.minimum(k, params.n_intervals)
    below = -np.expm1(-(k - 1.0) * eps)
    f_k = -math.expm1(-eps) * np.exp(-(k - 1.0) * eps) / width
    r = (k - 1.0) * width + (v - below) / f_k
    return r


def psm_sample_radial(params: StaircaseParams, rng: np.random.Generator) -> RadialSample:
    """One polar draw from the staircase law (radius first, then angle)."""
    r = psm_radial_inverse_cdf(rng.random(), params)
    theta = rng.random() * TWO_PI
    return RadialSample(r, theta)


def psm_sample(x: PlanarPoint, params: StaircaseParams, rng: np.random.Generator) -> PlanarPoint:
    """Perturb one location with staircase noise."""
    dx, dy = psm_sample_radial(params, rng).offset()
    return PlanarPoint(x.x + dx, x.y + dy)


def psm_sample_many(x: PlanarPoint, params: StaircaseParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent staircase perturbations of x, as an (n, 2) array.

    Draw order matches a loop of psm_sample calls: radius then angle per fix.
    """
    u = rng.random((n, 2))
    r = psm_radial_inverse_cdf(u[:, 0], params)
    theta = u[:, 1] * TWO_PI
    return np.column_stack([x.x + r * np.cos(theta), x.y + r * np.sin(theta)])


def psm_radial_mean(params: StaircaseParams) -> float:
    """Analytic mean radius of the unbounded staircase: width/(1-e^-eps) - width/2."""
    if params.n_intervals is not None:
        raise ValueError("closed-form mean is for the unbounded staircase")
    return params.delta_width / -math.expm1(-params.epsilon) - params.delta_width / 2.0


def plm_radial_mean(epsilon: float) -> float:
    """Analytic mean radius of the planar Laplace law: 2/eps."""
    validate_epsilon(epsilon)
    return 2.0 / epsilon
