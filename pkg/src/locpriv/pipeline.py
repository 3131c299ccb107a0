"""Mechanism selection and whole-trace perturbation.

Glue between the stateless samplers, the thresholded-release session, and the
callers that process traces (CLI, metrics, service).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geo import PlanarPoint
from .mechanisms import (
    StaircaseParams,
    plm_radial_inverse_cdf,
    plm_sample,
    psm_radial_inverse_cdf,
    psm_sample,
    validate_epsilon,
)
from .session import (
    BudgetExhaustedError,
    DecisionKind,
    TrPsmConfig,
    TrPsmSession,
)

MECHANISMS = ("plm", "psm", "trpsm")


@dataclass(frozen=True)
class MechanismConfig:
    """Which mechanism to run and its privacy parameters.

    epsilon_total and delta apply to trpsm only; delta_width and n_intervals
    shape the staircase used by psm and trpsm.
    """

    mechanism: str
    epsilon: float
    epsilon_total: float | None = None
    delta: float = 5.0
    delta_width: float = 1.0
    n_intervals: int | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism: {self.mechanism!r} (expected one of {MECHANISMS})")
        validate_epsilon(self.epsilon)
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    def staircase(self) -> StaircaseParams:
        return StaircaseParams(self.epsilon, self.delta_width, self.n_intervals)

    def session_config(self, epsilon_total: float | None = None) -> TrPsmConfig:
        total = epsilon_total if epsilon_total is not None else self.epsilon_total
        if total is None:
            raise ValueError("trpsm requires epsilon_total")
        return TrPsmConfig(self.epsilon, total, self.delta, self.staircase())


@dataclass
class PerturbResult:
    """Released points for one trace, possibly truncated by budget exhaustion."""

    released: np.ndarray  # (M, 2), M <= input length
    kinds: list[DecisionKind] = field(default_factory=list)  # trpsm only
    exhausted: bool = False
    spend: float | None = None  # trpsm only


def perturb_points(
    points: np.ndarray,
    cfg: MechanismConfig,
    rng: np.random.Generator,
) -> PerturbResult:
    """Perturb an (N, 2) planar point sequence under one mechanism.

    plm and psm perturb each fix independently (two uniform draws per fix,
    radius then angle). trpsm runs a thresholded-release session over the
    sequence; on budget exhaustion the output is truncated at the offending
    step and exhausted is set.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty (N, 2) array")
    n = points.shape[0]
    if cfg.mechanism in ("plm", "psm"):
        u = rng.random((n, 2))
        if cfg.mechanism == "plm":
            r = plm_radial_inverse_cdf(u[:, 0], cfg.epsilon)
        else:
            r = psm_radial_inverse_cdf(u[:, 0], cfg.staircase())
        theta = u[:, 1] * 2.0 * np.pi
        released = points + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        return PerturbResult(released=released)

    session_cfg = cfg.session_config()
    session, decision = TrPsmSession.start(PlanarPoint(*points[0]), session_cfg, rng)
    out = [decision.output.as_array()]
    kinds = [decision.kind]
    exhausted = False
    for xy in points[1:]:
        try:
            decision = session.step(PlanarPoint(*xy))
        except BudgetExhaustedError:
            exhausted = True
            break
        out.append(decision.output.as_array())
        kinds.append(decision.kind)
    return PerturbResult(
        released=np.array(out),
        kinds=kinds,
        exhausted=exhausted,
        spend=session.spend(),
    )


def make_perturber(
    cfg: MechanismConfig,
    rng: np.random.Generator,
    expected_calls: int | None = None,
) -> Callable[[float, float], tuple[float, float]]:
    """Return a per-fix closure (x, y) -> released (x, y).

    For trpsm the closure owns a session, started lazily on the first call.
    When cfg.epsilon_total is unset, expected_calls sizes the budget so a run
    of that many calls cannot exhaust.
    """
    if cfg.mechanism == "plm":
        eps = cfg.epsilon

        def perturb_plm(x: float, y: float) -> tuple[float, float]:
            z = plm_sample(PlanarPoint(x, y), eps, rng)
            return z.x, z.y

        return perturb_plm
    if cfg.mechanism == "psm":
        params = cfg.staircase()

        def perturb_psm(x: float, y: float) -> tuple[float, float]:
            z = psm_sample(PlanarPoint(x, y), params, rng)
            return z.x, z.y

        return perturb_psm

    if cfg.epsilon_total is not None:
        session_cfg = cfg.session_config()
    elif expected_calls is not None:
        session_cfg = cfg.session_config((expected_calls + 3) * cfg.epsilon)
    else:
        raise ValueError("trpsm requires epsilon_total or expected_calls")
    state: dict = {"session": None}

    def perturb_trpsm(x: float, y: float) -> tuple[float, float]:
        if state["session"] is None:
            state["session"], decision = TrPsmSession.start(PlanarPoint(x, y), session_cfg, rng)
        else:
            decision = state["session"].step(PlanarPoint(x, y))
        z = decision.output
        return z.x, z.y

    return perturb_trpsm
