"""Thresholded release over a location stream, with a privacy-budget ledger.

A session privatizes a threshold once, perturbs the first fix, and then
releases a fresh perturbation only when the current true location has moved
at least the noisy threshold away from the last released point; otherwise the
last release is reused at zero budget cost. Total spend after k threshold
crossings is (k + 2) * epsilon: one epsilon for the threshold, one for the
first release, one per crossing.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import PlanarPoint, distance
from .mechanisms import StaircaseParams, psm_radial_inverse_cdf, psm_sample, validate_epsilon


class BudgetTooSmallError(ValueError):
    """Session budget cannot cover the fixed setup cost of 2 * epsilon."""


class BudgetExhaustedError(Exception):
    """A release is due but the remaining budget cannot pay for it.

    Recoverable: the caller may top up the session budget and retry the same
    fix, or end the session. No location is emitted for the failed step.
    """

    def __init__(self, spend: float, epsilon_total: float, z_ref: PlanarPoint, step_index: int):
        super().__init__(f"budget exhausted: spent {spend} of {epsilon_total}")
        self.spend = spend
        self.epsilon_total = epsilon_total
        self.z_ref = z_ref
        self.step_index = step_index


class DecisionKind(str, enum.Enum):
    INITIAL = "initial"
    RELEASED = "released"
    REUSED = "reused"


@dataclass(frozen=True)
class ReleaseDecision:
    output: PlanarPoint
    kind: DecisionKind
    budget_spent_this_step: float


@dataclass(frozen=True)
class TrPsmConfig:
    """Session parameters: per-release epsilon, session budget, app threshold."""

    epsilon: float
    epsilon_total: float
    delta: float = 5.0
    staircase: StaircaseParams = None  # type: ignore[assignment]

    def __post_init__(self):
        validate_epsilon(self.epsilon)
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.epsilon_total < 2.0 * self.epsilon:
            raise BudgetTooSmallError(
                f"epsilon_total {self.epsilon_total} below setup cost 2*epsilon = {2.0 * self.epsilon}"
            )
        if self.staircase is None:
            object.__setattr__(self, "staircase", StaircaseParams(self.epsilon))


@dataclass
class TrPsmSession:
    """Single-writer state machine; steps must be applied in timestamp order.

    Ledger invariant at every step:
    2*epsilon + releases*epsilon + epsilon_left == epsilon_total.
    """

    cfg: TrPsmConfig
    noisy_threshold: float
    z_ref: PlanarPoint
    epsilon_left: float
    releases: int = 0
    step_index: int = 1
    epsilon_total: float = field(default=0.0)
    _rng: np.random.Generator = field(default=None, repr=False)  # type: ignore[assignment]

    @classmethod
    def start(cls, x1: PlanarPoint, cfg: TrPsmConfig, rng: np.random.Generator) -> tuple["TrPsmSession", ReleaseDecision]:
        """Open a session on the first fix.

        Draws the threshold noise from the staircase radial sampler (so the
        noisy threshold never falls below the app threshold), then perturbs
        and releases x1. Costs 2 * epsilon up front.
        """
        if cfg.epsilon_total < 2.0 * cfg.epsilon:
            raise BudgetTooSmallError("epsilon_total below 2*epsilon")
        eta = psm_radial_inverse_cdf(rng.random(), cfg.staircase)
        z1 = psm_sample(x1, cfg.staircase, rng)
        session = cls(
            cfg=cfg,
            noisy_threshold=cfg.delta + eta,
            z_ref=z1,
            epsilon_left=cfg.epsilon_total - 2.0 * cfg.epsilon,
            epsilon_total=cfg.epsilon_total,
            _rng=rng,
        )
        return session, ReleaseDecision(z1, DecisionKind.INITIAL, 2.0 * cfg.epsilon)

    def step(self, x_t: PlanarPoint) -> ReleaseDecision:
        """Process the next fix: reuse below threshold, else release or fail.

        Raises BudgetExhaustedError when a release is due but unaffordable;
        the session state is unchanged in that case and the step may be
        retried after a top-up. Affordability requires both the running
        remainder and the recomputed total (releases + 3) * epsilon to fit:
        the two views coincide in exact arithmetic, and requiring both keeps
        either ledger reading within epsilon_total under float rounding.
        """
        d_t = distance(x_t, self.z_ref)
        if d_t < self.noisy_threshold:
            self.step_index += 1
            return ReleaseDecision(self.z_ref, DecisionKind.REUSED, 0.0)
        eps = self.cfg.epsilon
        if self.epsilon_left < eps or (self.releases + 3) * eps > self.epsilon_total:
            raise BudgetExhaustedError(self.spend(), self.epsilon_total, self.z_ref, self.step_index)
        z_t = psm_sample(x_t, self.cfg.staircase, self._rng)
        self.z_ref = z_t
        self.epsilon_left -= self.cfg.epsilon
        self.releases += 1
        self.step_index += 1
        return ReleaseDecision(z_t, DecisionKind.RELEASED, self.cfg.epsilon)

    def spend(self) -> float:
        """Budget consumed so far: (releases + 2) * epsilon."""
        return (self.releases + 2) * self.cfg.epsilon

    def top_up(self, additional: float) -> float:
        """Grow the session budget without resampling the threshold."""
        if additional < 0.0 or not math.isfinite(additional):
            raise ValueError(f"top-up must be finite and >= 0, got {additional}")
        self.epsilon_total += additional
        self.epsilon_left += additional
        return self.epsilon_left

    def snapshot(self) -> dict:
        """Flat JSON-friendly state record (excludes the RNG stream)."""
        return {
            "noisy_threshold": self.noisy_threshold,
            "z_ref_x": self.z_ref.x,
            "z_ref_y": self.z_ref.y,
            "epsilon_left": self.epsilon_left,
            "epsilon_total": self.epsilon_total,
            "releases": self.releases,
            "step_index": self.step_index,
        }

    @classmethod
    def restore(cls, cfg: TrPsmConfig, snapshot: dict, rng: np.random.Generator) -> "TrPsmSession":
        return cls(
            cfg=cfg,
            noisy_threshold=snapshot["noisy_threshold"],
            z_ref=PlanarPoint(snapshot["z_ref_x"], snapshot["z_ref_y"]),
            epsilon_left=snapshot["epsilon_left"],
            epsilon_total=snapshot["epsilon_total"],
            releases=snapshot["releases"],
            step_index=snapshot["step_index"],
            _rng=rng,
        )
