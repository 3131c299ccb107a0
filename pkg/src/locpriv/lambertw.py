"""Lower real branch of the Lambert W function on [-1/e, 0).

Solves w * exp(w) = x for w <= -1. Used to invert the polar Laplace radial
CDF in closed form. Three regimes keep every step well conditioned:

- q = 1 + e*x <= 1e-8: branch-point series alone; its truncation error is
  O(q^2) < 1e-16, and residual-based refinement would only add cancellation
  noise there.
- q < 0.5: branch-point series refined by Halley iterations on w e^w = x.
- q >= 0.5: log asymptote refined by Newton on w + ln(-w) = ln(-x), which
  stays finite for arbitrarily negative w where e^w would underflow.

Relative error is below 1e-12 across the domain (well below 1e-13 outside
a narrow band near the branch point where the root itself is ill
conditioned in q).
"""
from __future__ import annotations

import math

import numpy as np

_INV_E = math.exp(-1.0)
_MAX_ITER = 50
_RTOL = 1e-14
_Q_SERIES_ONLY = 1e-8
_Q_ASYMPTOTE = 0.5


def _series(p: float) -> float:
    # branch-point expansion in p = -sqrt(2 (1 + e x))
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))


def lambert_w_minus1_scalar(x: float) -> float:
    """W_-1(x) for a single float x in [-1/e, 0)."""
    if not -_INV_E <= x < 0.0:
        raise ValueError(f"lambert_w_minus1 domain is [-1/e, 0): got {x}")
    q = 1.0 + math.e * x  # 0 at the branch point, 1 as x -> 0-
    if q <= 0.0:
        return -1.0
    if q < _Q_ASYMPTOTE:
        w = _series(-math.sqrt(2.0 * q))
        if q <= _Q_SERIES_ONLY:
            return w
        for _ in range(_MAX_ITER):
            exp_w = math.exp(w)
            f = w * exp_w - x
            fp = exp_w * (1.0 + w)
            w_next = w - 2.0 * f * fp / (2.0 * fp * fp - f * exp_w * (2.0 + w))
            if abs(w_next - w) <= _RTOL * abs(w_next):
                return w_next
            w = w_next
        return w
    l1 = math.log(-x)
    w = l1 - math.log(-l1)
    for _ in range(_MAX_ITER):
        delta = (w + math.log(-w) - l1) * w / (w + 1.0)
        w -= delta
        if abs(delta) <= _RTOL * abs(w):
            return w
    return w


def lambert_w_minus1(x) -> np.ndarray:
    """Vectorized W_-1 over an array with values in [-1/e, 0)."""
    x = np.asarray(x, dtype=float)
    if x.size and (np.any(x < -_INV_E) or np.any(x >= 0.0) or not np.all(np.isfinite(x))):
        raise ValueError("lambert_w_minus1 domain is [-1/e, 0)")
    q = 1.0 + math.e * x
    w = np.full_like(x, -1.0)

    near = (q > 0.0) & (q < _Q_ASYMPTOTE)
    if np.any(near):
        p = -np.sqrt(2.0 * q[near])
        w[near] = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
        refine = near & (q > _Q_SERIES_ONLY)
        if np.any(refine):
            xv = x[refine]
            wv = w[refine]
            todo = np.ones(wv.shape, dtype=bool)
            for _ in range(_MAX_ITER):
                exp_w = np.exp(wv[todo])
                wt = wv[todo]
                f = wt * exp_w - xv[todo]
                fp = exp_w * (1.0 + wt)
                w_next = wt - 2.0 * f * fp / (2.0 * fp * fp - f * exp_w * (2.0 + wt))
                done_now = np.abs(w_next - wt) <= _RTOL * np.abs(w_next)
                wv[todo] = w_next
                idx = np.flatnonzero(todo)
                todo[idx[done_now]] = False
                if not np.any(todo):
                    break
            w[refine] = wv

    far = q >= _Q_ASYMPTOTE
    if np.any(far):
        l1 = np.log(-x[far])
        wv = l1 - np.log(-l1)
        todo = np.ones(wv.shape, dtype=bool)
        for _ in range(_MAX_ITER):
            wt = wv[todo]
            delta = (wt + np.log(-wt) - l1[todo]) * wt / (wt + 1.0)
            wt -= delta
            done_now = np.abs(delta) <= _RTOL * np.abs(wt)
            wv[todo] = wt
            idx = np.flatnonzero(todo)
            todo[idx[done_now]] = False
            if not np.any(todo):
                break
        w[far] = wv
    return w
