"""Post-hoc calibrators: isotonic regression, logistic rescaling, and a
guarded logistic variant that falls back to a constant predictor when the
recalibrated training data still shows a large interval-supremum error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ForecastSample, ValidationError, grouped_from_arrays
from .metrics import concentration_radius, cutoff_error

__all__ = [
    "CalibratorMap",
    "PlattDivergence",
    "fit_isotonic",
    "fit_platt",
    "fit_modified_platt",
    "apply_map",
    "default_epsilon",
]


class PlattDivergence(RuntimeError):
    """Newton failed to reach the gradient tolerance within the iteration cap."""


@dataclass(frozen=True)
class CalibratorMap:
    """A monotone map from forecasts to recalibrated probabilities.

    kind "isotonic": right-continuous step over (input, value) breakpoints,
    constant beyond the data range. kind "platt": sigmoid(a*z + b).
    kind "constant": a single value.
    """

    kind: str
    breakpoints: Optional[tuple] = None     # ((input, value), ...) for isotonic
    coefficients: Optional[tuple] = None    # (a, b) for platt
    constant_value: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "isotonic":
            d["breakpoints"] = [list(bp) for bp in self.breakpoints]
        elif self.kind == "platt":
            d["coefficients"] = {"a": self.coefficients[0],
                                 "b": self.coefficients[1]}
        else:
            d["constant_value"] = self.constant_value
        return d


def _pool_ties(forecasts: np.ndarray, outcomes: np.ndarray):
    """Merge equal forecasts into weighted points (mean outcome, weight)."""
    order = np.argsort(forecasts, kind="stable")
    t, y = forecasts[order], outcomes[order]
    uniq, inv = np.unique(t, return_inverse=True)
    w = np.bincount(inv).astype(float)
    ybar = np.bincount(inv, weights=y) / w
    return uniq, ybar, w


def _pava(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators; returns fitted values per point."""
    n = len(y)
    means = list(y)
    weights = list(w)
    sizes = [1] * n
    i = 0
    while i < len(means) - 1:
        if means[i] <= means[i + 1] + 0.0:
            i += 1
            continue
        tot = weights[i] + weights[i + 1]
        means[i] = (weights[i] * means[i] + weights[i + 1] * means[i + 1]) / tot
        weights[i] = tot
        sizes[i] += sizes[i + 1]
        del means[i + 1], weights[i + 1], sizes[i + 1]
        while i > 0 and means[i - 1] > means[i]:
            tot = weights[i - 1] + weights[i]
            means[i - 1] = (weights[i - 1] * means[i - 1]
                            + weights[i] * means[i]) / tot
            weights[i - 1] = tot
            sizes[i - 1] += sizes[i]
            del means[i], weights[i], sizes[i]
            i -= 1
    return np.repeat(means, sizes)


def fit_isotonic(samples: Sequence[ForecastSample]) -> CalibratorMap:
    """Least-squares monotone fit of outcomes on forecasts.

    Ties are pre-pooled into weighted points, so the fitted map is a
    function of the forecast value. Block values are weighted outcome
    means. Prediction uses a right-continuous step between breakpoints
    with constant extension beyond the data range.
    """
    if not samples:
        raise ValidationError("empty sample list")
    t = np.array([s.forecast for s in samples])
    y = np.array([s.outcome for s in samples])
    uniq, ybar, w = _pool_ties(t, y)
    fitted = _pava(ybar, w)
    return CalibratorMap("isotonic",
                         breakpoints=tuple(zip(uniq.tolist(), fitted.tolist())))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logistic_fit(t: np.ndarray, target: np.ndarray, weights: np.ndarray,
                  grad_tol: float = 1e-10, max_iter: int = 200):
    """Damped Newton for weighted two-parameter logistic loss.

    Minimizes sum_i w_i * [-target_i log p_i - (1 - target_i) log(1 - p_i)]
    with p_i = sigmoid(a t_i + b). Each step is halved (up to 50 times)
    until the objective does not increase beyond rounding slack (near the
    optimum the true decrease falls below double-precision resolution of
    the loss). Raises PlattDivergence at the iteration cap.
    """
    X = np.column_stack([t, np.ones_like(t)])
    theta = np.zeros(2)

    def loss(th):
        z = X @ th
        # -target*log(p) - (1-target)*log(1-p), stable form
        return float(np.dot(weights, np.logaddexp(0.0, z) - target * z))

    cur = loss(theta)
    for _ in range(max_iter):
        p = _sigmoid(X @ theta)
        grad = X.T @ (weights * (p - target))
        if np.linalg.norm(grad) < grad_tol:
            return theta, cur
        h = weights * p * (1.0 - p)
        H = X.T @ (X * h[:, None])
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        slack = 1e-12 * max(1.0, abs(cur))
        for _ in range(50):
            cand = theta - step
            new = loss(cand)
            if new <= cur + slack:
                break
            step *= 0.5
        else:
            break
        theta, cur = cand, new
    p = _sigmoid(X @ theta)
    grad = X.T @ (weights * (p - target))
    if np.linalg.norm(grad) < grad_tol:
        return theta, cur
    raise PlattDivergence(
        f"logistic fit did not converge; |grad|={np.linalg.norm(grad):.3e}")


def smoothed_targets(outcomes: np.ndarray) -> np.ndarray:
    """Shrink outcomes toward the interior before logistic rescaling.

    y -> y*(S+1)/(S+2) + (1-y)/(F+2) where S = sum(y) and F = sum(1-y);
    keeps the logistic minimizer finite even on separable data.
    """
    s = float(np.sum(outcomes))
    f = float(np.sum(1.0 - outcomes))
    return outcomes * (s + 1.0) / (s + 2.0) + (1.0 - outcomes) / (f + 2.0)


def fit_platt(samples: Sequence[ForecastSample]) -> CalibratorMap:
    """Logistic rescaling of forecasts with smoothed outcome targets."""
    if not samples:
        raise ValidationError("empty sample list")
    t = np.array([s.forecast for s in samples])
    y = np.array([s.outcome for s in samples])
    target = smoothed_targets(y)
    theta, _ = _logistic_fit(t, target, np.ones_like(t))
    return CalibratorMap("platt", coefficients=(float(theta[0]), float(theta[1])))


def population_platt(forecasts, means, masses) -> tuple:
    """Exact population logistic minimizer on weighted atoms (no smoothing)."""
    t = np.asarray(forecasts, dtype=float)
    q = np.asarray(means, dtype=float)
    w = np.asarray(masses, dtype=float)
    theta, _ = _logistic_fit(t, q, w)
    return float(theta[0]), float(theta[1])


def default_epsilon(n: int) -> float:
    """Acceptance tolerance matching the delta = 0.05 concentration radius."""
    return concentration_radius(n, 0.05)


def fit_modified_platt(samples: Sequence[ForecastSample],
                       epsilon_n: Optional[float] = None) -> CalibratorMap:
    """Logistic rescaling guarded by an interval-supremum check.

    Fits the logistic map, then measures the scan error of the recalibrated
    training data (residuals y - h(t), grouped by h(t), no data splitting).
    Returns the logistic map if the error is <= epsilon_n, otherwise the
    constant map at the sample mean of the outcomes (whose in-sample scan
    error is zero).
    """
    if not samples:
        raise ValidationError("empty sample list")
    if epsilon_n is None:
        epsilon_n = default_epsilon(len(samples))
    if epsilon_n <= 0:
        raise ValueError("epsilon_n must be positive")
    platt = fit_platt(samples)
    t = np.array([s.forecast for s in samples])
    y = np.array([s.outcome for s in samples])
    z = apply_map(platt, t)
    est = cutoff_error(grouped_from_arrays(z, y))
    if est.value <= epsilon_n:
        return platt
    return CalibratorMap("constant", constant_value=float(np.mean(y)))


def apply_map(cal: CalibratorMap, forecasts) -> np.ndarray:
    """Evaluate a calibrator map element-wise; outputs stay in [0, 1]."""
    z = np.asarray(forecasts, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if cal.kind == "constant":
        out = np.full_like(z, cal.constant_value)
    elif cal.kind == "platt":
        a, b = cal.coefficients
        out = _sigmoid(a * z + b)
    elif cal.kind == "isotonic":
        xs = np.array([bp[0] for bp in cal.breakpoints])
        vs = np.array([bp[1] for bp in cal.breakpoints])
        idx = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(xs) - 1)
        out = vs[idx]
    else:
        raise ValueError(f"unknown map kind: {cal.kind!r}")
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out
