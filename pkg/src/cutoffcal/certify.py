"""Two-stage split-and-test certification with a distribution-free guarantee.

Train an arbitrary model on the first half of the data, estimate its
interval-supremum calibration error on the second half, and accept it only
if the estimate clears a concentration-corrected threshold; otherwise fall
back to the constant predictor at the second-half outcome mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .calibrate import CalibratorMap
from .core import SeededRng, ValidationError, grouped_from_arrays
from .metrics import concentration_radius, cutoff_error

__all__ = ["CertificationVerdict", "certify", "min_admissible_c"]


@dataclass(frozen=True)
class CertificationVerdict:
    """Accept/fallback decision with the quantities behind it.

    accepted iff estimate <= threshold = c - radius(delta, floor(n/2)).
    When rejected, returned_model is the constant map at the second-half
    outcome mean.
    """

    accepted: bool
    estimate: float
    threshold: float
    c: float
    delta: float
    returned_model: object
    fallback_mean: float
    n: int

    def to_dict(self) -> dict:
        model = self.returned_model
        return {
            "accepted": self.accepted,
            "estimate": self.estimate,
            "threshold": self.threshold,
            "c": self.c,
            "delta": self.delta,
            "fallback_mean": self.fallback_mean,
            "n": self.n,
            "returned_model": (model.to_dict()
                               if isinstance(model, CalibratorMap)
                               else f"trained:{type(model).__name__}"),
        }


def min_admissible_c(n: int, delta: float) -> float:
    """Smallest threshold c for which the 1 - 2*delta guarantee applies."""
    return math.sqrt(math.log(1.0 / delta) / (2.0 * (n // 2)))


def certify(covariates: Sequence, outcomes: Sequence[float],
            trainer: Callable[[Sequence, np.ndarray], Callable],
            c: float, delta: float,
            split_seed: Optional[SeededRng] = None) -> CertificationVerdict:
    """Run the two-stage procedure and return the verdict.

    trainer receives the first ceil(n/2) covariates and outcomes and must
    return a callable mapping covariates to forecasts in [0, 1]. Covariates
    are passed through untouched as opaque handles. The split is
    first/second half in input order; pass split_seed to apply a seeded
    permutation first (for files that may be sorted).
    """
    outcomes = np.asarray(outcomes, dtype=float)
    n = len(outcomes)
    if n < 4:
        raise ValidationError("need at least 4 samples")
    floor = min_admissible_c(n, delta)
    if c < floor:
        raise ValidationError(
            f"c={c} below the admissible floor sqrt(ln(1/delta)/(2*floor(n/2)))"
            f" = {floor:.6g}")

    idx = np.arange(n)
    if split_seed is not None:
        idx = split_seed.generator().permutation(n)
    k = -(-n // 2)  # ceil(n/2)
    train_idx, test_idx = idx[:k], idx[k:]

    covariates = list(covariates)
    model = trainer([covariates[i] for i in train_idx], outcomes[train_idx])
    test_cov = [covariates[i] for i in test_idx]
    test_y = outcomes[test_idx]
    forecasts = np.asarray([model(x) for x in test_cov], dtype=float)

    est = cutoff_error(grouped_from_arrays(forecasts, test_y))
    threshold = c - concentration_radius(n // 2, delta)
    fallback_mean = float(np.mean(test_y))
    accepted = est.value <= threshold
    returned = model if accepted else CalibratorMap(
        "constant", constant_value=fallback_mean)
    return CertificationVerdict(accepted, est.value, threshold, c, delta,
                                returned, fallback_mean, n)
