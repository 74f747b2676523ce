"""Simulation harness and analytic dataset constructions.

Covers the misspecified-logistic simulation (risk gaps vs calibration
metrics), the population logistic-rescaling counterexample with an LP
certificate, and exact finite-atom constructions used as golden tests:
the staircase, the two-atom separation example, and the perturbed
constant forecast.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .calibrate import PlattDivergence, _logistic_fit, _sigmoid, population_platt
from .core import GroupedDataset, SeededRng, grouped_from_arrays
from .decision import DecisionEvalSet, risk_bd, best_wrapper_risk, \
    best_monotone_wrapper_risk
from .metrics import cutoff_error, lipschitz_wce, oracle_ece

__all__ = [
    "SimulationConfig",
    "SimulationRunRecord",
    "run_simulation",
    "platt_counterexample",
    "make_staircase",
    "make_separation_example",
    "make_perturbed_constant",
]


@dataclass(frozen=True)
class SimulationConfig:
    runs: int = 100
    n_train: int = 500
    n_eval: int = 10000
    tau: float = 0.35
    master_seed: int = 0

    def __post_init__(self):
        if min(self.runs, self.n_train, self.n_eval) < 1:
            raise ValueError("counts must be >= 1")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError("tau must be in [0,1]")


@dataclass(frozen=True)
class SimulationRunRecord:
    alpha: float
    cutoff: float
    ece: float
    lipschitz_wce: float
    risk: float
    bayes_risk: float
    monotone_risk: float
    gap: float
    monotone_gap: float
    seed: int
    refits: int = 0

    FIELDS = ("alpha", "cutoff", "ece", "lipschitz_wce", "risk", "bayes_risk",
              "monotone_risk", "gap", "monotone_gap", "seed", "refits")


def _conditional_mean(x: np.ndarray, alpha: float) -> np.ndarray:
    """Convex combination of a parabola symmetric about 0.5 and the identity."""
    return alpha * (1.0 - 2.0 * x) ** 2 + (1.0 - alpha) * x


def _one_run(args) -> SimulationRunRecord:
    config, run_index = args
    rng = SeededRng(config.master_seed, run_index).generator()
    alpha = float(rng.uniform())
    refits = 0
    while True:
        x = rng.uniform(size=config.n_train)
        y = (rng.uniform(size=config.n_train)
             < _conditional_mean(x, alpha)).astype(float)
        try:
            # forecast model: plain logistic MLE on (X, Y), no target smoothing
            theta, _ = _logistic_fit(x, y, np.ones_like(x))
            break
        except PlattDivergence:
            refits += 1
            if refits > 10:
                raise

    x_eval = rng.uniform(size=config.n_eval)
    mu = _conditional_mean(x_eval, alpha)
    f = _sigmoid(theta[0] * x_eval + theta[1])

    data = grouped_from_arrays(f, mu, residual_mode="oracle")
    cutoff = cutoff_error(data).value
    ece = oracle_ece(data)
    wce = lipschitz_wce(data).objective

    ev = DecisionEvalSet(f, mu, config.tau)
    risk = risk_bd(ev)
    bayes = best_wrapper_risk(ev)
    mono = best_monotone_wrapper_risk(ev)
    return SimulationRunRecord(alpha, cutoff, ece, wce, risk, bayes, mono,
                               risk - bayes, risk - mono, run_index, refits)


def run_simulation(config: SimulationConfig,
                   max_workers: Optional[int] = None) -> List[SimulationRunRecord]:
    """Run the full simulation; records are deterministic per master_seed.

    Runs derive independent seed streams from (master_seed, run_index), so
    results are identical whether executed serially or in parallel.
    max_workers defaults to the CALIB_THREADS environment variable (1 if
    unset).
    """
    if max_workers is None:
        max_workers = int(os.environ.get("CALIB_THREADS", "1"))
    jobs = [(config, i) for i in range(config.runs)]
    if max_workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(_one_run, jobs))
    return [_one_run(job) for job in jobs]


def make_staircase(N: int) -> List[Tuple[float, float, float]]:
    """Uniform forecasts with a piecewise-constant conditional mean.

    On each band ((i-1)/N, i/N] the conditional mean is (i-0.5)/N. Each
    band is split at its midpoint into two half-band atoms placed at their
    mass centroids, which reproduces every interval integral of the
    continuous construction exactly; the scan supremum is 1/(8 N^2).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    atoms = []
    for i in range(1, N + 1):
        mean = (i - 0.5) / N
        lower_centroid = (i - 1) / N + 1.0 / (4 * N)
        upper_centroid = (i - 0.5) / N + 1.0 / (4 * N)
        atoms.append((lower_centroid, mean, 1.0 / (2 * N)))
        atoms.append((upper_centroid, mean, 1.0 / (2 * N)))
    return atoms


def make_separation_example(b: float) -> List[Tuple[float, float, float]]:
    """Two atoms separated by b with crossed conditional means.

    Forecast 0.5(1-b) has conditional mean 1; forecast 0.5(1+b) has mean 0;
    masses are 1/2 each. Exact values: ECE = 0.5(1+b) and the L1 distance
    to the nearest calibrated forecast is 0.5 b.
    """
    if not (0.0 < b <= 1.0):
        raise ValueError("b must be in (0,1]")
    return [(0.5 * (1.0 - b), 1.0, 0.5), (0.5 * (1.0 + b), 0.0, 0.5)]


def make_perturbed_constant(epsilon: float) -> List[Tuple[float, float, float]]:
    """Near-constant forecast around 0.75 with a sign-flipped slope.

    X ~ Bernoulli(0.75) with Y = X and forecast 0.75 + eps - 2*eps*x gives
    atoms (0.75-eps, mean 1, mass 0.75) and (0.75+eps, mean 0, mass 0.25).
    Exact ECE = 3/8 + eps while the Lipschitz weighted error is <= 2*eps.
    """
    if not (0.0 < epsilon < 0.25):
        raise ValueError("epsilon must be in (0, 0.25)")
    return [(0.75 - epsilon, 1.0, 0.75), (0.75 + epsilon, 0.0, 0.25)]


def _rescaled_atoms(forecasts, means, a: float, b: float) -> GroupedDataset:
    """Equal-mass atoms after sigmoid(a*v + b), coincident images pooled."""
    z = _sigmoid(a * np.asarray(forecasts) + b)
    pooled = {}
    for zv, q in zip(z.tolist(), means):
        mass, qsum = pooled.get(zv, (0.0, 0.0))
        pooled[zv] = (mass + 0.25, qsum + 0.25 * q)
    atoms = [(zv, qsum / mass, mass) for zv, (mass, qsum) in pooled.items()]
    return GroupedDataset.from_atoms(atoms)


def _certified_wce(forecasts, means, a: float, b: float) -> float:
    """Lipschitz weighted error of the rescaled atoms sigmoid(a*v + b)."""
    return lipschitz_wce(_rescaled_atoms(forecasts, means, a, b)).objective


def platt_counterexample(margin: float = 0.01):
    """A 4-atom distribution the population logistic rescaler cannot fix.

    Forecasts are {0, 0.25, 0.5, 1} with equal masses. Conditional means
    are searched so the exact population logistic-loss minimizer (a, b)
    leaves the rescaled forecasts with Lipschitz weighted error above
    `margin`, which certifies a strictly positive distance from the nearest
    calibrated forecast (wCE <= 2 * dCE, so dCE > margin / 2). Among the
    certified candidates, the one whose rescaled atoms have the largest
    interval-supremum error is returned, so the failure is also visible to
    the scan at realistic sample sizes.

    Returns (atoms, (a, b), certified_wce).
    """
    forecasts = [0.0, 0.25, 0.5, 1.0]
    masses = [0.25] * 4

    candidates = [[v for v in forecasts]]  # calibrated truth, identity target
    gen = SeededRng(20240915).generator()
    candidates += [sorted(gen.uniform(size=4).tolist()) for _ in range(200)]

    best = None
    fallback = None
    for q in candidates:
        try:
            a, b = population_platt(forecasts, q, masses)
        except PlattDivergence:
            continue
        atoms = list(zip(forecasts, q, masses))
        cut = cutoff_error(_rescaled_atoms(forecasts, q, a, b)).value
        wce = _certified_wce(forecasts, q, a, b)
        if fallback is None or wce > fallback[2]:
            fallback = (atoms, (a, b), wce)
        if wce > margin and (best is None or cut > best[3]):
            best = (atoms, (a, b), wce, cut)
    if best is None:
        raise RuntimeError(f"no construction found with margin > {margin}; "
                           f"best was {fallback[2]:.6g}")
    return best[0], best[1], best[2]
