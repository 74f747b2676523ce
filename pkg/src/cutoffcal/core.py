"""Data model and CSV ingestion shared by all metrics and calibrators.

Samples are (forecast, outcome[, oracle_mean]) records with every value in
[0, 1]. Grouping pools samples with bitwise-equal forecasts, since an
interval of forecast values either contains all copies of a value or none.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "ForecastSample",
    "GroupedDataset",
    "SeededRng",
    "load_samples",
    "serialize_samples",
    "group_by_forecast",
]


class ValidationError(ValueError):
    """Malformed or out-of-range input data. CLI maps this to exit code 2."""


@dataclass(frozen=True)
class ForecastSample:
    """One (forecast, outcome) record, optionally carrying E[Y|X]."""

    forecast: float
    outcome: float
    oracle_mean: Optional[float] = None

    def __post_init__(self):
        for name in ("forecast", "outcome", "oracle_mean"):
            v = getattr(self, name)
            if v is None:
                continue
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} out of [0,1]: {v!r}")


@dataclass(frozen=True)
class SeededRng:
    """Deterministic random stream identified by (seed, stream_id).

    Identical (seed, stream_id) pairs yield identical streams across runs
    and platforms (numpy PCG64 via SeedSequence).
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    def child(self, stream_id: int) -> "SeededRng":
        return SeededRng(self.seed, stream_id)


class GroupedDataset:
    """Samples pooled by bitwise-equal forecast value, sorted ascending.

    Per group we keep the forecast value, the (compensated) residual sum
    over members, the total weight, and the outcome sum. Weights are sample
    counts for empirical data but may be fractional masses for analytic
    atom constructions.
    """

    __slots__ = ("forecasts", "residual_sums", "counts", "outcome_sums", "n",
                 "residual_mode")

    def __init__(self, forecasts, residual_sums, counts, outcome_sums, n,
                 residual_mode="outcome"):
        self.forecasts = np.asarray(forecasts, dtype=float)
        self.residual_sums = np.asarray(residual_sums, dtype=float)
        self.counts = np.asarray(counts, dtype=float)
        self.outcome_sums = np.asarray(outcome_sums, dtype=float)
        self.n = n
        self.residual_mode = residual_mode
        if len(self.forecasts) == 0:
            raise ValidationError("empty dataset")
        if np.any(np.diff(self.forecasts) <= 0):
            raise ValidationError("group forecasts must be strictly increasing")

    def __len__(self) -> int:
        return len(self.forecasts)

    @property
    def groups(self):
        """List of (forecast_value, residual_sum, count, outcome_sum) tuples."""
        return list(zip(self.forecasts.tolist(), self.residual_sums.tolist(),
                        self.counts.tolist(), self.outcome_sums.tolist()))

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "GroupedDataset":
        """Build from (forecast, conditional_mean, mass) triples.

        Total mass plays the role of n; residuals are mean - forecast.
        """
        atoms = sorted(atoms)
        t = np.array([a[0] for a in atoms], dtype=float)
        mu = np.array([a[1] for a in atoms], dtype=float)
        w = np.array([a[2] for a in atoms], dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValidationError("atom forecasts must be distinct")
        return cls(t, (mu - t) * w, w, mu * w, n=math.fsum(w),
                   residual_mode="oracle")


def _parse_header(line: str, mode: str) -> bool:
    cols = [c.strip() for c in line.strip().split(",")]
    if cols[:2] != ["forecast", "outcome"]:
        raise ValidationError(f"bad CSV header: {line.strip()!r}")
    has_oracle = len(cols) >= 3 and cols[2] == "oracle_mean"
    if mode == "oracle" and not has_oracle:
        raise ValidationError("oracle mode requested but oracle_mean column absent")
    return has_oracle


def load_samples(source, mode: str = "empirical") -> list[ForecastSample]:
    """Parse a CSV byte stream (or bytes/str) into validated samples.

    Header must be ``forecast,outcome[,oracle_mean]``. Raises
    ValidationError with the offending line number on malformed rows or
    values outside [0, 1]. Input order is preserved.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    lines = text.splitlines()
    if not lines:
        raise ValidationError("empty input")
    has_oracle = _parse_header(lines[0], mode)

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        expected = 3 if has_oracle else 2
        if len(parts) != expected:
            raise ValidationError(f"malformed row at line {lineno}: {line!r}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ValidationError(f"malformed row at line {lineno}: {line!r}")
        for v in vals:
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise ValidationError(f"value out of [0,1] at line {lineno}")
        oracle = vals[2] if has_oracle else None
        samples.append(ForecastSample(vals[0], vals[1], oracle))
    if not samples:
        raise ValidationError("no data rows")
    return samples


def serialize_samples(samples: Sequence[ForecastSample]) -> str:
    """Inverse of load_samples, exact to float round-trip precision."""
    has_oracle = samples[0].oracle_mean is not None
    header = "forecast,outcome,oracle_mean" if has_oracle else "forecast,outcome"
    rows = [header]
    for s in samples:
        cells = [f"{s.forecast:.17g}", f"{s.outcome:.17g}"]
        if has_oracle:
            cells.append(f"{s.oracle_mean:.17g}")
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def group_by_forecast(samples: Sequence[ForecastSample],
                      residual_mode: str = "outcome") -> GroupedDataset:
    """Pool samples by bitwise-equal forecast, sorted ascending.

    residual_mode="oracle" uses (oracle_mean - forecast) residuals and
    requires oracle_mean on every sample. Per-group sums use math.fsum so
    prefix scans over large n keep 1e-12 accuracy.
    """
    if not samples:
        raise ValidationError("empty sample list")
    if residual_mode not in ("outcome", "oracle"):
        raise ValueError(f"unknown residual_mode: {residual_mode!r}")
    if residual_mode == "oracle":
        if any(s.oracle_mean is None for s in samples):
            raise ValidationError("missing oracle_mean in oracle mode")

    t = np.array([s.forecast for s in samples], dtype=float)
    y = np.array([s.outcome for s in samples], dtype=float)
    if residual_mode == "oracle":
        target = np.array([s.oracle_mean for s in samples], dtype=float)
    else:
        target = y

    order = np.argsort(t, kind="stable")
    t, y, target = t[order], y[order], target[order]
    resid = target - t

    uniq, start = np.unique(t, return_index=True)
    bounds = np.append(start, len(t))
    residual_sums = np.empty(len(uniq))
    outcome_sums = np.empty(len(uniq))
    counts = np.empty(len(uniq))
    for g in range(len(uniq)):
        lo, hi = bounds[g], bounds[g + 1]
        residual_sums[g] = math.fsum(resid[lo:hi])
        outcome_sums[g] = math.fsum(y[lo:hi])
        counts[g] = hi - lo
    return GroupedDataset(uniq, residual_sums, counts, outcome_sums,
                          n=len(samples), residual_mode=residual_mode)


def grouped_from_arrays(forecasts, targets, residual_mode="outcome") -> GroupedDataset:
    """Fast path for array inputs (used by simulation harnesses).

    Same pooling semantics as group_by_forecast; outcome sums equal target
    sums (targets are outcomes, or conditional means in oracle mode).
    """
    t = np.asarray(forecasts, dtype=float)
    v = np.asarray(targets, dtype=float)
    if t.size == 0:
        raise ValidationError("empty dataset")
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    uniq, inv = np.unique(t, return_inverse=True)
    resid = v - t
    residual_sums = np.bincount(inv, weights=resid, minlength=len(uniq))
    outcome_sums = np.bincount(inv, weights=v, minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq)).astype(float)
    return GroupedDataset(uniq, residual_sums, counts, outcome_sums,
                          n=int(t.size), residual_mode=residual_mode)
