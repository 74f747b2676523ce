import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutoffcal import (ForecastSample, ValidationError, group_by_forecast,
                       load_samples, serialize_samples)


def test_load_basic():
    samples = load_samples(b"forecast,outcome\n0.5,1\n0.2,0\n")
    assert [(s.forecast, s.outcome) for s in samples] == [(0.5, 1.0), (0.2, 0.0)]


def test_load_out_of_range_reports_line():
    with pytest.raises(ValidationError, match="line 2"):
        load_samples(b"forecast,outcome\n1.5,0\n")


def test_load_oracle_mode():
    samples = load_samples(b"forecast,outcome,oracle_mean\n0.3,0,0.25\n",
                           mode="oracle")
    assert samples == [ForecastSample(0.3, 0.0, 0.25)]


def test_oracle_mode_missing_column():
    with pytest.raises(ValidationError, match="oracle_mean column absent"):
        load_samples(b"forecast,outcome\n0.3,0\n", mode="oracle")


def test_load_malformed_row():
    with pytest.raises(ValidationError, match="line 3"):
        load_samples(b"forecast,outcome\n0.5,1\n0.2\n")


def test_load_accepts_file_object():
    samples = load_samples(io.BytesIO(b"forecast,outcome\n0.5,1\n"))
    assert len(samples) == 1


def test_round_trip():
    rng = np.random.default_rng(7)
    samples = [ForecastSample(float(t), float(y), float(m))
               for t, y, m in rng.random((50, 3))]
    again = load_samples(serialize_samples(samples), mode="oracle")
    for a, b in zip(samples, again):
        assert a.forecast == pytest.approx(b.forecast, rel=1e-15)
        assert a.outcome == pytest.approx(b.outcome, rel=1e-15)
        assert a.oracle_mean == pytest.approx(b.oracle_mean, rel=1e-15)


def test_group_pools_ties_and_sorts():
    samples = [ForecastSample(0.5, 1.0), ForecastSample(0.5, 0.0),
               ForecastSample(0.2, 0.0)]
    data = group_by_forecast(samples)
    assert data.groups == [(0.2, pytest.approx(-0.2), 1.0, 0.0),
                           (0.5, pytest.approx(0.0), 2.0, 1.0)]
    assert data.n == 3


def test_group_zero_residual():
    data = group_by_forecast([ForecastSample(0.3, 0.3)])
    assert data.groups == [(0.3, 0.0, 1.0, 0.3)]


def test_group_oracle_residual():
    data = group_by_forecast([ForecastSample(0.3, 0.0, 0.25)],
                             residual_mode="oracle")
    f, r, c, y = data.groups[0]
    assert (f, c, y) == (0.3, 1.0, 0.0)
    assert r == pytest.approx(-0.05)


def test_group_empty_raises():
    with pytest.raises(ValidationError):
        group_by_forecast([])


def test_group_oracle_requires_means():
    with pytest.raises(ValidationError, match="oracle_mean"):
        group_by_forecast([ForecastSample(0.3, 0.0)], residual_mode="oracle")


@given(st.lists(st.tuples(st.sampled_from([0.1, 0.25, 0.5, 0.9]),
                          st.floats(0, 1, allow_nan=False)),
                min_size=1, max_size=30),
       st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_group_permutation_invariant(pairs, rnd):
    samples = [ForecastSample(t, y) for t, y in pairs]
    shuffled = list(samples)
    rnd.shuffle(shuffled)
    a = group_by_forecast(samples)
    b = group_by_forecast(shuffled)
    assert a.groups == b.groups
    assert a.n == b.n


@given(st.lists(st.tuples(st.floats(0, 1, allow_nan=False),
                          st.floats(0, 1, allow_nan=False)),
                min_size=1, max_size=200))
@settings(max_examples=200, deadline=None)
def test_group_residual_totals_match_raw(pairs):
    samples = [ForecastSample(t, y) for t, y in pairs]
    data = group_by_forecast(samples)
    raw = math.fsum(y - t for t, y in pairs)
    assert math.fsum(data.residual_sums.tolist()) == pytest.approx(raw, abs=1e-12)
    assert float(np.sum(data.counts)) == len(samples)
