import math

import numpy as np
import pytest

from cutoffcal import (ForecastSample, GroupedDataset, SeededRng, binned_ece,
                       bv_wce_lower_bound, cutoff_error,
                       effective_support_size, group_by_forecast,
                       grouped_from_arrays, lipschitz_wce, make_staircase,
                       oracle_ece)
from cutoffcal.metrics import _prefix_sums


def brute_force_cutoff(data):
    """O(m^2) enumeration over all contiguous group ranges plus the empty one."""
    prefix = _prefix_sums(data.residual_sums)
    best = 0.0
    for i in range(len(prefix)):
        for j in range(i + 1, len(prefix)):
            best = max(best, abs(float(prefix[j] - prefix[i])))
    return best / data.n


def random_grouped(rng, max_groups=200, ties=True):
    m = int(rng.integers(1, max_groups + 1))
    vals = np.round(rng.random(m), 2) if ties else rng.random(m)
    t = np.unique(vals)
    y = rng.random(len(t))
    return grouped_from_arrays(t, y, residual_mode="oracle")


def test_cutoff_zero_on_calibrated():
    data = grouped_from_arrays([0.2, 0.5, 0.9], [0.2, 0.5, 0.9],
                               residual_mode="oracle")
    est = cutoff_error(data)
    assert est.value == 0.0
    assert est.argmax_interval is None


def test_cutoff_degenerate_one():
    samples = [ForecastSample(1.0, 0.0)] * 10
    est = cutoff_error(group_by_forecast(samples))
    assert est.value == 1.0
    assert est.argmax_interval == (0, 0)


def test_cutoff_matches_brute_force_small():
    data = GroupedDataset([0.1, 0.2, 0.3], [0.3, -0.5, 0.4], [1, 1, 1],
                          [0, 0, 0], n=3)
    est = cutoff_error(data)
    assert est.value == brute_force_cutoff(data)


def test_cutoff_interval_sum_matches_value():
    rng = np.random.default_rng(3)
    for _ in range(50):
        data = random_grouped(rng, max_groups=40)
        est = cutoff_error(data)
        if est.argmax_interval is None:
            assert est.value == 0.0
            continue
        lo, hi = est.argmax_interval
        seg = float(np.sum(data.residual_sums[lo:hi + 1]))
        assert abs(seg) / data.n == pytest.approx(est.value, abs=1e-12)


def test_cutoff_scan_equals_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(200):
        data = random_grouped(rng)
        assert cutoff_error(data).value == brute_force_cutoff(data)


def test_cutoff_order_only_invariance():
    # relabeling forecasts monotonically leaves the scan unchanged
    rng = np.random.default_rng(5)
    data = random_grouped(rng, max_groups=30)
    relabeled = GroupedDataset(np.sqrt(data.forecasts), data.residual_sums,
                               data.counts, data.outcome_sums, data.n,
                               data.residual_mode)
    assert cutoff_error(relabeled).value == cutoff_error(data).value


def test_concentration_radius_formula():
    est = cutoff_error(grouped_from_arrays([0.5], [0.5]))
    expected = (20 + math.sqrt(2 * math.log(20))) / math.sqrt(1)
    assert est.concentration_radius(0.05) == pytest.approx(expected)


def test_binned_ece_single_bin_matched_means():
    data = grouped_from_arrays([0.2, 0.8], [0.8, 0.2])
    assert binned_ece(data, 1) == pytest.approx(0.0)


def test_binned_ece_degenerate():
    data = group_by_forecast([ForecastSample(1.0, 0.0)] * 5)
    for bins in (1, 3, 10):
        assert binned_ece(data, bins) == pytest.approx(1.0)


def test_binned_ece_staircase_blind_spot():
    # bins aligned to the steps see zero error; the scan does not
    for N in (2, 4):
        data = GroupedDataset.from_atoms(make_staircase(N))
        assert binned_ece(data, N) == pytest.approx(0.0, abs=1e-15)
        assert cutoff_error(data).value == pytest.approx(1 / (8 * N * N))


def test_binned_ece_invalid_bins():
    data = grouped_from_arrays([0.5], [0.5])
    with pytest.raises(ValueError):
        binned_ece(data, 0)


def test_oracle_ece_perfect_and_degenerate():
    perfect = grouped_from_arrays([0.2, 0.7], [0.2, 0.7], residual_mode="oracle")
    assert oracle_ece(perfect) == 0.0
    degenerate = GroupedDataset.from_atoms([(1.0, 0.0, 1.0)])
    assert oracle_ece(degenerate) == 1.0


def test_oracle_ece_perturbed_constant():
    from cutoffcal import make_perturbed_constant
    data = GroupedDataset.from_atoms(make_perturbed_constant(0.01))
    assert oracle_ece(data) == pytest.approx(0.385, abs=1e-15)


def test_oracle_ece_rejects_outcome_mode():
    with pytest.raises(ValueError):
        oracle_ece(grouped_from_arrays([0.5], [1.0]))


def test_lipschitz_wce_zero_residuals():
    data = grouped_from_arrays([0.1, 0.9], [0.1, 0.9], residual_mode="oracle")
    assert lipschitz_wce(data).objective == pytest.approx(0.0, abs=1e-12)


def test_lipschitz_wce_single_group():
    data = grouped_from_arrays([0.3, 0.3], [1.0, 0.0])
    lw = lipschitz_wce(data)
    assert lw.objective == pytest.approx(abs(float(data.residual_sums[0])) / 2)
    assert lw.weights[0] == pytest.approx(np.sign(data.residual_sums[0]) or 1.0)


def grid_search_wce(data, points=41):
    """Exact maximum over a uniform 41-point grid per weight, respecting the
    adjacent Lipschitz constraints. The chain structure lets the exhaustive
    maximum be computed by dynamic programming over grid states; the result
    is identical to enumerating all points^m feasible combinations."""
    grid = np.linspace(-1.0, 1.0, points)
    r = data.residual_sums / data.n
    dt = np.diff(data.forecasts)
    value = grid * r[0]
    for j in range(1, len(r)):
        feasible = np.abs(grid[None, :] - grid[:, None]) <= dt[j - 1] + 1e-12
        carried = np.where(feasible, value[:, None], -np.inf).max(axis=0)
        value = carried + grid * r[j]
    return float(value.max())


def test_lipschitz_wce_matches_grid():
    rng = np.random.default_rng(21)
    for _ in range(5):
        m = int(rng.integers(2, 6))
        t = np.sort(rng.random(m))
        data = grouped_from_arrays(np.unique(t), rng.random(len(np.unique(t))),
                                   residual_mode="oracle")
        lw = lipschitz_wce(data)
        assert lw.objective >= grid_search_wce(data) - 1e-9
        assert lw.objective <= grid_search_wce(data) + 0.025
        assert lw.kkt_residual < 1e-9


def test_lipschitz_weights_feasible_and_consistent():
    rng = np.random.default_rng(2)
    data = random_grouped(rng, max_groups=60)
    lw = lipschitz_wce(data)
    assert np.all(np.abs(lw.weights) <= 1 + 1e-12)
    assert np.all(np.abs(np.diff(lw.weights)) <= np.diff(data.forecasts) + 1e-9)
    assert lw.objective == pytest.approx(
        float(np.dot(lw.weights, data.residual_sums)) / data.n, abs=1e-12)


def test_bv_lower_bound_sandwich():
    rng = np.random.default_rng(9)
    for k in range(20):
        data = random_grouped(rng, max_groups=50)
        cut = cutoff_error(data).value
        for M in (2.0, 4.0):
            lb = bv_wce_lower_bound(data, M, SeededRng(100 + k), num_samples=50)
            assert lb >= cut - 1e-9
            assert lb <= (M + 2) * cut + 1e-9


def test_bv_lower_bound_zero_residuals():
    data = grouped_from_arrays([0.1, 0.9], [0.1, 0.9], residual_mode="oracle")
    assert bv_wce_lower_bound(data, 2.0, SeededRng(0)) == pytest.approx(0.0,
                                                                        abs=1e-12)


def test_bv_lower_bound_rejects_small_tv():
    data = grouped_from_arrays([0.5], [1.0])
    with pytest.raises(ValueError):
        bv_wce_lower_bound(data, 1.5, SeededRng(0))


def test_effective_support_size():
    all_equal = group_by_forecast([ForecastSample(0.4, 1.0)] * 7)
    assert effective_support_size(all_equal, 0.5) == 1

    distinct = grouped_from_arrays(np.linspace(0.1, 0.9, 9), np.zeros(9))
    assert effective_support_size(distinct, 0.0) == 9

    masses = GroupedDataset([0.1, 0.2, 0.3], [0, 0, 0], [50, 30, 20],
                            [0, 0, 0], n=100)
    assert effective_support_size(masses, 0.25) == 2


def test_cutoff_le_ece_random_oracle():
    rng = np.random.default_rng(30)
    for _ in range(50):
        data = random_grouped(rng)
        assert cutoff_error(data).value <= oracle_ece(data) + 1e-12


def test_wce_squared_lower_chain():
    rng = np.random.default_rng(31)
    for _ in range(20):
        data = random_grouped(rng, max_groups=80)
        wce = lipschitz_wce(data).objective
        assert wce ** 2 / 36 <= cutoff_error(data).value + 1e-9
