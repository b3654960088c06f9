"""
Tests the observables, the error metrics, the exit time statistics and the mean field equilibria

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import math
import types

import numpy as np
import pytest

from cgmc.analysis import (EmpiricalDistribution, coarsen_histogram, convergence_slope, coverage, coverage_on_grid,
                           exit_time, exit_time_statistics, histogram, kl_divergence, mean_field_balance,
                           mean_field_equilibria, realization_convergence, relative_entropy, shared_histograms,
                           weak_strong_errors)
from cgmc.exceptions import EnsembleMismatchError
from cgmc.lattice import CoarseConfig, LatticeSpec, MicroConfig, PotentialModel


def _path(times, values):
    return types.SimpleNamespace(times=np.asarray(times, dtype=float), coverage=np.asarray(values, dtype=float))


def test_coverage():
    spec = LatticeSpec(6, 3, 1)

    assert coverage(MicroConfig([1, 0, 1, 0, 0, 0])) == pytest.approx(1 / 3)
    assert coverage(CoarseConfig([3, 1], spec)) == pytest.approx(4 / 6)


def test_coverage_on_grid():
    path = _path([0.0, 1.0, 2.5], [0.0, 0.1, 0.2])

    assert coverage_on_grid(path, [0.0, 0.5, 1.0, 2.0, 3.0]).tolist() == [0.0, 0.0, 0.1, 0.1, 0.2]
    with pytest.raises(EnsembleMismatchError):
        coverage_on_grid(_path([1.0], [0.0]), [0.0])


def test_identical_ensembles_have_no_error():
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 10.0, 21)
    paths = rng.random((16, grid.size))
    report = weak_strong_errors(paths, paths.copy(), grid)

    assert report.weak == 0.0
    assert report.strong == 0.0
    assert report.n_realizations == 16


def test_weak_strong_errors_example():
    grid = np.array([0.0, 1.0, 3.0])
    reference = np.array([[0.2, 0.4, 0.0], [0.4, 0.6, 0.0]])
    coarse = np.array([[0.4, 0.4, 0.0], [0.2, 0.8, 0.0]])
    report = weak_strong_errors(reference, coarse, grid)

    # Means agree at t=0 and differ by 0.1 over the second interval
    assert report.weak == pytest.approx(0.1 * 2.0)
    assert report.strong == pytest.approx(0.2 * 1.0 + 0.1 * 2.0)
    assert report.relative_weak == pytest.approx(0.2 / (0.3 * 1.0 + 0.5 * 2.0))


def test_weak_error_never_exceeds_strong_error():
    rng = np.random.default_rng(4)
    grid = np.linspace(0.0, 5.0, 11)
    for _ in range(50):
        reference = rng.random((10, grid.size))
        coarse = reference + rng.normal(0.0, 0.1, reference.shape)
        report = weak_strong_errors(reference, coarse, grid)
        assert report.weak <= report.strong + 2 * report.strong_se


def test_unpaired_ensembles():
    grid = np.linspace(0.0, 1.0, 3)

    with pytest.raises(EnsembleMismatchError):
        weak_strong_errors(np.zeros((3, 3)), np.zeros((4, 3)), grid)
    with pytest.raises(EnsembleMismatchError):
        weak_strong_errors(np.zeros((3, 4)), np.zeros((3, 4)), grid)


def test_convergence_slope():
    qs = [10, 25, 50]
    fit = convergence_slope(qs, [0.003 * q ** 2 for q in qs])

    assert fit.slope == pytest.approx(2.0)
    assert fit.half_width == pytest.approx(0.0, abs=1e-6)
    assert math.isinf(convergence_slope([2, 4], [1.0, 4.0]).half_width)
    with pytest.raises(ValueError):
        convergence_slope(qs, [0.1, 0.0, 0.2])


def test_realization_convergence():
    rng = np.random.default_rng(12)
    grid = np.linspace(0.0, 4.0, 9)
    reference = rng.random((8, grid.size))
    coarse = {q: reference + 0.01 * q ** 2 for q in (2, 4)}
    points = realization_convergence(reference, coarse, grid)

    assert [p.n_realizations for p in points] == [2, 4, 8]
    assert all(p.weak.slope == pytest.approx(2.0) for p in points)


@pytest.mark.parametrize("times, values, threshold, expected",
                         [
                             ([0.0, 1.0], [0.95, 0.5], 0.9, 0.0),
                             ([0.0, 1.1, 3.2, 4.0], [0.1, 0.5, 0.9, 0.95], 0.9, 3.2),
                             ([0.0, 1.0], [0.1, 0.2], 0.9, None),
                         ])
def test_exit_time(times, values, threshold, expected):
    assert exit_time(_path(times, values), threshold) == expected


def test_exit_time_threshold_range():
    with pytest.raises(ValueError):
        exit_time(_path([0.0], [0.0]), 0.0)
    with pytest.raises(ValueError):
        exit_time(_path([0.0], [0.0]), 1.2)


def test_exit_time_statistics():
    stats = exit_time_statistics([1.0, 3.0, None], reference_mean=1.0)

    assert stats.mean == pytest.approx(2.0)
    assert stats.std == pytest.approx(math.sqrt(2.0))
    assert stats.n_crossed == 2
    assert stats.censored_fraction == pytest.approx(1 / 3)
    assert stats.relative_error == pytest.approx(1.0)
    assert exit_time_statistics([626.0], reference_mean=532.0).relative_error == pytest.approx(94 / 532)


def test_histogram():
    single = histogram([2.0] * 10)

    assert single.n_bins == 100
    assert np.count_nonzero(single.probs) == 1

    rng = np.random.default_rng(21)
    n = 100_000
    flat = histogram(rng.random(n), 100, (0.0, 1.0))
    assert np.all(np.abs(flat.probs - 0.01) <= 5 * math.sqrt(0.01 * 0.99 / n))
    with pytest.raises(ValueError):
        histogram([], 10)


def test_shared_histograms():
    a, b = shared_histograms([0.0, 1.0], [3.0, 4.0], n_bins=4)

    assert np.array_equal(a.bin_edges, b.bin_edges)
    assert a.bin_edges[0] == 0.0 and a.bin_edges[-1] == 4.0
    assert math.isinf(relative_entropy(a, b))
    assert relative_entropy(a, b, smoothing=1.0) > 0


def test_kl_divergence_examples():
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.14384, abs=1e-5)
    assert kl_divergence([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0
    assert kl_divergence([0.0, 1.0], [0.5, 0.5]) == pytest.approx(math.log(2.0))
    assert math.isinf(kl_divergence([0.5, 0.5], [1.0, 0.0]))
    with pytest.raises(EnsembleMismatchError):
        kl_divergence([0.5, 0.5], [1.0])


def test_relative_entropy_needs_shared_bins():
    p = EmpiricalDistribution([0.0, 1.0, 2.0], [0.5, 0.5], 10)
    r = EmpiricalDistribution([0.0, 1.0, 3.0], [0.5, 0.5], 10)

    with pytest.raises(EnsembleMismatchError):
        relative_entropy(p, r)


def test_empirical_distribution_validation():
    with pytest.raises(ValueError):
        EmpiricalDistribution([0.0, 1.0], [0.5, 0.5], 2)
    with pytest.raises(ValueError):
        EmpiricalDistribution([0.0, 1.0, 2.0], [0.7, 0.7], 2)


def test_coarsen_histogram():
    p = EmpiricalDistribution(np.arange(5.0), [0.1, 0.2, 0.3, 0.4], 10)

    assert coarsen_histogram(p, 1).probs == pytest.approx(p.probs)
    assert coarsen_histogram(p, 2).probs == pytest.approx([0.3, 0.7])
    assert coarsen_histogram(p, 2).bin_edges.tolist() == [0.0, 2.0, 4.0]
    assert coarsen_histogram(p, 4).probs.tolist() == [1.0]
    with pytest.raises(ValueError):
        coarsen_histogram(p, 3)


def test_information_inequalities():
    """
    Relative entropy is non negative and merging bins never increases it.
    """
    rng = np.random.default_rng(99)
    edges = np.arange(101.0)
    for _ in range(1000):
        p = EmpiricalDistribution(edges, rng.dirichlet(np.ones(100)), 100)
        r = EmpiricalDistribution(edges, rng.dirichlet(np.ones(100)), 100)
        divergence = relative_entropy(p, r)
        assert divergence >= 0.0
        for factor in (2, 5, 100):
            assert relative_entropy(coarsen_histogram(p, factor), coarsen_histogram(r, factor)) <= divergence + 1e-12
    assert relative_entropy(coarsen_histogram(p, 100), coarsen_histogram(r, 100)) == 0.0


def test_mean_field_without_interaction():
    model = PotentialModel(0.0, beta=1.0)

    for h in (-1.0, 0.0, 0.7):
        (result,) = mean_field_equilibria(model, [h])
        assert len(result.roots) == 1
        assert result.roots[0] == pytest.approx(1.0 / (1.0 + math.exp(h)), abs=1e-9)
        assert not result.degenerate


def test_mean_field_balance_vanishes_at_roots():
    model = PotentialModel(6.0, beta=1.0)
    (result,) = mean_field_equilibria(model, [3.0])

    assert len(result.roots) == 3
    assert np.abs(mean_field_balance(np.array(result.roots), model, 3.0)).max() <= 1e-8


@pytest.mark.parametrize("beta_j0, n_roots", [(3.8, 1), (3.9, 1), (4.1, 3), (4.2, 3)])
def test_mean_field_bifurcation(beta_j0, n_roots):
    model = PotentialModel.from_beta_j0(beta_j0)
    h_values = model.j0 / 2 + np.linspace(-0.05, 0.05, 101)
    counts = [len(result.roots) for result in mean_field_equilibria(model, h_values)]

    assert max(counts) == n_roots
    assert min(counts) == 1 or beta_j0 > 4


def test_mean_field_hysteresis_window():
    model = PotentialModel.from_beta_j0(6.0)
    counts = [len(result.roots) for result in mean_field_equilibria(model, np.linspace(2.0, 4.0, 41))]

    assert counts[0] == 1
    assert counts[-1] == 1
    assert 3 in counts


def test_grouped_field_has_a_metastable_low_coverage_phase():
    model = PotentialModel.from_beta_j0(6.0, d0=1.0, c0=0.072)
    (result,) = mean_field_equilibria(model, [0.0])

    assert len(result.roots) == 3
    low, unstable, high = result.roots
    assert 0.1 < low < 0.2
    assert 0.2 < unstable < 0.5
    assert high > 0.9
    (strong,) = mean_field_equilibria(PotentialModel.from_beta_j0(6.0, c0=1.0), [0.0])
    assert len(strong.roots) == 1 and strong.roots[0] > 0.99
