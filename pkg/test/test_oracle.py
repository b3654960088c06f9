"""
Tests the exhaustive enumeration of tiny lattices: Gibbs measures, generators and detailed balance

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import math

import numpy as np
import pytest

from cgmc.exceptions import StateSpaceTooLargeError
from cgmc.kmc import Process
from cgmc.lattice import LatticeSpec, MicroConfig, PotentialModel
from cgmc.oracle import (StateIndex, detailed_balance_audit, exact_coarse_rate_gap, generator_matrix,
                         gibbs_measure, project_measure, relative_entropy, stationary_distribution,
                         total_variation)


def test_state_index():
    states = StateIndex(Process.COARSE, LatticeSpec(6, 2, 1))

    assert states.n_states == 27
    assert states.index([2, 0, 1]) == 2 + 9
    assert states.config(11).tolist() == [2, 0, 1]
    assert all(states.index(c) == i for i, c in enumerate(states.configs()))
    assert StateIndex(Process.SYNTHETIC, LatticeSpec(6, 2, 1)).n_states == 64


def test_gibbs_measure_examples():
    spec = LatticeSpec(6, 1, 2)
    assert np.allclose(gibbs_measure(Process.MICRO, spec, PotentialModel(3.0, beta=0.0)), 1 / 64)

    single = gibbs_measure(Process.MICRO, LatticeSpec(1, 1, 0), PotentialModel(1.0, beta=2.0, h=0.3))
    assert single[1] / single[0] == pytest.approx(math.exp(-2.0 * 0.3))

    prior = gibbs_measure(Process.COARSE, LatticeSpec(2, 2, 0), PotentialModel(1.0))
    assert prior == pytest.approx([0.25, 0.5, 0.25])


def test_gibbs_measure_grouped_activity():
    model = PotentialModel(0.0, d0=1.0, c0=0.25)
    measure = gibbs_measure(Process.MICRO, LatticeSpec(1, 1, 0), model)

    assert measure[1] / measure[0] == pytest.approx(0.25)


def test_state_space_cap():
    with pytest.raises(StateSpaceTooLargeError):
        gibbs_measure(Process.MICRO, LatticeSpec(21, 1, 1), PotentialModel(1.0))
    with pytest.raises(StateSpaceTooLargeError):
        generator_matrix(Process.MICRO, LatticeSpec(15, 1, 1), PotentialModel(1.0))


def test_generator_hand_computed():
    generator = generator_matrix(Process.MICRO, LatticeSpec(2, 1, 1), PotentialModel(2.0))
    e = math.exp(-1.0)
    expected = np.array([[-2.0, 1.0, 1.0, 0.0],
                         [1.0, -2.0, 0.0, 1.0],
                         [1.0, 0.0, -2.0, 1.0],
                         [0.0, e, e, -2.0 * e]])

    assert generator == pytest.approx(expected)


@pytest.mark.parametrize("process, spec",
                         [
                             (Process.MICRO, LatticeSpec(6, 1, 2)),
                             (Process.COARSE, LatticeSpec(12, 4, 3)),
                             (Process.SYNTHETIC, LatticeSpec(8, 2, 2)),
                         ])
def test_generator_rows_sum_to_zero(process, spec):
    generator = generator_matrix(process, spec, PotentialModel(3.0, beta=1.0, h=0.2))

    assert np.abs(generator.sum(axis=1)).max() <= 1e-12
    assert np.all(generator - np.diag(np.diag(generator)) >= 0)


def test_coarse_generator_at_q1_is_the_micro_generator():
    spec = LatticeSpec(6, 1, 2)
    model = PotentialModel(2.5, beta=1.3, h=0.1)

    assert np.array_equal(generator_matrix(Process.COARSE, spec, model), generator_matrix(Process.MICRO, spec, model))


def test_stationary_two_states():
    a, b = 0.3, 1.7

    assert stationary_distribution(np.array([[-a, a], [b, -b]])) == pytest.approx([b / (a + b), a / (a + b)])


def _oracle_instances():
    rng = np.random.default_rng(2026)
    instances = []
    for n_sites in (4, 6, 8):
        for interaction_range in (1, 2):
            beta = float(rng.uniform(0.0, 6.0))
            instances.append((Process.MICRO, LatticeSpec(n_sites, 1, interaction_range),
                              PotentialModel.from_beta_j0(2.0, beta=beta) if beta > 0 else PotentialModel(2.0, beta=0.0)))
    instances.extend([
        (Process.MICRO, LatticeSpec(8, 1, 2), PotentialModel(2.0, c0=0.2)),
        (Process.COARSE, LatticeSpec(6, 2, 1), PotentialModel(2.0, beta=1.5, h=0.3)),
        (Process.COARSE, LatticeSpec(6, 2, 2), PotentialModel(4.0)),
        (Process.COARSE, LatticeSpec(8, 2, 2), PotentialModel(6.0, c0=0.07)),
        (Process.COARSE, LatticeSpec(12, 4, 3), PotentialModel(3.0, beta=2.0)),
        (Process.SYNTHETIC, LatticeSpec(8, 2, 2), PotentialModel(3.0, h=-0.2)),
    ])
    return instances


@pytest.mark.parametrize("process, spec, model", _oracle_instances())
def test_stationary_distribution_is_gibbs(process, spec, model):
    generator = generator_matrix(process, spec, model)
    pi = stationary_distribution(generator)

    assert total_variation(pi, gibbs_measure(process, spec, model)) <= 1e-10
    assert np.abs(pi @ generator).max() <= 1e-10


@pytest.mark.parametrize("process, spec, model", _oracle_instances())
def test_detailed_balance(process, spec, model):
    assert detailed_balance_audit(process, spec, model) <= 1e-10


def test_detailed_balance_negative_control():
    spec = LatticeSpec(6, 2, 2)
    model = PotentialModel(4.0)
    states = StateIndex(Process.COARSE, spec)
    generator = generator_matrix(Process.COARSE, spec, model)
    np.fill_diagonal(generator, 0.0)
    for s, config in enumerate(states.configs()):
        if config[0] > 0:
            generator[s, s - states.unit_weights[0]] *= 2.0
    np.fill_diagonal(generator, -generator.sum(axis=1))

    assert detailed_balance_audit(Process.COARSE, spec, model, generator=generator) > 0.1


def test_rate_gap():
    model = PotentialModel(2.0, beta=1.0, h=0.1)
    rng = np.random.default_rng(8)
    mean_gap = []
    for q in (2, 5, 10):
        spec = LatticeSpec(100, q, 10)
        gaps = []
        for _ in range(100):
            sigma = MicroConfig(rng.integers(0, 2, 100), spec)
            gap = exact_coarse_rate_gap(spec, model, sigma)
            assert np.array_equal(gap.exact_adsorption, gap.approx_adsorption)
            gaps.append(np.abs(gap.exact_desorption - gap.approx_desorption).sum())
        mean_gap.append(np.mean(gaps))
    assert mean_gap[0] < mean_gap[1] < mean_gap[2]

    spec = LatticeSpec(20, 1, 3)
    gap = exact_coarse_rate_gap(spec, model, MicroConfig(rng.integers(0, 2, 20), spec))
    assert gap.exact_desorption == pytest.approx(gap.approx_desorption, abs=1e-14)


def test_project_measure():
    spec = LatticeSpec(4, 2, 1)
    uniform = np.full(16, 1 / 16)

    assert project_measure(uniform, spec) == pytest.approx(np.outer([1, 2, 1], [1, 2, 1]).T.ravel() / 16)


def test_data_processing_inequality():
    spec = LatticeSpec(8, 2, 2)
    for beta_a, beta_b in ((0.5, 1.0), (1.0, 3.0), (2.0, 0.1)):
        mu_a = gibbs_measure(Process.MICRO, spec, PotentialModel(3.0, beta=beta_a, h=0.2))
        mu_b = gibbs_measure(Process.MICRO, spec, PotentialModel(3.0, beta=beta_b, h=0.2))
        coarse = relative_entropy(project_measure(mu_a, spec), project_measure(mu_b, spec))
        assert coarse <= relative_entropy(mu_a, mu_b) + 1e-12
