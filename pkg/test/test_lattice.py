"""
Tests the lattice geometry, the potentials and the energies of both levels

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import itertools

import numpy as np
import pytest

from cgmc.analysis import convergence_slope
from cgmc.exceptions import LatticeSpecError
from cgmc.lattice import (CoarseConfig, LatticeSpec, MicroConfig, PotentialModel, cell_field, coarse_field_u,
                          coarse_hamiltonian, coarse_j, coupling_kernel, hamiltonian, initial_config, interaction_field,
                          j_value, micro_field_u, project, reconstruct)


@pytest.mark.parametrize("n_sites, coarse_q, interaction_range, n_cells",
                         [
                             (10, 3, 1, None),
                             (10, 2, 1, 4),
                             (10, 11, 1, None),
                             (10, 1, 6, None),
                             (0, 1, 0, None),
                             (10, 0, 1, None),
                             (10, 1, -1, None),
                         ])
def test_lattice_spec_rejects_bad_geometry(n_sites, coarse_q, interaction_range, n_cells):
    with pytest.raises(LatticeSpecError):
        LatticeSpec(n_sites, coarse_q, interaction_range, n_cells)


def test_lattice_spec_cells():
    spec = LatticeSpec(12, 3, 2)

    assert spec.n_cells == 4
    assert spec.cell_of(7) == 2
    assert spec.cell_sites(2).tolist() == [6, 7, 8]
    assert spec.min_distance(0, 11) == 1
    assert spec.with_q(4) == LatticeSpec(12, 4, 2)


def test_potential_model_modes():
    field = PotentialModel(2.0, h=0.5)
    grouped = PotentialModel(2.0, d0=1.0, c0=0.07)

    assert not field.grouped
    assert field.desorption_prefactor == 1.0
    assert field.activity == 1.0
    assert grouped.grouped
    assert grouped.desorption_prefactor == pytest.approx(1.0 / 0.07)
    assert grouped.activity == pytest.approx(0.07)
    with pytest.raises(LatticeSpecError):
        PotentialModel(2.0, c0=0.07, h=0.5)
    with pytest.raises(LatticeSpecError):
        PotentialModel(2.0, d0=0.0)
    with pytest.raises(LatticeSpecError):
        grouped.site_field(LatticeSpec(4, 1, 1), 0.3)


def test_j_value_uniform():
    spec = LatticeSpec(1000, 1, 100)
    model = PotentialModel(1.0)

    assert j_value(spec, model, 50) == pytest.approx(0.005)
    assert j_value(spec, model, 100) == pytest.approx(0.005)
    assert j_value(spec, model, 101) == 0.0


def test_potential_normalization():
    spec = LatticeSpec(1000, 1, 100)
    model = PotentialModel.from_beta_j0(6.0, beta=1.0)

    assert model.normalization(spec) == pytest.approx(6.0, rel=1e-12)


def test_no_interaction_range():
    spec = LatticeSpec(8, 2, 0)
    model = PotentialModel(3.0)

    assert coupling_kernel(spec, model, "micro").offsets.size == 0
    assert hamiltonian(spec, model, MicroConfig(np.ones(8, dtype=int))) == 0.0


def test_hamiltonian_examples():
    spec = LatticeSpec(4, 1, 1)
    model = PotentialModel(1.0)

    assert hamiltonian(spec, model, MicroConfig([0, 0, 0, 0])) == 0.0
    assert hamiltonian(spec, model, MicroConfig([1, 0, 1, 0])) == 0.0
    assert hamiltonian(spec, model, MicroConfig([1, 1, 1, 1])) == pytest.approx(-4 * 1.0 / 2)

    spec = LatticeSpec(20, 1, 3)
    model = PotentialModel(2.5)
    assert hamiltonian(spec, model, MicroConfig(np.ones(20, dtype=int))) == pytest.approx(-20 * 2.5 / 2)


def test_micro_field_examples():
    spec = LatticeSpec(1000, 1, 100)
    model = PotentialModel(1.0, h=0.25)
    sigma = np.zeros(1000, dtype=int)

    assert micro_field_u(spec, model, sigma, 3) == pytest.approx(-0.25)
    assert micro_field_u(spec, model, np.ones(1000, dtype=int), 3, h_field=0.0) == pytest.approx(1.0)
    sigma[40] = 1
    assert micro_field_u(spec, model, sigma, 3, h_field=0.0) == pytest.approx(0.005)


def test_micro_energy_field_identity():
    """
    Removing the particle at x changes the energy by U(x, sigma), exhaustively on a small lattice.
    """
    spec = LatticeSpec(8, 1, 2)
    model = PotentialModel(1.7, beta=0.9)
    h = np.linspace(-0.5, 0.5, 8)
    for spins in itertools.product((0, 1), repeat=8):
        sigma = np.array(spins)
        energy = hamiltonian(spec, model, sigma, h)
        for x in np.flatnonzero(sigma):
            flipped = sigma.copy()
            flipped[x] = 0
            assert hamiltonian(spec, model, flipped, h) - energy == pytest.approx(
                micro_field_u(spec, model, sigma, x, h), abs=1e-10)


def test_coarse_j_examples():
    spec = LatticeSpec(1000, 10, 100)
    model = PotentialModel(1.0)

    assert coarse_j(spec, model, 3, 4) == pytest.approx(1.0 / 200)
    assert coarse_j(spec, model, 3, 3) == pytest.approx(1.0 / 200)
    assert coarse_j(spec, model, 0, 12) == 0.0

    spec = LatticeSpec(10, 1, 2)
    assert coarse_j(spec, model, 2, 4) == j_value(spec, model, 2)
    assert coarse_j(spec, model, 2, 2) == 0.0


def test_coarse_energy_field_identity():
    """
    Adding a particle to cell k lowers the coarse energy by Ubar(k, eta + delta_k).
    """
    spec = LatticeSpec(9, 3, 2)
    model = PotentialModel(2.0)
    h_bar = np.array([0.1, -0.2, 0.3])
    for blocks in itertools.product(range(4), repeat=3):
        eta = np.array(blocks)
        energy = coarse_hamiltonian(spec, model, eta, h_bar)
        for k in np.flatnonzero(eta < 3):
            raised = eta.copy()
            raised[k] += 1
            assert coarse_hamiltonian(spec, model, raised, h_bar) - energy == pytest.approx(
                -coarse_field_u(spec, model, raised, k, h_bar), abs=1e-10)


def test_coarse_hamiltonian_examples():
    spec = LatticeSpec(12, 4, 2)
    model = PotentialModel(2.0)
    eta = np.zeros(3, dtype=int)

    assert coarse_hamiltonian(spec, model, eta) == 0.0
    eta[1] = 2
    assert coarse_hamiltonian(spec, model, eta) == pytest.approx(-coarse_j(spec, model, 1, 1))
    assert coarse_field_u(spec, model, np.zeros(3, dtype=int), 0, [0.4, 0.4, 0.4]) == pytest.approx(
        -coarse_j(spec, model, 0, 0) - 0.4)


def test_q1_hierarchy_is_exact():
    spec = LatticeSpec(10, 1, 3)
    model = PotentialModel(1.3, h=0.2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        sigma = rng.integers(0, 2, 10)
        eta = project(spec, sigma)
        assert coarse_hamiltonian(spec, model, eta) == hamiltonian(spec, model, sigma)
        for x in range(10):
            assert coarse_field_u(spec, model, eta, x) == micro_field_u(spec, model, sigma, x)


def test_coarse_field_approximates_micro_field():
    """
    The coarse field seen by an occupied site differs from its microscopic field by at most
    ``C q / L``, and the worst case error grows no faster than linearly in q.
    """
    L = 100
    model = PotentialModel(1.0)
    micro = LatticeSpec(1000, 1, L)
    micro_kernel = coupling_kernel(micro, model, "micro")
    sites = np.arange(1000)
    rng = np.random.default_rng(11)
    qs = (2, 5, 10, 20)
    errors = []
    for q in qs:
        spec = LatticeSpec(1000, q, L)
        kernel = coupling_kernel(spec, model)
        worst = 0.0
        for _ in range(3):
            sigma = rng.integers(0, 2, 1000)
            eta = project(spec, sigma).blocks
            gap = np.abs(interaction_field(sigma, micro_kernel, sites)
                         - interaction_field(eta, kernel, np.arange(spec.n_cells))[sites // q])
            worst = max(worst, float(gap[sigma == 1].max()))
        errors.append(worst)
    errors = np.array(errors)
    scaled = errors * L / np.array(qs)
    # At most two partially covered cells on each side of the window, each off by at most q J = q / (2L)
    assert scaled.max() <= 2.0 + 1e-9
    assert np.all(errors > 0)
    assert errors[-1] > errors[0]
    assert convergence_slope(qs, errors).slope <= 1.25

    spec = LatticeSpec(1000, 10, L)
    full = np.full(100, 10)
    assert coarse_field_u(spec, model, full, 4, 0.0) == pytest.approx(1.0, abs=10 / L)


@pytest.mark.parametrize("n_sites, q, spins, blocks",
                         [
                             (6, 3, [1, 0, 1, 0, 0, 1], [2, 1]),
                             (4, 1, [1, 0, 0, 1], [1, 0, 0, 1]),
                             (20, 10, [1] * 20, [10, 10]),
                         ])
def test_project(n_sites, q, spins, blocks):
    assert project(LatticeSpec(n_sites, q, 1), MicroConfig(spins)).blocks.tolist() == blocks


def test_project_reconstruct_round_trip():
    spec = LatticeSpec(12, 4, 1)
    rng = np.random.default_rng(0)
    for blocks in itertools.product(range(5), repeat=3):
        sigma = reconstruct(spec, CoarseConfig(blocks, spec), rng)
        assert project(spec, sigma).blocks.tolist() == list(blocks)


def test_reconstruct_is_uniform():
    spec = LatticeSpec(4, 4, 1)
    rng = np.random.default_rng(5)
    eta = CoarseConfig([2], spec)
    n = 10_000
    counts = np.zeros(4)
    for _ in range(n):
        counts += reconstruct(spec, eta, rng).spins
    # Binomial bound around 0.5
    assert np.all(np.abs(counts / n - 0.5) <= 4 * np.sqrt(0.25 / n))


def test_configs_are_validated():
    spec = LatticeSpec(6, 3, 1)

    with pytest.raises(LatticeSpecError):
        MicroConfig([0, 1, 2])
    with pytest.raises(LatticeSpecError):
        MicroConfig([0, 1, 1], spec)
    with pytest.raises(LatticeSpecError):
        CoarseConfig([4, 0], spec)
    with pytest.raises(ValueError):
        MicroConfig([0, 1, 1]).values[0] = 1


def test_cell_field():
    spec = LatticeSpec(6, 3, 1)

    assert cell_field(spec, [0, 0, 3, 1, 1, 1]).tolist() == [1.0, 1.0]


@pytest.mark.parametrize("kind, kwargs, n_occupied",
                         [
                             ("empty", {}, 0),
                             ("full", {}, 100),
                             ("island", {"island_size": 10}, 10),
                         ])
def test_initial_config(kind, kwargs, n_occupied):
    assert initial_config(LatticeSpec(100, 10, 5), kind, **kwargs).n_occupied == n_occupied


def test_initial_config_uniform():
    spec = LatticeSpec(10_000, 1, 5)
    sigma = initial_config(spec, "uniform", np.random.default_rng(1), coverage=0.5)

    assert abs(sigma.n_occupied / 10_000 - 0.5) < 0.03
    with pytest.raises(LatticeSpecError):
        initial_config(spec, "uniform")
    with pytest.raises(LatticeSpecError):
        initial_config(spec, "checkerboard")
