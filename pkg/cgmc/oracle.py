"""
Exact ground truth for tiny lattices.

Every configuration of a small lattice is enumerated, so that Gibbs measures, generator
matrices and stationary distributions can be computed exactly (dense linear algebra). These
are the references against which the sampler and its detailed balance are checked.

State indexing
--------------

* Microscopic states (``2^N``): bit ``x`` of the index is ``sigma(x)``.
* Coarse states (``(q+1)^M``): digit ``k`` (base ``q + 1``, least significant first) is ``eta(k)``.

Equilibrium measures
--------------------

::

    micro      mu(sigma) ~ exp(-beta H(sigma)) a^n(sigma)
    coarse     mu(eta)   ~ exp(-beta Hbar(eta)) a^n(eta) prod_k binom(q, eta(k)) / 2^q
    synthetic  mu(gamma) ~ mu_coarse(T gamma) / prod_k binom(q, eta(k))

where ``a = d0 / P`` is the per-particle activity of the model (``1`` in field mode). The
synthetic measure is the uniform reconstruction of the coarse one and is the reversible
measure of the synthetic process.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import logging

import numpy as np
import scipy.linalg
import scipy.special

from .analysis import kl_divergence
from .exceptions import StateSpaceTooLargeError
from .kmc import Process, RateModel
from .lattice import coupling_kernel, resolve_cell_field

logger = logging.getLogger(__name__)

# Largest state space a Gibbs measure is enumerated over
GIBBS_STATE_CAP = 2 ** 20
# Largest state space a dense generator is built for
GENERATOR_STATE_CAP = 2 ** 14

RateGap = collections.namedtuple("RateGap", ["exact_adsorption", "approx_adsorption",
                                             "exact_desorption", "approx_desorption"])


class StateIndex:
    """
    Bijection between the configurations of a lattice level and dense indices.

    :param level: ``MICRO`` / ``SYNTHETIC`` (site configurations) or ``COARSE`` (block spins)
    :type level: Process
    :param spec: The lattice
    :type spec: LatticeSpec
    """
    def __init__(self, level, spec):
        self._level = Process(level)
        self._spec = spec
        if self._level is Process.COARSE:
            self._n_units, self._base = spec.n_cells, spec.coarse_q + 1
        else:
            self._n_units, self._base = spec.n_sites, 2
        self._weights = self._base ** np.arange(self._n_units, dtype=np.int64)

    @property
    def n_units(self):
        return self._n_units

    @property
    def base(self):
        return self._base

    @property
    def n_states(self):
        return self._base ** self._n_units

    @property
    def unit_weights(self):
        """
        Index increment caused by adding one particle to each unit.
        """
        return self._weights

    def config(self, index):
        return (index // self._weights) % self._base

    def index(self, config):
        return int(np.dot(np.asarray(config, dtype=np.int64), self._weights))

    def configs(self):
        """
        All configurations, one row per state index.

        :rtype: numpy.ndarray
        """
        indices = np.arange(self.n_states, dtype=np.int64)
        return (indices[:, None] // self._weights[None, :]) % self._base


def _check_size(n_states, cap):
    if n_states > cap:
        raise StateSpaceTooLargeError(f"{n_states} states exceed the enumeration cap of {cap}")


def _pair_matrix(kernel):
    n = kernel.n_units
    matrix = np.zeros((n, n))
    rows = np.arange(n)
    for offset, weight in zip(kernel.offsets, kernel.weights):
        matrix[rows, (rows + offset) % n] += weight
    return matrix


def _coarse_log_weights(spec, model, blocks, h_bar):
    kernel = coupling_kernel(spec, model, "coarse")
    e = blocks.astype(np.float64)
    energy = -0.5 * np.einsum("si,ij,sj->s", e, _pair_matrix(kernel), e)
    if kernel.capacity > 1:
        energy -= 0.5 * kernel.self_weight * (e * (e - 1.0)).sum(axis=1)
    energy += e @ h_bar
    return -model.beta * energy + e.sum(axis=1) * np.log(model.activity)


def _normalise(log_weights):
    weights = np.exp(log_weights - log_weights.max())
    return weights / weights.sum()


def gibbs_measure(level, spec, model, h=None):
    """
    The equilibrium measure of a lattice level as a probability vector over ``StateIndex`` order.

    :param level: ``MICRO``, ``COARSE`` (binomial prior) or ``SYNTHETIC`` (reconstructed coarse)
    :type level: Process
    :param h: Per-site field for ``MICRO``, per-cell field otherwise; ``None`` uses the model's
    :rtype: numpy.ndarray
    """
    level = Process(level)
    states = StateIndex(level, spec)
    _check_size(states.n_states, GIBBS_STATE_CAP)
    configs = states.configs()

    if level is Process.MICRO:
        kernel = coupling_kernel(spec, model, "micro")
        s = configs.astype(np.float64)
        energy = -0.5 * np.einsum("si,ij,sj->s", s, _pair_matrix(kernel), s) + s @ model.site_field(spec, h)
        log_weights = -model.beta * energy + s.sum(axis=1) * np.log(model.activity)
    elif level is Process.COARSE:
        h_bar = resolve_cell_field(spec, model, h)
        log_weights = _coarse_log_weights(spec, model, configs, h_bar)
        log_weights += scipy.special.gammaln(spec.coarse_q + 1) * spec.n_cells
        log_weights -= (scipy.special.gammaln(configs + 1) + scipy.special.gammaln(spec.coarse_q - configs + 1)).sum(axis=1)
        log_weights -= spec.n_sites * np.log(2.0)
    else:
        h_bar = resolve_cell_field(spec, model, h)
        blocks = configs.reshape(-1, spec.n_cells, spec.coarse_q).sum(axis=2)
        # The binomial prior of the coarse measure cancels against the reconstruction
        log_weights = _coarse_log_weights(spec, model, blocks, h_bar)
    return _normalise(log_weights)


def generator_matrix(process, spec, model, h=None):
    """
    Dense generator ``Q`` of a process: ``Q[s, s']`` is the rate of the jump ``s -> s'`` and rows
    sum to zero.

    :param process: ``MICRO``, ``COARSE`` or ``SYNTHETIC``
    :type process: Process
    :rtype: numpy.ndarray
    """
    process = Process(process)
    states = StateIndex(process, spec)
    _check_size(states.n_states, GENERATOR_STATE_CAP)
    rate_model = RateModel(process, spec, model, h)
    units = np.arange(states.n_units)
    steps = states.unit_weights
    generator = np.zeros((states.n_states, states.n_states))
    for s, occupancy in enumerate(states.configs()):
        blocks = None
        if process is Process.SYNTHETIC:
            blocks = occupancy.reshape(spec.n_cells, spec.coarse_q).sum(axis=1)
        adsorption, desorption = rate_model.rates(occupancy, blocks, units)
        up = adsorption > 0
        down = desorption > 0
        generator[s, s + steps[up]] += adsorption[up]
        generator[s, s - steps[down]] += desorption[down]
    generator[np.diag_indices_from(generator)] = -generator.sum(axis=1)
    return generator


def stationary_distribution(matrix):
    """
    The unique ``pi`` with ``pi Q = 0`` and ``sum(pi) = 1`` of an irreducible generator.

    :param matrix: Generator with rows summing to zero
    :type matrix: numpy.ndarray
    :rtype: numpy.ndarray
    """
    n = matrix.shape[0]
    system = matrix.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = scipy.linalg.solve(system, rhs)
    if pi.min() < -1e-10:
        raise ValueError("The generator is not irreducible")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def detailed_balance_audit(process, spec, model, h=None, generator=None):
    """
    Largest relative violation of ``c(s -> s') mu(s) == c(s' -> s) mu(s')`` over all transitions,
    with ``mu`` the equilibrium measure of the process.

    :param generator: Generator to audit instead of the process' own (e.g. a corrupted one)
    :type generator: numpy.ndarray
    :rtype: float
    """
    process = Process(process)
    mu = gibbs_measure(process, spec, model, h)
    if generator is None:
        generator = generator_matrix(process, spec, model, h)
    flux = mu[:, None] * generator
    np.fill_diagonal(flux, 0.0)
    larger = np.maximum(flux, flux.T)
    active = larger > 0.0
    if not active.any():
        return 0.0
    violation = float((np.abs(flux - flux.T)[active] / larger[active]).max())
    logger.debug("detailed balance audit of %s process: max violation %g", process.value, violation)
    return violation


def exact_coarse_rate_gap(spec, model, sigma, h_field=None):
    """
    Cell rates obtained by summing the microscopic rates of ``sigma`` over each cell versus the
    closed coarse rates evaluated at ``T sigma``.

    Adsorption is closed exactly (``sum_x d0 (1 - sigma(x)) == d0 (q - eta(k))``); the
    desorption gap is the closure error of the coarse dynamics.

    :rtype: RateGap
    """
    occupancy = np.array(sigma.values if hasattr(sigma, "values") else sigma, dtype=np.int64)
    h = model.site_field(spec, h_field)
    micro = RateModel(Process.MICRO, spec, model, h)
    adsorption, desorption = micro.rates(occupancy, None, np.arange(spec.n_sites))
    blocks = occupancy.reshape(spec.n_cells, spec.coarse_q).sum(axis=1)
    coarse = RateModel(Process.COARSE, spec, model, h.reshape(spec.n_cells, spec.coarse_q).mean(axis=1))
    approx_adsorption, approx_desorption = coarse.rates(blocks, None, np.arange(spec.n_cells))
    return RateGap(exact_adsorption=adsorption.reshape(spec.n_cells, spec.coarse_q).sum(axis=1),
                   approx_adsorption=approx_adsorption,
                   exact_desorption=desorption.reshape(spec.n_cells, spec.coarse_q).sum(axis=1),
                   approx_desorption=approx_desorption)


def project_measure(p, spec):
    """
    Pushforward ``T_* p`` of a measure over microscopic states onto the coarse states of ``spec``.

    :rtype: numpy.ndarray
    """
    micro, coarse = StateIndex(Process.MICRO, spec), StateIndex(Process.COARSE, spec)
    blocks = micro.configs().reshape(-1, spec.n_cells, spec.coarse_q).sum(axis=2)
    return np.bincount(blocks @ coarse.unit_weights, weights=p, minlength=coarse.n_states)


def total_variation(p, r):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(r)).sum())


def relative_entropy(p, r):
    """
    Relative entropy (nats) between two measures over the same enumerated state space.
    """
    return kl_divergence(p, r)
