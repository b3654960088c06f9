"""
Kinetic Monte Carlo for the microscopic, coarse-grained and synthetic processes.

The three processes
-------------------

* ``Process.MICRO``: the spin-flip process ``sigma_t`` on the ``N`` sites with Arrhenius rates

  ::

      adsorption  c_a(x) = d0 (1 - sigma(x))
      desorption  c_d(x) = P sigma(x) exp(-beta U(x, sigma))

* ``Process.COARSE``: the block-spin process ``eta_t`` on the ``M`` cells

  ::

      adsorption  c_a(k) = d0 (q - eta(k))
      desorption  c_d(k) = P eta(k) exp(-beta Ubar(k, eta))

* ``Process.SYNTHETIC``: a process ``gamma_t`` with microscopic resolution driven by the coarse
  field of the cell each site lives in. Its projection has the law of the coarse process.

``P`` is the desorption prefactor of the model (``d0`` in field mode, ``d0 / c0`` in grouped mode).

The loop
--------

Every iteration draws ``rho1, rho2`` (and ``u`` with exponential waiting times) in that
order, chooses adsorption iff ``rho1 < R_a / R_T``, finds the smallest unit ``l`` with
``sum_{j <= l} c(j) >= rho2 * R`` and advances the time by ``1 / R_T`` (``paper`` time steps)
or ``-ln(u) / R_T`` (``exponential`` time steps). There are no null steps.

Rates are either recomputed for every unit after each event (``global`` updating) or only for
the units within interaction range of the event (``local`` updating). Local updating keeps the
integer window counts of every unit and shifts them by one over the ``2L`` units that see the
event, so its cost per event is linear in ``L``. Global updating counts every window afresh.
The counts are exact and both go through the same per-unit routine and the same sum tree, so
both drive exactly the same event sequence.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import collections.abc
import enum
import logging
import math

import numpy as np

from .exceptions import AbsorbingStateError, IllegalEventError, LatticeSpecError
from .lattice import (CoarseConfig, MicroConfig, coupling_kernel, interaction_field, project,
                      resolve_cell_field, shift_window_counts, window_counts)
from .sumtree import LinearScan, SumTree

logger = logging.getLogger(__name__)

KmcEvent = collections.namedtuple("KmcEvent", ["kind", "location", "dt"])

TrajectorySample = collections.namedtuple("TrajectorySample", ["t", "coverage", "snapshot"])

# Unit of every event and its sign, +1 for adsorption and -1 for desorption
EventLog = collections.namedtuple("EventLog", ["locations", "deltas"])

# Uniform draws are generated this many steps at a time
_DRAW_BLOCK = 4096


class Process(enum.Enum):
    MICRO = "micro"
    COARSE = "coarse"
    SYNTHETIC = "synthetic"


class EventKind(enum.Enum):
    ADSORB = "adsorb"
    DESORB = "desorb"


class TimeStep(enum.Enum):
    PAPER = "paper"
    EXPONENTIAL = "exponential"


def realization_rng(master_seed, index, stream=None):
    """
    The counter-based random stream of realization ``index``.

    Realization ``i`` always draws from ``(master_seed, i)``, whatever the coarse-graining
    level, so runs at different ``q`` are paired by construction. Auxiliary streams (initial
    states, reconstructions) are addressed by an extra ``stream`` number.

    :rtype: numpy.random.Generator
    """
    entropy = [int(master_seed), int(index)] + ([] if stream is None else [int(stream)])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


class RateTable:
    """
    Adsorption and desorption rates per unit (site or cell) together with their totals.

    :param adsorption: Adsorption rate per unit
    :type adsorption: numpy.ndarray
    :param desorption: Desorption rate per unit
    :type desorption: numpy.ndarray
    :param search: ``tree`` (sum tree) or ``linear`` (reference cumulative scan)
    :type search: str
    """
    def __init__(self, adsorption, desorption, search="tree"):
        if search not in ("tree", "linear"):
            raise ValueError(f"Unknown search structure {search}")
        structure = SumTree if search == "tree" else LinearScan
        self._search = search
        self._adsorption = structure(adsorption)
        self._desorption = structure(desorption)

    @property
    def search(self):
        return self._search

    @property
    def adsorption(self):
        return self._adsorption.values.copy()

    @property
    def desorption(self):
        return self._desorption.values.copy()

    @property
    def total_a(self):
        return self._adsorption.total

    @property
    def total_d(self):
        return self._desorption.total

    @property
    def total(self):
        return self.total_a + self.total_d

    def __len__(self):
        return self._adsorption.size

    def copy(self):
        return RateTable(self._adsorption.values, self._desorption.values, self._search)

    def patch(self, units, adsorption, desorption):
        self._adsorption.update(units, adsorption)
        self._desorption.update(units, desorption)

    def rebuild(self, adsorption, desorption):
        self._adsorption.rebuild(adsorption)
        self._desorption.rebuild(desorption)

    def find(self, kind, target):
        structure = self._adsorption if kind is EventKind.ADSORB else self._desorption
        return structure.find(target)


class RateModel:
    """
    Per-unit rate evaluation and interaction neighbourhoods of one process.

    :param process: The process whose rates are evaluated
    :type process: Process
    :param spec: The lattice
    :type spec: LatticeSpec
    :param model: The potential and rate constants
    :type model: PotentialModel
    :param h: Per-site field for the microscopic process, per-cell field for the other two.
              ``None`` uses the model's own field.
    """
    def __init__(self, process, spec, model, h=None):
        self._process = Process(process)
        self._spec = spec
        self._model = model
        if self._process is Process.MICRO:
            self._kernel = coupling_kernel(spec, model, "micro")
            self._h = model.site_field(spec, h)
        else:
            self._kernel = coupling_kernel(spec, model, "coarse")
            self._h = resolve_cell_field(spec, model, h)
        offsets = self._kernel.offsets
        self._around = np.unique(np.concatenate(([0], offsets, -offsets)))

    @property
    def process(self):
        return self._process

    @property
    def spec(self):
        return self._spec

    @property
    def model(self):
        return self._model

    @property
    def n_units(self):
        return self._spec.n_cells if self._process is Process.COARSE else self._spec.n_sites

    @property
    def capacity(self):
        return self._spec.coarse_q if self._process is Process.COARSE else 1

    @property
    def kernel(self):
        return self._kernel

    def rates(self, occupancy, blocks, units, counts=None):
        """
        Adsorption and desorption rates of a set of units.

        :param occupancy: Occupancy per unit of the process
        :type occupancy: numpy.ndarray
        :param blocks: Block spins (only read by the synthetic process)
        :type blocks: numpy.ndarray
        :param units: Units to evaluate
        :type units: numpy.ndarray
        :param counts: Maintained window counts over the units of the kernel (cells for the
                       synthetic process). Recomputed from the occupancy if omitted.
        :type counts: numpy.ndarray
        """
        units = np.asarray(units, dtype=np.int64)
        occupied = occupancy[units]
        if self._process is Process.SYNTHETIC:
            cells, where = np.unique(units // self._spec.coarse_q, return_inverse=True)
            energy = (interaction_field(blocks, self._kernel, cells, counts) - self._h[cells])[where]
        else:
            energy = interaction_field(occupancy, self._kernel, units, counts) - self._h[units]
        model = self._model
        adsorption = model.d0 * (self.capacity - occupied)
        with np.errstate(over="ignore"):
            desorption = np.where(occupied > 0,
                                  model.desorption_prefactor * occupied * np.exp(-model.beta * energy),
                                  0.0)
        return adsorption, desorption

    def affected_units(self, location):
        """
        Units whose rates can change when the occupancy of ``location`` changes.
        """
        if self._process is Process.SYNTHETIC:
            q = self._spec.coarse_q
            cells = np.unique((location // q + self._around) % self._spec.n_cells)
            return (cells[:, None] * q + np.arange(q)[None, :]).ravel()
        return np.unique((location + self._around) % self.n_units)

    def table(self, occupancy, blocks=None, search="tree", counts=None):
        adsorption, desorption = self.rates(occupancy, blocks, np.arange(self.n_units), counts)
        return RateTable(adsorption, desorption, search)


def _occupancy_of(config):
    return np.array(config.values, dtype=np.int64)


def micro_rates(spec, model, sigma, h_field=None, search="tree"):
    """
    Arrhenius rates of the microscopic process.

    :param sigma: The configuration
    :type sigma: MicroConfig
    :param h_field: Per-site field (scalar broadcast allowed)
    :rtype: RateTable
    """
    return RateModel(Process.MICRO, spec, model, h_field).table(_occupancy_of(sigma), search=search)


def coarse_rates(spec, model, eta, h_bar=None, search="tree"):
    """
    Approximate (closed) rates of the coarse-grained process.

    :param eta: The block-spin configuration
    :type eta: CoarseConfig
    :param h_bar: Per-cell field
    :rtype: RateTable
    """
    return RateModel(Process.COARSE, spec, model, h_bar).table(_occupancy_of(eta), search=search)


def synthetic_rates(spec, model, gamma, h_bar=None, search="tree"):
    """
    Rates of the synthetic process: ``c(x) = d0 (1 - gamma(x)) + P gamma(x) exp(-beta Ubar(k(x), T gamma))``.

    :param gamma: The microscopic configuration of the synthetic process
    :type gamma: MicroConfig
    :rtype: RateTable
    """
    occupancy = _occupancy_of(gamma)
    blocks = _occupancy_of(project(spec, gamma))
    return RateModel(Process.SYNTHETIC, spec, model, h_bar).table(occupancy, blocks, search=search)


def select_event(table, rho1, rho2, u=None, time_step=TimeStep.PAPER):
    """
    Choose the next event from a rate table.

    :param table: Rates of the current configuration
    :type table: RateTable
    :param rho1: Uniform draw choosing between adsorption and desorption
    :type rho1: float
    :param rho2: Uniform draw locating the event
    :type rho2: float
    :param u: Uniform draw in ``(0, 1]`` for the exponential waiting time
    :type u: float
    :param time_step: ``paper`` (``dt = 1/R_T``) or ``exponential`` (``dt = -ln(u)/R_T``)
    :type time_step: TimeStep
    :rtype: KmcEvent
    """
    total_a, total_d = table.total_a, table.total_d
    total = total_a + total_d
    if not total > 0.0:
        raise AbsorbingStateError("Total rate is zero, the process cannot leave its state")
    if rho1 < total_a / total:
        kind, target = EventKind.ADSORB, rho2 * total_a
    else:
        kind, target = EventKind.DESORB, rho2 * total_d
    location = table.find(kind, target)
    if TimeStep(time_step) is TimeStep.PAPER:
        dt = 1.0 / total
    else:
        if u is None:
            raise ValueError("Exponential time steps need a third uniform draw")
        dt = -math.log(u) / total
    return KmcEvent(kind=kind, location=location, dt=dt)


def _apply_raw(occupancy, capacity, kind, location):
    if kind is EventKind.ADSORB:
        if occupancy[location] >= capacity:
            raise IllegalEventError(f"Cannot adsorb at full unit {location}")
        occupancy[location] += 1
    else:
        if occupancy[location] <= 0:
            raise IllegalEventError(f"Cannot desorb from empty unit {location}")
        occupancy[location] -= 1


def apply_event(config, event):
    """
    Return the configuration that results from an event.

    :param config: Microscopic or coarse configuration
    :type config: MicroConfig | CoarseConfig
    :param event: The event
    :type event: KmcEvent
    """
    occupancy = _occupancy_of(config)
    if isinstance(config, CoarseConfig):
        _apply_raw(occupancy, config.spec.coarse_q, event.kind, event.location)
        return CoarseConfig(occupancy, config.spec)
    _apply_raw(occupancy, 1, event.kind, event.location)
    return MicroConfig(occupancy, config.spec)


def local_update(spec, model, config, table, event, process=None, h=None):
    """
    Patch the rate table of the pre-event configuration into that of ``config``, the
    configuration *after* ``event``, recomputing only units within interaction range of it.

    :param config: The post-event configuration
    :type config: MicroConfig | CoarseConfig
    :param table: Rate table of the pre-event configuration (left untouched)
    :type table: RateTable
    :param process: Defaults to ``COARSE`` for a ``CoarseConfig`` and ``MICRO`` otherwise;
                    pass ``SYNTHETIC`` for the synthetic process
    :type process: Process
    :rtype: RateTable
    """
    if process is None:
        process = Process.COARSE if isinstance(config, CoarseConfig) else Process.MICRO
    rate_model = RateModel(process, spec, model, h)
    occupancy = _occupancy_of(config)
    blocks = _occupancy_of(project(spec, config)) if rate_model.process is Process.SYNTHETIC else None
    units = rate_model.affected_units(event.location)
    patched = table.copy()
    patched.patch(units, *rate_model.rates(occupancy, blocks, units))
    return patched


class Trajectory(collections.abc.Sequence):
    """
    The record of one realization: time-stamped coverage samples and configuration snapshots.

    Indexing yields ``TrajectorySample`` tuples; the raw arrays are available as ``times`` and
    ``coverage``.
    """
    def __init__(self, process, spec, times, coverage, snapshots, n_events, final_config, event_log=None):
        self._process = process
        self._spec = spec
        self._times = np.asarray(times, dtype=np.float64)
        self._coverage = np.asarray(coverage, dtype=np.float64)
        self._snapshots = dict(snapshots)
        self._n_events = n_events
        self._final_config = final_config
        self._event_log = event_log

    @property
    def process(self):
        return self._process

    @property
    def spec(self):
        return self._spec

    @property
    def times(self):
        return self._times

    @property
    def coverage(self):
        return self._coverage

    @property
    def snapshots(self):
        return self._snapshots

    @property
    def n_events(self):
        return self._n_events

    @property
    def final_config(self):
        return self._final_config

    @property
    def event_log(self):
        """
        The ``EventLog`` of the run, ``None`` unless it was recorded.
        """
        return self._event_log

    def __len__(self):
        return self._times.size

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[k] for k in range(*idx.indices(len(self)))]
        t = float(self._times[idx])
        return TrajectorySample(t=t, coverage=float(self._coverage[idx]), snapshot=self._snapshots.get(t))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return realization_rng(*seed)
    return realization_rng(seed, 0)


def run_trajectory(process, spec, model, init, t_final, sampling="event", seed=0, h=None,
                   time_step=TimeStep.PAPER, updating="local", search="tree", snapshot_times=(),
                   stop_coverage=None, max_events=None, record_events=False):
    """
    Simulate one realization of a process up to ``t_final``.

    :param process: Which process to simulate
    :type process: Process
    :param spec: The lattice (its ``coarse_q`` sets the level of the coarse and synthetic processes)
    :type spec: LatticeSpec
    :param model: Potential and rate constants
    :type model: PotentialModel
    :param init: Initial configuration. A ``MicroConfig`` is projected for the coarse process.
    :type init: MicroConfig | CoarseConfig
    :param t_final: Final simulation time (``>= 0``)
    :type t_final: float
    :param sampling: ``"event"`` to record after every event, or a positive float ``dt_out``
                     to record the piecewise-constant coverage on the grid ``0, dt_out, ...``
    :param seed: A ``numpy.random.Generator``, a ``(master_seed, index)`` pair or an integer
                 master seed (realization ``0``)
    :param h: Field override, see ``RateModel``
    :param time_step: ``paper`` or ``exponential``
    :type time_step: TimeStep
    :param updating: ``local`` or ``global`` rate updates
    :type updating: str
    :param search: ``tree`` or ``linear`` event search
    :type search: str
    :param snapshot_times: Times at which the configuration is stored
    :type snapshot_times: list[float]
    :param stop_coverage: If given, the run stops at the first event reaching this coverage;
                          that event is always recorded
    :type stop_coverage: float
    :param max_events: Optional cap on the number of events
    :type max_events: int
    :param record_events: Keep the location and sign of every event in ``Trajectory.event_log``
    :type record_events: bool
    :rtype: Trajectory
    """
    process = Process(process)
    time_step = TimeStep(time_step)
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, received {t_final}")
    if updating not in ("local", "global"):
        raise ValueError(f"Unknown updating mode {updating}")
    if sampling != "event" and not (isinstance(sampling, (int, float)) and sampling > 0):
        raise ValueError(f"sampling must be 'event' or a positive time step, received {sampling}")

    if process is Process.COARSE:
        if isinstance(init, MicroConfig):
            init = project(spec, init)
        occupancy = _occupancy_of(init)
        if occupancy.size != spec.n_cells:
            raise LatticeSpecError(f"Coarse initial state has {occupancy.size} cells, expected {spec.n_cells}")
    else:
        occupancy = _occupancy_of(init)
        if occupancy.size != spec.n_sites:
            raise LatticeSpecError(f"Initial state has {occupancy.size} sites, expected {spec.n_sites}")

    rate_model = RateModel(process, spec, model, h)
    capacity = rate_model.capacity
    blocks = None
    if process is Process.SYNTHETIC:
        blocks = occupancy.reshape(spec.n_cells, spec.coarse_q).sum(axis=1)
    all_units = np.arange(rate_model.n_units)
    kernel = rate_model.kernel
    counts = None
    if updating == "local":
        counts = window_counts(occupancy if blocks is None else blocks, kernel, np.arange(kernel.n_units))
    table = rate_model.table(occupancy, blocks, search, counts)
    locations, deltas = [], []

    rng = _as_rng(seed)
    n_draws = 2 if time_step is TimeStep.PAPER else 3
    draws, row = None, _DRAW_BLOCK

    def config_now():
        if process is Process.COARSE:
            return CoarseConfig(occupancy, spec)
        return MicroConfig(occupancy, spec)

    n_particles = int(occupancy.sum())
    n_sites = spec.n_sites
    times, coverage = [0.0], [n_particles / n_sites]
    grid_step = None if sampling == "event" else float(sampling)
    next_grid = 1
    pending_snapshots = sorted(float(s) for s in snapshot_times if 0.0 <= s <= t_final)
    snapshots = {}

    def flush_until(t_limit, inclusive):
        # Record grid points and snapshots that precede the next state change
        nonlocal next_grid
        while pending_snapshots and (pending_snapshots[0] < t_limit or (inclusive and pending_snapshots[0] <= t_limit)):
            snapshots[pending_snapshots.pop(0)] = config_now()
        if grid_step is None:
            return
        while True:
            g = next_grid * grid_step
            if g > t_final or g > t_limit or (g == t_limit and not inclusive):
                break
            times.append(g)
            coverage.append(n_particles / n_sites)
            next_grid += 1

    t = 0.0
    n_events = 0
    stopped = stop_coverage is not None and coverage[0] >= stop_coverage
    while not stopped and (max_events is None or n_events < max_events):
        if row == _DRAW_BLOCK:
            draws, row = rng.random((_DRAW_BLOCK, n_draws)), 0
        rho = draws[row]
        row += 1
        event = select_event(table, rho[0], rho[1],
                             None if time_step is TimeStep.PAPER else 1.0 - rho[2],
                             time_step)
        t_next = t + event.dt
        if t_next > t_final:
            break
        flush_until(t_next, inclusive=False)

        _apply_raw(occupancy, capacity, event.kind, event.location)
        delta = 1 if event.kind is EventKind.ADSORB else -1
        n_particles += delta
        if blocks is not None:
            blocks[event.location // spec.coarse_q] += delta
        if counts is not None:
            shift_window_counts(counts, kernel, event.location if blocks is None else event.location // spec.coarse_q,
                                delta)
        if record_events:
            locations.append(event.location)
            deltas.append(delta)
        if updating == "local":
            units = rate_model.affected_units(event.location)
            table.patch(units, *rate_model.rates(occupancy, blocks, units, counts))
        else:
            table.rebuild(*rate_model.rates(occupancy, blocks, all_units))
        t = t_next
        n_events += 1

        stopped = stop_coverage is not None and n_particles / n_sites >= stop_coverage
        if grid_step is None or (stopped and times[-1] < t):
            times.append(t)
            coverage.append(n_particles / n_sites)

    if stopped or (max_events is not None and n_events >= max_events):
        # The state is only known up to the last event
        while pending_snapshots and pending_snapshots[0] <= t:
            snapshots[pending_snapshots.pop(0)] = config_now()
    else:
        flush_until(t_final, inclusive=True)

    logger.debug("%s trajectory (q=%d): %d events, t=%g, coverage=%g",
                 process.value, spec.coarse_q, n_events, t, n_particles / n_sites)
    event_log = None
    if record_events:
        event_log = EventLog(np.array(locations, dtype=np.int64), np.array(deltas, dtype=np.int64))
    return Trajectory(process, spec, times, coverage, snapshots, n_events, config_now(), event_log)
