"""
Lattice geometry, interaction potentials and the energies of the microscopic and
coarse-grained lattice gas.

The lattice
-----------

The microscopic lattice is a one dimensional torus of ``N`` sites. Each site carries an
occupancy ``sigma(x)`` in ``{0, 1}``. The torus is partitioned into ``M`` contiguous cells
of ``q`` sites each (``q * M == N``), cell ``k`` holding sites ``[k*q, (k+1)*q)``.
The block spin ``eta(k)`` of a cell is the number of occupied sites in it.

All distances are periodic minimal-image distances.

The potential
-------------

Sites interact through a pair potential ``J(x - y) = V((x - y) / L) / L`` where ``V`` is an
even profile supported on ``|r| <= 1``. For the ``Uniform`` profile ``V == j0 / 2`` on
its support, so that a site surrounded by ``2L`` neighbours feels a total interaction
strength of exactly ``j0``.

The coarse level averages the pair interactions over pairs of cells:

::

    Jbar(k, l) = 1/q^2        sum_{x in C_k} sum_{y in C_l} J(x - y)           k != l
    Jbar(k, k) = 1/(q(q-1))   sum_{x in C_k} sum_{y in C_k, y != x} J(x - y)

Field modes
-----------

A ``PotentialModel`` is either in *field* mode (an external field ``h`` enters the
local energy and desorption happens with prefactor ``d0``) or in *grouped* mode where
the field is lumped in a single constant ``c0 = exp(-beta h)`` and ``h == 0``. Desorption
then happens with prefactor ``d0 / c0`` and the equilibrium weight of a configuration
acquires a per-particle activity ``c0``. Larger ``c0`` favours adsorption: at
``beta J0 = 6`` and ``c0 = 0.07`` the empty lattice relaxes to a low coverage phase
(``c ~ 0.15``) that is metastable against the full one.

Kernels
-------

Both levels evaluate their fields through the same translation invariant
``CouplingKernel`` (offsets, weights and a within-cell self weight). The microscopic
kernel is the coarse kernel of the ``q = 1`` geometry, so at ``q = 1`` every coarse
quantity is bit-identical to its microscopic counterpart.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import enum
import functools

import numpy as np

from .exceptions import LatticeSpecError

# Largest number of kernel entries gathered at once by window_counts
WINDOW_CHUNK = 1 << 22


CouplingKernel = collections.namedtuple("CouplingKernel", ["n_units", "capacity", "offsets", "weights", "self_weight",
                                                         "class_weights", "class_of", "class_starts"])


class Shape(enum.Enum):
    """
    The profile ``V`` that shapes the pair potential.
    """
    UNIFORM = "uniform"

    def profile(self, r, j0):
        """
        Evaluate ``V(r)`` over an array of scaled distances.

        :param r: Scaled distances ``|x - y| / L``
        :type r: numpy.ndarray
        :param j0: Total interaction strength
        :type j0: float
        """
        r = np.abs(np.asarray(r, dtype=np.float64))
        if self is Shape.UNIFORM:
            return np.where(r <= 1.0, j0 / 2.0, 0.0)
        raise NotImplementedError(f"{self} has no profile")


class LatticeSpec:
    """
    Geometry of the periodic lattice and its partition into coarse cells.

    :param n_sites: Number of microscopic sites ``N``
    :type n_sites: int
    :param coarse_q: Coarse-graining ratio ``q`` (sites per cell)
    :type coarse_q: int
    :param interaction_range: Potential range ``L`` in sites on each side of a site.
                              ``0`` switches interactions off.
    :type interaction_range: int
    :param n_cells: Number of cells ``M``. Derived from ``N`` and ``q`` if omitted; if given it
                    has to satisfy ``q * M == N``.
    :type n_cells: int
    """
    def __init__(self, n_sites, coarse_q=1, interaction_range=1, n_cells=None):
        errors = []
        if int(n_sites) != n_sites or n_sites < 1:
            errors.append(f"n_sites must be a positive integer, received {n_sites}")
        if int(coarse_q) != coarse_q or coarse_q < 1:
            errors.append(f"coarse_q must be a positive integer, received {coarse_q}")
        if int(interaction_range) != interaction_range or interaction_range < 0:
            errors.append(f"interaction_range must be a non-negative integer, received {interaction_range}")
        if errors:
            raise LatticeSpecError("; ".join(errors))

        n_sites, coarse_q, interaction_range = int(n_sites), int(coarse_q), int(interaction_range)
        if coarse_q > n_sites or n_sites % coarse_q != 0:
            raise LatticeSpecError(f"coarse_q={coarse_q} does not divide n_sites={n_sites}")
        if n_cells is not None and n_cells * coarse_q != n_sites:
            raise LatticeSpecError(f"q * M = {coarse_q} * {n_cells} != N = {n_sites}")
        if 2 * interaction_range > n_sites:
            raise LatticeSpecError(f"interaction_range={interaction_range} wraps around a torus of {n_sites} sites")

        self._n_sites = n_sites
        self._coarse_q = coarse_q
        self._interaction_range = interaction_range

    @property
    def n_sites(self):
        return self._n_sites

    @property
    def coarse_q(self):
        return self._coarse_q

    @property
    def n_cells(self):
        return self._n_sites // self._coarse_q

    @property
    def interaction_range(self):
        return self._interaction_range

    def with_q(self, coarse_q):
        """
        Return the same lattice partitioned with a different coarse-graining ratio.
        """
        return LatticeSpec(self._n_sites, coarse_q, self._interaction_range)

    def cell_of(self, x):
        return x // self._coarse_q

    def cell_sites(self, k):
        return np.arange(k * self._coarse_q, (k + 1) * self._coarse_q)

    def min_distance(self, x, y):
        """
        Periodic minimal-image distance between sites (works elementwise over arrays).
        """
        d = np.abs(np.asarray(x) - np.asarray(y)) % self._n_sites
        return np.minimum(d, self._n_sites - d)

    def _key(self):
        return (self._n_sites, self._coarse_q, self._interaction_range)

    def __eq__(self, other):
        return isinstance(other, LatticeSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"LatticeSpec(n_sites={self._n_sites}, coarse_q={self._coarse_q}, interaction_range={self._interaction_range})"


class PotentialModel:
    """
    Interaction strength, temperature and rate constants of the Arrhenius dynamics.

    :param j0: Total interaction strength ``J0 = sum_{y != x} J(x - y)``
    :type j0: float
    :param beta: Inverse temperature
    :type beta: float
    :param d0: Attempt frequency (adsorption rate of an empty site)
    :type d0: float
    :param c0: Grouped field constant ``exp(-beta h)``. If set, the model is in *grouped* mode,
               desorption carries the prefactor ``d0 / c0`` and ``h`` must be zero.
    :type c0: float
    :param h: Constant external field (field mode)
    :type h: float
    :param shape: The profile of the pair potential
    :type shape: Shape
    """
    def __init__(self, j0, beta=1.0, d0=1.0, c0=None, h=0.0, shape=Shape.UNIFORM):
        errors = []
        if beta < 0:
            errors.append(f"beta must be non-negative, received {beta}")
        if d0 <= 0:
            errors.append(f"d0 must be positive, received {d0}")
        if c0 is not None and c0 <= 0:
            errors.append(f"c0 must be positive, received {c0}")
        if c0 is not None and h != 0.0:
            errors.append("c0 and h are mutually exclusive (c0 already groups the field)")
        if errors:
            raise LatticeSpecError("; ".join(errors))
        self._j0 = float(j0)
        self._beta = float(beta)
        self._d0 = float(d0)
        self._c0 = None if c0 is None else float(c0)
        self._h = float(h)
        self._shape = Shape(shape)

    @classmethod
    def from_beta_j0(cls, beta_j0, beta=1.0, **kwargs):
        """
        Build a model from the dimensionless coupling ``beta * J0``.
        """
        if beta <= 0:
            raise LatticeSpecError("beta_j0 can only be split over a positive beta")
        return cls(beta_j0 / beta, beta=beta, **kwargs)

    @property
    def j0(self):
        return self._j0

    @property
    def beta(self):
        return self._beta

    @property
    def d0(self):
        return self._d0

    @property
    def c0(self):
        return self._c0

    @property
    def h(self):
        return self._h

    @property
    def shape(self):
        return self._shape

    @property
    def grouped(self):
        return self._c0 is not None

    @property
    def desorption_prefactor(self):
        return self._d0 / self._c0 if self.grouped else self._d0

    @property
    def activity(self):
        """
        Per-particle equilibrium weight ``d0 / prefactor`` (``c0`` in grouped mode, ``1`` in field mode).
        """
        return self._d0 / self.desorption_prefactor

    def site_field(self, spec, h_field=None):
        """
        Resolve the per-site external field.

        ``None`` falls back to the model's own field. In grouped mode the field is
        folded into ``c0`` and only a zero field is accepted.

        :rtype: numpy.ndarray
        """
        if h_field is None:
            h_field = self._h
        h = np.broadcast_to(np.asarray(h_field, dtype=np.float64), (spec.n_sites,)).copy()
        if self.grouped and np.any(h != 0.0):
            raise LatticeSpecError("A grouped (c0) model does not accept an external field")
        return h

    def normalization(self, spec):
        """
        Return ``sum_{y != x} J(x - y)`` on the given lattice.
        """
        return float(coupling_kernel(spec, self, "micro").weights.sum())

    def _key(self):
        return (self._j0, self._beta, self._d0, self._c0, self._h, self._shape)

    def __eq__(self, other):
        return isinstance(other, PotentialModel) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        mode = f"c0={self._c0}" if self.grouped else f"h={self._h}"
        return f"PotentialModel(j0={self._j0}, beta={self._beta}, d0={self._d0}, {mode}, shape={self._shape.value})"


class _Occupancy:
    """
    Immutable occupancy vector shared by the microscopic and coarse configurations.
    """
    def __init__(self, values, capacity, spec=None, n_units=None):
        values = np.array(values, dtype=np.int64).ravel()
        if n_units is not None and values.size != n_units:
            raise LatticeSpecError(f"{type(self).__name__} expects {n_units} entries, received {values.size}")
        if values.size > 0 and (values.min() < 0 or values.max() > capacity):
            raise LatticeSpecError(f"{type(self).__name__} entries must lie in [0, {capacity}]")
        values.flags.writeable = False
        self._values = values
        self._spec = spec

    @property
    def values(self):
        return self._values

    @property
    def spec(self):
        return self._spec

    @property
    def n_occupied(self):
        return int(self._values.sum())

    def __len__(self):
        return self._values.size

    def __getitem__(self, idx):
        return self._values[idx]

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((type(self).__name__, self._values.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}({self._values.tolist()})"


class MicroConfig(_Occupancy):
    """
    A configuration ``sigma`` of occupancies over the ``N`` sites.

    :param spins: Sequence of ``0/1`` values
    :param spec: If given, the length is validated against ``spec.n_sites``
    :type spec: LatticeSpec
    """
    def __init__(self, spins, spec=None):
        super().__init__(spins, 1, spec, None if spec is None else spec.n_sites)

    @property
    def spins(self):
        return self._values


class CoarseConfig(_Occupancy):
    """
    A configuration ``eta`` of block spins over the ``M`` cells.

    :param blocks: Sequence of cell occupancies in ``[0, q]``
    :param spec: Lattice the configuration lives on
    :type spec: LatticeSpec
    """
    def __init__(self, blocks, spec):
        super().__init__(blocks, spec.coarse_q, spec, spec.n_cells)

    @property
    def blocks(self):
        return self._values


def _j_array(spec, model, dist):
    dist = np.asarray(dist)
    if spec.interaction_range == 0:
        return np.zeros(dist.shape, dtype=np.float64)
    L = spec.interaction_range
    return np.where(dist <= L, model.shape.profile(dist / L, model.j0) / L, 0.0)


def j_value(spec, model, dist):
    """
    The pair potential ``J`` at a (periodic, minimal) site separation.

    :param spec: The lattice
    :type spec: LatticeSpec
    :param model: The potential
    :type model: PotentialModel
    :param dist: Site separation, ``0 <= dist <= N/2``
    :type dist: int
    :rtype: float
    """
    return float(_j_array(spec, model, dist))


@functools.lru_cache(maxsize=64)
def _coarse_j_table(spec, j0, shape):
    # Jbar(0, d) for every cell offset d; translation invariance gives Jbar(k, l) = table[(l - k) % M]
    model = PotentialModel(j0, shape=shape)
    q, M, N = spec.coarse_q, spec.n_cells, spec.n_sites
    x = np.arange(q)[None, :, None]
    y = (np.arange(M)[:, None, None] * q + np.arange(q)[None, None, :])
    pair_j = _j_array(spec, model, spec.min_distance(x, y))
    table = pair_j.sum(axis=(1, 2)) / (q * q)
    if q > 1:
        table[0] = (pair_j[0].sum() - np.trace(pair_j[0])) / (q * (q - 1))
    else:
        table[0] = 0.0
    table.flags.writeable = False
    return table


@functools.lru_cache(maxsize=64)
def _kernel(spec, j0, shape):
    table = _coarse_j_table(spec, j0, shape)
    offsets = np.nonzero(table[1:])[0] + 1
    # Offsets are grouped by weight so that fields reduce to integer counts per distinct weight
    class_weights, class_of = np.unique(table[offsets], return_inverse=True)
    class_of = class_of.ravel()
    order = np.argsort(class_of, kind="stable")
    offsets, class_of = offsets[order], class_of[order]
    class_starts = np.searchsorted(class_of, np.arange(class_weights.size))
    weights = table[offsets]
    for an_array in (offsets, weights, class_weights, class_of, class_starts):
        an_array.flags.writeable = False
    return CouplingKernel(n_units=spec.n_cells,
                          capacity=spec.coarse_q,
                          offsets=offsets,
                          weights=weights,
                          self_weight=float(table[0]),
                          class_weights=class_weights,
                          class_of=class_of,
                          class_starts=class_starts)


def coupling_kernel(spec, model, level="coarse"):
    """
    Return the cached interaction kernel of a lattice level.

    :param level: ``"micro"`` for the site lattice or ``"coarse"`` for the cell lattice of ``spec``
    :type level: str
    :rtype: CouplingKernel
    """
    if level == "micro":
        spec = spec.with_q(1)
    elif level != "coarse":
        raise ValueError(f"Unknown lattice level {level}")
    return _kernel(spec, model.j0, model.shape)


def window_counts(occupancy, kernel, units):
    """
    Occupancy seen by each unit through each distinct weight of the kernel.

    :param occupancy: Occupancy per unit
    :type occupancy: numpy.ndarray
    :param kernel: The kernel of the level
    :type kernel: CouplingKernel
    :param units: Unit indices to evaluate
    :type units: numpy.ndarray
    :returns: An integer array of shape ``(len(units), len(kernel.class_weights))``
    :rtype: numpy.ndarray
    """
    units = np.asarray(units, dtype=np.int64)
    if kernel.offsets.size == 0:
        return np.zeros((units.size, 0), dtype=np.int64)
    occupancy = np.asarray(occupancy, dtype=np.int64)
    counts = np.empty((units.size, kernel.class_weights.size), dtype=np.int64)
    # Long ranges are gathered a bounded number of windows at a time
    rows = max(1, WINDOW_CHUNK // kernel.offsets.size)
    for lo in range(0, units.size, rows):
        window = occupancy[(units[lo:lo + rows, None] + kernel.offsets[None, :]) % kernel.n_units]
        counts[lo:lo + rows] = np.add.reduceat(window, kernel.class_starts, axis=1)
    return counts


def shift_window_counts(counts, kernel, unit, delta):
    """
    Update the window counts of every unit in place after the occupancy of ``unit`` changed by ``delta``.

    Only the ``len(kernel.offsets)`` units that see ``unit`` through the kernel are touched. The
    counts are integers, so they stay equal to a fresh ``window_counts`` however many events
    they went through.

    :param counts: Window counts of every unit
    :type counts: numpy.ndarray
    :param unit: The unit whose occupancy changed
    :type unit: int
    :param delta: ``+1`` for an adsorption, ``-1`` for a desorption
    :type delta: int
    """
    counts[(unit - kernel.offsets) % kernel.n_units, kernel.class_of] += delta


def interaction_field(occupancy, kernel, units, counts=None):
    """
    The interaction part of the local field at a set of units (sites or cells).

    ``sum_o w_o * occ[u + o] + w_self * (occ[u] - 1)``, the self term only present for ``q > 1``.
    The pair sum is evaluated from the window counts, so every unit's value depends only on its
    own window, never on the batch it is computed in or on how its counts were obtained.

    :param occupancy: Occupancy per unit
    :type occupancy: numpy.ndarray
    :param kernel: The kernel of the level
    :type kernel: CouplingKernel
    :param units: Unit indices to evaluate
    :type units: numpy.ndarray
    :param counts: Maintained window counts of every unit; recomputed from ``occupancy`` if omitted
    :type counts: numpy.ndarray
    :rtype: numpy.ndarray
    """
    units = np.asarray(units, dtype=np.int64)
    seen = window_counts(occupancy, kernel, units) if counts is None else counts[units]
    field = (seen * kernel.class_weights).sum(axis=1)
    if kernel.capacity > 1:
        field = field + kernel.self_weight * (occupancy[units] - 1)
    return field


def cell_field(spec, h_field):
    """
    Cell averages ``hbar(k)`` of a per-site field.
    """
    h = np.asarray(h_field, dtype=np.float64)
    if spec.coarse_q == 1:
        return h.copy()
    return h.reshape(spec.n_cells, spec.coarse_q).mean(axis=1)


def resolve_cell_field(spec, model, h_bar):
    if h_bar is None:
        return cell_field(spec, model.site_field(spec))
    h = np.broadcast_to(np.asarray(h_bar, dtype=np.float64), (spec.n_cells,)).copy()
    if model.grouped and np.any(h != 0.0):
        raise LatticeSpecError("A grouped (c0) model does not accept an external field")
    return h


def hamiltonian(spec, model, sigma, h_field=None):
    """
    Microscopic energy ``H = -1/2 sum_x sum_{y != x} J(x - y) s(x) s(y) + sum_x h(x) s(x)``.

    :param sigma: The configuration
    :type sigma: MicroConfig
    :param h_field: Per-site field (scalar broadcast allowed). Defaults to the model's field.
    :rtype: float
    """
    s = np.asarray(sigma.spins if isinstance(sigma, MicroConfig) else sigma, dtype=np.float64)
    kernel = coupling_kernel(spec, model, "micro")
    h = model.site_field(spec, h_field)
    interaction = interaction_field(s, kernel, np.arange(spec.n_sites))
    return float(-0.5 * np.dot(s, interaction) + np.dot(h, s))


def micro_field_u(spec, model, sigma, x, h_field=None):
    """
    Local energy ``U(x, sigma) = sum_{y != x} J(x - y) sigma(y) - h(x)``.

    Removing the particle at an occupied site ``x`` changes the energy by exactly this
    amount: ``H(sigma^x) - H(sigma) == U(x, sigma)``.

    :rtype: float
    """
    s = np.asarray(sigma.spins if isinstance(sigma, MicroConfig) else sigma, dtype=np.float64)
    h = model.site_field(spec, h_field)
    kernel = coupling_kernel(spec, model, "micro")
    return float(interaction_field(s, kernel, [x])[0] - h[x])


def coarse_j(spec, model, k, l):
    """
    The averaged coupling ``Jbar(k, l)`` between two cells (``Jbar(k, k) == 0`` for ``q == 1``).

    :rtype: float
    """
    table = _coarse_j_table(spec, model.j0, model.shape)
    return float(table[(l - k) % spec.n_cells])


def coarse_field_u(spec, model, eta, k, h_bar=None):
    """
    Coarse local energy ``Ubar(k, eta) = sum_{l != k} Jbar(k, l) eta(l) + Jbar(k, k)(eta(k) - 1) - hbar(k)``.

    With ``eta(k) == 0`` the self term contributes ``-Jbar(k, k)``; the value is then only
    ever consumed multiplied by a zero desorption rate.

    :rtype: float
    """
    e = np.asarray(eta.blocks if isinstance(eta, CoarseConfig) else eta, dtype=np.float64)
    h = resolve_cell_field(spec, model, h_bar)
    kernel = coupling_kernel(spec, model, "coarse")
    return float(interaction_field(e, kernel, [k])[0] - h[k])


def coarse_hamiltonian(spec, model, eta, h_bar=None):
    """
    Coarse energy

    ::

        Hbar = -1/2 sum_l sum_{k != l} Jbar(k, l) eta(k) eta(l)
               -1/2 Jbar(0, 0) sum_l eta(l) (eta(l) - 1)
               + sum_l hbar(l) eta(l)

    satisfying ``Hbar(eta + delta_k) - Hbar(eta) == -Ubar(k, eta + delta_k)``.

    :rtype: float
    """
    e = np.asarray(eta.blocks if isinstance(eta, CoarseConfig) else eta, dtype=np.float64)
    h = resolve_cell_field(spec, model, h_bar)
    kernel = coupling_kernel(spec, model, "coarse")
    cells = np.arange(spec.n_cells)
    window = e[(cells[:, None] + kernel.offsets[None, :]) % kernel.n_units]
    pair_part = np.dot(e, (window * kernel.weights).sum(axis=1))
    self_part = kernel.self_weight * np.dot(e, e - 1.0) if kernel.capacity > 1 else 0.0
    return float(-0.5 * pair_part - 0.5 * self_part + np.dot(h, e))


def project(spec, sigma):
    """
    Block-spin projection ``T``: ``eta(k) = sum_{x in C_k} sigma(x)``.

    :rtype: CoarseConfig
    """
    s = np.asarray(sigma.spins if isinstance(sigma, MicroConfig) else sigma)
    if s.size != spec.n_sites:
        raise LatticeSpecError(f"Configuration of {s.size} sites does not fit a lattice of {spec.n_sites}")
    return CoarseConfig(s.reshape(spec.n_cells, spec.coarse_q).sum(axis=1), spec)


def reconstruct(spec, eta, rng):
    """
    Uniform reconstruction: place ``eta(k)`` particles uniformly at random, without replacement,
    among the sites of each cell.

    :param rng: Random stream
    :type rng: numpy.random.Generator
    :rtype: MicroConfig
    """
    e = np.asarray(eta.blocks if isinstance(eta, CoarseConfig) else eta)
    ranks = np.argsort(np.argsort(rng.random((spec.n_cells, spec.coarse_q)), axis=1), axis=1)
    return MicroConfig((ranks < e[:, None]).astype(np.int64).ravel(), spec)


def initial_config(spec, kind="empty", rng=None, coverage=0.5, island_size=0):
    """
    Initial states of the nucleation studies.

    :param kind: ``empty`` (no particles), ``full``, ``uniform`` (independent
                 sites occupied with probability ``coverage``) or ``island`` (a block of
                 ``island_size`` occupied sites centred on the lattice)
    :type kind: str
    :param rng: Random stream, required by ``uniform``
    :type rng: numpy.random.Generator
    :rtype: MicroConfig
    """
    N = spec.n_sites
    if kind == "empty":
        spins = np.zeros(N, dtype=np.int64)
    elif kind == "full":
        spins = np.ones(N, dtype=np.int64)
    elif kind == "uniform":
        if rng is None:
            raise LatticeSpecError("A uniform initial state needs a random stream")
        if not 0.0 <= coverage <= 1.0:
            raise LatticeSpecError(f"coverage must lie in [0, 1], received {coverage}")
        spins = (rng.random(N) < coverage).astype(np.int64)
    elif kind == "island":
        if not 0 <= island_size <= N:
            raise LatticeSpecError(f"island_size must lie in [0, {N}], received {island_size}")
        spins = np.zeros(N, dtype=np.int64)
        start = (N - island_size) // 2
        spins[start:start + island_size] = 1
    else:
        raise LatticeSpecError(f"Unknown initial state {kind}")
    return MicroConfig(spins, spec)
