"""
Observables and error metrics over ensembles of trajectories.

Coverage and errors
-------------------

The coverage of a configuration is the fraction of occupied sites. Ensembles of the
microscopic process (``q = 1``) and of a coarse process are compared realization by
realization, the two runs of realization ``i`` sharing the random stream ``(master_seed, i)``:

::

    e_w = sum_j |mean_i c_i(t_j) - mean_i cq_i(t_j)| (t_{j+1} - t_j)
    e_s = sum_j  mean_i |c_i(t_j) - cq_i(t_j)|       (t_{j+1} - t_j)

that is, a piecewise constant (left point) quadrature over a common time grid. Relative errors
divide both by ``sum_j |mean_i c_i(t_j)| (t_{j+1} - t_j)``.

Exit times and distributions
----------------------------

The exit time of a run is the first time its coverage reaches a threshold ``C+``. Runs that
never reach it are *censored*: they are left out of the mean and reported as a fraction.
Exit time samples are compared through histograms on shared bins and their relative entropy
``D(p || r) = sum p ln(p / r)`` (nats).

Mean field
----------

The mean field equilibria are the coverages that balance adsorption and desorption

::

    d0 (1 - c) = P c exp(-beta (J0 c - h))

and come in ones or threes (hysteresis) depending on ``beta J0`` and ``h``.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import logging
import math

import numpy as np
import scipy.optimize
import scipy.stats

from .exceptions import EnsembleMismatchError
from .lattice import CoarseConfig

logger = logging.getLogger(__name__)

ErrorReport = collections.namedtuple("ErrorReport", ["weak", "strong", "relative_weak", "relative_strong",
                                                     "weak_se", "strong_se", "n_realizations"])

SlopeFit = collections.namedtuple("SlopeFit", ["slope", "half_width", "intercept"])

ConvergencePoint = collections.namedtuple("ConvergencePoint", ["n_realizations", "weak", "strong"])

ExitTimeStats = collections.namedtuple("ExitTimeStats", ["mean", "std", "n_crossed", "censored_fraction",
                                                         "relative_error"])

MeanFieldRoots = collections.namedtuple("MeanFieldRoots", ["h", "roots", "degenerate"])

# Mesh over [0, 1] scanned for sign changes of the mean field balance
MEAN_FIELD_MESH = 10_000


def coverage(config):
    """
    Fraction of occupied sites of a microscopic or coarse configuration.

    :type config: MicroConfig | CoarseConfig
    :rtype: float
    """
    if isinstance(config, CoarseConfig):
        return config.n_occupied / config.spec.n_sites
    return config.n_occupied / len(config)


def coverage_on_grid(trajectory, grid):
    """
    The piecewise constant coverage of a trajectory read at the points of a time grid.

    :param trajectory: Anything with ``times`` and ``coverage`` arrays
    :type trajectory: Trajectory
    :param grid: Increasing time points, none before the first sample
    :type grid: numpy.ndarray
    :rtype: numpy.ndarray
    """
    grid = np.asarray(grid, dtype=np.float64)
    idx = np.searchsorted(trajectory.times, grid, side="right") - 1
    if idx.size > 0 and idx.min() < 0:
        raise EnsembleMismatchError("The grid starts before the trajectory")
    return trajectory.coverage[idx]


def _as_ensemble(ensemble, grid):
    if isinstance(ensemble, np.ndarray):
        values = np.atleast_2d(ensemble).astype(np.float64)
    else:
        values = np.array([coverage_on_grid(trajectory, grid) for trajectory in ensemble], dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != grid.size:
        raise EnsembleMismatchError(f"Ensemble of shape {values.shape} is not sampled on a grid of {grid.size} points")
    return values


def weak_strong_errors(reference, coarse, grid):
    """
    Weak and strong errors between two paired ensembles of coverage paths.

    :param reference: Microscopic ensemble, either trajectories or a realizations x grid array
    :param coarse: Coarse ensemble, paired with ``reference`` by realization index
    :param grid: The common time grid; the last point closes the last quadrature interval
    :type grid: numpy.ndarray
    :rtype: ErrorReport
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise EnsembleMismatchError("The time grid needs at least two increasing points")
    ref = _as_ensemble(reference, grid)
    cg = _as_ensemble(coarse, grid)
    if ref.shape != cg.shape:
        raise EnsembleMismatchError(f"Ensembles of {ref.shape[0]} and {cg.shape[0]} realizations are not paired")
    n = ref.shape[0]
    dt = np.diff(grid)
    left_ref, left_cg = ref[:, :-1], cg[:, :-1]

    weak = float(np.abs(left_ref.mean(axis=0) - left_cg.mean(axis=0)) @ dt)
    strong_paths = np.abs(left_ref - left_cg) @ dt
    strong = float(strong_paths.mean())
    scale = float(np.abs(left_ref.mean(axis=0)) @ dt)

    if n > 1:
        weak_se = float(((left_ref - left_cg) @ dt).std(ddof=1) / math.sqrt(n))
        strong_se = float(strong_paths.std(ddof=1) / math.sqrt(n))
    else:
        weak_se = strong_se = 0.0
    return ErrorReport(weak=weak,
                       strong=strong,
                       relative_weak=weak / scale if scale > 0 else math.nan,
                       relative_strong=strong / scale if scale > 0 else math.nan,
                       weak_se=weak_se,
                       strong_se=strong_se,
                       n_realizations=n)


def convergence_slope(qs, errors, confidence=0.95):
    """
    Least squares slope of ``log(error)`` against ``log(q)``.

    :param qs: Coarse-graining ratios
    :param errors: One positive error per ratio
    :param confidence: Level of the Student-t half width
    :rtype: SlopeFit
    """
    qs, errors = np.asarray(qs, dtype=np.float64), np.asarray(errors, dtype=np.float64)
    if qs.size != errors.size or qs.size < 2:
        raise ValueError("A slope needs at least two (q, error) pairs")
    if np.any(errors <= 0) or np.any(qs <= 0):
        raise ValueError("Errors and ratios must be positive on log-log axes")
    fit = scipy.stats.linregress(np.log(qs), np.log(errors))
    dof = qs.size - 2
    half_width = float(scipy.stats.t.ppf(0.5 + confidence / 2, dof) * fit.stderr) if dof > 0 else math.inf
    return SlopeFit(slope=float(fit.slope), half_width=half_width, intercept=float(fit.intercept))


def realization_convergence(reference, coarse_by_q, grid):
    """
    Slopes of the weak and strong errors estimated from growing prefixes of the ensembles
    (2, 4, 8, ... realizations and finally all of them).

    :param reference: The microscopic ensemble as a realizations x grid array
    :type reference: numpy.ndarray
    :param coarse_by_q: Coarse ensembles keyed by ``q``, each paired with ``reference``
    :type coarse_by_q: dict
    :rtype: list[ConvergencePoint]
    """
    grid = np.asarray(grid, dtype=np.float64)
    reference = _as_ensemble(reference, grid)
    coarse_by_q = {q: _as_ensemble(values, grid) for q, values in coarse_by_q.items()}
    n_total = reference.shape[0]
    counts = [2 ** k for k in range(1, n_total.bit_length()) if 2 ** k < n_total] + [n_total]
    qs = sorted(coarse_by_q)
    points = []
    for n in counts:
        reports = [weak_strong_errors(reference[:n], coarse_by_q[q][:n], grid) for q in qs]
        weak = [r.weak for r in reports]
        strong = [r.strong for r in reports]
        points.append(ConvergencePoint(n_realizations=n,
                                       weak=convergence_slope(qs, weak) if min(weak) > 0 else None,
                                       strong=convergence_slope(qs, strong) if min(strong) > 0 else None))
    return points


def exit_time(trajectory, threshold):
    """
    First sample time at which the coverage reaches ``threshold``.

    :param trajectory: Anything with ``times`` and ``coverage`` arrays
    :type trajectory: Trajectory
    :param threshold: ``C+`` in ``(0, 1]``
    :type threshold: float
    :returns: The exit time, ``None`` if the run never reached the threshold
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"The exit threshold must lie in (0, 1], received {threshold}")
    crossed = np.flatnonzero(np.asarray(trajectory.coverage) >= threshold)
    if crossed.size == 0:
        return None
    return float(trajectory.times[crossed[0]])


def exit_time_statistics(times, reference_mean=None):
    """
    Summary of a sample of exit times in which censored runs appear as ``None``.

    :param times: Exit times, ``None`` for runs that never crossed
    :param reference_mean: Mean exit time of the microscopic process; if given the relative
                           error ``|mean - reference_mean| / reference_mean`` is reported
    :rtype: ExitTimeStats
    """
    times = list(times)
    crossed = np.array([t for t in times if t is not None], dtype=np.float64)
    censored = (len(times) - crossed.size) / len(times) if times else 0.0
    if censored > 0:
        logger.warning("%d of %d runs never reached the exit threshold", len(times) - crossed.size, len(times))
    mean = float(crossed.mean()) if crossed.size > 0 else math.nan
    std = float(crossed.std(ddof=1)) if crossed.size > 1 else math.nan
    relative_error = None
    if reference_mean is not None:
        relative_error = abs(mean - reference_mean) / reference_mean
    return ExitTimeStats(mean=mean, std=std, n_crossed=int(crossed.size), censored_fraction=censored,
                         relative_error=relative_error)


class EmpiricalDistribution:
    """
    A normalised histogram.

    :param bin_edges: Strictly increasing bin edges (one more than the bins)
    :type bin_edges: numpy.ndarray
    :param probs: Probability of each bin
    :type probs: numpy.ndarray
    :param n_samples: Number of samples the histogram was built from
    :type n_samples: int
    """
    def __init__(self, bin_edges, probs, n_samples):
        bin_edges = np.array(bin_edges, dtype=np.float64)
        probs = np.array(probs, dtype=np.float64)
        if bin_edges.size != probs.size + 1 or np.any(np.diff(bin_edges) <= 0):
            raise ValueError("Bin edges must be strictly increasing and bracket every bin")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("Bin probabilities must be non-negative and sum to one")
        bin_edges.flags.writeable = False
        probs.flags.writeable = False
        self._bin_edges = bin_edges
        self._probs = probs
        self._n_samples = int(n_samples)

    @property
    def bin_edges(self):
        return self._bin_edges

    @property
    def probs(self):
        return self._probs

    @property
    def n_samples(self):
        return self._n_samples

    @property
    def n_bins(self):
        return self._probs.size

    def __repr__(self):
        return f"EmpiricalDistribution(n_bins={self.n_bins}, n_samples={self._n_samples})"


def histogram(samples, n_bins=100, value_range=None):
    """
    Equal width histogram of a sample over ``[min, max]`` or a given range.

    :param samples: The sample
    :param n_bins: Number of bins
    :type n_bins: int
    :param value_range: ``(low, high)``
    :type value_range: tuple
    :rtype: EmpiricalDistribution
    """
    samples = np.asarray(samples, dtype=np.float64)
    if n_bins < 1:
        raise ValueError(f"n_bins must be positive, received {n_bins}")
    if samples.size == 0:
        raise ValueError("A histogram needs at least one sample")
    counts, edges = np.histogram(samples, bins=n_bins, range=value_range)
    if counts.sum() == 0:
        raise ValueError(f"No sample falls within {value_range}")
    return EmpiricalDistribution(edges, counts / counts.sum(), samples.size)


def shared_histograms(samples_a, samples_b, n_bins=100):
    """
    Histograms of two samples over the union of their ranges, with identical edges.

    :rtype: tuple[EmpiricalDistribution, EmpiricalDistribution]
    """
    samples_a = np.asarray(samples_a, dtype=np.float64)
    samples_b = np.asarray(samples_b, dtype=np.float64)
    both = np.concatenate((samples_a, samples_b))
    if both.size == 0:
        raise ValueError("A histogram needs at least one sample")
    value_range = (float(both.min()), float(both.max()))
    if value_range[0] == value_range[1]:
        value_range = (value_range[0] - 0.5, value_range[1] + 0.5)
    return histogram(samples_a, n_bins, value_range), histogram(samples_b, n_bins, value_range)


def kl_divergence(p, r, smoothing=0.0):
    """
    Relative entropy ``sum p ln(p / r)`` (nats) of two probability vectors.

    Both vectors are renormalised. A bin where ``r`` vanishes but ``p`` does not makes the
    divergence infinite (``math.inf``).

    :param smoothing: Pseudo count ``alpha`` added to every bin of both vectors before normalising
    :type smoothing: float
    :rtype: float
    """
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if p.shape != r.shape:
        raise EnsembleMismatchError(f"Distributions over {p.shape} and {r.shape} states cannot be compared")
    if smoothing > 0:
        p, r = p + smoothing, r + smoothing
    p = p / p.sum()
    r = r / r.sum()
    support = p > 0
    if np.any(r[support] == 0):
        logger.warning("Relative entropy is infinite: the reference misses part of the support")
        return math.inf
    return max(0.0, float(np.sum(p[support] * np.log(p[support] / r[support]))))


def relative_entropy(p, r, smoothing=0.0):
    """
    Relative entropy ``D(p || r)`` of two histograms over the same bins.

    :type p: EmpiricalDistribution
    :type r: EmpiricalDistribution
    :rtype: float
    """
    if not np.array_equal(p.bin_edges, r.bin_edges):
        raise EnsembleMismatchError("Histograms over different bins cannot be compared")
    return kl_divergence(p.probs, r.probs, smoothing)


def coarsen_histogram(p, merge_factor):
    """
    Merge groups of ``merge_factor`` adjacent bins.

    :type p: EmpiricalDistribution
    :rtype: EmpiricalDistribution
    """
    if merge_factor < 1 or p.n_bins % merge_factor != 0:
        raise ValueError(f"merge_factor={merge_factor} does not divide {p.n_bins} bins")
    probs = p.probs.reshape(-1, merge_factor).sum(axis=1)
    return EmpiricalDistribution(p.bin_edges[::merge_factor], probs / probs.sum(), p.n_samples)


def mean_field_balance(c, model, h=None):
    """
    Net adsorption flux ``d0 (1 - c) - P c exp(-beta (J0 c - h))`` of the mean field equation.

    ``h`` defaults to the field of the model; in grouped mode it adds to the field folded in ``c0``.
    """
    if h is None:
        h = model.h
    c = np.asarray(c, dtype=np.float64)
    with np.errstate(over="ignore"):
        return model.d0 * (1.0 - c) - model.desorption_prefactor * c * np.exp(-model.beta * (model.j0 * c - h))


def _tangencies(mesh, values, model, h, roots, tol):
    # Extrema of the balance that touch zero without a sign change
    found = []
    slope = np.sign(np.diff(values))
    for i in np.flatnonzero(slope[:-1] * slope[1:] < 0) + 1:
        sign = 1.0 if slope[i - 1] < 0 else -1.0
        result = scipy.optimize.minimize_scalar(lambda c: sign * float(mean_field_balance(c, model, h)),
                                                bounds=(mesh[i - 1], mesh[i + 1]), method="bounded",
                                                options={"xatol": 1e-12})
        if abs(result.fun) <= tol and not any(abs(result.x - r) < 1e-6 for r in roots):
            found.append(float(result.x))
    return found


def mean_field_equilibria(model, h_values, mesh_points=MEAN_FIELD_MESH, xtol=1e-10):
    """
    All mean field equilibrium coverages over a grid of fields.

    Roots are bracketed by sign changes of the balance on a uniform mesh over ``[0, 1]`` and
    refined with Brent's method. A tangency (two roots merging) is reported as two roots
    with ``degenerate`` set.

    :param model: The potential (``j0``, ``beta``, ``d0`` and the desorption prefactor are read)
    :type model: PotentialModel
    :param h_values: Fields to solve for
    :param mesh_points: Number of mesh intervals
    :type mesh_points: int
    :rtype: list[MeanFieldRoots]
    """
    mesh = np.linspace(0.0, 1.0, mesh_points + 1)
    tol = 1e-9 * max(model.d0, model.desorption_prefactor)
    results = []
    for h in np.atleast_1d(np.asarray(h_values, dtype=np.float64)):
        values = mean_field_balance(mesh, model, h)
        roots = [float(mesh[i]) for i in np.flatnonzero(values == 0.0)]
        for i in np.flatnonzero(values[:-1] * values[1:] < 0):
            roots.append(scipy.optimize.brentq(lambda c: float(mean_field_balance(c, model, h)),
                                               mesh[i], mesh[i + 1], xtol=xtol))
        roots = sorted(roots)
        # Sign changes closer than this collapse onto a single tangent root
        merged = [r for k, r in enumerate(roots) if k == 0 or r - roots[k - 1] > 1e-6]
        degenerate = len(merged) < len(roots)
        tangent = _tangencies(mesh, values, model, h, merged, tol)
        if tangent:
            merged = sorted(merged + tangent)
            degenerate = True
        results.append(MeanFieldRoots(h=float(h), roots=tuple(merged), degenerate=degenerate))
    return results
