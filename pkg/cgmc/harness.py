"""
Experiment orchestration: ensembles of paired realizations, run manifests and CSV artifacts.

Realization ``i`` of every coarse-graining level draws from the random stream
``(master_seed, i)``; its initial state (when random) from ``(master_seed, i, 2)`` and the
reconstruction of its coarse snapshots from ``(master_seed, i, 1)``. Realizations are
distributed over a process pool and always collected in realization order, so the artifacts
do not depend on the number of workers.

Every command writes a ``manifest.json`` before it starts computing and finalises it when it
is done. The manifest holds the hash of the configuration, the code version, the seeds of
all realizations and the wall clock time spent in every stage.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import concurrent.futures
import contextlib
import csv
import functools
import importlib.metadata
import json
import logging
import math
import pathlib
import time

import numpy as np

from .analysis import (coverage_on_grid, exit_time, exit_time_statistics,
                       mean_field_equilibria, realization_convergence, relative_entropy,
                       shared_histograms, weak_strong_errors)
from .exceptions import OutputError
from .kmc import Process, TimeStep, realization_rng, run_trajectory
from .lattice import (CoarseConfig, LatticeSpec, PotentialModel, initial_config,
                      reconstruct)
from .oracle import (StateIndex, detailed_balance_audit, gibbs_measure, generator_matrix,
                     project_measure, relative_entropy as measure_entropy,
                     stationary_distribution, total_variation)

logger = logging.getLogger(__name__)

RealizationResult = collections.namedtuple("RealizationResult", ["coarse_q", "index", "times", "coverage",
                                                                 "exit_time", "n_events", "cpu_seconds",
                                                                 "snapshots"])

OracleCheck = collections.namedtuple("OracleCheck", ["name", "value", "threshold", "passed"])

# Random stream numbers next to the dynamics stream of a realization
RECONSTRUCTION_STREAM = 1
INITIAL_STATE_STREAM = 2


def code_version():
    try:
        return importlib.metadata.version("cgmc")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, fieldnames, rows):
    """
    Write rows (dictionaries) to a CSV file with a header, ``.`` decimals and full float precision.
    """
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.DictWriter(fd, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(value) if not isinstance(value, str) else value for key, value in row.items()})
    return path


def prepare_output(directory):
    """
    Create (if needed) the output directory and make sure it is writable.

    :raises OutputError: If the directory is not usable
    """
    path = pathlib.Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        marker = path / ".cgmc-write-check"
        marker.write_text("")
        marker.unlink()
    except OSError as e:
        raise OutputError(f"Output directory {path} is not writable: {e}") from e
    return path


class RunManifest:
    """
    The record of one command run, kept up to date in ``manifest.json``.

    :param command: The command name
    :type command: str
    :param config: The configuration the command runs with
    :type config: ExperimentConfig
    :param directory: The output directory
    :type directory: pathlib.Path
    """
    def __init__(self, command, config, directory):
        self._command = command
        self._config = config
        self._path = pathlib.Path(directory) / "manifest.json"
        self._seeds = []
        self._stages = collections.OrderedDict()
        self._status = "running"

    @property
    def path(self):
        return self._path

    @property
    def stages(self):
        return dict(self._stages)

    @property
    def status(self):
        return self._status

    def add_seeds(self, coarse_q, n_realizations):
        master_seed = self._config.run.master_seed
        self._seeds += [{"coarse_q": coarse_q, "realization": i, "seed": [master_seed, i]}
                        for i in range(n_realizations)]

    @contextlib.contextmanager
    def stage(self, name):
        """
        Time a stage of the run (wall clock) and record it in the manifest.
        """
        start = time.perf_counter()
        logger.info("%s: %s started", self._command, name)
        try:
            yield
        finally:
            self._stages[name] = time.perf_counter() - start
            logger.info("%s: %s finished in %.3f s", self._command, name, self._stages[name])
            self.write()

    def as_dict(self):
        return {"command": self._command,
                "status": self._status,
                "config_hash": self._config.config_hash(),
                "code_version": code_version(),
                "master_seed": self._config.run.master_seed,
                "seeds": self._seeds,
                "wall_clock_seconds": dict(self._stages)}

    def write(self):
        self._path.write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")

    def finalise(self, status="complete"):
        self._status = status
        self.write()


@contextlib.contextmanager
def _manifest(command, config):
    directory = prepare_output(config.outputs.directory)
    (directory / "config.cfg").write_text(config.dumps(), encoding="utf-8")
    manifest = RunManifest(command, config, directory)
    manifest.write()
    try:
        yield directory, manifest
    except BaseException:
        manifest.finalise("failed")
        raise
    manifest.finalise()


def process_for(config, coarse_q):
    if coarse_q == 1:
        return Process.MICRO
    return Process(config.run.process)


def time_grid(config):
    """
    The common sampling grid ``0, dt, 2 dt, ... <= t_final`` of an experiment.
    """
    dt = config.run.sampling_dt
    n = int(math.floor(config.run.t_final / dt + 1e-9))
    return dt * np.arange(n + 1)


def run_realization(config, coarse_q, index, stop_at_threshold=False):
    """
    Simulate realization ``index`` of the ensemble at one coarse-graining level.

    :param config: The experiment
    :type config: ExperimentConfig
    :param coarse_q: The level
    :type coarse_q: int
    :param index: Realization index (selects the random streams)
    :type index: int
    :param stop_at_threshold: End the run as soon as the coverage reaches ``threshold_c_plus``
    :type stop_at_threshold: bool
    :rtype: RealizationResult
    """
    run = config.run
    spec = config.lattice_spec(coarse_q)
    model = config.potential_model()
    init = initial_config(spec, run.initial, realization_rng(run.master_seed, index, INITIAL_STATE_STREAM),
                          run.initial_coverage, run.island_size)
    start = time.process_time()
    trajectory = run_trajectory(process_for(config, coarse_q), spec, model, init, run.t_final,
                                sampling=run.sampling_dt,
                                seed=(run.master_seed, index),
                                time_step=TimeStep(run.time_step_mode),
                                updating=run.updating,
                                snapshot_times=config.outputs.snapshot_times,
                                stop_coverage=run.threshold_c_plus if stop_at_threshold else None)
    cpu_seconds = time.process_time() - start

    snapshots = {}
    rng = realization_rng(run.master_seed, index, RECONSTRUCTION_STREAM)
    for t in sorted(trajectory.snapshots):
        config_t = trajectory.snapshots[t]
        if isinstance(config_t, CoarseConfig):
            config_t = reconstruct(spec, config_t, rng)
        snapshots[t] = np.array(config_t.values)
    return RealizationResult(coarse_q=coarse_q,
                             index=index,
                             times=trajectory.times,
                             coverage=trajectory.coverage,
                             exit_time=exit_time(trajectory, run.threshold_c_plus),
                             n_events=trajectory.n_events,
                             cpu_seconds=cpu_seconds,
                             snapshots=snapshots)


def run_ensemble(config, coarse_q, workers=1, stop_at_threshold=False):
    """
    All realizations of one level, in realization order.

    :param workers: Number of worker processes (``1`` runs in this process)
    :type workers: int
    :rtype: list[RealizationResult]
    """
    task = functools.partial(run_realization, config, coarse_q, stop_at_threshold=stop_at_threshold)
    indices = range(config.run.realizations)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(task, indices, chunksize=max(1, len(indices) // (4 * workers))))
    else:
        results = [task(i) for i in indices]
    logger.info("q=%d: %d realizations, %d events in total", coarse_q, len(results),
                sum(r.n_events for r in results))
    return results


def cmd_simulate(config, workers=1):
    """
    One ``t, coverage`` CSV per level and realization, plus the requested configuration snapshots
    (``site, spin`` at microscopic resolution).

    :rtype: list[pathlib.Path]
    """
    written = []
    with _manifest("simulate", config) as (directory, manifest):
        for q in config.coarse_qs:
            manifest.add_seeds(q, config.run.realizations)
            with manifest.stage(f"simulate_q{q}"):
                results = run_ensemble(config, q, workers)
            for r in results:
                rows = ({"t": t, "coverage": c} for t, c in zip(r.times, r.coverage))
                written.append(write_csv(directory / f"trajectory_q{q}_r{r.index}.csv", ["t", "coverage"], rows))
                for t, spins in r.snapshots.items():
                    rows = ({"site": x, "spin": s} for x, s in enumerate(spins))
                    written.append(write_csv(directory / f"snapshot_q{q}_r{r.index}_t{t:g}.csv",
                                             ["site", "spin"], rows))
    return written


def _coverage_matrix(results, grid):
    return np.array([coverage_on_grid(r, grid) for r in results])


def cmd_compare(config, workers=1):
    """
    Weak and strong errors of every coarse level against the microscopic ensemble
    (``errors.csv``) and the log-log slopes of the errors over growing ensemble prefixes
    (``error_slopes.csv``).

    :rtype: list[pathlib.Path]
    """
    grid = time_grid(config)
    with _manifest("compare", config) as (directory, manifest):
        ensembles = {}
        for q in config.coarse_qs:
            manifest.add_seeds(q, config.run.realizations)
            with manifest.stage(f"simulate_q{q}"):
                ensembles[q] = _coverage_matrix(run_ensemble(config, q, workers), grid)

        with manifest.stage("errors"):
            rows = []
            for q in config.coarse_qs:
                report = weak_strong_errors(ensembles[1], ensembles[q], grid)
                rows.append(dict(q=q, **report._asdict()))
            fields = ["q", "n_realizations", "weak", "strong", "relative_weak", "relative_strong", "weak_se", "strong_se"]
            errors_csv = write_csv(directory / "errors.csv", fields, ({k: row[k] for k in fields} for row in rows))

            coarse = {q: ensembles[q] for q in config.coarse_qs if q > 1}
            slope_rows = []
            if len(coarse) >= 2:
                for point in realization_convergence(ensembles[1], coarse, grid):
                    slope_rows.append({"realizations": point.n_realizations,
                                       "weak_slope": point.weak.slope if point.weak else None,
                                       "weak_half_width": point.weak.half_width if point.weak else None,
                                       "strong_slope": point.strong.slope if point.strong else None,
                                       "strong_half_width": point.strong.half_width if point.strong else None})
                final = slope_rows[-1]
                logger.info("weak error slope %s, strong error slope %s", final["weak_slope"], final["strong_slope"])
            slopes_csv = write_csv(directory / "error_slopes.csv",
                                   ["realizations", "weak_slope", "weak_half_width", "strong_slope", "strong_half_width"],
                                   slope_rows)
    return [errors_csv, slopes_csv]


def cmd_exit_times(config, workers=1, n_bins=100):
    """
    Exit time statistics per level (``exit_times.csv``) and the exit time histograms on bins
    shared with the microscopic level (``exit_time_histogram.csv``).

    Runs stop as soon as they reach the threshold. ``cpu_seconds`` is the process CPU time spent
    simulating a level, summed over realizations.

    :rtype: list[pathlib.Path]
    """
    with _manifest("exit_times", config) as (directory, manifest):
        samples, cpu = {}, {}
        for q in config.coarse_qs:
            manifest.add_seeds(q, config.run.realizations)
            with manifest.stage(f"simulate_q{q}"):
                results = run_ensemble(config, q, workers, stop_at_threshold=True)
            samples[q] = [r.exit_time for r in results]
            cpu[q] = sum(r.cpu_seconds for r in results)

        with manifest.stage("statistics"):
            reference = exit_time_statistics(samples[1])
            rows, histogram_rows = [], []
            crossed_ref = [t for t in samples[1] if t is not None]
            for q in config.coarse_qs:
                stats = exit_time_statistics(samples[q], reference.mean if q != 1 else None)
                crossed = [t for t in samples[q] if t is not None]
                entropy = None
                if crossed and crossed_ref:
                    hist_q, hist_ref = shared_histograms(crossed, crossed_ref, n_bins)
                    entropy = relative_entropy(hist_q, hist_ref)
                    histogram_rows += [{"q": q, "bin_left": lo, "bin_right": hi, "probability": p}
                                       for lo, hi, p in zip(hist_q.bin_edges[:-1], hist_q.bin_edges[1:], hist_q.probs)]
                rows.append({"q": q,
                             "mean_exit_time": stats.mean,
                             "std_exit_time": stats.std,
                             "n_crossed": stats.n_crossed,
                             "censored_fraction": stats.censored_fraction,
                             "relative_error": 0.0 if q == 1 else stats.relative_error,
                             "relative_entropy": entropy,
                             "cpu_seconds": cpu[q]})
            table = write_csv(directory / "exit_times.csv",
                              ["q", "mean_exit_time", "std_exit_time", "n_crossed", "censored_fraction",
                               "relative_error", "relative_entropy", "cpu_seconds"], rows)
            histograms = write_csv(directory / "exit_time_histogram.csv",
                                   ["q", "bin_left", "bin_right", "probability"], histogram_rows)
    return [table, histograms]


def cmd_mean_field(config):
    """
    The mean field equilibrium coverages over the field grid of ``[mean_field]`` (``mean_field.csv``).

    :rtype: list[pathlib.Path]
    """
    mf = config.mean_field
    with _manifest("mean_field", config) as (directory, manifest):
        with manifest.stage("roots"):
            solutions = mean_field_equilibria(config.potential_model(), np.linspace(mf.h_min, mf.h_max, mf.h_points))
            rows = []
            for s in solutions:
                roots = list(s.roots) + [None] * (3 - len(s.roots))
                rows.append({"h": s.h, "n_roots": len(s.roots), "root_1": roots[0], "root_2": roots[1],
                             "root_3": roots[2], "degenerate": s.degenerate})
            path = write_csv(directory / "mean_field.csv",
                             ["h", "n_roots", "root_1", "root_2", "root_3", "degenerate"], rows)
    return [path]


def _corrupt_desorption(generator, spec, cell=0):
    # Double every desorption rate out of one cell of the coarse process
    states = StateIndex(Process.COARSE, spec)
    corrupted = generator.copy()
    step = int(states.unit_weights[cell])
    np.fill_diagonal(corrupted, 0.0)
    occupied = np.flatnonzero(states.configs()[:, cell] > 0)
    corrupted[occupied, occupied - step] *= 2.0
    np.fill_diagonal(corrupted, -corrupted.sum(axis=1))
    return corrupted


def oracle_checks():
    """
    The exact checks on built-in tiny instances.

    :rtype: list[OracleCheck]
    """
    checks = []

    def check(name, value, threshold, below=True):
        passed = value <= threshold if below else value > threshold
        checks.append(OracleCheck(name=name, value=float(value), threshold=threshold, passed=bool(passed)))

    instances = [(Process.MICRO, LatticeSpec(4, 1, 1), PotentialModel(2.0, beta=1.0, h=0.3)),
                 (Process.MICRO, LatticeSpec(6, 1, 2), PotentialModel(3.0, beta=1.5)),
                 (Process.MICRO, LatticeSpec(8, 1, 2), PotentialModel(0.5, beta=4.0, c0=0.2)),
                 (Process.COARSE, LatticeSpec(6, 2, 1), PotentialModel(4.0, beta=1.0, h=0.5)),
                 (Process.COARSE, LatticeSpec(8, 2, 2), PotentialModel(6.0, beta=1.0, c0=0.07)),
                 (Process.COARSE, LatticeSpec(12, 4, 3), PotentialModel(2.0, beta=2.0)),
                 (Process.SYNTHETIC, LatticeSpec(8, 2, 2), PotentialModel(3.0, beta=1.0, h=0.2))]
    for process, spec, model in instances:
        label = f"{process.value} N={spec.n_sites} q={spec.coarse_q} L={spec.interaction_range}"
        generator = generator_matrix(process, spec, model)
        pi = stationary_distribution(generator)
        check(f"stationary == gibbs ({label})", total_variation(pi, gibbs_measure(process, spec, model)), 1e-10)
        check(f"detailed balance ({label})", detailed_balance_audit(process, spec, model, generator=generator), 1e-10)

    spec, model = LatticeSpec(8, 1, 2), PotentialModel(1.0, beta=2.0, h=-0.4)
    coarse_q1 = generator_matrix(Process.COARSE, spec, model)
    check("coarse q=1 generator == micro generator",
          float(np.abs(coarse_q1 - generator_matrix(Process.MICRO, spec, model)).max()), 0.0)

    spec, model = LatticeSpec(6, 2, 1), PotentialModel(4.0, beta=1.0, h=0.5)
    corrupted = _corrupt_desorption(generator_matrix(Process.COARSE, spec, model), spec)
    check("corrupted rates are detected", detailed_balance_audit(Process.COARSE, spec, model, generator=corrupted),
          0.1, below=False)

    spec = LatticeSpec(8, 2, 2)
    for beta_1, beta_2 in ((0.5, 2.0), (1.0, 3.0)):
        mu_1 = gibbs_measure(Process.MICRO, spec, PotentialModel(2.0, beta=beta_1))
        mu_2 = gibbs_measure(Process.MICRO, spec, PotentialModel(2.0, beta=beta_2))
        gap = measure_entropy(project_measure(mu_1, spec), project_measure(mu_2, spec)) - measure_entropy(mu_1, mu_2)
        check(f"data processing inequality (beta {beta_1} vs {beta_2})", gap, 1e-12)
    return checks


def cmd_oracle_check(directory=None):
    """
    Run the exact checks and, if a directory is given, write them to ``oracle_check.json``.

    :returns: The checks and the path of the report (``None`` without a directory)
    """
    start = time.perf_counter()
    checks = oracle_checks()
    for c in checks:
        logger.info("%s %s: %g (threshold %g)", "PASS" if c.passed else "FAIL", c.name, c.value, c.threshold)
    path = None
    if directory is not None:
        path = prepare_output(directory) / "oracle_check.json"
        report = {"code_version": code_version(),
                  "passed": all(c.passed for c in checks),
                  "wall_clock_seconds": time.perf_counter() - start,
                  "checks": [c._asdict() for c in checks]}
        path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return checks, path
