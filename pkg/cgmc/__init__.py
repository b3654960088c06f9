from .exceptions import (CGMCError, LatticeSpecError, IllegalEventError, AbsorbingStateError,
                         EnsembleMismatchError, StateSpaceTooLargeError, ConfigError, OutputError)

from .lattice import (Shape, LatticeSpec, PotentialModel, MicroConfig, CoarseConfig, CouplingKernel,
                      coupling_kernel, j_value, hamiltonian, micro_field_u, coarse_j, coarse_field_u,
                      coarse_hamiltonian, cell_field, window_counts, shift_window_counts, project, reconstruct,
                      initial_config)

from .sumtree import SumTree, LinearScan

from .kmc import (Process, EventKind, TimeStep, KmcEvent, RateTable, RateModel, Trajectory,
                  TrajectorySample, EventLog, realization_rng, micro_rates, coarse_rates, synthetic_rates,
                  select_event, apply_event, local_update, run_trajectory)

from .oracle import (StateIndex, gibbs_measure, generator_matrix, stationary_distribution,
                     detailed_balance_audit, exact_coarse_rate_gap, project_measure, total_variation)

from .analysis import (EmpiricalDistribution, ErrorReport, SlopeFit, coverage, coverage_on_grid,
                       weak_strong_errors, convergence_slope, realization_convergence, exit_time,
                       exit_time_statistics, histogram, shared_histograms, kl_divergence,
                       relative_entropy, coarsen_histogram, mean_field_equilibria)

from .config import ExperimentConfig, parse_config, load_config
