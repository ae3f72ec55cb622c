"""Clustered-information linear minimum mean square estimation for MJLS.

Designs, executes, and verifies the lattice of filters between the standard
Markovian LMMSE (one cluster) and the path-wise Kalman filter (one cluster
per mode), parameterized by a partition of the Markov mode set.
"""

from .markov import (PathDistribution, PathKey, ZERO_WEIGHT,
                     marginal_mode_distribution, root_distribution, sample_chain,
                     step_distribution, stream)
from .model import (Clustering, MjlsModel, ModeMatrices, ModelFormatError,
                    ValidationReport, Violation, cluster_index, load_model,
                    parse_clustering, partition_label, save_model, validate)
from .riccati import (BudgetExceededError, GainTree, KalmanRun, MomentTree,
                      NodeData, UnreachableNodeError, build_tree, compute_gain,
                      conditional_covariance, expected_sq_error, init_root_node,
                      kalman_reference, load_tree, propagate_x, riccati_step,
                      save_tree, zero_gain_policy)
from .filter import (FilterState, GeneralEstimatorState, filter_step,
                     general_form_step, init_filter, run_filter,
                     run_general_estimator)
from .sim import (McEstimate, Trajectory, empirical_path_moments,
                  monte_carlo_mse, sample_trajectory)
from .sweep import (CostReport, SweepRow, cost_report, enumerate_partitions,
                    refines, run_sweep, sweep, write_sweep_csv)

__version__ = "0.1.0"
