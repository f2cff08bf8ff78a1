"""Graph generation from random-walk trajectory patterns.

Pipeline: build deterministic walk trajectories on training graphs, learn a
permutation-equivariant one-step reverse predictor, roll it backwards from a
closed-form ending vector to generate new trajectories, and recover the
graph that best fits them by constrained optimization. A statistics harness
scores generated sets against held-out sets.
"""

from .config import PipelineConfig, resolve_config
from .degrees import DegreeModel, fit_degree_model, perturb_degrees, sample_degrees
from .graphs import (Graph, edge_set_distance, erdos_gallai_graphical, is_connected,
                     load_edge_list, relabel, save_edge_list)
from .infer import (RoundingResult, SolveOptions, WeightedAdjacency, repair_connectivity,
                    residual_objective, round_weighted, solve_convex, solve_exact)
from .metrics import (METRICS, ErrorReport, StatisticVector, error_report,
                      relative_error, statistic, wasserstein1)
from .model import (CheckpointBundle, ModelConfig, ModelParams, TrainingOptions,
                    TrainReport, forward, init_model, load_checkpoint, save_checkpoint,
                    train)
from .operator import SmoothedOperator, SpectralSummary, smoothed_operator, spectral_check
from .rwt import (DEFAULT_EXPONENTS, BinningStats, StartFunction, Trajectory,
                  TrainingPair, bin_vector, binning_stats, build_rwt,
                  build_training_set, start_function_set, starting_vector)
from .samplers import (sample_barabasi_albert, sample_chung_lu, sample_sbm,
                       sample_watts_strogatz, sample_with_degrees)
from .trajectories import (TrajectorySystem, build_diagnostic_system, ending_vector,
                           forward_system, generate_trajectories, rollout_system)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
