"""Learning local near-shortest-path routing policies on unit-disk random graphs.

The pipeline: generate unit-disk uniform random graphs, compute exact
shortest-path tables and optimal Q-values, measure how well a local
linear metric ranks each node's neighbors against those Q-values
(DCG similarity), pick a high-similarity seed graph and a handful of
low-stretch shortest paths, train a small Q-network on the resulting
samples (supervised or episodic RL), and evaluate the learned policy
against greedy forwarding on fresh graphs of unseen sizes and densities.
"""

from .features import FeatureKind, FeatureSet, FeatureVector, make_features, stretch_factor
from .graphs import (ConnectivityError, Graph, GraphParams, generate_graph,
                     is_connected, load_graph, sample_connected_graph, save_graph)
from .nnet import (MlpModel, NonFiniteLossError, TrainConfig, forward, forward_batch,
                   gradient_check, init_model, load_model, save_model, train)
from .ranking import (METRIC_DIST, METRIC_DIST_STRETCH, LinearMetric,
                      SimilarityConfig, SimilarityReport, dcg, rank_similarity,
                      sim_context, sim_graph, sim_path)
from .sampling import (Dataset, SeedChoice, build_dataset, build_dataset_all_nodes,
                       select_seed_graph, select_subsample)
from .shortest_paths import (PathRecord, SpOracle, SpTable, optimal_q, path_stretch,
                             shortest_path, sssp)
from .training import EpisodeLog, RlConfig, q_target, rl_rollout, rl_train, train_supervised
from .evaluate import (AccuracyReport, RoutingOutcome, apnsp_accuracy, eta,
                       greedy_forwarding, route_policy, run_experiment)
from .seeds import derive_seed

__version__ = "0.1.0"
