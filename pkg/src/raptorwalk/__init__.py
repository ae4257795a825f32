"""raptorwalk: rateless-coded distributed storage on random geometric graphs.

A deterministic simulator and erasure-coding library for the RCDS-I and
RCDS-II random-walk storage algorithms, with a Monte-Carlo harness for
decoding-probability experiments.
"""

from ._engine import backend_name, have_compiled
from .codec import (ConstraintSystem, DegreeDistribution, SystemParams,
                    centralized_raptor_encode, gauss_decode, make_params,
                    peel_decode, precode_params, raptor_lt_distribution,
                    sample_degree, xor_combine)
from .harness import ExperimentConfig, run_experiment, sweep
from .network import (GraphTopology, choose_sources, dump_topology,
                      generate_rgg, is_connected, load_topology)
from .protocol import (NodeState, SimulationAbort, StorageOutcome,
                       centralized_run, dump_outcome, load_outcome, rcds1_run,
                       rcds2_run)
from .query import QueryResult, attempt_decode, estimate_ps, sample_query_sets
from .walkers import (TimingStats, cover_threshold, estimate_counts,
                      measure_cover_time, record_visit, step_walk)

__version__ = "0.1.0"
