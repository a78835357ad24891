"""Non-stationary stochastic block model fitted by exact ICL maximisation."""

__version__ = "0.1.0"

from .greedy import FitResult, SearchConfig, greedy_fit
from .icl import (
    IclValue,
    RateEstimate,
    State,
    delta_icl_merge,
    delta_icl_node_move,
    delta_icl_time_move,
    icl,
    log_emission,
    log_label_prior,
    posterior_rates,
)
from .ingest import BinningSpec, ContactEvent, aggregate_bins, parse_contact_log
from .simulate import GenerativeSpec, additive_rates, sample_partition, simulate, simulate_tensor
from .tensor import (
    BlockStats,
    EmptyClusterError,
    EventRecord,
    Hyperparameters,
    InteractionTensor,
    Mode,
    NodePartition,
    Partition,
    TimePartition,
    build_tensor,
    compute_block_stats,
    stats_after_node_move,
    stats_after_time_move,
)
