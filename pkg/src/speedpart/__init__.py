"""Streaming temporal-graph edge partitioning and a partitioned training simulator."""
from .centrality import CentralityTable, HubSet, compute_centrality, degree_centrality, select_hubs
from .errors import (BetaOutOfRange, BoundViolation, IndivisibleParts, InvalidAlpha,
                     InvalidFractions, InvalidParams, MismatchedInput, NonChronological,
                     ParseError, UnsortedStream)
from .graph_io import ChronoSplit, EdgeStream, TemporalEdge, chrono_split, gen_powerlaw, load_edges, write_edges
from .metrics import QualityReport, ec_bound, quality, rf_bound, verify_bounds
from .pac_sim import (MemoryStore, SimConfig, SimReport, SubGraph, SurrogateModel, induce_subgraphs,
                      model_update, run_epoch, shuffle_combine, simulate, sync_shared)
from .partitioner import (DISCARDED, PartitionAssignment, PartitionerConfig, PartitionState,
                          assign_eval_edges, make_config, partition_random, partition_stream,
                          partition_unrestricted, score)

__version__ = "0.1.0"
