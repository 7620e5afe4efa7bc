"""Adaptive search for time windows in which two series are correlated, scored by KSG mutual information."""

from .association import AssociationStats, associate, association_degree, classify, count_periods
from .ingest import (IngestError, RankedPair, RawSeries, SeriesPair, align_pair, clean, load_series,
                     native_step, rank_transform, rank_values, ranked_from_arrays, resample)
from .ksg import (BoxGrid, MarginalCounts, MiEstimate, NeighborInfo, Point, digamma, knn_query,
                  ksg_mi, marginal_counts, max_norm, normalized_entropy, plugin_entropy, tune_k,
                  window_entropy)
from .parallel import Partition, make_partitions, merge_windows, recursive_parallel_search
from .search import (Absolute, CoverageTarget, SearchConfig, SearchResult, TwoStep, WindowResult,
                     build_ladder, data_coverage, layered_search, rank_windows, tune_sigma_for_coverage)
from .synth import RELATIONS, GroundTruthSpan, compose, dcor, gen_relation, pearson
from .window import WindowState, init_window, slide_to

__version__ = "0.1.0"
